//! Dense nonsymmetric eigendecompositions with adjoints under a weighted inner product.
//!
//! The pairing is `<x, y>_W = Σ_m W_m x_m conj(y_m)`. Left vectors are the
//! W-adjoint eigenvectors, normalized so that `<ℓ_i, v_j>_W = δ_ij`; the
//! coefficient of `v_i` in a field `u` is then `<u, ℓ_i>_W`.

use faer::{Mat, MatRef};
use num_complex::Complex64;

use crate::error::{EwsError, Result};
use crate::spectral::CouplingMatrix;

pub const DEFAULT_DENSE_CAP: usize = 6000;

pub trait DiscreteOperator {
    fn dim(&self) -> usize;
    fn apply(&self, v: &[f64]) -> Result<Vec<f64>>;
}

pub struct DenseOperator(pub Mat<f64>);

impl DiscreteOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let a = &self.0;
        Ok((0..a.nrows()).map(|r| (0..a.ncols()).map(|c| a[(r, c)] * v[c]).sum()).collect())
    }
}

/// Matrix of a linear map, one column per unit vector.
pub fn densify(op: &dyn DiscreteOperator, cap: usize) -> Result<Mat<f64>> {
    let n = op.dim();
    if n > cap {
        return Err(EwsError::CapExceeded { n, cap });
    }
    let mut m = Mat::zeros(n, n);
    let mut e = vec![0.0; n];
    for c in 0..n {
        e[c] = 1.0;
        let col = op.apply(&e)?;
        e[c] = 0.0;
        for (r, v) in col.into_iter().enumerate() {
            m[(r, c)] = v;
        }
    }
    Ok(m)
}

/// Swappable dense eigenvalue routine.
pub trait EigenBackend {
    fn eigenvalues(&self, a: MatRef<'_, f64>) -> Result<Vec<Complex64>>;
    /// Eigenvalues and right eigenvectors (as columns).
    fn eigen(&self, a: MatRef<'_, f64>) -> Result<(Vec<Complex64>, Mat<Complex64>)>;
}

/// Hessenberg reduction plus shifted QR, as provided by faer.
pub struct FaerBackend;

impl EigenBackend for FaerBackend {
    fn eigenvalues(&self, a: MatRef<'_, f64>) -> Result<Vec<Complex64>> {
        a.eigenvalues().map_err(|e| EwsError::Solver(format!("eigenvalues: {e:?}")))
    }

    fn eigen(&self, a: MatRef<'_, f64>) -> Result<(Vec<Complex64>, Mat<Complex64>)> {
        let evd = a.eigen().map_err(|e| EwsError::Solver(format!("eigen: {e:?}")))?;
        let s = evd.S().column_vector();
        let vals = (0..a.nrows()).map(|k| s[k]).collect();
        Ok((vals, evd.U().to_owned()))
    }
}

#[derive(Clone, Debug)]
pub struct EigenSet {
    pub eigenvalues: Vec<Complex64>,
    /// Right eigenvectors as columns, in the order of `eigenvalues`.
    pub right: Mat<Complex64>,
    /// W-adjoint eigenvectors as columns.
    pub left: Mat<Complex64>,
    pub weights: Vec<f64>,
    /// `‖A v_i − λ_i v_i‖ / ‖v_i‖`.
    pub residuals: Vec<f64>,
}

impl EigenSet {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn right_vector(&self, i: usize) -> Vec<Complex64> {
        self.right.col(i).iter().copied().collect()
    }

    pub fn left_vector(&self, i: usize) -> Vec<Complex64> {
        self.left.col(i).iter().copied().collect()
    }

    /// `<x, y>_W`.
    pub fn pairing(&self, x: &[Complex64], y: &[Complex64]) -> Complex64 {
        weighted_pairing(&self.weights, x, y)
    }

    /// `<u, ℓ_i>_W`: the coefficient of `v_i` in `u`.
    pub fn coefficient(&self, u: &[f64], i: usize) -> Complex64 {
        let l = self.left.col(i);
        u.iter().enumerate().map(|(m, x)| self.weights[m] * x * l[m].conj()).sum()
    }
}

pub fn weighted_pairing(w: &[f64], x: &[Complex64], y: &[Complex64]) -> Complex64 {
    w.iter().zip(x).zip(y).map(|((w, x), y)| w * x * y.conj()).sum()
}

/// Descending real part; values with equal real part ordered by ascending imaginary part.
pub fn spectral_order(vals: &[Complex64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| vals[b].re.total_cmp(&vals[a].re));
    let scale = vals.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let tol = 1e-12 * scale;
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && (vals[idx[start]].re - vals[idx[end]].re).abs() <= tol {
            end += 1;
        }
        idx[start..end].sort_by(|&a, &b| vals[a].im.total_cmp(&vals[b].im));
        start = end;
    }
    idx
}

pub fn sorted_eigenvalues(a: &Mat<f64>, backend: &dyn EigenBackend) -> Result<Vec<Complex64>> {
    check_square_finite(a)?;
    let vals = backend.eigenvalues(a.as_ref())?;
    Ok(spectral_order(&vals).into_iter().map(|k| vals[k]).collect())
}

fn check_square_finite(a: &Mat<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(EwsError::Invalid("matrix must be square".into()));
    }
    for j in 0..a.ncols() {
        if !a.col(j).iter().all(|x| x.is_finite()) {
            return Err(EwsError::Invalid("matrix has non-finite entries".into()));
        }
    }
    Ok(())
}

/// Full decomposition with right vectors, W-adjoint left vectors and residuals.
pub fn eig_dense(a: &Mat<f64>, w: &[f64]) -> Result<EigenSet> {
    eig_dense_with(a, w, &FaerBackend)
}

pub fn eig_dense_with(a: &Mat<f64>, w: &[f64], backend: &dyn EigenBackend) -> Result<EigenSet> {
    check_square_finite(a)?;
    let n = a.nrows();
    if w.len() != n || w.iter().any(|x| !(*x > 0.0)) {
        return Err(EwsError::Invalid("weights must be positive, one per row".into()));
    }
    let (vals, vecs) = backend.eigen(a.as_ref())?;
    let (tvals, tvecs) = backend.eigen(a.transpose())?;
    let order = spectral_order(&vals);

    let mut used = vec![false; n];
    let mut eigenvalues = Vec::with_capacity(n);
    let mut right = Mat::<Complex64>::zeros(n, n);
    let mut left = Mat::<Complex64>::zeros(n, n);
    for (slot, &k) in order.iter().enumerate() {
        let lam = vals[k];
        eigenvalues.push(lam);
        let mut v: Vec<Complex64> = vecs.col(k).iter().copied().collect();
        fix_phase_and_scale(&mut v, w);

        // Aᵀz = λz gives A^H conj(z) = λ̄ conj(z); the W-adjoint vector is W⁻¹ conj(z).
        let t = (0..n)
            .filter(|&t| !used[t])
            .min_by(|&x, &y| (tvals[x] - lam).norm().total_cmp(&(tvals[y] - lam).norm()))
            .expect("transpose spectrum has as many entries");
        used[t] = true;
        let mut l: Vec<Complex64> = (0..n).map(|m| tvecs[(m, t)].conj() / w[m]).collect();
        let s = weighted_pairing(w, &l, &v);
        if s.norm() == 0.0 {
            return Err(EwsError::Solver(format!("left and right vectors orthogonal for λ = {lam}")));
        }
        for x in l.iter_mut() {
            *x /= s;
        }
        for m in 0..n {
            right[(m, slot)] = v[m];
            left[(m, slot)] = l[m];
        }
    }
    let residuals = right_residuals(a, &eigenvalues, &right);
    Ok(EigenSet { eigenvalues, right, left, weights: w.to_vec(), residuals })
}

/// Unit W-norm with the largest-magnitude entry real positive.
fn fix_phase_and_scale(v: &mut [Complex64], w: &[f64]) {
    let big = v
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(Complex64::new(1.0, 0.0));
    let phase = if big.norm() > 0.0 { big.conj() / big.norm() } else { Complex64::new(1.0, 0.0) };
    let norm = weighted_pairing(w, v, v).re.sqrt();
    for x in v.iter_mut() {
        *x *= phase / norm;
    }
}

fn right_residuals(a: &Mat<f64>, vals: &[Complex64], v: &Mat<Complex64>) -> Vec<f64> {
    let n = a.nrows();
    let vr = Mat::<f64>::from_fn(n, n, |r, c| v[(r, c)].re);
    let vi = Mat::<f64>::from_fn(n, n, |r, c| v[(r, c)].im);
    let ar = a * &vr;
    let ai = a * &vi;
    (0..n)
        .map(|c| {
            let mut num = 0.0;
            let mut den = 0.0;
            for r in 0..n {
                let av = Complex64::new(ar[(r, c)], ai[(r, c)]);
                num += (av - vals[c] * v[(r, c)]).norm_sqr();
                den += v[(r, c)].norm_sqr();
            }
            (num / den).sqrt()
        })
        .collect()
}

/// First `m` eigenvalues in spectral order (descending real part).
pub fn leading_eigs(set: &EigenSet, m: usize) -> Vec<Complex64> {
    set.eigenvalues.iter().take(m).copied().collect()
}

/// True when no other eigenvalue lies within `tol` of eigenvalue `i`.
pub fn is_isolated(vals: &[Complex64], i: usize, tol: f64) -> bool {
    vals.iter().enumerate().all(|(k, z)| k == i || (z - vals[i]).norm() > tol)
}

/// `G_ij = Σ_ch <ℓ_i, χ>_W conj(<ℓ_j, χ>_W)` for the selected eigen-directions.
pub fn coupling_from_noise(set: &EigenSet, indices: &[usize], noise_map: &[Vec<f64>]) -> CouplingMatrix {
    let proj: Vec<Vec<Complex64>> = indices
        .iter()
        .map(|&i| {
            let l = set.left.col(i);
            noise_map
                .iter()
                .map(|chi| {
                    chi.iter()
                        .enumerate()
                        .map(|(m, x)| set.weights[m] * l[m] * x)
                        .sum::<Complex64>()
                })
                .collect()
        })
        .collect();
    CouplingMatrix::gram(&proj)
}

/// Eigenvalues tracked along a branch with consistent labels.
#[derive(Clone, Debug)]
pub struct TrackedEigs {
    pub p: Vec<f64>,
    /// `labeled[n][k]` is the eigenvalue carrying label `k` at the `n`-th parameter.
    pub labeled: Vec<Vec<Complex64>>,
    /// Set when two candidates were within `1e-10` of a predecessor.
    pub ambiguous: Vec<bool>,
}

impl TrackedEigs {
    /// Difference `λ_a − λ_b` (1-based labels) at every parameter value.
    pub fn gap(&self, a: usize, b: usize) -> Vec<Complex64> {
        self.labeled.iter().map(|l| l[a - 1] - l[b - 1]).collect()
    }
}

/// Nearest-neighbour continuation of the leading `m` eigenvalues between consecutive parameters.
pub fn track_branch_eigs(branch: &[(f64, Vec<Complex64>)], m: usize) -> Result<TrackedEigs> {
    let Some((p0, first)) = branch.first() else {
        return Err(EwsError::Invalid("empty branch".into()));
    };
    if first.len() < m {
        return Err(EwsError::Invalid("fewer eigenvalues than requested".into()));
    }
    let mut labeled = vec![first[..m].to_vec()];
    let mut ambiguous = vec![false];
    let mut p = vec![*p0];
    for (pn, vals) in &branch[1..] {
        let prev = labeled.last().unwrap().clone();
        let pool: Vec<Complex64> = vals.iter().take((2 * m).max(m + 2)).copied().collect();
        let mut taken = vec![false; pool.len()];
        let mut next = Vec::with_capacity(m);
        let mut amb = false;
        for z in &prev {
            let mut cands: Vec<usize> = (0..pool.len()).filter(|&k| !taken[k]).collect();
            cands.sort_by(|&a, &b| (pool[a] - z).norm().total_cmp(&(pool[b] - z).norm()));
            let best = *cands.first().ok_or_else(|| EwsError::Invalid("too few eigenvalues".into()))?;
            if cands.len() > 1 {
                let d0 = (pool[cands[0]] - z).norm();
                let d1 = (pool[cands[1]] - z).norm();
                if d1 - d0 < 1e-10 && pool[cands[0]] != pool[cands[1]] {
                    amb = true;
                }
            }
            taken[best] = true;
            next.push(pool[best]);
        }
        labeled.push(next);
        ambiguous.push(amb);
        p.push(*pn);
    }
    Ok(TrackedEigs { p, labeled, ambiguous })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_densifies_to_identity() {
        let op = DenseOperator(Mat::identity(4, 4));
        let m = densify(&op, 10).unwrap();
        assert_eq!(m, Mat::<f64>::identity(4, 4));
        assert!(matches!(densify(&op, 3), Err(EwsError::CapExceeded { .. })));
    }

    #[test]
    fn ordering_groups_conjugates() {
        let vals = vec![c(-2.0, 1.0), c(-1.0, 0.0), c(-2.0, -1.0), c(-3.0, 0.0)];
        let o = spectral_order(&vals);
        let sorted: Vec<Complex64> = o.iter().map(|&k| vals[k]).collect();
        assert_eq!(sorted, vec![c(-1.0, 0.0), c(-2.0, -1.0), c(-2.0, 1.0), c(-3.0, 0.0)]);
    }

    #[test]
    fn block_diagonal_spectrum() {
        // diag(−1, [[−2, 1], [−1, −2]]) has eigenvalues −1, −2 ± i.
        let a = Mat::from_fn(3, 3, |r, k| match (r, k) {
            (0, 0) => -1.0,
            (1, 1) | (2, 2) => -2.0,
            (1, 2) => 1.0,
            (2, 1) => -1.0,
            _ => 0.0,
        });
        let set = eig_dense(&a, &[1.0, 2.0, 0.5]).unwrap();
        let expect = [c(-1.0, 0.0), c(-2.0, -1.0), c(-2.0, 1.0)];
        for (z, e) in set.eigenvalues.iter().zip(expect) {
            assert!((z - e).norm() < 1e-12, "{z} vs {e}");
        }
        for i in 0..3 {
            for j in 0..3 {
                let p = set.pairing(&set.left_vector(i), &set.right_vector(j));
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((p - c(target, 0.0)).norm() < 1e-12);
            }
            assert!(set.residuals[i] < 1e-12);
        }
    }

    #[test]
    fn tracking_single_point_passthrough() {
        let t = track_branch_eigs(&[(0.1, vec![c(0.0, 0.0), c(-1.0, 0.0)])], 2).unwrap();
        assert_eq!(t.labeled, vec![vec![c(0.0, 0.0), c(-1.0, 0.0)]]);
        assert!(track_branch_eigs(&[], 1).is_err());
    }

    #[test]
    fn tracking_follows_crossing() {
        let branch = vec![
            (0.0, vec![c(-1.0, 0.0), c(-1.5, 0.0)]),
            (0.1, vec![c(-1.2, 0.0), c(-1.3, 0.0)]),
            (0.2, vec![c(-1.2, 0.0), c(-1.4, 0.0)]),
        ];
        let t = track_branch_eigs(&branch, 2).unwrap();
        assert_eq!(t.labeled[1], vec![c(-1.2, 0.0), c(-1.3, 0.0)]);
        assert_eq!(t.gap(1, 2)[0], c(0.5, 0.0));
    }
}

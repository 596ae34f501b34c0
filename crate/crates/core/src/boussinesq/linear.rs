//! Block linearization about a steady state and the Schur complement that
//! eliminates the streamfunction.

use faer::Mat;
use num_complex::Complex64;

use crate::eigensolver::{sorted_eigenvalues, DiscreteOperator, FaerBackend};
use crate::error::{EwsError, Result};
use crate::sparse::{CsrMatrix, SparseLu, TripletBuilder};

use super::grid::forcing_profiles;
use super::model::{max_abs, Discretization};
use super::symmetry::reflect_nodes;
use super::StateFields;

/// `A₁₁ = Δ`, `A₁₂ = [I 0 0]`, `A₂₁ = ∂F_v/∂ψ`, `A₂₂ = ∂F_v/∂v` with `v = [ω; T; S]`.
pub struct Linearization {
    pub a11: CsrMatrix,
    pub a21: CsrMatrix,
    pub a22: CsrMatrix,
    pub lu11: SparseLu,
    /// Full Jacobian in `[ψ; ω; T; S]` ordering.
    pub jac: CsrMatrix,
    pub weights: Vec<f64>,
    pub n_psi: usize,
    /// Max-norm of the steady residual at the linearization point.
    pub steady_residual: f64,
}

impl Linearization {
    pub fn n_dyn(&self) -> usize {
        self.a22.rows
    }
}

pub fn assemble_linearization(d: &Discretization, state: &StateFields) -> Result<Linearization> {
    let x = d.to_vector(state);
    let steady_residual = max_abs(&d.rhs(&x));
    let jac = d.jacobian(&x);
    let np = d.layout.n_psi();
    let nd = d.n_dyn();
    let mut a11 = TripletBuilder::new(np, np);
    let mut a21 = TripletBuilder::new(nd, np);
    let mut a22 = TripletBuilder::new(nd, nd);
    for (r, c, v) in jac.triplets() {
        match (r < np, c < np) {
            (true, true) => a11.add(r, c, v),
            (true, false) => {
                if c - np != r || v != 1.0 {
                    return Err(EwsError::Invalid("streamfunction rows must read Δψ + ω".into()));
                }
            }
            (false, true) => a21.add(r - np, c, v),
            (false, false) => a22.add(r - np, c - np, v),
        }
    }
    let a11 = a11.build();
    let lu11 = a11.lu()?;
    Ok(Linearization {
        a11,
        a21: a21.build(),
        a22: a22.build(),
        lu11,
        jac,
        weights: d.weights_dyn(),
        n_psi: np,
        steady_residual,
    })
}

/// `A_S v = A₂₂ v − A₂₁ Δ⁻¹ v_ω`.
pub fn schur_apply(lin: &Linearization, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != lin.n_dyn() {
        return Err(EwsError::Invalid("vector length differs from dynamic dimension".into()));
    }
    let y = lin.lu11.solve(&v[..lin.n_psi])?;
    let mut out = lin.a22.mul_vec(v);
    let corr = lin.a21.mul_vec(&y);
    for (o, c) in out.iter_mut().zip(corr) {
        *o -= c;
    }
    Ok(out)
}

pub struct SchurOperator<'a>(pub &'a Linearization);

impl DiscreteOperator for SchurOperator<'_> {
    fn dim(&self) -> usize {
        self.0.n_dyn()
    }

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        schur_apply(self.0, v)
    }
}

/// Dense `A_S`, using one multi-right-hand-side Poisson solve for all ω columns.
pub fn dense_schur(lin: &Linearization) -> Result<Mat<f64>> {
    let np = lin.n_psi;
    let nd = lin.n_dyn();
    let mut inv = Mat::<f64>::identity(np, np);
    lin.lu11.solve_mat_in_place(&mut inv)?;
    let mut a = lin.a22.to_dense();
    let mut col = vec![0.0; np];
    for k in 0..np {
        for (c, x) in col.iter_mut().enumerate() {
            *x = inv[(c, k)];
        }
        for r in 0..nd {
            let s: f64 = lin.a21.row(r).map(|(c, v)| v * col[c]).sum();
            a[(r, k)] -= s;
        }
    }
    Ok(a)
}

/// Sorted eigenvalues of the dense Schur complement.
pub fn leading_eigenvalues(lin: &Linearization, m: usize) -> Result<Vec<Complex64>> {
    let a = dense_schur(lin)?;
    let vals = sorted_eigenvalues(&a, &FaerBackend)?;
    Ok(vals.into_iter().take(m).collect())
}

/// Injection vectors of the surface salinity noise, one channel per surface column.
///
/// A unit white-noise channel at column `j` adds `2σQ_S(x_j)/(Le·h·√w₂ⱼ)` per unit time to
/// the surface salinity row, `h` being the top spacing; the `1/√w₂` makes the
/// channels a cell-scaled white noise in `x₂`.
pub fn noise_map(d: &Discretization) -> Vec<Vec<f64>> {
    let g = &d.grid;
    let top = g.m + 1;
    let h_top = g.h1(g.m);
    let np = d.layout.n_psi();
    (0..g.cols())
        .map(|j| {
            let mut v = vec![0.0; d.n_dyn()];
            let node = g.node(top, j);
            let (qs, _, _) = forcing_profiles(g.x2[j], g.length);
            let r = d.layout.salt_of[node].unwrap() - np;
            v[r] = 2.0 * d.params.sigma * qs / (d.params.le * h_top * g.w2[j].sqrt());
            v
        })
        .collect()
}

/// Signed partner of every dynamic index under the reflection `x₂ → L − x₂`
/// (ω changes sign, T and S do not).
pub(crate) fn dyn_reflection(d: &Discretization) -> Vec<(usize, f64)> {
    let refl = reflect_nodes(&d.grid);
    let l = &d.layout;
    let np = l.n_psi();
    let mut out = vec![(0, 0.0); d.n_dyn()];
    for (of, sign) in [(&l.omega_of, -1.0), (&l.temp_of, 1.0), (&l.salt_of, 1.0)] {
        for k in 0..d.grid.n_nodes() {
            if let Some(r) = of[k] {
                let partner = of[refl[k]].expect("reflection preserves the layout");
                out[r - np] = (partner - np, sign);
            }
        }
    }
    out
}

/// Restrictions of a reflection-commuting matrix to the even and odd subspaces.
///
/// Their spectra together equal the spectrum of `a`, at a quarter of the dense cost.
pub fn symmetric_split(a: &Mat<f64>, d: &Discretization) -> Result<(Mat<f64>, Mat<f64>)> {
    let pairs = dyn_reflection(d);
    let n = pairs.len();
    if a.nrows() != n {
        return Err(EwsError::Invalid("matrix size differs from dynamic dimension".into()));
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    // Basis vectors as (index, coeff) lists.
    let mut even: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut odd: Vec<Vec<(usize, f64)>> = Vec::new();
    for (a_idx, &(b_idx, s)) in pairs.iter().enumerate() {
        if a_idx == b_idx {
            if s > 0.0 {
                even.push(vec![(a_idx, 1.0)]);
            } else {
                odd.push(vec![(a_idx, 1.0)]);
            }
        } else if a_idx < b_idx {
            even.push(vec![(a_idx, h), (b_idx, s * h)]);
            odd.push(vec![(a_idx, h), (b_idx, -s * h)]);
        }
    }
    let restrict = |basis: &[Vec<(usize, f64)>]| -> Mat<f64> {
        let m = basis.len();
        let mut out = Mat::<f64>::zeros(m, m);
        let mut col = vec![0.0; n];
        for (c, pc) in basis.iter().enumerate() {
            col.iter_mut().for_each(|x| *x = 0.0);
            for &(k, w) in pc {
                for r in 0..n {
                    col[r] += w * a[(r, k)];
                }
            }
            for (r, pr) in basis.iter().enumerate() {
                out[(r, c)] = pr.iter().map(|&(k, w)| w * col[k]).sum();
            }
        }
        out
    };
    Ok((restrict(&even), restrict(&odd)))
}

//! Closed-form time-asymptotic autocovariances on (generalized) eigenbases.
//!
//! Block indices `i` and chain indices `k` are 1-based throughout this module,
//! so block 1 is always the leading block and `k = 1` the proper eigenvector.
//! Inner products are linear in the first slot and conjugate-linear in the second.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{EwsError, Result};

pub type ComplexScalar = Complex64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JordanBlockSpec {
    pub eigenvalue: Complex64,
    pub multiplicity: usize,
}

impl JordanBlockSpec {
    pub fn simple(eigenvalue: Complex64) -> Self {
        Self { eigenvalue, multiplicity: 1 }
    }
}

/// Square complex matrix stored row-major; serializes as a list of `[re, im]` rows.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl CouplingMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut g = Self::zeros(n);
        for a in 0..n {
            g.set(a, a, Complex64::new(1.0, 0.0));
        }
        g
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                data.push(f(a, b));
            }
        }
        Self { n, data }
    }

    /// Gram matrix `G_ab = <x_a, x_b>` of the given vectors.
    pub fn gram(vectors: &[Vec<Complex64>]) -> Self {
        Self::from_fn(vectors.len(), |a, b| {
            vectors[a].iter().zip(&vectors[b]).map(|(x, y)| x * y.conj()).sum()
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, a: usize, b: usize) -> Complex64 {
        self.data[a * self.n + b]
    }

    pub fn set(&mut self, a: usize, b: usize, v: Complex64) {
        self.data[a * self.n + b] = v;
    }

    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.n {
            for b in 0..self.n {
                worst = worst.max((self.get(a, b) - self.get(b, a).conj()).norm());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl Serialize for CouplingMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.n)
            .map(|a| (0..self.n).map(|b| [self.get(a, b).re, self.get(a, b).im]).collect())
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CouplingMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in &rows {
            if row.len() != n {
                return Err(serde::de::Error::custom("coupling matrix must be square"));
            }
            data.extend(row.iter().map(|[re, im]| Complex64::new(*re, *im)));
        }
        Ok(Self { n, data })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    pub p: f64,
    pub threshold: f64,
    pub blocks: Vec<JordanBlockSpec>,
    pub q: f64,
    /// Indexed by chain slots in block order: `(1,1), …, (1,M_1), (2,1), …`.
    pub coupling: CouplingMatrix,
}

impl SpectralModel {
    pub fn new(
        p: f64,
        threshold: f64,
        blocks: Vec<JordanBlockSpec>,
        q: f64,
        coupling: CouplingMatrix,
    ) -> Result<Self> {
        let m = Self { p, threshold, blocks, q, coupling };
        m.validate()?;
        Ok(m)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text).map_err(|e| EwsError::Invalid(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(EwsError::Invalid("model has no blocks".into()));
        }
        for (n, b) in self.blocks.iter().enumerate() {
            if b.multiplicity == 0 {
                return Err(EwsError::Invalid(format!("block {} has multiplicity 0", n + 1)));
            }
            if !(b.eigenvalue.re.is_finite() && b.eigenvalue.im.is_finite()) {
                return Err(EwsError::Invalid(format!("block {} eigenvalue not finite", n + 1)));
            }
        }
        for w in self.blocks.windows(2) {
            if w[1].eigenvalue.re > w[0].eigenvalue.re {
                return Err(EwsError::Invalid("blocks must be sorted by descending Re".into()));
            }
        }
        if self.coupling.dim() != self.n_slots() {
            return Err(EwsError::Invalid(format!(
                "coupling has dimension {} but model has {} chain slots",
                self.coupling.dim(),
                self.n_slots()
            )));
        }
        let scale = self.coupling.max_abs().max(1.0);
        if self.coupling.hermitian_defect() > 1e-12 * scale {
            return Err(EwsError::Invalid("coupling matrix is not Hermitian".into()));
        }
        Ok(())
    }

    pub fn n_slots(&self) -> usize {
        self.blocks.iter().map(|b| b.multiplicity).sum()
    }

    /// Position of chain slot `(i, k)` in the coupling matrix.
    pub fn slot(&self, i: usize, k: usize) -> Result<usize> {
        let b = self.block(i)?;
        if k == 0 || k > b.multiplicity {
            return Err(EwsError::Index(format!("chain index {k} outside 1..={}", b.multiplicity)));
        }
        Ok(self.blocks[..i - 1].iter().map(|b| b.multiplicity).sum::<usize>() + k - 1)
    }

    pub fn block(&self, i: usize) -> Result<&JordanBlockSpec> {
        if i == 0 || i > self.blocks.len() {
            return Err(EwsError::Index(format!("block {i} outside 1..={}", self.blocks.len())));
        }
        Ok(&self.blocks[i - 1])
    }

    pub fn eigenvalue(&self, i: usize) -> Result<Complex64> {
        Ok(self.block(i)?.eigenvalue)
    }

    /// Coupling entry with the convention that chain index 0 gives zero.
    fn g(&self, i: usize, k1: usize, j: usize, k2: usize) -> Complex64 {
        if k1 == 0 || k2 == 0 {
            return Complex64::new(0.0, 0.0);
        }
        let a = self.slot(i, k1).expect("checked slot");
        let b = self.slot(j, k2).expect("checked slot");
        self.coupling.get(a, b)
    }

    fn denominator(&self, i: usize, j: usize) -> Result<Complex64> {
        let s = self.eigenvalue(i)?.conj() + self.eigenvalue(j)?;
        if s == Complex64::new(0.0, 0.0) {
            return Err(EwsError::DegenerateDenominator(i, j));
        }
        Ok(s)
    }
}

/// `<e*_{i,1}, V^τ e*_{j,1}>` for simple chains.
pub fn autocov_pair(i: usize, j: usize, tau: f64, model: &SpectralModel) -> Result<Complex64> {
    let li = model.eigenvalue(i)?;
    let lj = model.eigenvalue(j)?;
    let s = model.denominator(i, j)?;
    let q = model.q;
    let g = model.g(i, 1, j, 1);
    Ok(-(li.conj() - q) * (lj - q) / s * (li.conj() * tau).exp() * g)
}

/// Table `X[k1][k2] = <e*_{i,k1}, V^τ e*_{j,k2}>` for `0 ≤ k ≤ M`, row/column 0 being zero.
fn jordan_table(i: usize, j: usize, tau: f64, model: &SpectralModel) -> Result<Vec<Vec<Complex64>>> {
    let bi = model.block(i)?;
    let bj = model.block(j)?;
    let (mi, mj) = (bi.multiplicity, bj.multiplicity);
    let li_bar = bi.eigenvalue.conj();
    let lj = bj.eigenvalue;
    let s = model.denominator(i, j)?;
    let q = model.q;
    let growth = (li_bar * tau).exp();
    let zero = Complex64::new(0.0, 0.0);

    // <(λ̄_i−q)e*_{i,k} + e*_{i,k−1}, DBB*D*((λ̄_j−q)e*_{j,k2} + e*_{j,k2−1})>
    let shifted = |k: usize, k2: usize| -> Complex64 {
        (li_bar - q) * (lj - q) * model.g(i, k, j, k2)
            + (li_bar - q) * model.g(i, k, j, k2 - 1)
            + (lj - q) * model.g(i, k - 1, j, k2)
            + model.g(i, k - 1, j, k2 - 1)
    };

    let mut fact = vec![1.0f64; mi + 1];
    for n in 1..=mi {
        fact[n] = fact[n - 1] * n as f64;
    }

    let mut x = vec![vec![zero; mj + 1]; mi + 1];
    for k1 in 1..=mi {
        for k2 in 1..=mj {
            let mut forcing = zero;
            for k in 1..=k1 {
                forcing += tau.powi((k1 - k) as i32) / fact[k1 - k] * shifted(k, k2);
            }
            x[k1][k2] = -(x[k1][k2 - 1] + x[k1 - 1][k2]) / s - growth * forcing / s;
        }
    }
    Ok(x)
}

/// `<e*_{i,k1}, V^τ e*_{j,k2}>` on Jordan chains via the generalized Lyapunov recursion.
pub fn autocov_jordan(
    i: usize,
    k1: usize,
    j: usize,
    k2: usize,
    tau: f64,
    model: &SpectralModel,
) -> Result<Complex64> {
    model.slot(i, k1)?;
    model.slot(j, k2)?;
    let x = jordan_table(i, j, tau, model)?;
    Ok(x[k1][k2])
}

/// Expansion coefficients `c_{i,k}` of a direction on the adjoint chains.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DirectionCoeffs {
    pub coeffs: BTreeMap<(usize, usize), Complex64>,
}

impl DirectionCoeffs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn unit(i: usize, k: usize) -> Self {
        Self::new().with(i, k, Complex64::new(1.0, 0.0))
    }

    pub fn with(mut self, i: usize, k: usize, c: Complex64) -> Self {
        self.coeffs.insert((i, k), c);
        self
    }

    pub fn get(&self, i: usize, k: usize) -> Complex64 {
        self.coeffs.get(&(i, k)).copied().unwrap_or_default()
    }

    fn support(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        self.coeffs.iter().filter(|(_, c)| c.norm() > 0.0).map(|(&(i, k), &c)| (i, k, c))
    }
}

/// `<f1, V^τ f2>` as the triple sum over chain slots, conjugating the `f2` coefficients.
pub fn autocov_subspace(
    f1: &DirectionCoeffs,
    f2: &DirectionCoeffs,
    tau: f64,
    model: &SpectralModel,
) -> Result<Complex64> {
    for (i, k, _) in f1.support().chain(f2.support()) {
        model.slot(i, k)?;
    }
    let mut tables: BTreeMap<(usize, usize), Vec<Vec<Complex64>>> = BTreeMap::new();
    let mut total = Complex64::new(0.0, 0.0);
    for (i, k1, c1) in f1.support() {
        for (j, k2, c2) in f2.support() {
            if !tables.contains_key(&(i, j)) {
                tables.insert((i, j), jordan_table(i, j, tau, model)?);
            }
            total += c1 * tables[&(i, j)][k1][k2] * c2.conj();
        }
    }
    Ok(total)
}

pub fn predicted_exponent_pair(k1: usize, k2: usize) -> i64 {
    -(k1 as i64) - (k2 as i64) + 1
}

/// Largest chain index of block 1 carrying a nonzero coefficient.
fn leading_chain_index(f: &DirectionCoeffs) -> Option<usize> {
    f.support().filter(|&(i, _, _)| i == 1).map(|(_, k, _)| k).max()
}

pub fn predicted_exponent_directions(
    f1: &DirectionCoeffs,
    f2: &DirectionCoeffs,
    model: &SpectralModel,
) -> Result<i64> {
    model.block(1)?;
    let k1 = leading_chain_index(f1).ok_or(EwsError::Silenced)?;
    let k2 = leading_chain_index(f2).ok_or(EwsError::Silenced)?;
    Ok(predicted_exponent_pair(k1, k2))
}

/// Leading-order autocorrelation `e^{λ̄_i τ}`; it does not depend on the second direction.
pub fn autocorr_asymptotic(i: usize, tau: f64, model: &SpectralModel) -> Result<Complex64> {
    Ok((model.eigenvalue(i)?.conj() * tau).exp())
}

/// Adds a small coefficient on slot `(1, M_1)` when it is absent.
///
/// `norms` holds the norm of each adjoint chain vector in slot order.
pub fn densify_direction(
    f: &DirectionCoeffs,
    delta: f64,
    norms: &[f64],
    model: &SpectralModel,
) -> Result<DirectionCoeffs> {
    if delta <= 0.0 {
        return Err(EwsError::Invalid("delta must be positive".into()));
    }
    let m1 = model.block(1)?.multiplicity;
    if f.get(1, m1).norm() > 0.0 {
        return Ok(f.clone());
    }
    let slot = model.slot(1, m1)?;
    let norm = *norms
        .get(slot)
        .ok_or_else(|| EwsError::Index(format!("no norm for slot {slot}")))?;
    if norm <= 0.0 {
        return Err(EwsError::Invalid("chain vector norm must be positive".into()));
    }
    Ok(f.clone().with(1, m1, Complex64::new(delta / (4.0 * norm), 0.0)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub offset: f64,
    /// Root of the summed squared residuals in log10 space.
    pub residual: f64,
}

/// Least-squares fit of `log10(value) = exponent·log10(rate_of(p)) + offset`.
pub fn fit_scaling_exponent(
    samples: &[(f64, f64)],
    rate_of: impl Fn(f64) -> f64,
) -> Result<ScalingFit> {
    let mut xs = Vec::with_capacity(samples.len());
    let mut ys = Vec::with_capacity(samples.len());
    for &(p, v) in samples {
        let r = rate_of(p);
        if !(v > 0.0) || !(r > 0.0) {
            return Err(EwsError::Invalid(format!("nonpositive value {v} or rate {r} at p = {p}")));
        }
        xs.push(r.log10());
        ys.push(v.log10());
    }
    let (slope, offset, residual) = linear_fit(&xs, &ys)?;
    Ok(ScalingFit { exponent: slope, offset, residual })
}

/// Ordinary least squares `y = a·x + b`; returns `(a, b, residual norm)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() {
        return Err(EwsError::Invalid("length mismatch".into()));
    }
    if xs.len() < 3 {
        return Err(EwsError::Invalid("at least 3 samples are required".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 1e-300 {
        return Err(EwsError::Invalid("degenerate (constant) abscissa".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let a = sxy / sxx;
    let b = my - a * mx;
    let res = xs.iter().zip(ys).map(|(x, y)| (y - a * x - b).powi(2)).sum::<f64>().sqrt();
    Ok((a, b, res))
}

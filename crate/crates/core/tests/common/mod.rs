//! Shared test oracles: small dense complex matrices, a matrix exponential, brute-force
//! quadrature of the stationary lagged covariance, and random spectral models.
#![allow(dead_code)]

use ews_core::spectral::{CouplingMatrix, JordanBlockSpec, SpectralModel};
use ews_core::Complex64;
use gauss_quad::legendre::GaussLegendre;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Row-major dense complex matrix.
#[derive(Clone, Debug)]
pub struct CMat {
    pub n: usize,
    pub a: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        Self { n, a: vec![c(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = c(1.0, 0.0);
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.a[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.a[i * self.n + j] = v;
    }

    pub fn mul(&self, o: &CMat) -> CMat {
        let n = self.n;
        let mut r = CMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let x = self.a[i * n + k];
                if x == c(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    r.a[i * n + j] += x * o.a[k * n + j];
                }
            }
        }
        r
    }

    pub fn adjoint(&self) -> CMat {
        let n = self.n;
        let mut r = CMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                r.a[j * n + i] = self.a[i * n + j].conj();
            }
        }
        r
    }

    pub fn scale(&self, s: Complex64) -> CMat {
        CMat { n: self.n, a: self.a.iter().map(|x| x * s).collect() }
    }

    pub fn add(&self, o: &CMat) -> CMat {
        CMat { n: self.n, a: self.a.iter().zip(&o.a).map(|(x, y)| x + y).collect() }
    }

    pub fn shift(&self, s: Complex64) -> CMat {
        let mut r = self.clone();
        for i in 0..self.n {
            r.a[i * self.n + i] += s;
        }
        r
    }

    pub fn norm_fro(&self) -> f64 {
        self.a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// `e^{A}` by scaling and squaring with a 24-term Taylor series.
pub fn expm(a: &CMat) -> CMat {
    let nrm = a.norm_fro();
    let mut s = 0;
    while nrm / 2f64.powi(s) > 0.25 {
        s += 1;
    }
    let b = a.scale(c(2f64.powi(-s), 0.0));
    let mut term = CMat::identity(a.n);
    let mut sum = CMat::identity(a.n);
    for k in 1..=24 {
        term = term.mul(&b).scale(c(1.0 / k as f64, 0.0));
        sum = sum.add(&term);
    }
    for _ in 0..s {
        sum = sum.mul(&sum);
    }
    sum
}

/// Generator `A` on chain slots: `A* e*_{i,k} = λ̄_i e*_{i,k} + e*_{i,k−1}`, `A = (A*)^H`.
pub fn generator(model: &SpectralModel) -> CMat {
    let n = model.n_slots();
    let mut astar = CMat::zeros(n);
    for (bi, b) in model.blocks.iter().enumerate() {
        let i = bi + 1;
        for k in 1..=b.multiplicity {
            let s = model.slot(i, k).unwrap();
            astar.set(s, s, b.eigenvalue.conj());
            if k > 1 {
                astar.set(model.slot(i, k - 1).unwrap(), s, c(1.0, 0.0));
            }
        }
    }
    astar.adjoint()
}

/// Brute-force `X_ab = <e*_a, V^τ e*_b>` for every slot pair and each lag in `taus`:
/// `V^τ = e^{Aτ} ∫₀^∞ (A−q) e^{As} conj(G) e^{A^H s} (A−q)^H ds`, `X_ab = conj(V^τ_ab)`.
///
/// Composite 12-point Gauss–Legendre on panels of width 1/4, stopped once a panel bound
/// falls below `1e-18` of the accumulated integral.
pub fn quadrature_autocov(model: &SpectralModel, taus: &[f64]) -> Vec<CMat> {
    let n = model.n_slots();
    let a = generator(model);
    let aq = a.shift(c(-model.q, 0.0));
    let mut m = CMat::zeros(n);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, model.coupling.get(i, j).conj());
        }
    }
    let h = 0.25;
    let gl = GaussLegendre::new(12.try_into().unwrap());
    let nodes: Vec<(CMat, f64)> = gl
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (expm(&a.scale(c(0.5 * h * (1.0 + x), 0.0))), 0.5 * h * w))
        .collect();
    let step = expm(&a.scale(c(h, 0.0)));
    let bound_scale = aq.norm_fro().powi(2) * m.norm_fro() * h;
    let mut acc = CMat::zeros(n);
    let mut e0 = CMat::identity(n);
    for _panel in 0..2_000_000 {
        for (ek, wk) in &nodes {
            let p = aq.mul(&e0.mul(ek));
            let f = p.mul(&m).mul(&p.adjoint());
            acc = acc.add(&f.scale(c(*wk, 0.0)));
        }
        e0 = e0.mul(&step);
        let bound = e0.norm_fro().powi(2) * bound_scale;
        if bound < 1e-18 * acc.norm_fro() {
            break;
        }
    }
    taus.iter()
        .map(|&t| {
            let v = expm(&a.scale(c(t, 0.0))).mul(&acc);
            let mut x = CMat::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    x.set(i, j, v.get(i, j).conj());
                }
            }
            x
        })
        .collect()
}

/// Random model with at most `max_slots` chain slots, multiplicities up to 3,
/// `Re λ ∈ [−3, −0.05]`, and a positive semidefinite coupling of rank ≤ 3.
pub fn random_model(seed: u64, max_slots: usize) -> SpectralModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blocks = Vec::new();
    let mut slots = 0;
    let target = rng.random_range(1..=max_slots);
    while slots < target {
        let m = rng.random_range(1..=3usize).min(target - slots);
        let re = -rng.random_range(0.05..3.0);
        let im = if rng.random_bool(0.5) { rng.random_range(-2.0..2.0) } else { 0.0 };
        blocks.push(JordanBlockSpec { eigenvalue: c(re, im), multiplicity: m });
        slots += m;
    }
    blocks.sort_by(|a, b| b.eigenvalue.re.partial_cmp(&a.eigenvalue.re).unwrap());
    let rank = rng.random_range(1..=3usize);
    let vs: Vec<Vec<Complex64>> = (0..rank)
        .map(|_| (0..slots).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
        .collect();
    let coupling = CouplingMatrix::from_fn(slots, |a, b| vs.iter().map(|v| v[a] * v[b].conj()).sum());
    let q = rng.random_range(-2.0..2.0);
    SpectralModel::new(0.0, 0.0, blocks, q, coupling).unwrap()
}

/// Largest entrywise relative error of `autocov_jordan` against the quadrature oracle over
/// every slot pair and lag. Entries below `1e-12·max|X|` are measured against that floor.
pub fn oracle_max_rel_err(model: &SpectralModel, taus: &[f64]) -> f64 {
    let oracle = quadrature_autocov(model, taus);
    let mut worst: f64 = 0.0;
    for (t, x) in taus.iter().zip(&oracle) {
        let scale = x.a.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (bi, bl) in model.blocks.iter().enumerate() {
            for (bj, bm) in model.blocks.iter().enumerate() {
                for k1 in 1..=bl.multiplicity {
                    for k2 in 1..=bm.multiplicity {
                        let got = ews_core::spectral::autocov_jordan(bi + 1, k1, bj + 1, k2, *t, model).unwrap();
                        let want = x.get(model.slot(bi + 1, k1).unwrap(), model.slot(bj + 1, k2).unwrap());
                        worst = worst.max((got - want).norm() / want.norm().max(1e-12 * scale));
                    }
                }
            }
        }
    }
    worst
}

/// Relative residual of `(λ̄_i+λ_j)X_ij(0) + (λ̄_i−q)(λ_j−q)G_ij = 0` over all block pairs.
pub fn lyapunov_max_residual(model: &SpectralModel) -> f64 {
    let q = model.q;
    let mut worst: f64 = 0.0;
    for i in 1..=model.blocks.len() {
        for j in 1..=model.blocks.len() {
            let li = model.eigenvalue(i).unwrap();
            let lj = model.eigenvalue(j).unwrap();
            let g = model.coupling.get(model.slot(i, 1).unwrap(), model.slot(j, 1).unwrap());
            let x = ews_core::spectral::autocov_pair(i, j, 0.0, model).unwrap();
            let forcing = (li.conj() - q) * (lj - q) * g;
            let r = (li.conj() + lj) * x + forcing;
            let scale = forcing.norm().max(1e-300);
            if forcing.norm() > 0.0 {
                worst = worst.max(r.norm() / scale);
            }
        }
    }
    worst
}

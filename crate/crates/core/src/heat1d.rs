//! One-dimensional heat equation `u_t = u_xx + p u` on `[0, L]` with white noise
//! entering through the boundary data at `x = 0` and `x = L`.
//!
//! Everything is expressed in the orthonormal eigenbasis of the homogeneous
//! Laplacian, so covariances are available in closed form and trajectories
//! can be sampled with exact Ornstein–Uhlenbeck transitions.

use std::f64::consts::PI;

use faer::{Mat, Side};
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{EwsError, Result};
use crate::rng::rng_from_seed;
use crate::spectral::{self, CouplingMatrix, JordanBlockSpec, SpectralModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Neumann,
    Dirichlet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatModelConfig {
    pub length: f64,
    pub p: f64,
    pub bc: BoundaryKind,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_modes")]
    pub modes: usize,
    #[serde(default = "default_gains")]
    pub noise_gains: [f64; 2],
}

fn default_c() -> f64 {
    1.0
}
fn default_alpha() -> f64 {
    -0.6
}
fn default_modes() -> usize {
    32
}
fn default_gains() -> [f64; 2] {
    [1.0, 1.0]
}

impl HeatModelConfig {
    pub fn neumann(length: f64, p: f64) -> Self {
        Self {
            length,
            p,
            bc: BoundaryKind::Neumann,
            c: default_c(),
            alpha: default_alpha(),
            modes: default_modes(),
            noise_gains: default_gains(),
        }
    }

    pub fn dirichlet(length: f64, p: f64, alpha: f64) -> Self {
        Self { bc: BoundaryKind::Dirichlet, alpha, ..Self::neumann(length, p) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) {
            return Err(EwsError::Invalid("length must be positive".into()));
        }
        if !(self.c > 0.0) {
            return Err(EwsError::Invalid("shift c must be positive".into()));
        }
        if self.modes == 0 {
            return Err(EwsError::Invalid("at least one mode is required".into()));
        }
        if !(self.p < self.threshold()) {
            return Err(EwsError::Invalid(format!(
                "p = {} must lie below the threshold {}",
                self.p,
                self.threshold()
            )));
        }
        if self.bc == BoundaryKind::Dirichlet && !(self.alpha < -0.5) {
            return Err(EwsError::Invalid("Dirichlet weights need alpha < -1/2".into()));
        }
        Ok(())
    }

    /// Bifurcation threshold: the smallest Laplacian eigenvalue.
    pub fn threshold(&self) -> f64 {
        match self.bc {
            BoundaryKind::Neumann => 0.0,
            BoundaryKind::Dirichlet => (PI / self.length).powi(2),
        }
    }

    pub fn q(&self) -> f64 {
        self.p + self.c
    }

    /// Wavenumber index of the `row`-th retained mode (cosines start at 0, sines at 1).
    pub fn mode_number(&self, row: usize) -> usize {
        match self.bc {
            BoundaryKind::Neumann => row,
            BoundaryKind::Dirichlet => row + 1,
        }
    }

    fn row_of(&self, k: usize) -> Result<usize> {
        let first = self.mode_number(0);
        if k < first || k - first >= self.modes {
            return Err(EwsError::Index(format!(
                "mode {k} outside {first}..{}",
                first + self.modes
            )));
        }
        Ok(k - first)
    }

    fn omega(&self, k: usize) -> f64 {
        k as f64 * PI / self.length
    }

    /// Laplacian eigenvalue `(kπ/L)²` of mode number `k`.
    pub fn lambda_hat(&self, k: usize) -> f64 {
        self.omega(k).powi(2)
    }

    /// Orthonormal eigenfunction of mode number `k` and its derivative at `x`.
    pub fn eigenfunction(&self, k: usize, x: f64) -> (f64, f64) {
        let w = self.omega(k);
        let l = self.length;
        match self.bc {
            BoundaryKind::Neumann if k == 0 => (1.0 / l.sqrt(), 0.0),
            BoundaryKind::Neumann => {
                let a = (2.0 / l).sqrt();
                (a * (w * x).cos(), -a * w * (w * x).sin())
            }
            BoundaryKind::Dirichlet => {
                let a = (2.0 / l).sqrt();
                (a * (w * x).sin(), a * w * (w * x).cos())
            }
        }
    }
}

/// `w(x) = a·cosh(√c x) + b·sinh(√c x)`, the lift of boundary data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirichletLift {
    pub a: f64,
    pub b: f64,
    pub sqrt_c: f64,
}

impl DirichletLift {
    pub fn value(&self, x: f64) -> f64 {
        let s = self.sqrt_c * x;
        self.a * s.cosh() + self.b * s.sinh()
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let s = self.sqrt_c * x;
        self.sqrt_c * (self.a * s.sinh() + self.b * s.cosh())
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        self.sqrt_c * self.sqrt_c * self.value(x)
    }
}

/// Solves `w'' − c w = 0` with boundary data `v` (derivatives for Neumann, values for Dirichlet).
pub fn dirichlet_map(v: [f64; 2], cfg: &HeatModelConfig) -> Result<DirichletLift> {
    if !(cfg.c > 0.0) {
        return Err(EwsError::Invalid("c must be positive for a unique lift".into()));
    }
    let r = cfg.c.sqrt();
    let s = r * cfg.length;
    let (a, b) = match cfg.bc {
        BoundaryKind::Neumann => {
            let b = v[0] / r;
            ((v[1] / r - b * s.cosh()) / s.sinh(), b)
        }
        BoundaryKind::Dirichlet => (v[0], (v[1] - v[0] * s.cosh()) / s.sinh()),
    };
    Ok(DirichletLift { a, b, sqrt_c: r })
}

/// `d[row][b] = <D(unit datum at b), φ_k>` for each retained mode.
///
/// Green's identity gives `(c + ω²)∫wφ = [w'φ − wφ']₀^L`, so no quadrature is needed.
pub fn mode_noise_coeffs(cfg: &HeatModelConfig) -> Result<Vec<[f64; 2]>> {
    let l = cfg.length;
    let lifts = [dirichlet_map([1.0, 0.0], cfg)?, dirichlet_map([0.0, 1.0], cfg)?];
    Ok((0..cfg.modes)
        .map(|row| {
            let k = cfg.mode_number(row);
            let (p0, dp0) = cfg.eigenfunction(k, 0.0);
            let (pl, dpl) = cfg.eigenfunction(k, l);
            let denom = cfg.c + cfg.lambda_hat(k);
            let mut d = [0.0; 2];
            for (b, w) in lifts.iter().enumerate() {
                let bracket = (w.derivative(l) * pl - w.value(l) * dpl)
                    - (w.derivative(0.0) * p0 - w.value(0.0) * dp0);
                d[b] = bracket / denom;
            }
            d
        })
        .collect())
}

/// The induced spectral model: `λ_k = p − λ̂_k`, `q = p + c`, `G_kl = Σ_b g_b² d_kb d_lb`.
pub fn spectral_model(cfg: &HeatModelConfig) -> Result<SpectralModel> {
    cfg.validate()?;
    let d = mode_noise_coeffs(cfg)?;
    let g = cfg.noise_gains;
    let blocks = (0..cfg.modes)
        .map(|row| {
            JordanBlockSpec::simple(Complex64::new(cfg.p - cfg.lambda_hat(cfg.mode_number(row)), 0.0))
        })
        .collect();
    let coupling = CouplingMatrix::from_fn(cfg.modes, |a, b| {
        Complex64::new((0..2).map(|ch| g[ch] * g[ch] * d[a][ch] * d[b][ch]).sum(), 0.0)
    });
    SpectralModel::new(cfg.p, cfg.threshold(), blocks, cfg.q(), coupling)
}

/// Stationary lagged covariance of the mode coefficients with mode numbers `k` and `l`.
pub fn stationary_cov_entry(k: usize, l: usize, tau: f64, cfg: &HeatModelConfig) -> Result<Complex64> {
    let (rk, rl) = (cfg.row_of(k)?, cfg.row_of(l)?);
    let model = spectral_model(cfg)?;
    spectral::autocov_pair(rk + 1, rl + 1, tau, &model)
}

/// Covariance in the weighted norm `U = (−A₀)^{α/2}` for the Dirichlet problem.
pub fn weighted_cov_entry(i: usize, j: usize, tau: f64, cfg: &HeatModelConfig) -> Result<Complex64> {
    if cfg.bc != BoundaryKind::Dirichlet {
        return Err(EwsError::Invalid("weighted covariance is defined for Dirichlet data".into()));
    }
    let base = stationary_cov_entry(i, j, tau, cfg)?;
    let wi = (cfg.lambda_hat(i) - cfg.p).powf(cfg.alpha / 2.0);
    let wj = (cfg.lambda_hat(j) - cfg.p).powf(cfg.alpha / 2.0);
    Ok(base * wi * wj)
}

/// Truncated value of `∫₀^∞ |(A₀ − q) e^{A₀ s} D B|²_HS ds` over the first `k_prime` modes.
pub fn wellposedness_integral(cfg: &HeatModelConfig, k_prime: usize) -> Result<f64> {
    if k_prime > cfg.modes {
        return Err(EwsError::Invalid(format!("K' = {k_prime} exceeds K = {}", cfg.modes)));
    }
    cfg.validate()?;
    let d = mode_noise_coeffs(cfg)?;
    let mut total = 0.0;
    for (row, dk) in d.iter().enumerate().take(k_prime) {
        let lh = cfg.lambda_hat(cfg.mode_number(row));
        let lift = (cfg.c + lh).powi(2);
        for b in 0..2 {
            total += lift * dk[b].powi(2) * cfg.noise_gains[b].powi(2) / (2.0 * (lh - cfg.p));
        }
    }
    Ok(total)
}

/// Sampled mode coefficients `u_k(t_n)`, `t_n = n·dt`, starting from `u ≡ 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeTrajectory {
    pub dt: f64,
    pub seed: u64,
    /// Mode numbers of the recorded rows.
    pub modes: Vec<usize>,
    /// `coeffs[r][n]` is the coefficient of `modes[r]` at time `n·dt`.
    pub coeffs: Vec<Vec<f64>>,
}

impl ModeTrajectory {
    pub fn len(&self) -> usize {
        self.coeffs.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|n| n as f64 * self.dt).collect()
    }

    pub fn mode(&self, k: usize) -> Option<&[f64]> {
        self.modes.iter().position(|&m| m == k).map(|r| self.coeffs[r].as_slice())
    }
}

/// Exact joint OU transition: `u ← e^{Λ dt} u + Cη` with `CCᵀ` the step covariance.
struct OuStep {
    decay: Vec<f64>,
    factor: Mat<f64>,
}

impl OuStep {
    fn new(cfg: &HeatModelConfig, dt: f64) -> Result<Self> {
        let d = mode_noise_coeffs(cfg)?;
        let n = cfg.modes;
        let lam: Vec<f64> = (0..n).map(|r| cfg.p - cfg.lambda_hat(cfg.mode_number(r))).collect();
        let sig: Vec<[f64; 2]> = (0..n)
            .map(|r| {
                let lift = cfg.c + cfg.lambda_hat(cfg.mode_number(r));
                [lift * d[r][0] * cfg.noise_gains[0], lift * d[r][1] * cfg.noise_gains[1]]
            })
            .collect();
        let cov = Mat::from_fn(n, n, |a, b| {
            let s = lam[a] + lam[b];
            let kernel = if s == 0.0 { dt } else { (s * dt).exp_m1() / s };
            (sig[a][0] * sig[b][0] + sig[a][1] * sig[b][1]) * kernel
        });
        // The step covariance has numerical rank close to 2 for small dt, so a
        // clamped symmetric eigendecomposition is used instead of Cholesky.
        let evd = cov
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| EwsError::Solver(format!("{e:?}")))?;
        let u = evd.U();
        let s = evd.S().column_vector();
        let factor = Mat::from_fn(n, n, |a, b| u[(a, b)] * s[b].max(0.0).sqrt());
        Ok(Self { decay: lam.iter().map(|l| (l * dt).exp()).collect(), factor })
    }
}

/// Simulates all retained modes.
pub fn simulate_modes(cfg: &HeatModelConfig, t_end: f64, dt: f64, seed: u64) -> Result<ModeTrajectory> {
    let all: Vec<usize> = (0..cfg.modes).map(|r| cfg.mode_number(r)).collect();
    simulate_modes_recording(cfg, t_end, dt, seed, &all)
}

/// Simulates all retained modes jointly but stores only the listed mode numbers.
pub fn simulate_modes_recording(
    cfg: &HeatModelConfig,
    t_end: f64,
    dt: f64,
    seed: u64,
    record: &[usize],
) -> Result<ModeTrajectory> {
    cfg.validate()?;
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(EwsError::Invalid("need dt > 0 and t_end >= 0".into()));
    }
    let rows: Vec<usize> = record.iter().map(|&k| cfg.row_of(k)).collect::<Result<_>>()?;
    let steps = (t_end / dt).round() as usize;
    let step = OuStep::new(cfg, dt)?;
    let n = cfg.modes;
    let mut rng = rng_from_seed(seed);
    let mut u = vec![0.0; n];
    let mut eta = vec![0.0; n];
    let mut coeffs: Vec<Vec<f64>> = rows.iter().map(|_| Vec::with_capacity(steps + 1)).collect();
    for (c, &r) in coeffs.iter_mut().zip(&rows) {
        c.push(u[r]);
    }
    for _ in 0..steps {
        for e in eta.iter_mut() {
            *e = StandardNormal.sample(&mut rng);
        }
        for a in 0..n {
            let mut acc = step.decay[a] * u[a];
            for (b, e) in eta.iter().enumerate() {
                acc += step.factor[(a, b)] * e;
            }
            u[a] = acc;
        }
        for (c, &r) in coeffs.iter_mut().zip(&rows) {
            c.push(u[r]);
        }
    }
    Ok(ModeTrajectory { dt, seed, modes: record.to_vec(), coeffs })
}

//! Stochastic time stepping of the linearized and the nonlinear systems.

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::eigensolver::EigenSet;
use crate::error::{EwsError, Result};
use crate::rng::rng_from_seed;
use crate::sparse::{CsrMatrix, SparseLu, TripletBuilder};

use super::linear::noise_map;
use super::model::Discretization;
use super::StateFields;

/// Linear functional `Σ_m weights_m · v_m` on the dynamic vector `[ω; T; S]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    pub name: String,
    pub weights: Vec<Complex64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Omega,
    Temp,
    Salt,
}

/// Cell-area-weighted integral of one field over the nodes inside `[x1a, x1b] × [x2a, x2b]`.
pub fn indicator_observable(d: &Discretization, field: Field, rect: [f64; 4], name: &str) -> Result<Observable> {
    let np = d.layout.n_psi();
    let of = match field {
        Field::Omega => &d.layout.omega_of,
        Field::Temp => &d.layout.temp_of,
        Field::Salt => &d.layout.salt_of,
    };
    let mut weights = vec![Complex64::new(0.0, 0.0); d.n_dyn()];
    let mut hits = 0;
    for k in d.nodes_in_rect(rect) {
        if let Some(r) = of[k] {
            weights[r - np] = Complex64::new(d.weights_full[r], 0.0);
            hits += 1;
        }
    }
    if hits == 0 {
        return Err(EwsError::Invalid(format!("rectangle {rect:?} contains no nodes")));
    }
    Ok(Observable { name: name.to_string(), weights })
}

impl Observable {
    /// `<v, ℓ_i>_W`, the coefficient of the `i`-th eigenvector (0-based, spectral order).
    pub fn eigen_coefficient(set: &EigenSet, i: usize, name: &str) -> Self {
        let l = set.left.col(i);
        let weights = (0..set.dim()).map(|m| set.weights[m] * l[m].conj()).collect();
        Self { name: name.to_string(), weights }
    }

    pub fn eval(&self, v: &[f64]) -> Complex64 {
        self.weights.iter().zip(v).map(|(w, x)| w * x).sum()
    }
}

/// Time discretization of the linearized system.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeScheme {
    /// First order, L-stable; damps oscillatory modes by `|Im λ|²dt/2` in rate.
    #[default]
    ImplicitEuler,
    /// Second order trapezoidal rule; preserves the modulus of oscillatory modes.
    CrankNicolson,
}

impl TimeScheme {
    fn theta(self) -> f64 {
        match self {
            TimeScheme::ImplicitEuler => 1.0,
            TimeScheme::CrankNicolson => 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub t_end: f64,
    pub dt: f64,
    pub seed: u64,
    /// Euclidean distance of `S` from the steady state declaring a basin jump.
    pub jump_threshold: Option<f64>,
    /// Used by the linearized stepper only.
    #[serde(default)]
    pub scheme: TimeScheme,
}

impl SimOptions {
    pub fn new(t_end: f64, dt: f64, seed: u64) -> Self {
        Self { t_end, dt, seed, jump_threshold: None, scheme: TimeScheme::ImplicitEuler }
    }

    pub fn with_scheme(mut self, scheme: TimeScheme) -> Self {
        self.scheme = scheme;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub seed: u64,
    pub names: Vec<String>,
    /// `series[o][n]`: observable `o` at time `n·dt`, evaluated on the deviation from the steady state.
    pub series: Vec<Vec<Complex64>>,
    /// Time of the first basin jump, if any.
    pub jump_time: Option<f64>,
    pub max_salt_deviation: f64,
}

impl Trajectory {
    pub fn real_series(&self, o: usize) -> Vec<f64> {
        self.series[o].iter().map(|z| z.re).collect()
    }
}

/// `[[Δ, E_ω], [−h·A₂₁, I − h·A₂₂]]` built from the full Jacobian `jac` at the steady state.
fn step_matrix(d: &Discretization, jac: &CsrMatrix, dt: f64) -> Result<SparseLu> {
    let n = d.n_full();
    let np = d.layout.n_psi();
    let mut t = TripletBuilder::new(n, n);
    for (r, c, v) in jac.triplets() {
        if r < np {
            t.add(r, c, v);
        } else {
            t.add(r, c, -dt * v);
        }
    }
    for r in np..n {
        t.add(r, r, 1.0);
    }
    t.build().lu()
}

struct NoiseInjector {
    rows: Vec<usize>,
    amps: Vec<f64>,
}

impl NoiseInjector {
    fn new(d: &Discretization) -> Self {
        let np = d.layout.n_psi();
        let mut rows = Vec::new();
        let mut amps = Vec::new();
        for chan in noise_map(d) {
            for (r, a) in chan.into_iter().enumerate() {
                if a != 0.0 {
                    rows.push(np + r);
                    amps.push(a);
                }
            }
        }
        Self { rows, amps }
    }
}

fn check_opts(opts: &SimOptions) -> Result<usize> {
    if !(opts.dt > 0.0) || !(opts.t_end >= 0.0) {
        return Err(EwsError::Invalid("need dt > 0 and t_end >= 0".into()));
    }
    Ok((opts.t_end / opts.dt).round() as usize)
}

/// θ-method (implicit Euler or Crank–Nicolson) for the linearized system driven by surface
/// salinity noise, started from zero. The ψ rows are enforced at every step.
pub fn simulate_linearized(
    d: &Discretization,
    state: &StateFields,
    opts: &SimOptions,
    observables: &[Observable],
) -> Result<Trajectory> {
    let steps = check_opts(opts)?;
    let x_star = d.to_vector(state);
    let jac = d.jacobian(&x_star);
    let theta = opts.scheme.theta();
    let lu = step_matrix(d, &jac, theta * opts.dt)?;
    let explicit = (1.0 - theta) * opts.dt;
    let mut jx = vec![0.0; d.n_full()];
    let noise = NoiseInjector::new(d);
    let np = d.layout.n_psi();
    let n = d.n_full();
    let sq = opts.dt.sqrt();
    let mut rng = rng_from_seed(opts.seed);
    let mut x = vec![0.0; n];
    let mut series: Vec<Vec<Complex64>> = observables.iter().map(|_| Vec::with_capacity(steps + 1)).collect();
    let record = |x: &[f64], series: &mut Vec<Vec<Complex64>>| {
        for (s, o) in series.iter_mut().zip(observables) {
            s.push(o.eval(&x[np..]));
        }
    };
    record(&x, &mut series);
    let mut max_dev: f64 = 0.0;
    for step in 0..steps {
        if explicit > 0.0 {
            jac.mul_vec_into(&x, &mut jx);
            for r in np..n {
                x[r] += explicit * jx[r];
            }
        }
        for v in x[..np].iter_mut() {
            *v = 0.0;
        }
        for (&r, &a) in noise.rows.iter().zip(&noise.amps) {
            let eta: f64 = StandardNormal.sample(&mut rng);
            x[r] += sq * a * eta;
        }
        lu.solve_in_place(&mut x).map_err(|_| EwsError::BlowUp(step))?;
        if !x.iter().all(|v| v.is_finite()) {
            return Err(EwsError::BlowUp(step));
        }
        record(&x, &mut series);
        max_dev = max_dev.max(salt_distance(d, &x, None));
    }
    Ok(Trajectory {
        dt: opts.dt,
        seed: opts.seed,
        names: observables.iter().map(|o| o.name.clone()).collect(),
        series,
        jump_time: None,
        max_salt_deviation: max_dev,
    })
}

fn salt_distance(d: &Discretization, x: &[f64], reference: Option<&[f64]>) -> f64 {
    d.layout
        .salt_range()
        .map(|r| {
            let base = reference.map_or(0.0, |s| s[r]);
            (x[r] - base).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// Linearly implicit Euler for the nonlinear system started at a steady state:
/// `(M − dt·J*)Δx = dt·F(xₙ) + √dt·Bη` with `J*` the Jacobian at the steady state.
pub fn simulate_nonlinear(
    d: &Discretization,
    state: &StateFields,
    opts: &SimOptions,
    observables: &[Observable],
) -> Result<Trajectory> {
    let steps = check_opts(opts)?;
    let x_star = d.to_vector(state);
    let lu = step_matrix(d, &d.jacobian(&x_star), opts.dt)?;
    let noise = NoiseInjector::new(d);
    let np = d.layout.n_psi();
    let sq = opts.dt.sqrt();
    let mut rng = rng_from_seed(opts.seed);
    let mut x = x_star.clone();
    let mut series: Vec<Vec<Complex64>> = observables.iter().map(|_| Vec::with_capacity(steps + 1)).collect();
    let mut dev = vec![0.0; d.n_dyn()];
    let mut record = |x: &[f64], series: &mut Vec<Vec<Complex64>>| {
        for (m, v) in dev.iter_mut().enumerate() {
            *v = x[np + m] - x_star[np + m];
        }
        for (s, o) in series.iter_mut().zip(observables) {
            s.push(o.eval(&dev));
        }
    };
    record(&x, &mut series);
    let mut jump_time = None;
    let mut max_dev: f64 = 0.0;
    for step in 0..steps {
        let f = d.rhs(&x);
        let mut dx: Vec<f64> = f.iter().enumerate().map(|(r, v)| if r < np { -v } else { opts.dt * v }).collect();
        for (&r, &a) in noise.rows.iter().zip(&noise.amps) {
            let eta: f64 = StandardNormal.sample(&mut rng);
            dx[r] += sq * a * eta;
        }
        lu.solve_in_place(&mut dx).map_err(|_| EwsError::BlowUp(step))?;
        for (a, s) in x.iter_mut().zip(&dx) {
            *a += s;
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(EwsError::BlowUp(step));
        }
        record(&x, &mut series);
        let dist = salt_distance(d, &x, Some(&x_star));
        max_dev = max_dev.max(dist);
        if jump_time.is_none() {
            if let Some(th) = opts.jump_threshold {
                if dist > th {
                    jump_time = Some((step + 1) as f64 * opts.dt);
                }
            }
        }
    }
    Ok(Trajectory {
        dt: opts.dt,
        seed: opts.seed,
        names: observables.iter().map(|o| o.name.clone()).collect(),
        series,
        jump_time,
        max_salt_deviation: max_dev,
    })
}

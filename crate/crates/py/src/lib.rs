//! Python bindings: heat-equation models, spectral autocovariances, estimators, and the
//! Boussinesq steady states with their leading spectra.

use ews_core::boussinesq::{
    assemble_linearization, build_grid, leading_eigenvalues, pitchfork_threshold, saddle_node_southward_state,
    thermohaline_state, BoussinesqParams, Discretization, StateFields,
};
use ews_core::estimators::{self, ScalarSeries};
use ews_core::heat1d::{self, BoundaryKind, HeatModelConfig};
use ews_core::spectral;
use ews_core::{Complex64, EwsError};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: EwsError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn boundary(bc: &str) -> PyResult<BoundaryKind> {
    match bc {
        "neumann" => Ok(BoundaryKind::Neumann),
        "dirichlet" => Ok(BoundaryKind::Dirichlet),
        _ => Err(PyValueError::new_err(format!("bc must be 'neumann' or 'dirichlet', got {bc:?}"))),
    }
}

/// One-dimensional heat equation with boundary white noise, in its eigenbasis.
#[pyclass(name = "HeatModel", from_py_object)]
#[derive(Clone)]
pub struct PyHeatModel {
    cfg: HeatModelConfig,
}

#[pymethods]
impl PyHeatModel {
    #[new]
    #[pyo3(signature = (bc, p, length = 1.0, c = 1.0, alpha = -0.6, modes = 32, gains = (1.0, 1.0)))]
    fn new(bc: &str, p: f64, length: f64, c: f64, alpha: f64, modes: usize, gains: (f64, f64)) -> PyResult<Self> {
        let cfg = HeatModelConfig { length, p, bc: boundary(bc)?, c, alpha, modes, noise_gains: [gains.0, gains.1] };
        cfg.validate().map_err(err)?;
        Ok(Self { cfg })
    }

    #[getter]
    fn p(&self) -> f64 {
        self.cfg.p
    }

    fn threshold(&self) -> f64 {
        self.cfg.threshold()
    }

    /// `E[u_k(t+τ) u_l(t)]` in the stationary regime.
    fn stationary_cov(&self, k: usize, l: usize, tau: f64) -> PyResult<Complex64> {
        heat1d::stationary_cov_entry(k, l, tau, &self.cfg).map_err(err)
    }

    fn weighted_cov(&self, i: usize, j: usize, tau: f64) -> PyResult<Complex64> {
        heat1d::weighted_cov_entry(i, j, tau, &self.cfg).map_err(err)
    }

    fn wellposedness_integral(&self, k_prime: usize) -> PyResult<f64> {
        heat1d::wellposedness_integral(&self.cfg, k_prime).map_err(err)
    }

    /// Exact Ornstein–Uhlenbeck sampling; returns one list per recorded mode number.
    #[pyo3(signature = (t_end, dt, seed, record = vec![0]))]
    fn simulate(&self, t_end: f64, dt: f64, seed: u64, record: Vec<usize>) -> PyResult<Vec<Vec<f64>>> {
        Ok(heat1d::simulate_modes_recording(&self.cfg, t_end, dt, seed, &record).map_err(err)?.coeffs)
    }
}

/// Generalized-eigenbasis model: Jordan blocks, shift `q` and coupling matrix, read from JSON.
#[pyclass(name = "SpectralModel", from_py_object)]
#[derive(Clone)]
pub struct PySpectralModel {
    model: spectral::SpectralModel,
}

#[pymethods]
impl PySpectralModel {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { model: spectral::SpectralModel::from_json(text).map_err(err)? })
    }

    fn to_json(&self) -> String {
        self.model.to_json()
    }

    fn n_slots(&self) -> usize {
        self.model.n_slots()
    }

    fn autocov_pair(&self, i: usize, j: usize, tau: f64) -> PyResult<Complex64> {
        spectral::autocov_pair(i, j, tau, &self.model).map_err(err)
    }

    fn autocov_jordan(&self, i: usize, k1: usize, j: usize, k2: usize, tau: f64) -> PyResult<Complex64> {
        spectral::autocov_jordan(i, k1, j, k2, tau, &self.model).map_err(err)
    }

    fn autocorr_asymptotic(&self, i: usize, tau: f64) -> PyResult<Complex64> {
        spectral::autocorr_asymptotic(i, tau, &self.model).map_err(err)
    }
}

fn series(values: Vec<Complex64>, dt: f64, burn_in: Option<usize>) -> ScalarSeries {
    let s = ScalarSeries::from_complex(dt, values);
    match burn_in {
        Some(b) => s.with_burn_in(b),
        None => s,
    }
}

/// Centered temporal autocovariance at lag `tau`; real inputs are accepted as complex.
#[pyfunction]
#[pyo3(signature = (values, dt, tau, burn_in = None))]
fn temporal_autocov(values: Vec<Complex64>, dt: f64, tau: f64, burn_in: Option<usize>) -> PyResult<Complex64> {
    let s = series(values, dt, burn_in);
    estimators::temporal_autocov_complex(&s, &s, tau).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (values, dt, max_tau, burn_in = None))]
fn autocorr_curve(values: Vec<Complex64>, dt: f64, max_tau: f64, burn_in: Option<usize>) -> PyResult<Vec<Complex64>> {
    estimators::autocorr_curve(&series(values, dt, burn_in), max_tau).map_err(err)
}

/// `(mean, std)` of `log10` over positive values.
#[pyfunction]
fn ensemble_logstats(values: Vec<f64>) -> PyResult<(f64, f64)> {
    let e = estimators::ensemble_logstats(&values).map_err(err)?;
    Ok((e.mean_log10, e.std_log10))
}

#[pyfunction]
fn task_key(experiment: &str, p: f64, seed: u64) -> u64 {
    ews_core::rng::task_key(experiment, p, seed)
}

/// Discretized Boussinesq model of one regime at parameter `p`.
#[pyclass(name = "Boussinesq", unsendable)]
pub struct PyBoussinesq {
    regime: u8,
    d: Discretization,
    state: Option<StateFields>,
}

#[pymethods]
impl PyBoussinesq {
    #[new]
    #[pyo3(signature = (p, regime = 1, m = 19, n = 39))]
    fn new(p: f64, regime: u8, m: usize, n: usize) -> PyResult<Self> {
        let params = match regime {
            1 => BoussinesqParams::regime1(p),
            2 => BoussinesqParams::regime2(p),
            _ => return Err(PyValueError::new_err("regime must be 1 or 2")),
        };
        let g = build_grid(m, n, params.length).map_err(err)?;
        Ok(Self { regime, d: Discretization::new(&g, &params).map_err(err)?, state: None })
    }

    #[getter]
    fn p(&self) -> f64 {
        self.d.params.p
    }

    /// Computes the reference steady state (thermohaline in regime 1, southward sinking in
    /// regime 2) and returns `(max ψ, min ψ)`.
    fn steady_state(&mut self) -> PyResult<(f64, f64)> {
        let p = self.d.params.p;
        let s = if self.regime == 2 {
            saddle_node_southward_state(&self.d, p)
        } else {
            thermohaline_state(&self.d, p, p)
        }
        .map_err(err)?;
        let out = (s.max_psi(), s.min_psi());
        self.state = Some(s);
        Ok(out)
    }

    /// Leading `k` eigenvalues of the linearization about the steady state, by decreasing real part.
    fn leading_eigenvalues(&mut self, k: usize) -> PyResult<Vec<Complex64>> {
        if self.state.is_none() {
            self.steady_state()?;
        }
        let lin = assemble_linearization(&self.d, self.state.as_ref().unwrap()).map_err(err)?;
        leading_eigenvalues(&lin, k).map_err(err)
    }

    /// Field values of the steady state as a dict of flat lists, row-major over `(i, j)`.
    fn fields(&mut self) -> PyResult<std::collections::HashMap<&'static str, Vec<f64>>> {
        if self.state.is_none() {
            self.steady_state()?;
        }
        let s = self.state.as_ref().unwrap();
        Ok([("psi", s.psi.clone()), ("omega", s.omega.clone()), ("T", s.temp.clone()), ("S", s.salt.clone())]
            .into_iter()
            .collect())
    }

    /// Pitchfork threshold of the regime-1 thermohaline branch inside `[lo, hi]`.
    #[pyo3(signature = (lo = 0.045, hi = 0.075, tol = 1e-5))]
    fn pitchfork_threshold(&self, lo: f64, hi: f64, tol: f64) -> PyResult<f64> {
        if self.regime != 1 {
            return Err(PyValueError::new_err("the pitchfork threshold is defined for regime 1"));
        }
        Ok(pitchfork_threshold(&self.d, lo, hi, tol).map_err(err)?.p)
    }
}

#[pymodule]
fn ews_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyHeatModel>()?;
    m.add_class::<PySpectralModel>()?;
    m.add_class::<PyBoussinesq>()?;
    m.add_function(wrap_pyfunction!(temporal_autocov, m)?)?;
    m.add_function(wrap_pyfunction!(autocorr_curve, m)?)?;
    m.add_function(wrap_pyfunction!(ensemble_logstats, m)?)?;
    m.add_function(wrap_pyfunction!(task_key, m)?)?;
    Ok(())
}

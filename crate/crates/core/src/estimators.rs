//! Temporal and ensemble statistics of projected observables.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{EwsError, Result};

/// A sampled scalar observable. Real series are stored with zero imaginary part.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarSeries {
    pub dt: f64,
    pub values: Vec<Complex64>,
    pub burn_in: usize,
}

impl ScalarSeries {
    /// Real series with the default burn-in of 10% of the samples.
    pub fn from_real(dt: f64, values: &[f64]) -> Self {
        Self::from_complex(dt, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn from_complex(dt: f64, values: Vec<Complex64>) -> Self {
        let burn_in = values.len() / 10;
        Self { dt, values, burn_in }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    fn window(&self) -> &[Complex64] {
        &self.values[self.burn_in.min(self.values.len())..]
    }

    pub fn lag_of(&self, tau: f64) -> usize {
        (tau / self.dt).round() as usize
    }
}

/// `Σ_m w_m · field_m · conj(direction_m)`.
pub fn project(field: &[f64], direction: &[Complex64], weights: &[f64]) -> Result<Complex64> {
    if field.len() != direction.len() || field.len() != weights.len() {
        return Err(EwsError::Invalid(format!(
            "length mismatch: field {}, direction {}, weights {}",
            field.len(),
            direction.len(),
            weights.len()
        )));
    }
    Ok(field.iter().zip(direction).zip(weights).map(|((f, d), w)| w * f * d.conj()).sum())
}

/// Real-direction shortcut of [`project`].
pub fn project_real(field: &[f64], direction: &[f64], weights: &[f64]) -> Result<f64> {
    if field.len() != direction.len() || field.len() != weights.len() {
        return Err(EwsError::Invalid("length mismatch".into()));
    }
    Ok(field.iter().zip(direction).zip(weights).map(|((f, d), w)| w * f * d).sum())
}

fn mean(xs: &[Complex64]) -> Complex64 {
    xs.iter().sum::<Complex64>() / xs.len() as f64
}

/// Centered lagged cross-covariance `(1/(T−lag)) Σ (s_{t+lag} − s̄) conj(r_t − r̄)`.
pub fn temporal_autocov_complex(s: &ScalarSeries, r: &ScalarSeries, tau: f64) -> Result<Complex64> {
    if (s.dt - r.dt).abs() > 1e-12 * s.dt.abs() {
        return Err(EwsError::Invalid("series have different time steps".into()));
    }
    let (a, b) = (s.window(), r.window());
    let n = a.len().min(b.len());
    let lag = s.lag_of(tau);
    if n < lag + 2 {
        return Err(EwsError::WindowTooShort { need: lag + 2, have: n });
    }
    let (a, b) = (&a[..n], &b[..n]);
    let (ma, mb) = (mean(a), mean(b));
    let count = n - lag;
    let acc: Complex64 = (0..count).map(|t| (a[t + lag] - ma) * (b[t] - mb).conj()).sum();
    Ok(acc / count as f64)
}

/// Real part of [`temporal_autocov_complex`]; exact for real series.
pub fn temporal_autocov(s: &ScalarSeries, r: &ScalarSeries, tau: f64) -> Result<f64> {
    Ok(temporal_autocov_complex(s, r, tau)?.re)
}

pub fn temporal_autocorr_complex(s: &ScalarSeries, r: &ScalarSeries, tau: f64) -> Result<Complex64> {
    let denom = temporal_autocov_complex(s, r, 0.0)?;
    if denom.norm() == 0.0 {
        return Err(EwsError::ZeroDenominator);
    }
    Ok(temporal_autocov_complex(s, r, tau)? / denom)
}

pub fn temporal_autocorr(s: &ScalarSeries, r: &ScalarSeries, tau: f64) -> Result<f64> {
    Ok(temporal_autocorr_complex(s, r, tau)?.re)
}

/// Autocorrelation at every lag `0, dt, …, max_tau` in one pass over the window.
pub fn autocorr_curve(s: &ScalarSeries, max_tau: f64) -> Result<Vec<Complex64>> {
    let w = s.window();
    let max_lag = s.lag_of(max_tau);
    if w.len() < max_lag + 2 {
        return Err(EwsError::WindowTooShort { need: max_lag + 2, have: w.len() });
    }
    let m = mean(w);
    let c: Vec<Complex64> = w.iter().map(|x| x - m).collect();
    let cov: Vec<Complex64> = (0..=max_lag)
        .map(|lag| {
            let count = c.len() - lag;
            (0..count).map(|t| c[t + lag] * c[t].conj()).sum::<Complex64>() / count as f64
        })
        .collect();
    if cov[0].norm() == 0.0 {
        return Err(EwsError::ZeroDenominator);
    }
    Ok(cov.iter().map(|v| v / cov[0]).collect())
}

/// `sqrt(∫ |a − b|² dτ)` with the trapezoid rule on a uniform lag grid.
pub fn l2_distance(a: &[f64], b: &[f64], dtau: f64) -> f64 {
    let n = a.len().min(b.len());
    if n < 2 {
        return 0.0;
    }
    let sq: Vec<f64> = (0..n).map(|k| (a[k] - b[k]).powi(2)).collect();
    let inner: f64 = sq[1..n - 1].iter().sum();
    ((inner + 0.5 * (sq[0] + sq[n - 1])) * dtau).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub mean_log10: f64,
    pub std_log10: f64,
    pub runs: usize,
}

/// Mean and population standard deviation of `log10` of positive values.
pub fn ensemble_logstats(values: &[f64]) -> Result<EnsembleSummary> {
    if values.is_empty() {
        return Err(EwsError::Invalid("no runs".into()));
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0)) {
        return Err(EwsError::Invalid(format!("nonpositive value {v}")));
    }
    let logs: Vec<f64> = values.iter().map(|v| v.log10()).collect();
    let n = logs.len() as f64;
    let m = logs.iter().sum::<f64>() / n;
    let var = logs.iter().map(|l| (l - m).powi(2)).sum::<f64>() / n;
    Ok(EnsembleSummary { mean_log10: m, std_log10: var.sqrt(), runs: values.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_direction_projects_to_zero() {
        let v = project(&[1.0, 2.0], &[Complex64::new(0.0, 0.0); 2], &[1.0, 1.0]).unwrap();
        assert_eq!(v, Complex64::new(0.0, 0.0));
        assert!(project(&[1.0], &[], &[1.0]).is_err());
    }

    #[test]
    fn indicator_on_unit_grid_gives_area() {
        let ones = vec![1.0; 12];
        assert_eq!(project_real(&ones, &ones, &vec![1.0; 12]).unwrap(), 12.0);
    }

    #[test]
    fn constant_series_has_zero_covariance() {
        let s = ScalarSeries::from_real(0.1, &[2.5; 100]);
        assert_eq!(temporal_autocov(&s, &s, 0.3).unwrap(), 0.0);
        assert_eq!(temporal_autocorr(&s, &s, 0.0), Err(EwsError::ZeroDenominator));
    }

    #[test]
    fn window_too_short() {
        let s = ScalarSeries::from_real(1.0, &[1.0, 2.0, 3.0]).with_burn_in(0);
        assert!(matches!(temporal_autocov(&s, &s, 5.0), Err(EwsError::WindowTooShort { .. })));
    }

    #[test]
    fn logstats_examples() {
        let s = ensemble_logstats(&[1.0, 10.0, 100.0]).unwrap();
        assert!((s.mean_log10 - 1.0).abs() < 1e-15);
        assert!((s.std_log10 - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(ensemble_logstats(&[5.0, 5.0]).unwrap().std_log10, 0.0);
        assert!(ensemble_logstats(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn l2_of_identical_curves_is_zero() {
        assert_eq!(l2_distance(&[1.0, 0.5, 0.2], &[1.0, 0.5, 0.2], 0.1), 0.0);
        assert!((l2_distance(&[1.0, 1.0], &[0.0, 0.0], 2.0) - 2f64.sqrt()).abs() < 1e-15);
    }
}

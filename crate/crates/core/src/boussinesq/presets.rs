//! Reproducible routes to the steady states used by the experiments.

use num_complex::Complex64;

use crate::eigensolver::{sorted_eigenvalues, FaerBackend};
use crate::error::{EwsError, Result};

use super::continuation::{continuation_natural, NaturalOptions};
use super::linear::{assemble_linearization, dense_schur, symmetric_split};
use super::model::Discretization;
use super::newton::{newton_solve, relax, NewtonOptions};
use super::StateFields;

/// Rest state plus a linear salinity tilt `amp·(x₂/L − 1/2)`, which seeds southward sinking.
pub fn tilted_rest(d: &Discretization, amp: f64) -> StateFields {
    let g = &d.grid;
    let mut s = StateFields::rest(g, &d.params);
    for k in 0..g.n_nodes() {
        let (_, j) = g.ij(k);
        s.salt[k] += amp * (g.x2[j] / g.length - 0.5);
    }
    s
}

/// Evenly spaced parameters from `from` to `to` with spacing at most `step`, computed from integers.
pub fn parameter_path(from: f64, to: f64, step: f64) -> Vec<f64> {
    let n = ((to - from).abs() / step).ceil().max(1.0) as usize;
    (0..=n).map(|i| if i == n { to } else { from + (to - from) * i as f64 / n as f64 }).collect()
}

/// Follows a steady state from `from` to `to` by natural continuation.
pub fn follow(d: &Discretization, state: &StateFields, from: f64, to: f64, step: f64) -> Result<StateFields> {
    if from == to {
        return Ok(newton_solve(&d.with_p(to), state, &NewtonOptions::default())?.0);
    }
    let path = parameter_path(from, to, step);
    let br = continuation_natural(d, &path, state, &NaturalOptions::default())?;
    if let Some(p) = br.halted_at {
        return Err(EwsError::Invalid(format!("continuation from {from} to {to} halted at p = {p}")));
    }
    Ok(br.points.last().expect("nonempty branch").state.clone())
}

/// Symmetric thermohaline state: relaxation from rest at `p_start`, then continuation to `p`.
pub fn thermohaline_state(d: &Discretization, p_start: f64, p: f64) -> Result<StateFields> {
    let d0 = d.with_p(p_start);
    let (s, _) = relax(&d0, &StateFields::rest(&d.grid, &d.params), 1e-3, 5000, &NewtonOptions::default())?;
    follow(d, &s, p_start, p, 0.005)
}

/// Asymmetric southward-sinking state of the pitchfork regime, reached from the tilted rest
/// state at `p = 0.07` and continued to `p` in steps of `10⁻³`.
pub fn pitchfork_asymmetric_state(d: &Discretization, p: f64) -> Result<StateFields> {
    let d0 = d.with_p(0.07);
    let (s, _) = relax(&d0, &tilted_rest(&d0, 0.05), 1e-3, 5000, &NewtonOptions::default())?;
    follow(d, &s, 0.07, p, 1e-3)
}

/// Southward-sinking state of the saddle-node regime, reached from the tilted rest state at
/// `p = 0.2` and continued to `p` in steps of `0.05`.
pub fn saddle_node_southward_state(d: &Discretization, p: f64) -> Result<StateFields> {
    let d0 = d.with_p(0.2);
    let (s, _) = relax(&d0, &tilted_rest(&d0, 0.05), 1e-3, 5000, &NewtonOptions::default())?;
    follow(d, &s, 0.2, p, 0.05)
}

/// Sorted eigenvalues of the reflection-even and reflection-odd restrictions of `A_S`.
pub fn sector_spectra(d: &Discretization, state: &StateFields) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let lin = assemble_linearization(d, state)?;
    let a = dense_schur(&lin)?;
    let (even, odd) = symmetric_split(&a, d)?;
    Ok((sorted_eigenvalues(&even, &FaerBackend)?, sorted_eigenvalues(&odd, &FaerBackend)?))
}

/// Leading odd-sector eigenvalue along the thermohaline branch.
pub fn odd_leading(d: &Discretization, state: &StateFields) -> Result<Complex64> {
    let lin = assemble_linearization(d, state)?;
    let a = dense_schur(&lin)?;
    let (_, odd) = symmetric_split(&a, d)?;
    Ok(sorted_eigenvalues(&odd, &FaerBackend)?[0])
}

#[derive(Clone, Debug, PartialEq)]
pub struct Crossing {
    pub p: f64,
    /// `(p, Re λ)` of every evaluation, in evaluation order.
    pub samples: Vec<(f64, f64)>,
}

/// Parameter where the leading odd eigenvalue of the thermohaline branch crosses zero,
/// located by the Illinois variant of regula falsi inside `[lo, hi]`.
pub fn pitchfork_threshold(d: &Discretization, lo: f64, hi: f64, tol: f64) -> Result<Crossing> {
    let mut samples = Vec::new();
    let mut state = thermohaline_state(d, lo, lo)?;
    let mut at = lo;
    let mut eval = |p: f64, samples: &mut Vec<(f64, f64)>| -> Result<f64> {
        state = follow(d, &state, at, p, 0.005)?;
        at = p;
        let v = odd_leading(&d.with_p(p), &state)?.re;
        samples.push((p, v));
        Ok(v)
    };
    let (mut a, mut b) = (lo, hi);
    let mut fa = eval(a, &mut samples)?;
    let mut fb = eval(b, &mut samples)?;
    if fa.signum() == fb.signum() {
        return Err(EwsError::Invalid(format!("no sign change on [{lo}, {hi}]: {fa}, {fb}")));
    }
    let mut side = 0;
    while (b - a).abs() > tol {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = eval(c, &mut samples)?;
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if fc == 0.0 {
            return Ok(Crossing { p: c, samples });
        }
        if samples.len() > 60 {
            return Err(EwsError::Invalid("threshold search did not converge".into()));
        }
    }
    let p = (a * fb - b * fa) / (fb - fa);
    Ok(Crossing { p, samples })
}

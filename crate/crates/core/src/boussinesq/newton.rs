use serde::{Deserialize, Serialize};

use crate::error::{EwsError, Result};
use crate::sparse::TripletBuilder;

use super::model::{max_abs, Discretization};
use super::StateFields;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Target value of `Σ w S`; `None` keeps the integral of the initial guess.
    pub salt_integral: Option<f64>,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 30, salt_integral: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual: f64,
}

/// Bordered Jacobian: `[J c; wᵀ 0]`, with `c = w` on the salinity rows.
///
/// The constraint row fixes `Σ w S` and removes the salinity-translation null direction.
pub(crate) fn bordered_jacobian(d: &Discretization, x: &[f64]) -> crate::sparse::CsrMatrix {
    let n = d.n_full();
    let jac = d.jacobian(x);
    let mut t = TripletBuilder::new(n + 1, n + 1);
    for (r, c, v) in jac.triplets() {
        t.add(r, c, v);
    }
    for r in d.layout.salt_range() {
        t.add(r, n, d.weights_full[r]);
        t.add(n, r, d.weights_full[r]);
    }
    t.build()
}

fn bordered_residual(d: &Discretization, x: &[f64], mu: f64, target: f64) -> Vec<f64> {
    let mut f = d.rhs(x);
    for r in d.layout.salt_range() {
        f[r] += mu * d.weights_full[r];
    }
    f.push(d.salt_integral(x) - target);
    f
}

/// Newton's method on the steady equations with the salinity integral pinned.
pub fn newton_solve(
    d: &Discretization,
    initial: &StateFields,
    opts: &NewtonOptions,
) -> Result<(StateFields, NewtonReport)> {
    if !initial.is_finite() {
        return Err(EwsError::Invalid("initial guess is not finite".into()));
    }
    let mut x = d.to_vector(initial);
    let report = newton_in_place(d, &mut x, opts)?;
    Ok((d.to_state(&x), report))
}

pub(crate) fn newton_in_place(d: &Discretization, x: &mut Vec<f64>, opts: &NewtonOptions) -> Result<NewtonReport> {
    let n = d.n_full();
    let target = opts.salt_integral.unwrap_or_else(|| d.salt_integral(x));
    let mut mu = 0.0;
    let mut f = bordered_residual(d, x, mu, target);
    let mut res = max_abs(&f[..n]).max(f[n].abs());
    for it in 0..opts.max_iter {
        if res < opts.tol {
            return Ok(NewtonReport { iterations: it, residual: max_abs(&d.rhs(x)) });
        }
        let lu = bordered_jacobian(d, x).lu()?;
        let mut step: Vec<f64> = f.iter().map(|v| -v).collect();
        lu.solve_in_place(&mut step)?;
        // Backtracking on the max-norm residual.
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a + lambda * s).collect();
            let trial_mu = mu + lambda * step[n];
            let ft = bordered_residual(d, &trial, trial_mu, target);
            let rt = max_abs(&ft[..n]).max(ft[n].abs());
            if rt.is_finite() && (rt < res || lambda < 1.0 / 64.0) {
                *x = trial;
                mu = trial_mu;
                f = ft;
                res = rt;
                break;
            }
            lambda *= 0.5;
        }
        if !res.is_finite() {
            return Err(EwsError::NewtonFailed { iters: it + 1, residual: res });
        }
    }
    if res < opts.tol {
        return Ok(NewtonReport { iterations: opts.max_iter, residual: max_abs(&d.rhs(x)) });
    }
    Err(EwsError::NewtonFailed { iters: opts.max_iter, residual: res })
}

/// Pseudo-transient continuation: linearly implicit Euler steps with a growing time step,
/// finished by Newton once the residual is small. Follows the dynamics early on, so it
/// settles on attracting states.
pub fn relax(
    d: &Discretization,
    initial: &StateFields,
    dt0: f64,
    max_steps: usize,
    opts: &NewtonOptions,
) -> Result<(StateFields, NewtonReport)> {
    let n = d.n_full();
    let np = d.layout.n_psi();
    let mut x = d.to_vector(initial);
    let mut dt = dt0;
    let mut f = d.rhs(&x);
    let mut res = max_abs(&f);
    for step in 0..max_steps {
        if res < 1e-6 {
            break;
        }
        let jac = d.jacobian(&x);
        let mut t = TripletBuilder::new(n, n);
        for (r, c, v) in jac.triplets() {
            // ψ rows are algebraic: keep them as Δψ + ω = 0.
            if r < np {
                t.add(r, c, v);
            } else {
                t.add(r, c, -v);
            }
        }
        for r in np..n {
            t.add(r, r, 1.0 / dt);
        }
        let lu = t.build().lu()?;
        let mut dx: Vec<f64> = f.iter().enumerate().map(|(r, v)| if r < np { -v } else { *v }).collect();
        lu.solve_in_place(&mut dx)?;
        for (a, s) in x.iter_mut().zip(&dx) {
            *a += s;
        }
        let f_new = d.rhs(&x);
        let r_new = max_abs(&f_new);
        if !r_new.is_finite() {
            return Err(EwsError::BlowUp(step));
        }
        dt = (dt * (res / r_new).clamp(0.5, 2.0)).min(1e6);
        f = f_new;
        res = r_new;
    }
    let report = newton_in_place(d, &mut x, opts)?;
    Ok((d.to_state(&x), report))
}

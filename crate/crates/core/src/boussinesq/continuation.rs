//! Natural-parameter and pseudo-arclength continuation in `p`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{EwsError, Result};
use crate::sparse::SparseLu;

use super::linear::{assemble_linearization, leading_eigenvalues};
use super::model::{max_abs, Discretization};
use super::newton::{bordered_jacobian, newton_in_place, NewtonOptions};
use super::StateFields;

/// Eigenvalues with modulus below this are the salinity-translation zero.
const STRUCTURAL_ZERO: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub p: f64,
    pub state: StateFields,
    /// Leading eigenvalues of the Schur complement, descending real part; empty if not requested.
    pub leading: Vec<Complex64>,
    /// `None` when no eigenvalues were computed.
    pub stable: Option<bool>,
    pub arclength: f64,
    pub max_psi: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    /// Parameter values of detected folds.
    pub folds: Vec<f64>,
    /// Set when natural continuation stopped early: the last `p` it converged at.
    pub halted_at: Option<f64>,
}

impl Branch {
    pub fn p_values(&self) -> Vec<f64> {
        self.points.iter().map(|b| b.p).collect()
    }

    pub fn to_csv(&self) -> String {
        let m = self.points.iter().map(|b| b.leading.len()).max().unwrap_or(0);
        let mut out = String::from("p,max_psi,min_psi,stable,arclength");
        for k in 1..=m {
            out.push_str(&format!(",re_lambda{k},im_lambda{k}"));
        }
        out.push('\n');
        for b in &self.points {
            let st = match b.stable {
                Some(true) => "1",
                Some(false) => "0",
                None => "",
            };
            out.push_str(&format!("{},{},{},{},{}", b.p, b.max_psi, b.state.min_psi(), st, b.arclength));
            for k in 0..m {
                match b.leading.get(k) {
                    Some(z) => out.push_str(&format!(",{},{}", z.re, z.im)),
                    None => out.push_str(",,"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// All eigenvalues have negative real part, ignoring the structural zero.
pub fn is_stable(leading: &[Complex64]) -> bool {
    leading.iter().all(|z| z.norm() < STRUCTURAL_ZERO || z.re < 0.0)
}

fn make_point(
    d: &Discretization,
    x: &[f64],
    p: f64,
    s: f64,
    n_eigs: usize,
) -> Result<BranchPoint> {
    let dp = d.with_p(p);
    let state = dp.to_state(x);
    let (leading, stable) = if n_eigs > 0 {
        let lin = assemble_linearization(&dp, &state)?;
        let vals = leading_eigenvalues(&lin, n_eigs)?;
        let st = is_stable(&vals);
        (vals, Some(st))
    } else {
        (Vec::new(), None)
    };
    Ok(BranchPoint {
        p,
        max_psi: state.max_psi(),
        residual: max_abs(&dp.rhs(x)),
        state,
        leading,
        stable,
        arclength: s,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NaturalOptions {
    pub newton: NewtonOptions,
    /// Leading eigenvalues computed per point (0 skips the eigenproblem).
    pub n_eigs: usize,
    pub max_halvings: usize,
}

impl Default for NaturalOptions {
    fn default() -> Self {
        Self { newton: NewtonOptions::default(), n_eigs: 0, max_halvings: 6 }
    }
}

/// Steps through `p_list`, each point seeded by a secant extrapolation of the previous two.
///
/// A failed Newton solve is retried with halved parameter steps; when those also fail the
/// branch is returned with `halted_at` set, which signals a fold (or a loss of the branch).
pub fn continuation_natural(
    d: &Discretization,
    p_list: &[f64],
    initial: &StateFields,
    opts: &NaturalOptions,
) -> Result<Branch> {
    if p_list.is_empty() {
        return Err(EwsError::Invalid("empty parameter list".into()));
    }
    let increasing = p_list.windows(2).all(|w| w[1] > w[0]);
    let decreasing = p_list.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) {
        return Err(EwsError::Invalid("parameter list must be strictly monotone".into()));
    }
    let mut x = d.to_vector(initial);
    let target = d.salt_integral(&x);
    let nopts = NewtonOptions { salt_integral: Some(target), ..opts.newton.clone() };
    let d0 = d.with_p(p_list[0]);
    newton_in_place(&d0, &mut x, &nopts)?;
    let mut branch = Branch::default();
    let mut prev: Option<(f64, Vec<f64>)> = None;
    let mut p_cur = p_list[0];
    let mut s = 0.0;
    branch.points.push(make_point(d, &x, p_cur, s, opts.n_eigs)?);
    for &p_next in &p_list[1..] {
        let mut reached = p_cur;
        let mut h = p_next - p_cur;
        let mut halvings = 0;
        while (reached - p_next).abs() > 1e-14 * p_next.abs().max(1.0) {
            let p_try = if (reached + h - p_next) * h.signum() > 0.0 { p_next } else { reached + h };
            let mut guess = x.clone();
            if let Some((pp, xp)) = &prev {
                let r = (p_try - reached) / (reached - pp);
                if r.is_finite() && r.abs() <= 4.0 {
                    for (g, (a, b)) in guess.iter_mut().zip(x.iter().zip(xp)) {
                        *g = a + r * (a - b);
                    }
                }
            }
            match newton_in_place(&d.with_p(p_try), &mut guess, &nopts) {
                Ok(_) => {
                    s += (p_try - reached).abs();
                    prev = Some((reached, std::mem::replace(&mut x, guess)));
                    reached = p_try;
                }
                Err(EwsError::NewtonFailed { .. }) | Err(EwsError::Solver(_)) => {
                    halvings += 1;
                    if halvings > opts.max_halvings {
                        branch.halted_at = Some(reached);
                        branch.folds.push(reached);
                        return Ok(branch);
                    }
                    h *= 0.5;
                }
                Err(e) => return Err(e),
            }
        }
        p_cur = p_next;
        branch.points.push(make_point(d, &x, p_cur, s, opts.n_eigs)?);
    }
    Ok(branch)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArclengthOptions {
    pub ds: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub max_steps: usize,
    /// Stop after this many folds.
    pub max_folds: Option<usize>,
    pub n_eigs: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Initial direction in `p`: `+1` or `−1`.
    pub direction: f64,
}

impl Default for ArclengthOptions {
    fn default() -> Self {
        Self {
            ds: 0.05,
            ds_min: 1e-6,
            ds_max: 0.5,
            p_min: f64::NEG_INFINITY,
            p_max: f64::INFINITY,
            max_steps: 500,
            max_folds: None,
            n_eigs: 0,
            tol: 1e-8,
            max_iter: 12,
            direction: 1.0,
        }
    }
}

/// Augmented unknowns `(x, μ, p)`; `μ` multiplies the salinity weights and is zero on solutions.
struct Augmented<'a> {
    d: &'a Discretization,
    n: usize,
    target: f64,
    theta: f64,
}

impl Augmented<'_> {
    /// Factorization of the bordered Jacobian in `(x, μ)` and the solve `J_b z = ∂F/∂p`.
    fn factor(&self, y: &[f64]) -> Result<(SparseLu, Vec<f64>)> {
        let n = self.n;
        let lu = bordered_jacobian(&self.d.with_p(y[n + 1]), &y[..n]).lu()?;
        let mut z = self.d.affine_p.clone();
        z.push(0.0);
        lu.solve_in_place(&mut z)?;
        Ok((lu, z))
    }

    fn residual(&self, y: &[f64], y_pred: &[f64], t: &[f64]) -> Vec<f64> {
        let n = self.n;
        let p = y[n + 1];
        let mu = y[n];
        let mut f = self.d.rhs_at(&y[..n], p);
        for r in self.d.layout.salt_range() {
            f[r] += mu * self.d.weights_full[r];
        }
        f.push(self.d.salt_integral(&y[..n]) - self.target);
        let mut arc = t[n + 1] * (y[n + 1] - y_pred[n + 1]);
        for c in 0..n {
            arc += self.theta * t[c] * (y[c] - y_pred[c]);
        }
        f.push(arc);
        f
    }

    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = self.n;
        self.theta * (0..n).map(|c| a[c] * b[c]).sum::<f64>() + a[n + 1] * b[n + 1]
    }

    /// Unit tangent `(−z, 1)/‖·‖` at `y`, oriented along `t_prev`.
    fn tangent(&self, y: &[f64], t_prev: &[f64]) -> Result<Vec<f64>> {
        let (_, z) = self.factor(y)?;
        let mut t: Vec<f64> = z.iter().map(|v| -v).collect();
        t.push(1.0);
        let nr = self.dot(&t, &t).sqrt();
        let sign = if self.dot(&t, t_prev) < 0.0 { -1.0 } else { 1.0 };
        Ok(t.iter().map(|v| sign * v / nr).collect())
    }

    /// Newton on the augmented system by block elimination of the arclength row.
    fn correct(&self, y: &mut [f64], t: &[f64], tol: f64, max_iter: usize) -> Result<usize> {
        let n = self.n;
        let y_pred = y.to_vec();
        for it in 0..max_iter {
            let f = self.residual(y, &y_pred, t);
            let res = max_abs(&f);
            if !res.is_finite() {
                break;
            }
            if res < tol {
                return Ok(it);
            }
            let (lu, z) = self.factor(y)?;
            let mut w: Vec<f64> = f[..=n].iter().map(|v| -v).collect();
            lu.solve_in_place(&mut w)?;
            let tw = self.theta * (0..n).map(|c| t[c] * w[c]).sum::<f64>();
            let tz = self.theta * (0..n).map(|c| t[c] * z[c]).sum::<f64>();
            let dp = (-f[n + 1] - tw) / (t[n + 1] - tz);
            if !dp.is_finite() {
                break;
            }
            for c in 0..=n {
                y[c] += w[c] - dp * z[c];
            }
            y[n + 1] += dp;
        }
        Err(EwsError::NewtonFailed { iters: max_iter, residual: max_abs(&self.residual(y, &y_pred, t)) })
    }

    fn norm(&self, t: &[f64]) -> f64 {
        self.dot(t, t).sqrt()
    }
}

/// Vertex of the parabola through three `(s, p)` samples; falls back to the middle value.
fn fold_estimate(s: [f64; 3], p: [f64; 3]) -> f64 {
    let d1 = (p[1] - p[0]) / (s[1] - s[0]);
    let d2 = (p[2] - p[1]) / (s[2] - s[1]);
    let a = (d2 - d1) / (s[2] - s[0]);
    if a.abs() < 1e-300 || !a.is_finite() {
        return p[1];
    }
    // p(s) = p0 + d1 (s − s0) + a (s − s0)(s − s1)
    let b = d1 - a * (s[0] + s[1]);
    let c = p[0] - d1 * s[0] + a * s[0] * s[1];
    let s_star = -b / (2.0 * a);
    let v = a * s_star * s_star + b * s_star + c;
    if v.is_finite() { v } else { p[1] }
}

/// Pseudo-arclength continuation from a converged `initial` at `d.params.p`.
///
/// Unknowns are scaled so that the state contributes its mean square to the arclength
/// norm. A fold is detected when the `p`-component of the tangent changes sign and is
/// located by a parabola through the last three points.
pub fn continuation_arclength(
    d: &Discretization,
    initial: &StateFields,
    opts: &ArclengthOptions,
) -> Result<Branch> {
    if !(opts.ds > 0.0 && opts.ds_min > 0.0 && opts.ds_max >= opts.ds_min) {
        return Err(EwsError::Invalid("need 0 < ds_min <= ds_max and ds > 0".into()));
    }
    let n = d.n_full();
    let mut x = d.to_vector(initial);
    let target = d.salt_integral(&x);
    let nopts = NewtonOptions { tol: opts.tol, max_iter: 30, salt_integral: Some(target) };
    newton_in_place(d, &mut x, &nopts)?;
    let aug = Augmented { d, n, target, theta: 1.0 / n as f64 };
    let mut y = x.clone();
    y.push(0.0);
    y.push(d.params.p);

    // Initial tangent: dx/dp from the bordered Jacobian, oriented by `direction`.
    let lu = bordered_jacobian(d, &x).lu()?;
    let mut rhs: Vec<f64> = d.affine_p.iter().map(|v| -v).collect();
    rhs.push(0.0);
    lu.solve_in_place(&mut rhs)?;
    let mut t = rhs;
    t.push(1.0);
    let sign = if opts.direction < 0.0 { -1.0 } else { 1.0 };
    let nr = aug.norm(&t);
    t.iter_mut().for_each(|v| *v *= sign / nr);

    let mut branch = Branch::default();
    let mut s = 0.0;
    branch.points.push(make_point(d, &y[..n], y[n + 1], s, opts.n_eigs)?);
    let mut hist: Vec<(f64, f64)> = vec![(s, y[n + 1])];
    let mut ds = opts.ds;
    for _ in 0..opts.max_steps {
        let mut trial: Vec<f64> = y.iter().zip(&t).map(|(a, b)| a + ds * b).collect();
        match aug.correct(&mut trial, &t, opts.tol, opts.max_iter) {
            Ok(iters) => {
                let t_new = aug.tangent(&trial, &t)?;
                s += ds;
                if t_new[n + 1] * t[n + 1] < 0.0 && hist.len() >= 2 {
                    let k = hist.len();
                    let ss = [hist[k - 2].0, hist[k - 1].0, s];
                    let ps = [hist[k - 2].1, hist[k - 1].1, trial[n + 1]];
                    branch.folds.push(fold_estimate(ss, ps));
                } else if t_new[n + 1] * t[n + 1] < 0.0 {
                    branch.folds.push(0.5 * (y[n + 1] + trial[n + 1]));
                }
                y = trial;
                t = t_new;
                let p = y[n + 1];
                hist.push((s, p));
                branch.points.push(make_point(d, &y[..n], p, s, opts.n_eigs)?);
                if p > opts.p_max || p < opts.p_min {
                    break;
                }
                if opts.max_folds.is_some_and(|m| branch.folds.len() >= m) {
                    break;
                }
                if iters <= 3 {
                    ds = (ds * 1.5).min(opts.ds_max);
                }
            }
            Err(EwsError::NewtonFailed { .. }) | Err(EwsError::Solver(_)) => {
                ds *= 0.5;
                if ds < opts.ds_min {
                    return Err(EwsError::StepUnderflow(ds));
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(branch)
}

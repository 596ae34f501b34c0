//! Closed-form autocovariances against an independent solve: the stationary covariance of the
//! chain generator from the Lyapunov equation by triangular substitution, propagated by the
//! exact exponential of each Jordan block.

use anyhow::Result;
use ews_core::rng::{rng_from_seed, task_key};
use ews_core::spectral::{
    autocov_jordan, autocov_pair, fit_scaling_exponent, predicted_exponent_pair, CouplingMatrix, JordanBlockSpec,
    SpectralModel,
};
use ews_core::Complex64;
use rand::Rng;
use rayon::prelude::*;

use super::{Check, Report};
use crate::config::{ExperimentConfig, SeedRange};

const NAME: &str = "spectral-selftest";

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_model(seed: u64, max_slots: usize) -> Result<SpectralModel> {
    let mut rng = rng_from_seed(seed);
    let target = rng.random_range(1..=max_slots);
    let mut blocks = Vec::new();
    let mut slots = 0;
    while slots < target {
        let m = rng.random_range(1..=3usize).min(target - slots);
        let re = -rng.random_range(0.05..3.0);
        let im = if rng.random_bool(0.5) { rng.random_range(-2.0..2.0) } else { 0.0 };
        blocks.push(JordanBlockSpec { eigenvalue: c(re, im), multiplicity: m });
        slots += m;
    }
    blocks.sort_by(|a, b| b.eigenvalue.re.total_cmp(&a.eigenvalue.re));
    let rank = rng.random_range(1..=3usize);
    let vs: Vec<Vec<Complex64>> = (0..rank)
        .map(|_| (0..slots).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
        .collect();
    let g = CouplingMatrix::from_fn(slots, |a, b| vs.iter().map(|v| v[a] * v[b].conj()).sum());
    Ok(SpectralModel::new(0.0, 0.0, blocks, rng.random_range(-2.0..2.0), g)?)
}

/// Per-slot `(eigenvalue, has a predecessor in its chain)`.
fn slots(model: &SpectralModel) -> Vec<(Complex64, bool)> {
    model.blocks.iter().flat_map(|b| (0..b.multiplicity).map(move |k| (b.eigenvalue, k > 0))).collect()
}

/// `X_ab(τ)` for every slot pair and lag, from `AV + VA^H = −(A−q)conj(G)(A−q)^H` and `V^τ = e^{Aτ}V`.
fn oracle(model: &SpectralModel, taus: &[f64]) -> Vec<Vec<Complex64>> {
    let sl = slots(model);
    let n = sl.len();
    let q = model.q;
    // (A − q) is lower bidiagonal: λ − q on the diagonal, 1 below it inside a chain.
    let aq = |a: usize, b: usize| -> Complex64 {
        if a == b {
            sl[a].0 - q
        } else if a == b + 1 && sl[a].1 {
            c(1.0, 0.0)
        } else {
            c(0.0, 0.0)
        }
    };
    let gbar = |a: usize, b: usize| model.coupling.get(a, b).conj();
    let mut f = vec![c(0.0, 0.0); n * n];
    for a in 0..n {
        for b in 0..n {
            let mut s = c(0.0, 0.0);
            for x in a.saturating_sub(1)..=a {
                for y in b.saturating_sub(1)..=b {
                    s += aq(a, x) * gbar(x, y) * aq(b, y).conj();
                }
            }
            f[a * n + b] = s;
        }
    }
    let mut v = vec![c(0.0, 0.0); n * n];
    for a in 0..n {
        for b in 0..n {
            let mut rhs = -f[a * n + b];
            if sl[a].1 {
                rhs -= v[(a - 1) * n + b];
            }
            if sl[b].1 {
                rhs -= v[a * n + b - 1];
            }
            v[a * n + b] = rhs / (sl[a].0 + sl[b].0.conj());
        }
    }
    taus.iter()
        .map(|&t| {
            // e^{Aτ} restricted to a chain: entry (k, k−m) is e^{λτ} τ^m / m!.
            let mut e = vec![c(0.0, 0.0); n * n];
            for a in 0..n {
                let mut coef = (sl[a].0 * t).exp();
                let mut k = a;
                let mut m = 0;
                loop {
                    e[a * n + k] = coef;
                    if !sl[k].1 {
                        break;
                    }
                    k -= 1;
                    m += 1;
                    coef *= t / m as f64;
                }
            }
            let mut x = vec![c(0.0, 0.0); n * n];
            for a in 0..n {
                for b in 0..n {
                    let s: Complex64 = (0..n).map(|k| e[a * n + k] * v[k * n + b]).sum();
                    x[a * n + b] = s.conj();
                }
            }
            x
        })
        .collect()
}

/// Worst entrywise relative error of the closed forms, floored at `1e-12·max|X|`.
fn model_error(model: &SpectralModel, taus: &[f64]) -> Result<f64> {
    let n = model.n_slots();
    let want = oracle(model, taus);
    let mut worst: f64 = 0.0;
    for (t, x) in taus.iter().zip(&want) {
        let scale = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (bi, bl) in model.blocks.iter().enumerate() {
            for (bj, bm) in model.blocks.iter().enumerate() {
                for k1 in 1..=bl.multiplicity {
                    for k2 in 1..=bm.multiplicity {
                        let got = autocov_jordan(bi + 1, k1, bj + 1, k2, *t, model)?;
                        let w = x[model.slot(bi + 1, k1)? * n + model.slot(bj + 1, k2)?];
                        worst = worst.max((got - w).norm() / w.norm().max(1e-12 * scale));
                    }
                }
            }
        }
    }
    Ok(worst)
}

fn lyapunov_residual(model: &SpectralModel) -> Result<f64> {
    let q = model.q;
    let mut worst: f64 = 0.0;
    for i in 1..=model.blocks.len() {
        for j in 1..=model.blocks.len() {
            let (li, lj) = (model.eigenvalue(i)?, model.eigenvalue(j)?);
            let g = model.coupling.get(model.slot(i, 1)?, model.slot(j, 1)?);
            let forcing = (li.conj() - q) * (lj - q) * g;
            if forcing.norm() > 0.0 {
                let r = (li.conj() + lj) * autocov_pair(i, j, 0.0, model)? + forcing;
                worst = worst.max(r.norm() / forcing.norm());
            }
        }
    }
    Ok(worst)
}

fn chain_family(p: f64, m1: usize) -> Result<SpectralModel> {
    let n = m1 + 1;
    let v: Vec<Complex64> = (0..n).map(|a| c(1.0 + 0.3 * a as f64, 0.2 * a as f64)).collect();
    let g = CouplingMatrix::from_fn(n, |a, b| v[a] * v[b].conj() + if a == b { c(0.5, 0.0) } else { c(0.0, 0.0) });
    let blocks = vec![JordanBlockSpec { eigenvalue: c(p, 0.0), multiplicity: m1 }, JordanBlockSpec::simple(c(-1.5, 0.7))];
    Ok(SpectralModel::new(p, 0.0, blocks, 1.0, g)?)
}

pub fn run(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let st = &cfg.selftest;
    let seeds = cfg.seeds_or(SeedRange { start: 0, end: st.models as u64 });
    report.seeds = seeds.clone();
    let results: Vec<(u64, usize, f64, f64)> = seeds
        .par_iter()
        .map(|&s| {
            let m = random_model(task_key(NAME, 0.0, s), st.max_slots)?;
            Ok((s, m.n_slots(), model_error(&m, &st.taus)?, lyapunov_residual(&m)?))
        })
        .collect::<Result<_>>()?;
    report.csv(
        "selftest_models.csv",
        "seed,slots,max_rel_err,lyapunov_residual",
        results.iter().map(|(s, n, e, l)| format!("{s},{n},{e},{l}")),
    )?;
    let worst = results.iter().map(|r| r.2).fold(0.0, f64::max);
    let worst_lyap = results.iter().map(|r| r.3).fold(0.0, f64::max);
    report.check(Check::new("closed form vs Lyapunov oracle", worst, "< 1e-8", worst < 1e-8));
    report.check(Check::new("Lyapunov residual", worst_lyap, "< 1e-12", worst_lyap < 1e-12));

    let ps: Vec<f64> = (0..9).map(|e| -(10f64).powf(-2.0 - 0.25 * e as f64)).collect();
    let mut rows = Vec::new();
    for (m1, k1, k2) in [(1, 1, 1), (2, 2, 1), (2, 2, 2)] {
        let mut samples = Vec::new();
        for &p in &ps {
            let v = autocov_jordan(1, k1, 1, k2, 0.0, &chain_family(p, m1)?)?.norm();
            rows.push(format!("{k1},{k2},{p},{v}"));
            samples.push((p, v));
        }
        let e = fit_scaling_exponent(&samples, |p| -p)?.exponent;
        let want = predicted_exponent_pair(k1, k2) as f64;
        report.check(Check::new(format!("exponent ({k1},{k2})"), e, format!("{want} ± 0.05"), (e - want).abs() < 0.05));
    }
    report.csv("selftest_exponents.csv", "k1,k2,p,abs_autocov", rows)?;
    Ok(())
}

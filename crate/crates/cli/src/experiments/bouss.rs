use anyhow::{bail, ensure, Context, Result};
use ews_core::boussinesq::*;
use ews_core::eigensolver::{eig_dense, sorted_eigenvalues, EigenSet, FaerBackend};
use ews_core::estimators::{autocorr_curve, ensemble_logstats, l2_distance, temporal_autocov_complex, ScalarSeries};
use ews_core::rng::task_key;
use ews_core::spectral::linear_fit;
use ews_core::Complex64;
use rayon::prelude::*;

use super::{Check, Experiment, Report};
use crate::config::{Expect, ExperimentConfig, ObservableSpec, SeedRange};

const R2_SWEEP: [f64; 5] = [0.4, 0.55, 0.7, 0.85, 1.0];

/// Parameter values of an experiment: `p_list`, or the regime default.
pub fn sweep(cfg: &ExperimentConfig, exp: Experiment) -> Vec<f64> {
    if let Some(ps) = &cfg.p_list {
        return ps.clone();
    }
    let r2 = cfg.bouss.regime == 2;
    match exp {
        Experiment::BoussBranch if r2 => vec![0.2],
        Experiment::BoussBranch => parameter_path(0.03, 0.075, 0.0025),
        Experiment::BoussEigs if r2 => R2_SWEEP.to_vec(),
        Experiment::BoussEigs => vec![0.04, 0.045, 0.05, 0.055, 0.06],
        Experiment::BoussVariance if r2 => R2_SWEEP.to_vec(),
        Experiment::BoussVariance => vec![0.045, 0.05, 0.054, 0.057, 0.06],
        Experiment::BoussAutocorr if r2 => vec![0.4, 1.0],
        Experiment::BoussAutocorr => vec![0.05, 0.06],
        _ => vec![0.055],
    }
}

fn discretization(cfg: &ExperimentConfig, p: f64) -> Result<Discretization> {
    let b = &cfg.bouss;
    let params = b.params(p);
    let g = build_grid_with_height(b.m, b.n, params.length, params.height)?;
    Ok(Discretization::new(&g, &params)?)
}

/// Steady states of the regime's reference branch at each `p`, in sweep order.
fn branch_states(cfg: &ExperimentConfig, d: &Discretization, ps: &[f64]) -> Result<Vec<StateFields>> {
    let mut out: Vec<StateFields> = Vec::with_capacity(ps.len());
    for (k, &p) in ps.iter().enumerate() {
        let s = match (k, cfg.bouss.regime) {
            (0, 2) => saddle_node_southward_state(d, p)?,
            (0, _) => thermohaline_state(d, p, p)?,
            (_, 2) => follow(d, &out[k - 1], ps[k - 1], p, 0.05)?,
            (_, _) => follow(d, &out[k - 1], ps[k - 1], p, 0.005)?,
        };
        out.push(s);
    }
    Ok(out)
}

fn eigen_set(d: &Discretization, s: &StateFields) -> Result<(Linearization, EigenSet)> {
    let lin = assemble_linearization(d, s)?;
    let set = eig_dense(&dense_schur(&lin)?, &lin.weights)?;
    Ok((lin, set))
}

/// Grid dump of the real part of a dynamic-space vector, with ψ recovered from `Δψ = −ω`.
fn vector_dump(d: &Discretization, lin: &Linearization, v: &[Complex64]) -> Result<String> {
    let np = lin.n_psi;
    let dynv: Vec<f64> = v.iter().map(|z| z.re).collect();
    let rhs: Vec<f64> = dynv[..np].iter().map(|w| -w).collect();
    let mut x = lin.lu11.solve(&rhs)?;
    x.extend_from_slice(&dynv);
    Ok(d.perturbation_to_state(&x).to_csv(&d.grid))
}

pub fn branch(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let b = &cfg.bouss;
    let ps = sweep(cfg, Experiment::BoussBranch);
    let d = discretization(cfg, ps[0])?;
    if b.regime == 2 {
        let a = &b.arclength;
        let opts = ArclengthOptions {
            ds: a.ds.unwrap_or(0.2),
            ds_max: a.ds_max.unwrap_or(2.0),
            p_min: a.p_min.unwrap_or(0.15),
            p_max: a.p_max.unwrap_or(3.0),
            max_steps: a.max_steps.unwrap_or(300),
            max_folds: a.max_folds.or(Some(1)),
            n_eigs: b.n_eigs,
            ..ArclengthOptions::default()
        };
        let start = saddle_node_southward_state(&d, ps[0])?;
        report.raw("state_start.csv", &start.to_csv(&d.grid))?;
        let br = continuation_arclength(&d, &start, &opts)?;
        report.raw("branch.csv", &br.to_csv())?;
        if let Some(last) = br.points.last() {
            report.raw("state_end.csv", &last.state.to_csv(&d.grid))?;
        }
        report.note("folds", &br.folds);
        report.note("points", br.points.len());
        match br.folds.first() {
            Some(&f) => report.check(Check::new("saddle-node fold", f, "[0.93, 1.13]", (0.93..=1.13).contains(&f))),
            None => report.check(Check::new("saddle-node fold", f64::NAN, "[0.93, 1.13]", false)),
        }
        return Ok(());
    }
    let nat = NaturalOptions { n_eigs: b.n_eigs, ..NaturalOptions::default() };
    let s0 = thermohaline_state(&d, ps[0], ps[0])?;
    report.raw("state_start.csv", &s0.to_csv(&d.grid))?;
    let th = continuation_natural(&d, &ps, &s0, &nat)?;
    report.raw("branch.csv", &th.to_csv())?;
    report.note("halted_at", th.halted_at);

    // Asymmetric branch, followed downward from p = 0.07 where relaxation finds it.
    let p_asym = 0.07;
    let mut down = vec![p_asym];
    let mut below: Vec<f64> = ps.iter().copied().filter(|&p| p < p_asym).collect();
    below.sort_by(|a, b| b.total_cmp(a));
    down.extend(below);
    let asym = pitchfork_asymmetric_state(&d, p_asym)
        .and_then(|s| continuation_natural(&d, &down, &s, &nat));
    match asym {
        Ok(br) => {
            report.raw("branch_asymmetric.csv", &br.to_csv())?;
            report.note("asymmetric_halted_at", br.halted_at);
        }
        Err(e) => report.note("asymmetric_branch_error", e.to_string()),
    }

    if let Some([lo, hi]) = b.threshold_bracket {
        let c = pitchfork_threshold(&d, lo, hi, 1e-5)?;
        report.csv("threshold_samples.csv", "p,re_lambda_odd", c.samples.iter().map(|(p, v)| format!("{p},{v}")))?;
        report.note("pitchfork_threshold", c.p);
        report.check(Check::new("pitchfork threshold", c.p, "[0.050, 0.066]", (0.050..=0.066).contains(&c.p)));
    }
    Ok(())
}

pub fn eigs(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let b = &cfg.bouss;
    let ps = sweep(cfg, Experiment::BoussEigs);
    let d = discretization(cfg, ps[0])?;
    let states = branch_states(cfg, &d, &ps)?;
    let sets: Vec<(Linearization, EigenSet)> = ps
        .par_iter()
        .zip(&states)
        .map(|(&p, s)| eigen_set(&d.with_p(p), s))
        .collect::<Result<_>>()?;
    let m = b.n_eigs.max(1);
    let mut rows = Vec::new();
    let mut wide = Vec::new();
    let mut worst_zero: f64 = 0.0;
    for ((&p, (lin, set)), state) in ps.iter().zip(&sets).zip(&states) {
        ensure!(set.eigenvalues.len() >= m, "only {} eigenvalues at p = {p}", set.eigenvalues.len());
        let mut line = format!("{p}");
        for k in 0..m {
            let z = set.eigenvalues[k];
            rows.push(format!("{p},{},{},{},{}", k + 1, z.re, z.im, set.residuals[k]));
            line.push_str(&format!(",{},{}", z.re, z.im));
        }
        let stable = is_stable(&set.eigenvalues[..m]);
        line.push_str(&format!(",{}", u8::from(stable)));
        wide.push(line);
        worst_zero = worst_zero.max(set.eigenvalues[0].norm());
        let dp = d.with_p(p);
        report.raw(&format!("state_p{p}.csv"), &state.to_csv(&d.grid))?;
        for &k in &b.dump_vectors {
            ensure!(k <= set.dim(), "dump_vectors entry {k} exceeds dimension {}", set.dim());
            report.raw(&format!("eigvec_right_p{p}_k{k}.csv"), &vector_dump(&dp, lin, &set.right_vector(k - 1))?)?;
            report.raw(&format!("eigvec_left_p{p}_k{k}.csv"), &vector_dump(&dp, lin, &set.left_vector(k - 1))?)?;
        }
    }
    report.csv("eigs.csv", "p,index,re_lambda,im_lambda,residual", rows)?;
    let mut header = String::from("p");
    for k in 1..=m {
        header.push_str(&format!(",re_lambda{k},im_lambda{k}"));
    }
    header.push_str(",stable");
    report.csv("leading.csv", &header, wide)?;
    report.check(Check::new("structural zero |λ1|", worst_zero, "< 1e-8", worst_zero < 1e-8));
    Ok(())
}

/// The eigenvalue whose real part sets the critical rate on the reference branch.
fn critical_eigenvalue(cfg: &ExperimentConfig, d: &Discretization, s: &StateFields, set: Option<&EigenSet>) -> Result<Complex64> {
    if cfg.bouss.regime == 1 && d.params.nu == 0.0 {
        return Ok(odd_leading(d, s)?);
    }
    match set {
        Some(set) => Ok(set.eigenvalues[1]),
        None => Ok(sorted_eigenvalues(&dense_schur(&assemble_linearization(d, s)?)?, &FaerBackend)?[1]),
    }
}

fn build_observables(d: &Discretization, specs: &[ObservableSpec], set: Option<&EigenSet>) -> Result<Vec<Observable>> {
    specs
        .iter()
        .map(|o| match o {
            ObservableSpec::Indicator { name, field, rect, .. } => Ok(indicator_observable(d, *field, *rect, name)?),
            ObservableSpec::Eigen { name, index, .. } => {
                let set = set.context("eigen observables need an eigendecomposition")?;
                ensure!(*index <= set.dim(), "observable {name}: index {index} exceeds dimension {}", set.dim());
                Ok(Observable::eigen_coefficient(set, index - 1, name))
            }
        })
        .collect()
}

/// One steady state per sweep value with its critical eigenvalue and observables.
struct Station {
    p: f64,
    d: Discretization,
    state: StateFields,
    lambda: Complex64,
    observables: Vec<Observable>,
}

fn stations(cfg: &ExperimentConfig, ps: &[f64], specs: &[ObservableSpec], need_set: bool) -> Result<Vec<Station>> {
    let d = discretization(cfg, ps[0])?;
    let states = branch_states(cfg, &d, ps)?;
    ps.par_iter()
        .zip(states)
        .map(|(&p, state)| {
            let dp = d.with_p(p);
            let set = if need_set { Some(eigen_set(&dp, &state)?.1) } else { None };
            let lambda = critical_eigenvalue(cfg, &dp, &state, set.as_ref())?;
            let observables = build_observables(&dp, specs, set.as_ref())?;
            Ok(Station { p, d: dp, state, lambda, observables })
        })
        .collect()
}

fn sim_options(cfg: &ExperimentConfig, name: &str, p: f64, seed: u64) -> SimOptions {
    SimOptions::new(cfg.bouss.t_end, cfg.bouss.dt, task_key(name, p, seed)).with_scheme(cfg.bouss.scheme())
}

pub fn variance(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let ps = sweep(cfg, Experiment::BoussVariance);
    let seeds = cfg.seeds_or(SeedRange { start: 0, end: 3 });
    report.seeds = seeds.clone();
    let specs = cfg.bouss.observables();
    let need_set = cfg.bouss.regime == 2 || specs.iter().any(|o| matches!(o, ObservableSpec::Eigen { .. }));
    let st = stations(cfg, &ps, &specs, need_set)?;
    let tasks: Vec<(usize, u64)> = (0..st.len()).flat_map(|i| seeds.iter().map(move |&s| (i, s))).collect();
    let vars: Vec<Vec<f64>> = tasks
        .par_iter()
        .map(|&(i, seed)| {
            let s = &st[i];
            let t = simulate_linearized(&s.d, &s.state, &sim_options(cfg, "bouss-variance", s.p, seed), &s.observables)?;
            t.series
                .iter()
                .map(|x| {
                    let ser = ScalarSeries::from_complex(t.dt, x.clone());
                    Ok(temporal_autocov_complex(&ser, &ser, 0.0)?.re)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut runs = Vec::new();
    for (&(i, seed), v) in tasks.iter().zip(&vars) {
        for (o, x) in specs.iter().zip(v) {
            runs.push(format!("{},{},{seed},{x}", st[i].p, o.name()));
        }
    }
    report.csv("variance_runs.csv", "p,observable,seed,variance", runs)?;
    let rates: Vec<f64> = st.iter().map(|s| (-1.0 / s.lambda.re).log10()).collect();
    ensure!(rates.iter().all(|r| r.is_finite()), "critical eigenvalue is not in the left half-plane");
    let mut rows = Vec::new();
    for (o, spec) in specs.iter().enumerate() {
        let mut logs = Vec::new();
        let mut lines = Vec::new();
        for (i, s) in st.iter().enumerate() {
            let v: Vec<f64> = tasks.iter().zip(&vars).filter(|((k, _), _)| *k == i).map(|(_, v)| v[o]).collect();
            let e = ensemble_logstats(&v)?;
            logs.push(e.mean_log10);
            lines.push(format!(
                "{},{},{},{},{},{},{},{}",
                s.p,
                spec.name(),
                e.mean_log10,
                e.std_log10,
                e.runs,
                s.lambda.re,
                s.lambda.im,
                rates[i]
            ));
        }
        let slope = linear_fit(&rates, &logs)?.0;
        rows.extend(lines.into_iter().map(|l| format!("{l},{slope}")));
        report.note(&format!("slope_{}", spec.name()), slope);
        match spec.expect() {
            Expect::Scaling => report.check(Check::new(format!("slope {}", spec.name()), slope, "1 ± 0.3", (slope - 1.0).abs() <= 0.3)),
            Expect::Silent => report.check(Check::new(format!("slope {}", spec.name()), slope, "< 0.3", slope < 0.3)),
        }
    }
    report.csv(
        "variance.csv",
        "p,observable,mean_log10,std_log10,runs,re_lambda2,im_lambda2,theory_log10_rate,slope",
        rows,
    )?;
    Ok(())
}

pub fn autocorr(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let b = &cfg.bouss;
    let ps = sweep(cfg, Experiment::BoussAutocorr);
    let seeds = cfg.seeds_or(SeedRange { start: 0, end: 5 });
    report.seeds = seeds.clone();
    let idx = b.autocorr_index;
    let spec = [ObservableSpec::Eigen { name: format!("e{idx}"), index: idx, expect: None }];
    let d = discretization(cfg, ps[0])?;
    let states = branch_states(cfg, &d, &ps)?;
    let st: Vec<Station> = ps
        .par_iter()
        .zip(states)
        .map(|(&p, state)| {
            let dp = d.with_p(p);
            let (_, set) = eigen_set(&dp, &state)?;
            let observables = build_observables(&dp, &spec, Some(&set))?;
            Ok(Station { p, d: dp, state, lambda: set.eigenvalues[idx - 1], observables })
        })
        .collect::<Result<_>>()?;
    let tasks: Vec<(usize, u64)> = (0..st.len()).flat_map(|i| seeds.iter().map(move |&s| (i, s))).collect();
    let curves: Vec<Vec<Complex64>> = tasks
        .par_iter()
        .map(|&(i, seed)| {
            let s = &st[i];
            let t = simulate_linearized(&s.d, &s.state, &sim_options(cfg, "bouss-autocorr", s.p, seed), &s.observables)?;
            Ok(autocorr_curve(&ScalarSeries::from_complex(t.dt, t.series[0].clone()), b.max_tau)?)
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (i, s) in st.iter().enumerate() {
        let mine: Vec<&Vec<Complex64>> = tasks.iter().zip(&curves).filter(|((k, _), _)| *k == i).map(|(_, c)| c).collect();
        let n = mine[0].len();
        let mean: Vec<Complex64> =
            (0..n).map(|k| mine.iter().map(|c| c[k]).sum::<Complex64>() / mine.len() as f64).collect();
        let theory: Vec<Complex64> = (0..n).map(|k| (s.lambda.conj() * (k as f64 * b.dt)).exp()).collect();
        let emp: Vec<f64> = mean.iter().map(|z| z.norm()).collect();
        let th: Vec<f64> = theory.iter().map(|z| z.norm()).collect();
        let err = l2_distance(&emp, &th, b.dt);
        for k in 0..n {
            rows.push(format!(
                "{},{},{},{},{},{},{},{}",
                s.p,
                k as f64 * b.dt,
                mean[k].re,
                mean[k].im,
                emp[k],
                theory[k].re,
                theory[k].im,
                th[k]
            ));
        }
        report.note(&format!("lambda_p{}", s.p), [s.lambda.re, s.lambda.im]);
        report.check(Check::new(format!("autocorrelation L2 at p = {}", s.p), err, "<= 5e-2", err <= 5e-2));
    }
    report.csv("autocorr.csv", "p,tau,re_mean,im_mean,abs_mean,theory_re,theory_im,theory_abs", rows)?;
    Ok(())
}

pub fn symmetry(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let ps = sweep(cfg, Experiment::BoussSymmetry);
    let p = ps[0];
    let d = discretization(cfg, p)?;
    let s = pitchfork_asymmetric_state(&d, p)?;
    let (s, _) = newton_solve(&d, &s, &NewtonOptions { tol: 1e-10, ..NewtonOptions::default() })?;
    let asym = s.max_psi() + s.min_psi();
    if asym.abs() <= 1e-3 {
        bail!("the state reached at p = {p} is symmetric (max ψ + min ψ = {asym:.2e})");
    }
    let m = mirror_solution(&s, &d.grid, &d.params)?;
    let res = d.residual(&m)?.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let spec = |st: &StateFields| -> Result<Vec<Complex64>> {
        let lin = assemble_linearization(&d, st)?;
        Ok(sorted_eigenvalues(&dense_schur(&lin)?, &FaerBackend)?)
    };
    let pair: Vec<Vec<Complex64>> = [&s, &m].par_iter().map(|st| spec(st)).collect::<Result<_>>()?;
    let (a, b) = (&pair[0], &pair[1]);
    let mut worst: f64 = 0.0;
    let rows: Vec<String> = a
        .iter()
        .zip(b)
        .enumerate()
        .map(|(k, (x, y))| {
            // Eigenvalues of modulus below one are compared absolutely.
            let diff = (x - y).norm() / x.norm().max(1.0);
            worst = worst.max(diff);
            format!("{},{},{},{},{},{diff}", k + 1, x.re, x.im, y.re, y.im)
        })
        .collect();
    report.csv("symmetry_spectra.csv", "index,re_state,im_state,re_mirror,im_mirror,rel_diff", rows)?;
    report.raw("state_S.csv", &s.to_csv(&d.grid))?;
    report.raw("state_mirror.csv", &m.to_csv(&d.grid))?;
    report.note("p", p);
    report.note("psi_asymmetry", asym);
    report.check(Check::new("mirror residual", res, "< 1e-8", res < 1e-8));
    report.check(Check::new("spectra agreement", worst, "< 1e-6", worst < 1e-6));
    Ok(())
}

use anyhow::Result;
use ews_core::estimators::{ensemble_logstats, temporal_autocov, ScalarSeries};
use ews_core::heat1d::{
    simulate_modes_recording, stationary_cov_entry, weighted_cov_entry, wellposedness_integral, BoundaryKind,
};
use ews_core::rng::task_key;
use ews_core::spectral::fit_scaling_exponent;
use rayon::prelude::*;

use super::{sample_std, Check, Report};
use crate::config::{ExperimentConfig, SeedRange};

pub const NEUMANN_PS: [f64; 5] = [-0.4, -0.2, -0.1, -0.05, -0.025];

/// Default parameter of the well-posedness check for each boundary type.
pub fn wellposedness_ps(cfg: &ExperimentConfig, bc: BoundaryKind) -> Vec<f64> {
    let default = match bc {
        BoundaryKind::Neumann => -0.1,
        BoundaryKind::Dirichlet => 5.0,
    };
    cfg.p_list_or(&[default])
}

const NAME_NEUMANN: &str = "heat-neumann-scaling";

/// Sweep values for the Dirichlet experiment: `p_list`, or the threshold minus each gap.
pub fn dirichlet_ps(cfg: &ExperimentConfig) -> Vec<f64> {
    if let Some(ps) = &cfg.p_list {
        return ps.clone();
    }
    let l1 = cfg.heat.model(BoundaryKind::Dirichlet, 0.0).threshold();
    cfg.heat.gaps.iter().map(|g| l1 - g).collect()
}

pub fn wellposedness_bcs(cfg: &ExperimentConfig) -> Vec<BoundaryKind> {
    match cfg.heat.bc {
        Some(bc) => vec![bc],
        None => vec![BoundaryKind::Neumann, BoundaryKind::Dirichlet],
    }
}

/// Closed-form and Monte-Carlo variance of mode 0 under Neumann data.
pub fn neumann_scaling(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let h = &cfg.heat;
    let ps = cfg.p_list_or(&NEUMANN_PS);
    let seeds = cfg.seeds_or(SeedRange { start: 0, end: 5 });
    report.seeds = seeds.clone();
    let closed: Vec<(f64, f64)> = ps
        .iter()
        .map(|&p| Ok((p, stationary_cov_entry(0, 0, 0.0, &h.model(BoundaryKind::Neumann, p))?.re)))
        .collect::<Result<_>>()?;
    let tasks: Vec<(f64, u64)> = ps.iter().flat_map(|&p| seeds.iter().map(move |&s| (p, s))).collect();
    let vars: Vec<f64> = tasks
        .par_iter()
        .map(|&(p, seed)| {
            let m = h.model(BoundaryKind::Neumann, p);
            let t = simulate_modes_recording(&m, h.t_end, h.dt, task_key(NAME_NEUMANN, p, seed), &[0])?;
            let s = ScalarSeries::from_real(t.dt, t.mode(0).expect("mode 0 recorded"));
            Ok(temporal_autocov(&s, &s, 0.0)?)
        })
        .collect::<Result<_>>()?;
    let per_p: Vec<&[f64]> = vars.chunks(seeds.len()).collect();
    let mc: Vec<(f64, f64)> = ps.iter().zip(&per_p).map(|(&p, v)| (p, v.iter().sum::<f64>() / v.len() as f64)).collect();
    let s_closed = fit_scaling_exponent(&closed, |p| -p)?.exponent;
    let s_mc = fit_scaling_exponent(&mc, |p| -p)?.exponent;
    let mut rows = Vec::new();
    for (k, &p) in ps.iter().enumerate() {
        let stats = ensemble_logstats(per_p[k])?;
        rows.push(format!(
            "{p},0,{},{},{},{},{},{},{s_closed},{s_mc}",
            closed[k].1,
            mc[k].1,
            sample_std(per_p[k]),
            stats.mean_log10,
            stats.std_log10,
            (-1.0 / p).log10(),
        ));
    }
    report.csv(
        "neumann_scaling.csv",
        "p,mode,closed_form,mc_mean,mc_std,mean_log10,std_log10,theory_log10_rate,slope_closed,slope_mc",
        rows,
    )?;
    report.note("slope_closed", s_closed);
    report.note("slope_mc", s_mc);
    report.check(Check::new("closed-form slope", s_closed, "-1 ± 1e-6", (s_closed + 1.0).abs() < 1e-6));
    report.check(Check::new("Monte-Carlo slope", s_mc, "-1 ± 0.15", (s_mc + 1.0).abs() < 0.15));
    Ok(())
}

/// Weighted variance of mode 1 under Dirichlet data near the first eigenvalue.
pub fn dirichlet_weighted(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let h = &cfg.heat;
    let ps = dirichlet_ps(cfg);
    let l1 = h.model(BoundaryKind::Dirichlet, 0.0).threshold();
    let mut samples = Vec::new();
    let mut plain = Vec::new();
    for &p in &ps {
        let m = h.model(BoundaryKind::Dirichlet, p);
        samples.push((p, weighted_cov_entry(1, 1, 0.0, &m)?.norm()));
        plain.push(stationary_cov_entry(1, 1, 0.0, &m)?.re);
    }
    let fit = fit_scaling_exponent(&samples, |p| l1 - p)?;
    let want = -1.0 + h.alpha;
    let rows = ps.iter().enumerate().map(|(k, &p)| {
        format!(
            "{p},{},{},{},{},{},{want}",
            l1 - p,
            samples[k].1,
            plain[k],
            (l1 - p).log10(),
            fit.exponent
        )
    });
    report.csv("dirichlet_weighted.csv", "p,gap,weighted_var,unweighted_var,log10_gap,slope,theory_slope", rows)?;
    report.note("threshold", l1);
    report.note("slope", fit.exponent);
    report.check(Check::new("weighted exponent", fit.exponent, format!("{want} ± 0.05"), (fit.exponent - want).abs() < 0.05));
    Ok(())
}

/// Truncated well-posedness integral against the number of modes; `modes` is raised to the
/// largest requested truncation.
pub fn wellposedness(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let mut ks = cfg.heat.k_list.clone();
    ks.sort_unstable();
    let (k_lo, k_hi) = (ks[0], *ks.last().unwrap());
    let mut rows = Vec::new();
    for bc in wellposedness_bcs(cfg) {
        let tag = match bc {
            BoundaryKind::Neumann => "neumann",
            BoundaryKind::Dirichlet => "dirichlet",
        };
        for p in wellposedness_ps(cfg, bc) {
            let mut m = cfg.heat.model(bc, p);
            m.modes = m.modes.max(k_hi);
            let vals: Vec<f64> = ks.iter().map(|&k| wellposedness_integral(&m, k)).collect::<Result<_, _>>()?;
            for (k, v) in ks.iter().zip(&vals) {
                rows.push(format!("{tag},{p},{k},{v}"));
            }
            let ratio = vals.last().unwrap() / vals[0];
            if ks.len() >= 2 {
                let prev = vals[vals.len() - 2];
                let change = (vals.last().unwrap() - prev).abs() / prev;
                report.note(&format!("{tag}_p{p}_last_relative_change"), change);
                if bc == BoundaryKind::Neumann {
                    report.check(Check::new(format!("Neumann convergence at p = {p}"), change, "< 0.01", change < 0.01));
                }
            }
            report.note(&format!("{tag}_p{p}_ratio_{k_hi}_over_{k_lo}"), ratio);
            if bc == BoundaryKind::Dirichlet {
                report.check(Check::new(
                    format!("Dirichlet divergence at p = {p} (K={k_hi}/K={k_lo})"),
                    ratio,
                    "> 2",
                    ratio > 2.0,
                ));
            }
        }
    }
    report.csv("wellposedness.csv", "bc,p,k,integral", rows)?;
    Ok(())
}

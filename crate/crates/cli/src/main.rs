//! `ews`: experiment runner writing CSV tables and a JSON manifest per run.

mod config;
mod experiments;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Parser;
use serde::Serialize;

use config::{parse_experiment, ExperimentConfig, SeedRange};
use experiments::{Check, Report};

#[derive(Parser, Debug)]
#[command(name = "ews", version, about = "Early-warning-sign experiments for boundary-noise SPDEs")]
struct Cli {
    /// JSON config file; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    experiment: Option<String>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Half-open seed range, e.g. `0..5`.
    #[arg(long)]
    seeds: Option<SeedRange>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Serialize)]
struct Versions {
    ews: &'static str,
    os: &'static str,
    arch: &'static str,
}

#[derive(Serialize)]
struct Manifest<'a> {
    experiment: Option<&'a str>,
    status: &'static str,
    failure_reason: Option<String>,
    config: Option<&'a ExperimentConfig>,
    versions: Versions,
    seeds: &'a [u64],
    threads: usize,
    wall_time_s: f64,
    outputs: &'a [String],
    checks: &'a [Check],
    summary: &'a serde_json::Map<String, serde_json::Value>,
}

/// Exit codes: 0 success, 1 a check failed, 2 the run could not complete.
fn main() -> ExitCode {
    let cli = Cli::parse();
    let t0 = Instant::now();
    let mut cfg = match &cli.config {
        Some(path) => match ExperimentConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e:#}");
                let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("ews-out"));
                emit_bare_manifest(&out, cli.experiment.as_deref(), &format!("{e:#}"), t0);
                return ExitCode::from(2);
            }
        },
        None => ExperimentConfig::default(),
    };
    if cli.experiment.is_some() {
        cfg.experiment = cli.experiment.clone();
    }
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    if cli.seeds.is_some() {
        cfg.seeds = cli.seeds;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("ews-out"));
    if let Err(e) = std::fs::create_dir_all(&out) {
        eprintln!("error: cannot create output directory {}: {e}", out.display());
        return ExitCode::from(2);
    }
    let mut report = Report::new(&out);
    let outcome = execute(&cfg, &mut report);
    let failed: Vec<&Check> = report.checks.iter().filter(|c| !c.pass).collect();
    let (status, reason, code) = match &outcome {
        Err(e) => ("error", Some(format!("{e:#}")), 2),
        Ok(()) if !failed.is_empty() => {
            let names: Vec<&str> = failed.iter().map(|c| c.name.as_str()).collect();
            ("failed", Some(format!("checks failed: {}", names.join(", "))), 1)
        }
        Ok(()) => ("ok", None, 0),
    };
    let manifest = Manifest {
        experiment: cfg.experiment.as_deref(),
        status,
        failure_reason: reason.clone(),
        config: Some(&cfg),
        versions: versions(),
        seeds: &report.seeds,
        threads: rayon::current_num_threads(),
        wall_time_s: t0.elapsed().as_secs_f64(),
        outputs: &report.files,
        checks: &report.checks,
        summary: &report.summary,
    };
    if let Err(e) = write_manifest(&out, &manifest) {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    for c in &report.checks {
        println!("{} {}: {} (bound {})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.bound);
    }
    if let Some(r) = reason {
        eprintln!("{status}: {r}");
    }
    ExitCode::from(code)
}

fn execute(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let name = cfg.experiment.as_deref().context("no experiment given (use --experiment or the config field)")?;
    let exp = parse_experiment(name)?;
    cfg.validate(exp)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    experiments::run(exp, cfg, report)
}

fn versions() -> Versions {
    Versions { ews: env!("CARGO_PKG_VERSION"), os: std::env::consts::OS, arch: std::env::consts::ARCH }
}

fn write_manifest(out: &std::path::Path, m: &Manifest) -> Result<()> {
    let path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(m)?;
    std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Manifest for runs whose config could not be read.
fn emit_bare_manifest(out: &std::path::Path, experiment: Option<&str>, reason: &str, t0: Instant) {
    if std::fs::create_dir_all(out).is_err() {
        return;
    }
    let summary = serde_json::Map::new();
    let m = Manifest {
        experiment,
        status: "error",
        failure_reason: Some(reason.to_string()),
        config: None,
        versions: versions(),
        seeds: &[],
        threads: rayon::current_num_threads(),
        wall_time_s: t0.elapsed().as_secs_f64(),
        outputs: &[],
        checks: &[],
        summary: &summary,
    };
    let _ = write_manifest(out, &m);
}

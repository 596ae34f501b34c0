pub mod bouss;
pub mod heat;
pub mod selftest;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::ExperimentConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    HeatNeumannScaling,
    HeatDirichletWeighted,
    HeatWellposedness,
    BoussBranch,
    BoussEigs,
    BoussVariance,
    BoussAutocorr,
    BoussSymmetry,
    SpectralSelftest,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::HeatNeumannScaling,
        Experiment::HeatDirichletWeighted,
        Experiment::HeatWellposedness,
        Experiment::BoussBranch,
        Experiment::BoussEigs,
        Experiment::BoussVariance,
        Experiment::BoussAutocorr,
        Experiment::BoussSymmetry,
        Experiment::SpectralSelftest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::HeatNeumannScaling => "heat-neumann-scaling",
            Experiment::HeatDirichletWeighted => "heat-dirichlet-weighted",
            Experiment::HeatWellposedness => "heat-wellposedness",
            Experiment::BoussBranch => "bouss-branch",
            Experiment::BoussEigs => "bouss-eigs",
            Experiment::BoussVariance => "bouss-variance",
            Experiment::BoussAutocorr => "bouss-autocorr",
            Experiment::BoussSymmetry => "bouss-symmetry",
            Experiment::SpectralSelftest => "spectral-selftest",
        }
    }
}

/// A pass/fail check tagged for acceptance; any failure makes the run exit nonzero.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: String,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, bound: impl Into<String>, pass: bool) -> Self {
        Self { name: name.into(), value, bound: bound.into(), pass }
    }
}

/// Files, checks and free-form results collected while an experiment runs.
pub struct Report {
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub checks: Vec<Check>,
    pub summary: serde_json::Map<String, serde_json::Value>,
    pub seeds: Vec<u64>,
}

impl Report {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), files: Vec::new(), checks: Vec::new(), summary: Default::default(), seeds: Vec::new() }
    }

    /// Writes one CSV file in a single pass.
    pub fn csv(&mut self, name: &str, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
        let mut text = String::from(header);
        text.push('\n');
        for r in rows {
            let _ = writeln!(text, "{r}");
        }
        self.raw(name, &text)
    }

    pub fn raw(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        self.summary.insert(key.to_string(), serde_json::to_value(value).expect("summary value serializes"));
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }
}

pub fn run(exp: Experiment, cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    match exp {
        Experiment::HeatNeumannScaling => heat::neumann_scaling(cfg, report),
        Experiment::HeatDirichletWeighted => heat::dirichlet_weighted(cfg, report),
        Experiment::HeatWellposedness => heat::wellposedness(cfg, report),
        Experiment::BoussBranch => bouss::branch(cfg, report),
        Experiment::BoussEigs => bouss::eigs(cfg, report),
        Experiment::BoussVariance => bouss::variance(cfg, report),
        Experiment::BoussAutocorr => bouss::autocorr(cfg, report),
        Experiment::BoussSymmetry => bouss::symmetry(cfg, report),
        Experiment::SpectralSelftest => selftest::run(cfg, report),
    }
}

/// Sample standard deviation; zero for fewer than two values.
pub fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

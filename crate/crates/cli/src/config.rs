use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, ensure, Context, Result};
use ews_core::boussinesq::{BoussinesqParams, Field, TimeScheme};
use ews_core::heat1d::{BoundaryKind, HeatModelConfig};
use serde::{Deserialize, Serialize};

use crate::experiments::Experiment;

/// Half-open seed range written `a..b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SeedRange {
    pub start: u64,
    pub end: u64,
}

impl SeedRange {
    pub fn seeds(&self) -> Vec<u64> {
        (self.start..self.end).collect()
    }
}

impl FromStr for SeedRange {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s.split_once("..").with_context(|| format!("seed range {s:?} is not of the form a..b"))?;
        let start: u64 = a.trim().parse().with_context(|| format!("bad seed range start {a:?}"))?;
        let end: u64 = b.trim().parse().with_context(|| format!("bad seed range end {b:?}"))?;
        ensure!(start < end, "seed range {s:?} is empty");
        Ok(Self { start, end })
    }
}

impl TryFrom<String> for SeedRange {
    type Error = anyhow::Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SeedRange> for String {
    fn from(r: SeedRange) -> String {
        r.to_string()
    }
}

impl fmt::Display for SeedRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<String>,
    pub out: Option<PathBuf>,
    pub seeds: Option<SeedRange>,
    pub threads: Option<usize>,
    /// Parameter sweep; each experiment has its own default.
    pub p_list: Option<Vec<f64>>,
    pub heat: HeatBlock,
    pub bouss: BoussBlock,
    pub selftest: SelftestBlock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatBlock {
    pub length: f64,
    pub c: f64,
    pub alpha: f64,
    pub modes: usize,
    pub noise_gains: [f64; 2],
    pub dt: f64,
    pub t_end: f64,
    /// Distances below the Dirichlet threshold used when `p_list` is absent.
    pub gaps: Vec<f64>,
    /// Truncation levels for the well-posedness integral.
    pub k_list: Vec<usize>,
    /// Restricts `heat-wellposedness` to one boundary type.
    pub bc: Option<BoundaryKind>,
}

impl Default for HeatBlock {
    fn default() -> Self {
        Self {
            length: 1.0,
            c: 1.0,
            alpha: -0.6,
            modes: 32,
            noise_gains: [1.0, 1.0],
            dt: 1e-2,
            t_end: 1e3,
            gaps: vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3],
            k_list: vec![4, 8, 16, 32, 64],
            bc: None,
        }
    }
}

impl HeatBlock {
    pub fn model(&self, bc: BoundaryKind, p: f64) -> HeatModelConfig {
        HeatModelConfig {
            length: self.length,
            p,
            bc,
            c: self.c,
            alpha: self.alpha,
            modes: self.modes,
            noise_gains: self.noise_gains,
        }
    }
}

/// What a variance sweep should show for an observable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expect {
    /// Log-variance grows like `log10(−1/Re λ₂)` with slope one.
    Scaling,
    /// Log-variance slope stays below 0.3.
    Silent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ObservableSpec {
    /// Cell-weighted integral of a field over `[x1a, x1b] × [x2a, x2b]`.
    Indicator { name: String, field: Field, rect: [f64; 4], expect: Option<Expect> },
    /// Coefficient along the adjoint eigenvector with 1-based spectral index.
    Eigen { name: String, index: usize, expect: Option<Expect> },
}

impl ObservableSpec {
    pub fn name(&self) -> &str {
        match self {
            ObservableSpec::Indicator { name, .. } | ObservableSpec::Eigen { name, .. } => name,
        }
    }

    pub fn expect(&self) -> Expect {
        match *self {
            ObservableSpec::Indicator { expect, .. } => expect.unwrap_or(Expect::Scaling),
            ObservableSpec::Eigen { expect, index, .. } => {
                expect.unwrap_or(if index == 2 { Expect::Scaling } else { Expect::Silent })
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArclengthBlock {
    pub ds: Option<f64>,
    pub ds_max: Option<f64>,
    pub p_min: Option<f64>,
    pub p_max: Option<f64>,
    pub max_steps: Option<usize>,
    pub max_folds: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoussBlock {
    /// 1: pitchfork regime, 2: saddle-node regime. Selects presets and steady-state recipes.
    pub regime: u8,
    pub m: usize,
    pub n: usize,
    /// Overrides the regime preset; `p` is replaced by the sweep values.
    pub params: Option<BoussinesqParams>,
    pub dt: f64,
    pub t_end: f64,
    /// Defaults to implicit Euler in regime 1 and Crank–Nicolson in regime 2.
    pub scheme: Option<TimeScheme>,
    /// Leading eigenvalues reported per branch point and eigenvalue table.
    pub n_eigs: usize,
    pub observables: Option<Vec<ObservableSpec>>,
    pub max_tau: f64,
    /// 1-based eigen-direction used by `bouss-autocorr`.
    pub autocorr_index: usize,
    pub arclength: ArclengthBlock,
    /// Bracket for the pitchfork threshold search in `bouss-branch` (regime 1).
    pub threshold_bracket: Option<[f64; 2]>,
    /// Eigenvectors (1-based) dumped as grid files by `bouss-eigs`.
    pub dump_vectors: Vec<usize>,
}

impl Default for BoussBlock {
    fn default() -> Self {
        Self {
            regime: 1,
            m: 19,
            n: 39,
            params: None,
            dt: 1e-2,
            t_end: 1e3,
            scheme: None,
            n_eigs: 3,
            observables: None,
            max_tau: 10.0,
            autocorr_index: 2,
            arclength: ArclengthBlock::default(),
            threshold_bracket: Some([0.045, 0.075]),
            dump_vectors: Vec::new(),
        }
    }
}

impl BoussBlock {
    pub fn params(&self, p: f64) -> BoussinesqParams {
        match &self.params {
            Some(b) => b.with_p(p),
            None if self.regime == 2 => BoussinesqParams::regime2(p),
            None => BoussinesqParams::regime1(p),
        }
    }

    pub fn scheme(&self) -> TimeScheme {
        self.scheme.unwrap_or(if self.regime == 2 { TimeScheme::CrankNicolson } else { TimeScheme::ImplicitEuler })
    }

    pub fn observables(&self) -> Vec<ObservableSpec> {
        if let Some(o) = &self.observables {
            return o.clone();
        }
        if self.regime == 2 {
            vec![
                ObservableSpec::Eigen { name: "e2".into(), index: 2, expect: None },
                ObservableSpec::Eigen { name: "e4".into(), index: 4, expect: None },
            ]
        } else {
            vec![
                ObservableSpec::Indicator {
                    name: "1_omega".into(),
                    field: Field::Omega,
                    rect: [-0.5, -0.2, 3.0, 4.0],
                    expect: None,
                },
                ObservableSpec::Indicator { name: "1_T".into(), field: Field::Temp, rect: [-0.3, -0.05, 3.0, 9.0], expect: None },
            ]
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelftestBlock {
    pub models: usize,
    pub max_slots: usize,
    pub taus: Vec<f64>,
}

impl Default for SelftestBlock {
    fn default() -> Self {
        Self { models: 24, max_slots: 8, taus: vec![0.0, 0.5, 2.0] }
    }
}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn seeds_or(&self, default: SeedRange) -> Vec<u64> {
        self.seeds.unwrap_or(default).seeds()
    }

    pub fn p_list_or(&self, default: &[f64]) -> Vec<f64> {
        self.p_list.clone().unwrap_or_else(|| default.to_vec())
    }

    /// Checks everything the chosen experiment reads, before any computation.
    pub fn validate(&self, exp: Experiment) -> Result<()> {
        if let Some(ps) = &self.p_list {
            ensure!(!ps.is_empty(), "p_list is empty");
            ensure!(ps.iter().all(|p| p.is_finite()), "p_list contains non-finite values");
        }
        ensure!(self.threads != Some(0), "threads must be at least 1");
        match exp {
            Experiment::HeatNeumannScaling | Experiment::HeatDirichletWeighted | Experiment::HeatWellposedness => {
                self.validate_heat(exp)
            }
            Experiment::SpectralSelftest => {
                let s = &self.selftest;
                ensure!(s.models > 0 && s.max_slots > 0, "selftest needs at least one model and one slot");
                ensure!(s.taus.iter().all(|t| *t >= 0.0 && t.is_finite()), "selftest lags must be nonnegative");
                Ok(())
            }
            _ => self.validate_bouss(exp),
        }
    }

    fn validate_heat(&self, exp: Experiment) -> Result<()> {
        let h = &self.heat;
        ensure!(h.dt > 0.0 && h.t_end > h.dt, "heat needs 0 < dt < t_end");
        match exp {
            Experiment::HeatNeumannScaling => {
                let ps = self.p_list_or(&crate::experiments::heat::NEUMANN_PS);
                ensure!(ps.len() >= 3, "a slope fit needs at least three p values");
                for p in ps {
                    h.model(BoundaryKind::Neumann, p).validate()?;
                    ensure!(p < 0.0, "Neumann sweep needs p < 0, got {p}");
                }
            }
            Experiment::HeatDirichletWeighted => {
                let ps = crate::experiments::heat::dirichlet_ps(self);
                ensure!(ps.len() >= 3, "a slope fit needs at least three p values");
                for p in ps {
                    h.model(BoundaryKind::Dirichlet, p).validate()?;
                }
            }
            _ => {
                ensure!(!h.k_list.is_empty(), "k_list is empty");
                ensure!(h.k_list.iter().all(|k| *k > 0), "k_list entries must be positive");
                for bc in crate::experiments::heat::wellposedness_bcs(self) {
                    for p in crate::experiments::heat::wellposedness_ps(self, bc) {
                        h.model(bc, p).validate()?;
                    }
                }
            }
        }
        Ok(())
    }

    fn validate_bouss(&self, exp: Experiment) -> Result<()> {
        let b = &self.bouss;
        ensure!(matches!(b.regime, 1 | 2), "regime must be 1 or 2, got {}", b.regime);
        ensure!(b.m >= 3 && b.n >= 3, "grid needs m, n >= 3");
        ensure!(b.dt > 0.0 && b.t_end > b.dt, "need 0 < dt < t_end");
        ensure!(b.max_tau > 0.0 && b.max_tau < b.t_end, "need 0 < max_tau < t_end");
        b.params(0.0).validate()?;
        if exp == Experiment::BoussSymmetry {
            ensure!(b.params(0.0).nu == 0.0, "bouss-symmetry needs nu = 0");
        }
        ensure!(b.autocorr_index >= 1, "autocorr_index is 1-based");
        ensure!(b.dump_vectors.iter().all(|k| *k >= 1), "dump_vectors are 1-based");
        if let Some([lo, hi]) = b.threshold_bracket {
            ensure!(lo < hi, "threshold_bracket must be increasing");
        }
        for o in b.observables() {
            match o {
                ObservableSpec::Indicator { rect, name, .. } => {
                    ensure!(rect[0] < rect[1] && rect[2] < rect[3], "observable {name}: empty rectangle {rect:?}");
                }
                ObservableSpec::Eigen { index, name, .. } => ensure!(index >= 1, "observable {name}: index is 1-based"),
            }
        }
        if exp == Experiment::BoussVariance {
            let ps = crate::experiments::bouss::sweep(self, exp);
            ensure!(ps.len() >= 3, "a slope fit needs at least three p values");
        }
        Ok(())
    }
}

pub fn parse_experiment(name: &str) -> Result<Experiment> {
    match Experiment::ALL.iter().find(|e| e.name() == name) {
        Some(e) => Ok(*e),
        None => {
            let known: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
            bail!("unknown experiment {name:?}; expected one of {}", known.join(", "))
        }
    }
}

//! Two-dimensional thermohaline Boussinesq model in streamfunction–vorticity form
//! on `[−H, 0] × [0, L]`, with salinity flux forcing `p(Q_S + νV_S)` at the surface.

mod continuation;
mod grid;
mod linear;
mod model;
mod newton;
mod presets;
mod simulate;
mod symmetry;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use continuation::{
    continuation_arclength, continuation_natural, is_stable, ArclengthOptions, Branch, BranchPoint,
    NaturalOptions,
};
pub use grid::{
    apply_stencil, build_grid, build_grid_with_height, forcing_profiles, nonuniform_fd_ops, FdOps,
    Grid2D, Stencil,
};
pub use linear::{
    assemble_linearization, dense_schur, leading_eigenvalues, noise_map, schur_apply, symmetric_split,
    Linearization, SchurOperator,
};
pub use model::{Discretization, Layout};
pub use newton::{newton_solve, relax, NewtonOptions, NewtonReport};
pub use presets::{
    follow, odd_leading, parameter_path, pitchfork_asymmetric_state, pitchfork_threshold,
    saddle_node_southward_state, sector_spectra, thermohaline_state, tilted_rest, Crossing,
};
pub use simulate::{
    indicator_observable, simulate_linearized, simulate_nonlinear, Field, Observable, SimOptions,
    TimeScheme, Trajectory,
};
pub use symmetry::{mirror_solution, reflect_nodes};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoussinesqParams {
    #[serde(default = "default_pr")]
    pub pr: f64,
    #[serde(default = "default_le")]
    pub le: f64,
    pub ra: f64,
    /// Newtonian cooling rate; `f64::INFINITY` pins the surface temperature.
    #[serde(serialize_with = "ser_kappa", deserialize_with = "de_kappa")]
    pub kappa: f64,
    pub length: f64,
    #[serde(default = "default_height")]
    pub height: f64,
    pub nu: f64,
    pub delta: f64,
    pub p: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

fn default_pr() -> f64 {
    2.25
}
fn default_le() -> f64 {
    1.0
}
fn default_height() -> f64 {
    1.0
}
fn default_sigma() -> f64 {
    0.01
}

fn ser_kappa<S: Serializer>(k: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if k.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*k)
    }
}

fn de_kappa<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum K {
        Num(f64),
        Text(String),
    }
    match K::deserialize(d)? {
        K::Num(x) => Ok(x),
        K::Text(t) if matches!(t.to_ascii_lowercase().as_str(), "inf" | "infinity") => Ok(f64::INFINITY),
        K::Text(t) => Err(serde::de::Error::custom(format!("invalid kappa {t:?}"))),
    }
}

impl BoussinesqParams {
    /// Pitchfork regime: `Ra = 10⁴`, `κ = 100`, `L = 10`, `ν = δ = 0`.
    pub fn regime1(p: f64) -> Self {
        Self {
            pr: default_pr(),
            le: default_le(),
            ra: 1e4,
            kappa: 100.0,
            length: 10.0,
            height: 1.0,
            nu: 0.0,
            delta: 0.0,
            p,
            sigma: default_sigma(),
        }
    }

    /// Saddle-node regime: `Ra = 4·10⁴`, `κ = ∞`, `L = 5`, `ν = −0.2`, `δ = 0.5`.
    pub fn regime2(p: f64) -> Self {
        Self { ra: 4e4, kappa: f64::INFINITY, length: 5.0, nu: -0.2, delta: 0.5, ..Self::regime1(p) }
    }

    pub fn with_p(&self, p: f64) -> Self {
        Self { p, ..self.clone() }
    }

    pub fn dirichlet_surface(&self) -> bool {
        self.kappa.is_infinite()
    }

    pub fn validate(&self) -> crate::Result<()> {
        for (name, v) in [("Pr", self.pr), ("Le", self.le), ("Ra", self.ra), ("L", self.length), ("H", self.height)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(crate::EwsError::Invalid(format!("{name} must be positive and finite")));
            }
        }
        if !(self.kappa > 0.0) {
            return Err(crate::EwsError::Invalid("kappa must be positive".into()));
        }
        if !(self.sigma >= 0.0) {
            return Err(crate::EwsError::Invalid("sigma must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Nodal fields including boundary layers, each of length `(M+2)(N+2)`, row-major in `(i, j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateFields {
    pub m: usize,
    pub n: usize,
    pub psi: Vec<f64>,
    pub omega: Vec<f64>,
    pub temp: Vec<f64>,
    pub salt: Vec<f64>,
}

impl StateFields {
    pub fn zeros(grid: &Grid2D) -> Self {
        let nn = grid.n_nodes();
        Self { m: grid.m, n: grid.n, psi: vec![0.0; nn], omega: vec![0.0; nn], temp: vec![0.0; nn], salt: vec![0.0; nn] }
    }

    /// Rest state with the surface temperature profile extended through the depth.
    pub fn rest(grid: &Grid2D, params: &BoussinesqParams) -> Self {
        let mut s = Self::zeros(grid);
        for node in 0..grid.n_nodes() {
            let (_, j) = grid.ij(node);
            let (_, _, ts) = forcing_profiles(grid.x2[j], grid.length);
            s.temp[node] = ts - params.delta;
        }
        s
    }

    pub fn max_psi(&self) -> f64 {
        self.psi.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_psi(&self) -> f64 {
        self.psi.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        [&self.psi, &self.omega, &self.temp, &self.salt].iter().all(|f| f.iter().all(|x| x.is_finite()))
    }

    /// Grid dump: one CSV row per node with coordinates and the four fields.
    pub fn to_csv(&self, grid: &Grid2D) -> String {
        let mut out = String::from("i,j,x1,x2,psi,omega,T,S\n");
        for node in 0..grid.n_nodes() {
            let (i, j) = grid.ij(node);
            out.push_str(&format!(
                "{i},{j},{},{},{},{},{},{}\n",
                grid.x1[i], grid.x2[j], self.psi[node], self.omega[node], self.temp[node], self.salt[node]
            ));
        }
        out
    }
}

//! Early-warning signs for linear SPDEs driven by boundary white noise.
//!
//! The crate is organised bottom-up:
//! - [`spectral`]: closed-form autocovariances on (generalized) eigenbases.
//! - [`heat1d`]: the one-dimensional heat equation with noisy boundary data.
//! - [`estimators`]: temporal and ensemble statistics of scalar series.
//! - [`eigensolver`]: dense eigendecompositions with weighted adjoints.
//! - [`boussinesq`]: the 2D thermohaline Boussinesq model.

pub mod boussinesq;
pub mod eigensolver;
pub mod error;
pub mod estimators;
pub mod heat1d;
pub mod rng;
pub mod sparse;
pub mod spectral;

pub use error::{EwsError, Result};
pub use num_complex::Complex64;

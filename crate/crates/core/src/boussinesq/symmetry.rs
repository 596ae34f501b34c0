use crate::error::{EwsError, Result};

use super::grid::Grid2D;
use super::{BoussinesqParams, StateFields};

/// Node index of the mirror image `(i, N+1−j)` of every node.
pub fn reflect_nodes(grid: &Grid2D) -> Vec<usize> {
    (0..grid.n_nodes())
        .map(|k| {
            let (i, j) = grid.ij(k);
            grid.node(i, grid.n + 1 - j)
        })
        .collect()
}

/// `ψ₂ = −Υψ₁, ω₂ = −Υω₁, T₂ = ΥT₁, S₂ = ΥS₁` with `Υ` the reflection `x₂ → L − x₂`.
///
/// Only valid without the antisymmetric flux component (`ν = 0`).
pub fn mirror_solution(state: &StateFields, grid: &Grid2D, params: &BoussinesqParams) -> Result<StateFields> {
    if params.nu != 0.0 {
        return Err(EwsError::Invalid("mirroring requires nu = 0".into()));
    }
    if state.m != grid.m || state.n != grid.n {
        return Err(EwsError::Invalid("state and grid sizes differ".into()));
    }
    let refl = reflect_nodes(grid);
    let map = |f: &[f64], sign: f64| -> Vec<f64> { refl.iter().map(|&k| sign * f[k]).collect() };
    Ok(StateFields {
        m: state.m,
        n: state.n,
        psi: map(&state.psi, -1.0),
        omega: map(&state.omega, -1.0),
        temp: map(&state.temp, 1.0),
        salt: map(&state.salt, 1.0),
    })
}

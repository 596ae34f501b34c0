//! Spatial discretization of the steady and time-dependent equations.
//!
//! Unknowns are stacked as `x = [ψ; ω; T; S]`: ψ and ω live on interior nodes
//! (both vanish on the walls), T on every node except a pinned surface row,
//! S on every node. The right-hand side is written as
//! `F(x) = L x + b₀ + p·b_p + Σ c·x_a·x_b`, the last sum being advection.

use crate::error::{EwsError, Result};
use crate::sparse::{CsrMatrix, TripletBuilder};

use super::grid::{forcing_profiles, nonuniform_fd_ops, FdOps, Grid2D};
use super::{BoussinesqParams, StateFields};

#[derive(Clone, Debug)]
pub struct Layout {
    pub psi_nodes: Vec<usize>,
    pub omega_nodes: Vec<usize>,
    pub temp_nodes: Vec<usize>,
    pub salt_nodes: Vec<usize>,
    pub psi_of: Vec<Option<usize>>,
    pub omega_of: Vec<Option<usize>>,
    pub temp_of: Vec<Option<usize>>,
    pub salt_of: Vec<Option<usize>>,
}

impl Layout {
    fn new(grid: &Grid2D, pin_surface_temp: bool) -> Self {
        let nn = grid.n_nodes();
        let interior: Vec<usize> = (0..nn).filter(|&k| {
            let (i, j) = grid.ij(k);
            grid.is_interior(i, j)
        })
        .collect();
        let temp: Vec<usize> = (0..nn).filter(|&k| !(pin_surface_temp && grid.ij(k).0 == grid.m + 1)).collect();
        let salt: Vec<usize> = (0..nn).collect();
        let index = |nodes: &[usize], offset: usize| {
            let mut of = vec![None; nn];
            for (n, &k) in nodes.iter().enumerate() {
                of[k] = Some(offset + n);
            }
            of
        };
        let np = interior.len();
        let nt = temp.len();
        Self {
            psi_of: index(&interior, 0),
            omega_of: index(&interior, np),
            temp_of: index(&temp, 2 * np),
            salt_of: index(&salt, 2 * np + nt),
            psi_nodes: interior.clone(),
            omega_nodes: interior,
            temp_nodes: temp,
            salt_nodes: salt,
        }
    }

    pub fn n_psi(&self) -> usize {
        self.psi_nodes.len()
    }

    /// Length of the full vector `[ψ; ω; T; S]`.
    pub fn n_full(&self) -> usize {
        self.psi_nodes.len() + self.omega_nodes.len() + self.temp_nodes.len() + self.salt_nodes.len()
    }

    /// Length of the dynamic vector `[ω; T; S]`.
    pub fn n_dyn(&self) -> usize {
        self.n_full() - self.n_psi()
    }

    pub fn omega_range(&self) -> std::ops::Range<usize> {
        self.n_psi()..2 * self.n_psi()
    }

    pub fn temp_range(&self) -> std::ops::Range<usize> {
        let s = 2 * self.n_psi();
        s..s + self.temp_nodes.len()
    }

    pub fn salt_range(&self) -> std::ops::Range<usize> {
        let s = 2 * self.n_psi() + self.temp_nodes.len();
        s..s + self.salt_nodes.len()
    }
}

/// One advection product `coeff · x[a] · x[b]` contributing to row `row`.
#[derive(Clone, Copy, Debug)]
pub struct BilinearTerm {
    pub row: usize,
    pub a: usize,
    pub b: usize,
    pub coeff: f64,
}

#[derive(Clone, Debug)]
pub struct Discretization {
    pub grid: Grid2D,
    pub params: BoussinesqParams,
    pub ops: FdOps,
    pub layout: Layout,
    pub lin: CsrMatrix,
    pub affine0: Vec<f64>,
    pub affine_p: Vec<f64>,
    pub bilinear: Vec<BilinearTerm>,
    /// Surface temperature values used when the surface row is pinned.
    pub pinned_temp: Vec<f64>,
    /// Quadrature weights of the full vector entries (ψ entries included).
    pub weights_full: Vec<f64>,
}

type Term = (usize, usize, f64);

/// Flux-form Jacobian `J(ψ, f) = ψ_{x₂} f_{x₁} − ψ_{x₁} f_{x₂}` as `(ψ node, f node, coeff)` per node.
///
/// Fluxes through dual-cell faces use streamfunction values at dual corners,
/// so the discrete velocity is divergence free and `Σ w·J = 0` exactly.
fn advection_terms(grid: &Grid2D) -> Vec<Vec<Term>> {
    let (m, n) = (grid.m as isize, grid.n as isize);
    let corner = |ci: isize, cj: isize| -> Vec<(usize, f64)> {
        if ci < 0 || ci > m || cj < 0 || cj > n {
            return Vec::new();
        }
        let mut out = Vec::with_capacity(4);
        for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            let (i, j) = ((ci + di) as usize, (cj + dj) as usize);
            if grid.is_interior(i, j) {
                out.push((grid.node(i, j), 0.25));
            }
        }
        out
    };
    let diff = |a: Vec<(usize, f64)>, b: Vec<(usize, f64)>| -> Vec<(usize, f64)> {
        a.into_iter().chain(b.into_iter().map(|(k, c)| (k, -c))).collect()
    };
    // Face flux between nodes fa and fb: ½(f_a + f_b)·Σ c ψ / width, scaled by `sign`.
    let push_flux = |out: &mut Vec<Term>, fa: usize, fb: usize, psi: &[(usize, f64)], width: f64, sign: f64| {
        for &(pn, c) in psi {
            out.push((pn, fa, sign * 0.5 * c / width));
            out.push((pn, fb, sign * 0.5 * c / width));
        }
    };

    let mut rows = Vec::with_capacity(grid.n_nodes());
    for node in 0..grid.n_nodes() {
        let (i, j) = grid.ij(node);
        let (ii, jj) = (i as isize, j as isize);
        let (w1, w2) = (grid.w1[i], grid.w2[j]);
        let mut out: Vec<Term> = Vec::new();
        if i < grid.m + 1 {
            let psi = diff(corner(ii, jj), corner(ii, jj - 1));
            push_flux(&mut out, node, grid.node(i + 1, j), &psi, w2, 1.0 / w1);
        }
        if i > 0 {
            let psi = diff(corner(ii - 1, jj), corner(ii - 1, jj - 1));
            push_flux(&mut out, grid.node(i - 1, j), node, &psi, w2, -1.0 / w1);
        }
        if j < grid.n + 1 {
            let psi = diff(corner(ii, jj), corner(ii - 1, jj));
            push_flux(&mut out, node, grid.node(i, j + 1), &psi, w1, -1.0 / w2);
        }
        if j > 0 {
            let psi = diff(corner(ii, jj - 1), corner(ii - 1, jj - 1));
            push_flux(&mut out, grid.node(i, j - 1), node, &psi, w1, 1.0 / w2);
        }
        out.sort_unstable_by_key(|&(a, b, _)| (a, b));
        let mut merged: Vec<Term> = Vec::with_capacity(out.len());
        for t in out {
            match merged.last_mut() {
                Some(last) if (last.0, last.1) == (t.0, t.1) => last.2 += t.2,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.2 != 0.0);
        rows.push(merged);
    }
    rows
}

impl Discretization {
    pub fn new(grid: &Grid2D, params: &BoussinesqParams) -> Result<Self> {
        params.validate()?;
        if (grid.length - params.length).abs() > 1e-12 * params.length {
            return Err(EwsError::Invalid("grid length differs from parameter L".into()));
        }
        let pin = params.dirichlet_surface();
        let layout = Layout::new(grid, pin);
        let ops = nonuniform_fd_ops(grid);
        let adv = advection_terms(grid);
        let nf = layout.n_full();
        let nn = grid.n_nodes();
        let top = grid.m + 1;
        let h_top = grid.h1(grid.m);
        let (pr, ra, le) = (params.pr, params.ra, params.le);

        let mut pinned_temp = vec![0.0; nn];
        for j in 0..grid.cols() {
            let (_, _, ts) = forcing_profiles(grid.x2[j], grid.length);
            pinned_temp[grid.node(top, j)] = ts - params.delta;
        }

        let mut lin = TripletBuilder::new(nf, nf);
        let mut affine0 = vec![0.0; nf];
        let mut affine_p = vec![0.0; nf];
        let mut bilinear = Vec::new();

        for &k in &layout.psi_nodes {
            let row = layout.psi_of[k].unwrap();
            for &(nb, c) in &ops.lap[k] {
                if let Some(col) = layout.psi_of[nb] {
                    lin.add(row, col, c);
                }
            }
            lin.add(row, layout.omega_of[k].unwrap(), 1.0);
        }

        for &k in &layout.omega_nodes {
            let row = layout.omega_of[k].unwrap();
            for &(nb, c) in &ops.lap[k] {
                if let Some(col) = layout.omega_of[nb] {
                    lin.add(row, col, pr * c);
                }
            }
            for &(nb, c) in &ops.d2[k] {
                match layout.temp_of[nb] {
                    Some(col) => lin.add(row, col, pr * ra * c),
                    None => affine0[row] += pr * ra * c * pinned_temp[nb],
                }
                lin.add(row, layout.salt_of[nb].unwrap(), -pr * ra * c);
            }
            for &(pn, fnode, c) in &adv[k] {
                if let (Some(a), Some(b)) = (layout.psi_of[pn], layout.omega_of[fnode]) {
                    bilinear.push(BilinearTerm { row, a, b, coeff: c });
                }
            }
        }

        for &k in &layout.temp_nodes {
            let row = layout.temp_of[k].unwrap();
            let (i, j) = grid.ij(k);
            for &(nb, c) in &ops.lap[k] {
                match layout.temp_of[nb] {
                    Some(col) => lin.add(row, col, c),
                    None => affine0[row] += c * pinned_temp[nb],
                }
            }
            if i == top {
                // Ghost elimination of T_x1 = −κ(T − T_S + δ).
                let (_, _, ts) = forcing_profiles(grid.x2[j], grid.length);
                lin.add(row, row, -2.0 * params.kappa / h_top);
                affine0[row] += 2.0 * params.kappa * (ts - params.delta) / h_top;
            }
            for &(pn, fnode, c) in &adv[k] {
                let Some(a) = layout.psi_of[pn] else { continue };
                match layout.temp_of[fnode] {
                    Some(b) => bilinear.push(BilinearTerm { row, a, b, coeff: c }),
                    None => lin.add(row, a, c * pinned_temp[fnode]),
                }
            }
        }

        for &k in &layout.salt_nodes {
            let row = layout.salt_of[k].unwrap();
            let (i, j) = grid.ij(k);
            for &(nb, c) in &ops.lap[k] {
                lin.add(row, layout.salt_of[nb].unwrap(), c / le);
            }
            if i == top {
                let (qs, vs, _) = forcing_profiles(grid.x2[j], grid.length);
                affine_p[row] += 2.0 * (qs + params.nu * vs) / (le * h_top);
            }
            for &(pn, fnode, c) in &adv[k] {
                if let (Some(a), Some(b)) = (layout.psi_of[pn], layout.salt_of[fnode]) {
                    bilinear.push(BilinearTerm { row, a, b, coeff: c });
                }
            }
        }

        let mut weights_full = vec![0.0; nf];
        for (nodes, of) in [
            (&layout.psi_nodes, &layout.psi_of),
            (&layout.omega_nodes, &layout.omega_of),
            (&layout.temp_nodes, &layout.temp_of),
            (&layout.salt_nodes, &layout.salt_of),
        ] {
            for &k in nodes.iter() {
                let (i, j) = grid.ij(k);
                weights_full[of[k].unwrap()] = grid.weight(i, j);
            }
        }

        Ok(Self {
            grid: grid.clone(),
            params: params.clone(),
            ops,
            layout,
            lin: lin.build(),
            affine0,
            affine_p,
            bilinear,
            pinned_temp,
            weights_full,
        })
    }

    /// Same grid and operators at another value of `p`.
    pub fn with_p(&self, p: f64) -> Self {
        let mut d = self.clone();
        d.params.p = p;
        d
    }

    pub fn n_full(&self) -> usize {
        self.layout.n_full()
    }

    pub fn n_dyn(&self) -> usize {
        self.layout.n_dyn()
    }

    /// Weights of the dynamic vector `[ω; T; S]`.
    pub fn weights_dyn(&self) -> Vec<f64> {
        self.weights_full[self.layout.n_psi()..].to_vec()
    }

    pub fn rhs(&self, x: &[f64]) -> Vec<f64> {
        self.rhs_at(x, self.params.p)
    }

    pub fn rhs_at(&self, x: &[f64], p: f64) -> Vec<f64> {
        let mut f = self.lin.mul_vec(x);
        for (r, fr) in f.iter_mut().enumerate() {
            *fr += self.affine0[r] + p * self.affine_p[r];
        }
        for t in &self.bilinear {
            f[t.row] += t.coeff * x[t.a] * x[t.b];
        }
        f
    }

    /// Jacobian of `rhs` at `x`; identical to the linearization with homogeneous boundary data.
    pub fn jacobian(&self, x: &[f64]) -> CsrMatrix {
        let nf = self.n_full();
        let mut t = TripletBuilder::new(nf, nf);
        for (r, c, v) in self.lin.triplets() {
            t.add(r, c, v);
        }
        for b in &self.bilinear {
            t.add(b.row, b.a, b.coeff * x[b.b]);
            t.add(b.row, b.b, b.coeff * x[b.a]);
        }
        t.build()
    }

    pub fn to_vector(&self, s: &StateFields) -> Vec<f64> {
        let l = &self.layout;
        let mut x = vec![0.0; self.n_full()];
        for (nodes, of, field) in [
            (&l.psi_nodes, &l.psi_of, &s.psi),
            (&l.omega_nodes, &l.omega_of, &s.omega),
            (&l.temp_nodes, &l.temp_of, &s.temp),
            (&l.salt_nodes, &l.salt_of, &s.salt),
        ] {
            for &k in nodes.iter() {
                x[of[k].unwrap()] = field[k];
            }
        }
        x
    }

    /// Fields from a full vector, with wall values of ψ, ω and any pinned T filled in.
    pub fn to_state(&self, x: &[f64]) -> StateFields {
        let l = &self.layout;
        let mut s = StateFields::zeros(&self.grid);
        if self.params.dirichlet_surface() {
            s.temp.copy_from_slice(&self.pinned_temp);
        }
        for (nodes, of, field) in [
            (&l.psi_nodes, &l.psi_of, &mut s.psi),
            (&l.omega_nodes, &l.omega_of, &mut s.omega),
            (&l.temp_nodes, &l.temp_of, &mut s.temp),
            (&l.salt_nodes, &l.salt_of, &mut s.salt),
        ] {
            for &k in nodes.iter() {
                field[k] = x[of[k].unwrap()];
            }
        }
        s
    }

    /// Fields of a perturbation vector: pinned values are zero.
    pub fn perturbation_to_state(&self, x: &[f64]) -> StateFields {
        let mut s = self.to_state(x);
        if self.params.dirichlet_surface() {
            for &k in self.pinned_nodes().iter() {
                s.temp[k] = 0.0;
            }
        }
        s
    }

    fn pinned_nodes(&self) -> Vec<usize> {
        (0..self.grid.n_nodes()).filter(|&k| self.layout.temp_of[k].is_none()).collect()
    }

    /// Steady residual of a field set: equation rows followed by boundary-condition defects.
    pub fn residual(&self, s: &StateFields) -> Result<Vec<f64>> {
        if !s.is_finite() {
            return Err(EwsError::Invalid("non-finite field values".into()));
        }
        let mut r = self.rhs(&self.to_vector(s));
        for k in 0..self.grid.n_nodes() {
            let (i, j) = self.grid.ij(k);
            if !self.grid.is_interior(i, j) {
                r.push(s.psi[k]);
                r.push(s.omega[k]);
            }
            if self.layout.temp_of[k].is_none() {
                r.push(s.temp[k] - self.pinned_temp[k]);
            }
        }
        Ok(r)
    }

    /// Salinity integral `Σ w S`.
    pub fn salt_integral(&self, x: &[f64]) -> f64 {
        self.layout.salt_range().map(|r| self.weights_full[r] * x[r]).sum()
    }

    /// Node ids whose coordinates fall in `[x1a, x1b] × [x2a, x2b]`.
    pub fn nodes_in_rect(&self, rect: [f64; 4]) -> Vec<usize> {
        let [a1, b1, a2, b2] = rect;
        let eps = 1e-12;
        (0..self.grid.n_nodes())
            .filter(|&k| {
                let (i, j) = self.grid.ij(k);
                let (x1, x2) = (self.grid.x1[i], self.grid.x2[j]);
                x1 >= a1 - eps && x1 <= b1 + eps && x2 >= a2 - eps && x2 <= b2 + eps
            })
            .collect()
    }
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boussinesq::build_grid;

    #[test]
    fn advection_conserves_and_kills_constants() {
        let grid = build_grid(5, 7, 2.0).unwrap();
        let adv = advection_terms(&grid);
        let nn = grid.n_nodes();
        let psi: Vec<f64> = (0..nn)
            .map(|k| {
                let (i, j) = grid.ij(k);
                if grid.is_interior(i, j) { ((k * 37 % 11) as f64) - 5.0 } else { 0.0 }
            })
            .collect();
        let f: Vec<f64> = (0..nn).map(|k| ((k * 13 % 7) as f64).sin()).collect();
        let mut total = 0.0;
        for k in 0..nn {
            let (i, j) = grid.ij(k);
            let jk: f64 = adv[k].iter().map(|&(a, b, c)| c * psi[a] * f[b]).sum();
            let jc: f64 = adv[k].iter().map(|&(a, _, c)| c * psi[a]).sum();
            assert!(jc.abs() < 1e-10, "constant not in kernel at {k}: {jc}");
            total += grid.weight(i, j) * jk;
        }
        assert!(total.abs() < 1e-10);
    }
}

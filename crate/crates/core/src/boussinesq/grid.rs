use serde::{Deserialize, Serialize};

use crate::error::{EwsError, Result};

/// Cell-vertex grid on `[−H, 0] × [0, L]`.
///
/// Index `i` runs over `x₁` (depth, `0` at the floor, `M+1` at the surface) and
/// `j` over `x₂` (`0` at the southern wall, `N+1` at the northern wall).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub m: usize,
    pub n: usize,
    pub length: f64,
    pub height: f64,
    /// `x₁` coordinates, length `M+2`.
    pub x1: Vec<f64>,
    /// `x₂` coordinates, length `N+2`.
    pub x2: Vec<f64>,
    /// Dual-cell widths in `x₁` (half spacings at the walls).
    pub w1: Vec<f64>,
    /// Dual-cell widths in `x₂`.
    pub w2: Vec<f64>,
}

impl Grid2D {
    pub fn rows(&self) -> usize {
        self.m + 2
    }

    pub fn cols(&self) -> usize {
        self.n + 2
    }

    pub fn n_nodes(&self) -> usize {
        self.rows() * self.cols()
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        i * self.cols() + j
    }

    pub fn ij(&self, node: usize) -> (usize, usize) {
        (node / self.cols(), node % self.cols())
    }

    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        i >= 1 && i <= self.m && j >= 1 && j <= self.n
    }

    /// Spacing `x₁[i+1] − x₁[i]`.
    pub fn h1(&self, i: usize) -> f64 {
        self.x1[i + 1] - self.x1[i]
    }

    pub fn h2(&self) -> f64 {
        self.length / (self.n + 1) as f64
    }

    /// Quadrature weight (dual-cell area) of a node.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w1[i] * self.w2[j]
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|k| {
            let (i, j) = self.ij(k);
            self.weight(i, j)
        })
        .collect()
    }
}

fn dual_widths(x: &[f64]) -> Vec<f64> {
    let last = x.len() - 1;
    (0..x.len())
        .map(|i| {
            let left = if i == 0 { 0.0 } else { x[i] - x[i - 1] };
            let right = if i == last { 0.0 } else { x[i + 1] - x[i] };
            0.5 * (left + right)
        })
        .collect()
}

/// Stretched in depth (refined at floor and surface), uniform in `x₂`.
pub fn build_grid(m: usize, n: usize, length: f64) -> Result<Grid2D> {
    build_grid_with_height(m, n, length, 1.0)
}

pub fn build_grid_with_height(m: usize, n: usize, length: f64, height: f64) -> Result<Grid2D> {
    if m < 3 || n < 3 {
        return Err(EwsError::Invalid("grid needs M, N >= 3".into()));
    }
    if !(length > 0.0) || !(height > 0.0) {
        return Err(EwsError::Invalid("domain sizes must be positive".into()));
    }
    let t = 1.5f64.tanh();
    let x1: Vec<f64> = (0..m + 2)
        .map(|i| {
            if i == 0 {
                return -height;
            }
            if i == m + 1 {
                return 0.0;
            }
            let y = -1.0 + i as f64 / (m + 1) as f64;
            height * (-0.5 - (-3.0 * (y + 0.5)).tanh() / (2.0 * t))
        })
        .collect();
    let h2 = length / (n + 1) as f64;
    let x2: Vec<f64> = (0..n + 2)
        .map(|j| if j == n + 1 { length } else { j as f64 * h2 })
        .collect();
    let w1 = dual_widths(&x1);
    let w2 = dual_widths(&x2);
    Ok(Grid2D { m, n, length, height, x1, x2, w1, w2 })
}

/// `(Q_S, V_S, T_S)` at `x₂`.
pub fn forcing_profiles(x2: f64, length: f64) -> (f64, f64, f64) {
    use std::f64::consts::PI;
    let s = x2 / length - 0.5;
    let c2 = (2.0 * PI * s).cos();
    (3.0 * c2, -(PI * s).sin(), 0.5 * (c2 + 1.0))
}

/// Sparse stencil: `(node, coefficient)` pairs.
pub type Stencil = Vec<(usize, f64)>;

/// Second- and first-derivative stencils on the grid.
///
/// Second derivatives at boundary nodes use the mirror ghost point of a
/// homogeneous Neumann condition; boundary data enter separately.
#[derive(Clone, Debug)]
pub struct FdOps {
    pub d1: Vec<Stencil>,
    pub d2: Vec<Stencil>,
    pub d11: Vec<Stencil>,
    pub d22: Vec<Stencil>,
    pub lap: Vec<Stencil>,
}

pub fn nonuniform_fd_ops(grid: &Grid2D) -> FdOps {
    let nn = grid.n_nodes();
    let (mut d1, mut d2, mut d11, mut d22, mut lap) =
        (Vec::with_capacity(nn), Vec::with_capacity(nn), Vec::with_capacity(nn), Vec::with_capacity(nn), Vec::with_capacity(nn));
    let h2 = grid.h2();
    let last_i = grid.m + 1;
    let last_j = grid.n + 1;
    for node in 0..nn {
        let (i, j) = grid.ij(node);
        let at = |ii: usize, jj: usize| grid.node(ii, jj);

        let s11: Stencil = if i == 0 {
            let h = grid.h1(0);
            vec![(at(0, j), -2.0 / (h * h)), (at(1, j), 2.0 / (h * h))]
        } else if i == last_i {
            let h = grid.h1(last_i - 1);
            vec![(at(last_i - 1, j), 2.0 / (h * h)), (at(last_i, j), -2.0 / (h * h))]
        } else {
            let (hm, hp) = (grid.h1(i - 1), grid.h1(i));
            let a = 2.0 / (hm * (hm + hp));
            let c = 2.0 / (hp * (hm + hp));
            vec![(at(i - 1, j), a), (at(i, j), -a - c), (at(i + 1, j), c)]
        };
        let s22: Stencil = if j == 0 {
            vec![(at(i, 0), -2.0 / (h2 * h2)), (at(i, 1), 2.0 / (h2 * h2))]
        } else if j == last_j {
            vec![(at(i, last_j - 1), 2.0 / (h2 * h2)), (at(i, last_j), -2.0 / (h2 * h2))]
        } else {
            vec![(at(i, j - 1), 1.0 / (h2 * h2)), (at(i, j), -2.0 / (h2 * h2)), (at(i, j + 1), 1.0 / (h2 * h2))]
        };
        // First derivatives: 3-point non-uniform central, one-sided 3-point at walls.
        let s1: Stencil = if i == 0 {
            one_sided(&grid.x1, 0, 1, 2, |k| at(k, j))
        } else if i == last_i {
            one_sided(&grid.x1, last_i, last_i - 1, last_i - 2, |k| at(k, j))
        } else {
            let (hm, hp) = (grid.h1(i - 1), grid.h1(i));
            vec![
                (at(i - 1, j), -hp / (hm * (hm + hp))),
                (at(i, j), (hp - hm) / (hm * hp)),
                (at(i + 1, j), hm / (hp * (hm + hp))),
            ]
        };
        let s2: Stencil = if j == 0 {
            vec![(at(i, 0), -1.5 / h2), (at(i, 1), 2.0 / h2), (at(i, 2), -0.5 / h2)]
        } else if j == last_j {
            vec![(at(i, last_j), 1.5 / h2), (at(i, last_j - 1), -2.0 / h2), (at(i, last_j - 2), 0.5 / h2)]
        } else {
            vec![(at(i, j - 1), -0.5 / h2), (at(i, j + 1), 0.5 / h2)]
        };
        let mut l = s11.clone();
        l.extend(s22.iter().copied());
        d1.push(s1);
        d2.push(s2);
        d11.push(s11);
        d22.push(s22);
        lap.push(l);
    }
    FdOps { d1, d2, d11, d22, lap }
}

/// Three-point derivative at `x[a]` from nodes `a, b, c` (exact on quadratics).
fn one_sided(x: &[f64], a: usize, b: usize, c: usize, node: impl Fn(usize) -> usize) -> Stencil {
    let (xa, xb, xc) = (x[a], x[b], x[c]);
    let ca = 1.0 / (xa - xb) + 1.0 / (xa - xc);
    let cb = (xa - xc) / ((xb - xa) * (xb - xc));
    let cc = (xa - xb) / ((xc - xa) * (xc - xb));
    vec![(node(a), ca), (node(b), cb), (node(c), cc)]
}

pub fn apply_stencil(s: &Stencil, f: &[f64]) -> f64 {
    s.iter().map(|&(k, c)| c * f[k]).sum()
}

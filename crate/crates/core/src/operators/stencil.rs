//! Second-order finite-difference stencils on uniform grids.

use crate::error::{PgdmError, Result};
use crate::field::{Boundary, Field, GridSpec};
use crate::sparse::SparseMatrix;

/// Neighbour of `flat` one step along `axis` (`forward` or backward), or
/// `None` when the step leaves a zero-Dirichlet domain.
#[inline]
fn neighbour(grid: &GridSpec, flat: usize, axis: usize, forward: bool) -> Option<usize> {
    let n = grid.nodes_per_dim();
    let stride = n.pow((grid.spatial_dim - 1 - axis) as u32);
    let i = (flat / stride) % n;
    match (grid.boundary, forward) {
        (Boundary::DirichletZero, true) => (i + 1 < n).then(|| flat + stride),
        (Boundary::DirichletZero, false) => (i > 0).then(|| flat - stride),
        (Boundary::Periodic, true) => Some(if i + 1 < n {
            flat + stride
        } else {
            flat + stride - n * stride
        }),
        (Boundary::Periodic, false) => Some(if i > 0 {
            flat - stride
        } else {
            flat + (n - 1) * stride
        }),
    }
}

/// 5-point (2D) / 7-point (3D) Laplacian of one spatial slice.
pub(crate) fn laplacian_slice(grid: &GridSpec, u: &[f64]) -> Vec<f64> {
    let inv_h2 = (grid.cells * grid.cells) as f64;
    let d = grid.spatial_dim;
    (0..u.len())
        .map(|p| {
            let mut acc = -2.0 * d as f64 * u[p];
            for axis in 0..d {
                acc += neighbour(grid, p, axis, true).map_or(0.0, |q| u[q]);
                acc += neighbour(grid, p, axis, false).map_or(0.0, |q| u[q]);
            }
            acc * inv_h2
        })
        .collect()
}

/// Central first difference along `axis` of one periodic slice.
pub(crate) fn central_difference_slice(grid: &GridSpec, u: &[f64], axis: usize) -> Vec<f64> {
    let scale = grid.cells as f64 / 2.0;
    (0..u.len())
        .map(|p| {
            let fwd = neighbour(grid, p, axis, true).map_or(0.0, |q| u[q]);
            let bwd = neighbour(grid, p, axis, false).map_or(0.0, |q| u[q]);
            (fwd - bwd) * scale
        })
        .collect()
}

/// Appends `scale * Laplacian` triplets for one spatial slice.
pub(crate) fn push_laplacian(grid: &GridSpec, scale: f64, out: &mut Vec<(usize, usize, f64)>) {
    let w = scale * (grid.cells * grid.cells) as f64;
    let d = grid.spatial_dim;
    for p in 0..grid.spatial_len() {
        out.push((p, p, -2.0 * d as f64 * w));
        for axis in 0..d {
            for forward in [true, false] {
                if let Some(q) = neighbour(grid, p, axis, forward) {
                    out.push((p, q, w));
                }
            }
        }
    }
}

/// Appends `diag(coeff) * D_axis` central-difference triplets.
pub(crate) fn push_central_difference(
    grid: &GridSpec,
    axis: usize,
    coeff: &[f64],
    out: &mut Vec<(usize, usize, f64)>,
) {
    let scale = grid.cells as f64 / 2.0;
    for (p, &c) in coeff.iter().enumerate() {
        if let Some(q) = neighbour(grid, p, axis, true) {
            out.push((p, q, c * scale));
        }
        if let Some(q) = neighbour(grid, p, axis, false) {
            out.push((p, q, -c * scale));
        }
    }
}

/// Sparse discrete Laplacian on the spatial nodes of `grid`.
pub fn laplacian_matrix(grid: &GridSpec) -> SparseMatrix {
    let n = grid.spatial_len();
    let mut t = Vec::with_capacity(n * (2 * grid.spatial_dim + 1));
    push_laplacian(grid, 1.0, &mut t);
    SparseMatrix::from_triplets(n, n, &t)
}

/// Applies the discrete Laplacian with spacing `h = 1/K`; zero ghost values
/// outside a Dirichlet domain, wrapped indices on a periodic one. Trajectories
/// are processed slice by slice.
pub fn discrete_laplacian_apply(u: &Field) -> Result<Field> {
    let grid = *u.grid();
    let spatial = grid.spatial();
    let len = spatial.spatial_len();
    if u.len() != grid.len() {
        return Err(PgdmError::invalid("field length disagrees with its grid"));
    }
    let mut out = Vec::with_capacity(u.len());
    for chunk in u.values().chunks_exact(len) {
        out.extend(laplacian_slice(&spatial, chunk));
    }
    Field::from_vec(grid, out)
}

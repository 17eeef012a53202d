//! Tensor-product cubic spline resampling between nested uniform grids.
//!
//! Dirichlet data is padded with the zero boundary knots at `x = 0` and
//! `x = 1` and closed with natural end conditions; periodic data uses the
//! periodic spline. The spline is linear in the data, so each axis reduces
//! to a dense `n_dst x n_src` matrix applied along that axis.

use super::{Boundary, Field, GridSpec};
use crate::error::{PgdmError, Result};

/// Spatial cubic-spline interpolation of `src` onto the (finer) `target` grid.
/// Trajectories are interpolated slice by slice; time is never resampled.
pub fn csi_upsample(src: &Field, target: &GridSpec) -> Result<Field> {
    check_pair(src.grid(), target)?;
    if target.cells < src.grid().cells {
        return Err(PgdmError::invalid(format!(
            "upsampling needs target K >= source K ({} < {})",
            target.cells,
            src.grid().cells
        )));
    }
    resample(src, target)
}

/// Spline evaluation of `src` at the nodes of the (coarser) `target` grid.
/// Reduces to node injection whenever the target nodes are source nodes.
pub fn restrict(src: &Field, target: &GridSpec) -> Result<Field> {
    check_pair(src.grid(), target)?;
    if target.cells > src.grid().cells {
        return Err(PgdmError::invalid(format!(
            "restriction needs target K <= source K ({} > {})",
            target.cells,
            src.grid().cells
        )));
    }
    resample(src, target)
}

fn check_pair(src: &GridSpec, target: &GridSpec) -> Result<()> {
    if !src.compatible_with(target) {
        return Err(PgdmError::invalid(format!(
            "incompatible grids: {:?}/{}d/{} steps vs {:?}/{}d/{} steps",
            src.boundary,
            src.spatial_dim,
            src.time_steps,
            target.boundary,
            target.spatial_dim,
            target.time_steps
        )));
    }
    Ok(())
}

fn resample(src: &Field, target: &GridSpec) -> Result<Field> {
    let sg = src.grid();
    let mut target = *target;
    target.dt = sg.dt;
    if sg.cells == target.cells {
        return Field::from_vec(target, src.values().to_vec());
    }
    let n_src = sg.nodes_per_dim();
    let n_dst = target.nodes_per_dim();
    let matrix = spline_matrix(sg.boundary, sg.cells, target.cells);

    let mut dims = sg.shape();
    let mut values = src.values().to_vec();
    let first_spatial = usize::from(sg.is_evolution());
    for axis in first_spatial..dims.len() {
        values = apply_along_axis(&values, &dims, axis, &matrix, n_src, n_dst);
        dims[axis] = n_dst;
    }
    Field::from_vec(target, values)
}

/// Dense 1D interpolation matrix (row-major, `n_dst x n_src`) mapping node
/// values on a `src_cells` grid to spline values at `dst_cells` grid nodes.
pub fn spline_matrix(boundary: Boundary, src_cells: usize, dst_cells: usize) -> Vec<f64> {
    let (n_src, n_dst) = match boundary {
        Boundary::DirichletZero => (src_cells - 1, dst_cells - 1),
        Boundary::Periodic => (src_cells, dst_cells),
    };
    let mut matrix = vec![0.0; n_dst * n_src];
    let mut unit = vec![0.0; n_src];
    for s in 0..n_src {
        unit.iter_mut().for_each(|v| *v = 0.0);
        unit[s] = 1.0;
        let spline = Spline1d::fit(boundary, &unit);
        for j in 0..n_dst {
            let node = match boundary {
                Boundary::DirichletZero => j + 1,
                Boundary::Periodic => j,
            };
            matrix[j * n_src + s] = spline.eval_at_node(node, dst_cells);
        }
    }
    matrix
}

fn apply_along_axis(
    values: &[f64],
    dims: &[usize],
    axis: usize,
    matrix: &[f64],
    n_src: usize,
    n_dst: usize,
) -> Vec<f64> {
    debug_assert_eq!(dims[axis], n_src);
    let outer: usize = dims[..axis].iter().product();
    let inner: usize = dims[axis + 1..].iter().product();
    let mut out = vec![0.0; outer * n_dst * inner];
    for o in 0..outer {
        let src_block = &values[o * n_src * inner..(o + 1) * n_src * inner];
        let dst_block = &mut out[o * n_dst * inner..(o + 1) * n_dst * inner];
        for j in 0..n_dst {
            let row = &matrix[j * n_src..(j + 1) * n_src];
            let dst = &mut dst_block[j * inner..(j + 1) * inner];
            for (s, &w) in row.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let src_line = &src_block[s * inner..(s + 1) * inner];
                for (d, &v) in dst.iter_mut().zip(src_line) {
                    *d += w * v;
                }
            }
        }
    }
    out
}

/// Cubic spline through knots `x_i = i/K` stored as knot values and second
/// derivatives over one full period / the closed interval.
struct Spline1d {
    cells: usize,
    periodic: bool,
    // knot values y_0..y_K (Dirichlet) or y_0..y_{K-1} (periodic)
    y: Vec<f64>,
    m: Vec<f64>,
}

impl Spline1d {
    fn fit(boundary: Boundary, data: &[f64]) -> Self {
        match boundary {
            Boundary::DirichletZero => {
                let cells = data.len() + 1;
                let mut y = Vec::with_capacity(cells + 1);
                y.push(0.0);
                y.extend_from_slice(data);
                y.push(0.0);
                let h2 = 1.0 / (cells * cells) as f64;
                let rhs: Vec<f64> = (1..cells)
                    .map(|i| 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]) / h2)
                    .collect();
                let interior = solve_tridiagonal(1.0, 4.0, 1.0, &rhs);
                let mut m = Vec::with_capacity(cells + 1);
                m.push(0.0);
                m.extend(interior);
                m.push(0.0);
                Spline1d {
                    cells,
                    periodic: false,
                    y,
                    m,
                }
            }
            Boundary::Periodic => {
                let cells = data.len();
                let h2 = 1.0 / (cells * cells) as f64;
                let rhs: Vec<f64> = (0..cells)
                    .map(|i| {
                        let prev = data[(i + cells - 1) % cells];
                        let next = data[(i + 1) % cells];
                        6.0 * (next - 2.0 * data[i] + prev) / h2
                    })
                    .collect();
                let m = solve_cyclic_tridiagonal(1.0, 4.0, 1.0, &rhs);
                Spline1d {
                    cells,
                    periodic: true,
                    y: data.to_vec(),
                    m,
                }
            }
        }
    }

    /// Evaluates at `x = node / dst_cells` using exact integer bracketing.
    fn eval_at_node(&self, node: usize, dst_cells: usize) -> f64 {
        let num = node * self.cells;
        let mut i = num / dst_cells;
        let mut t = (num % dst_cells) as f64 / dst_cells as f64;
        if !self.periodic && i == self.cells {
            i -= 1;
            t = 1.0;
        }
        let i1 = if self.periodic {
            (i + 1) % self.cells
        } else {
            i + 1
        };
        let i = i % self.y.len();
        let h2 = 1.0 / (self.cells * self.cells) as f64;
        let s = 1.0 - t;
        s * self.y[i]
            + t * self.y[i1]
            + h2 / 6.0 * ((s * s * s - s) * self.m[i] + (t * t * t - t) * self.m[i1])
    }
}

/// Thomas algorithm for a constant-coefficient tridiagonal system.
fn solve_tridiagonal(sub: f64, diag: f64, sup: f64, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    if n == 0 {
        return Vec::new();
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup / diag;
    d[0] = rhs[0] / diag;
    for i in 1..n {
        let denom = diag - sub * c[i - 1];
        c[i] = sup / denom;
        d[i] = (rhs[i] - sub * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Periodic tridiagonal solve via Sherman-Morrison on the Thomas solver.
fn solve_cyclic_tridiagonal(sub: f64, diag: f64, sup: f64, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    // corner entries: A[0][n-1] = sub, A[n-1][0] = sup
    let gamma = -diag;
    let mut modified = vec![diag; n];
    modified[0] = diag - gamma;
    modified[n - 1] = diag - sup * sub / gamma;

    let solve = |b: &[f64]| -> Vec<f64> {
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        c[0] = sup / modified[0];
        d[0] = b[0] / modified[0];
        for i in 1..n {
            let denom = modified[i] - sub * c[i - 1];
            c[i] = sup / denom;
            d[i] = (b[i] - sub * d[i - 1]) / denom;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = d[i] - c[i] * x[i + 1];
        }
        x
    };

    let x = solve(rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = sup;
    let z = solve(&u);
    let v0 = 1.0;
    let vn = sub / gamma;
    let fact = (x[0] * v0 + x[n - 1] * vn) / (1.0 + z[0] * v0 + z[n - 1] * vn);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::relative_l2_error;
    use std::f64::consts::PI;

    fn grid(k: usize, b: Boundary) -> GridSpec {
        GridSpec::new(2, k, b).unwrap()
    }

    #[test]
    fn cyclic_solver_matches_dense_residual() {
        let rhs: Vec<f64> = (0..9).map(|i| (i as f64 * 0.7).sin()).collect();
        let x = solve_cyclic_tridiagonal(1.0, 4.0, 1.0, &rhs);
        for i in 0..9 {
            let ax = x[(i + 8) % 9] + 4.0 * x[i] + x[(i + 1) % 9];
            assert!((ax - rhs[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn constant_is_reproduced_on_periodic_grid() {
        let src = Field::constant(grid(16, Boundary::Periodic), 3.25);
        let up = csi_upsample(&src, &grid(128, Boundary::Periodic)).unwrap();
        assert!(up.values().iter().all(|v| (v - 3.25).abs() < 1e-12));
    }

    #[test]
    fn dirichlet_spline_interpolates_its_knots() {
        let coarse = grid(16, Boundary::DirichletZero);
        let fine = grid(128, Boundary::DirichletZero);
        let u = Field::from_fn(coarse, |x| x[0] * (1.0 - x[0]));
        let up = csi_upsample(&u, &fine).unwrap();
        let back = restrict(&up, &coarse).unwrap();
        for (a, b) in back.values().iter().zip(u.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn smooth_periodic_mode_upsamples_accurately() {
        let f = |x: &[f64]| (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin();
        let coarse = Field::from_fn(grid(16, Boundary::Periodic), f);
        let fine_grid = grid(128, Boundary::Periodic);
        let up = csi_upsample(&coarse, &fine_grid).unwrap();
        let exact = Field::from_fn(fine_grid, f);
        let err = up
            .values()
            .iter()
            .zip(exact.values())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-2, "max error {err}");
    }

    #[test]
    fn periodic_restriction_is_injection() {
        let fine_grid = grid(128, Boundary::Periodic);
        let u = Field::from_fn(fine_grid, |x| (7.0 * x[0]).sin() * (x[1] - 0.3).powi(2));
        let coarse = restrict(&u, &grid(16, Boundary::Periodic)).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                assert_eq!(coarse.values()[i * 16 + j], u.values()[(8 * i) * 128 + 8 * j]);
            }
        }
    }

    #[test]
    fn trajectories_are_resampled_per_slice() {
        let g = grid(8, Boundary::Periodic);
        let a = Field::from_fn(g, |x| (2.0 * PI * x[0]).cos());
        let b = a.scale(-2.0);
        let traj = Field::stack(&[a.clone(), b.clone()], 0.05).unwrap();
        let fine = grid(32, Boundary::Periodic).with_time(2, 0.05).unwrap();
        let up = csi_upsample(&traj, &fine).unwrap();
        let a_up = csi_upsample(&a, &grid(32, Boundary::Periodic)).unwrap();
        assert_eq!(up.slice(0), a_up);
        assert!(relative_l2_error(&up.slice(1), &a_up.scale(-2.0)).unwrap() < 1e-14);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let u = Field::zeros(grid(16, Boundary::Periodic));
        assert!(csi_upsample(&u, &grid(32, Boundary::DirichletZero)).is_err());
        assert!(csi_upsample(&u, &grid(8, Boundary::Periodic)).is_err());
        assert!(restrict(&u, &grid(32, Boundary::Periodic)).is_err());
        let three = GridSpec::new(3, 32, Boundary::Periodic).unwrap();
        assert!(csi_upsample(&u, &three).is_err());
    }
}

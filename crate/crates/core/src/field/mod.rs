//! Uniform grids on the unit cube, fields living on them, and the
//! resolution-changing operators shared by every solver.
//!
//! Node placement: with `h = 1/K`, a zero-Dirichlet grid stores only the
//! `K - 1` interior nodes `x_i = i/K, i = 1..K-1` per axis, while a periodic
//! grid stores `K` nodes `x_i = i/K, i = 0..K-1`. Both families nest exactly
//! when one resolution divides the other.
//!
//! Spatio-temporal fields carry a leading time axis of length `K_t`; the
//! initial condition is never part of the stored trajectory.

mod io;
mod spline;

pub use io::{read_array, read_field, write_array, write_field, FIELD_MAGIC};
pub use spline::{csi_upsample, restrict, spline_matrix};

use serde::{Deserialize, Serialize};

use crate::error::{PgdmError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Boundary {
    DirichletZero,
    Periodic,
}

/// Discretization geometry: `K` cells per axis on `[0, 1]^d`, optionally
/// with `K_t` implicit time steps of size `dt`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub spatial_dim: usize,
    pub cells: usize,
    pub boundary: Boundary,
    #[serde(default)]
    pub time_steps: usize,
    #[serde(default)]
    pub dt: f64,
}

impl GridSpec {
    pub fn new(spatial_dim: usize, cells: usize, boundary: Boundary) -> Result<Self> {
        let grid = GridSpec {
            spatial_dim,
            cells,
            boundary,
            time_steps: 0,
            dt: 0.0,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn with_time(mut self, time_steps: usize, dt: f64) -> Result<Self> {
        self.time_steps = time_steps;
        self.dt = dt;
        self.validate()?;
        Ok(self)
    }

    /// Same geometry at a different resolution.
    pub fn with_cells(mut self, cells: usize) -> Result<Self> {
        self.cells = cells;
        self.validate()?;
        Ok(self)
    }

    /// The purely spatial grid (time axis dropped).
    pub fn spatial(mut self) -> Self {
        self.time_steps = 0;
        self.dt = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.spatial_dim) {
            return Err(PgdmError::invalid(format!(
                "spatial_dim must be 2 or 3, got {}",
                self.spatial_dim
            )));
        }
        if self.cells < 4 {
            return Err(PgdmError::invalid(format!(
                "grid needs at least 4 cells per axis, got {}",
                self.cells
            )));
        }
        if self.time_steps > 0 && !(self.dt.is_finite() && self.dt >= 0.0) {
            return Err(PgdmError::invalid(format!("invalid time step {}", self.dt)));
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        1.0 / self.cells as f64
    }

    pub fn nodes_per_dim(&self) -> usize {
        match self.boundary {
            Boundary::DirichletZero => self.cells - 1,
            Boundary::Periodic => self.cells,
        }
    }

    /// Coordinate of node `i` along any axis.
    pub fn coord(&self, i: usize) -> f64 {
        match self.boundary {
            Boundary::DirichletZero => (i + 1) as f64 * self.h(),
            Boundary::Periodic => i as f64 * self.h(),
        }
    }

    pub fn is_evolution(&self) -> bool {
        self.time_steps > 0
    }

    pub fn spatial_len(&self) -> usize {
        self.nodes_per_dim().pow(self.spatial_dim as u32)
    }

    pub fn len(&self) -> usize {
        self.spatial_len() * self.time_steps.max(1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spatial_shape(&self) -> Vec<usize> {
        vec![self.nodes_per_dim(); self.spatial_dim]
    }

    /// Array shape, time axis first for trajectories.
    pub fn shape(&self) -> Vec<usize> {
        let mut shape = Vec::with_capacity(self.spatial_dim + 1);
        if self.is_evolution() {
            shape.push(self.time_steps);
        }
        shape.extend(self.spatial_shape());
        shape
    }

    /// Whether two grids differ only in resolution.
    pub fn compatible_with(&self, other: &GridSpec) -> bool {
        self.spatial_dim == other.spatial_dim
            && self.boundary == other.boundary
            && self.time_steps == other.time_steps
    }
}

/// Real values on a [`GridSpec`], row-major with the last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: GridSpec) -> Self {
        Field {
            values: vec![0.0; grid.len()],
            grid,
        }
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Field {
            values: vec![value; grid.len()],
            grid,
        }
    }

    pub fn from_vec(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(PgdmError::invalid(format!(
                "field has {} values but grid {:?} needs {}",
                values.len(),
                grid.shape(),
                grid.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(PgdmError::Domain(format!(
                "non-finite value {} at index {pos}",
                values[pos]
            )));
        }
        Ok(Field { grid, values })
    }

    /// Samples `f` at every spatial node of a static grid.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let grid = grid.spatial();
        let n = grid.nodes_per_dim();
        let d = grid.spatial_dim;
        let mut x = vec![0.0; d];
        let values = (0..grid.spatial_len())
            .map(|flat| {
                let mut rem = flat;
                for axis in (0..d).rev() {
                    x[axis] = grid.coord(rem % n);
                    rem /= n;
                }
                f(&x)
            })
            .collect();
        Field { grid, values }
    }

    /// Stacks static slices into a trajectory with `dt` spacing.
    pub fn stack(slices: &[Field], dt: f64) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| PgdmError::invalid("cannot stack zero slices"))?;
        let spatial = first.grid;
        if spatial.is_evolution() {
            return Err(PgdmError::invalid("only static slices can be stacked"));
        }
        let mut values = Vec::with_capacity(spatial.spatial_len() * slices.len());
        for s in slices {
            if s.grid != spatial {
                return Err(PgdmError::invalid("slices live on different grids"));
            }
            values.extend_from_slice(&s.values);
        }
        let grid = spatial.with_time(slices.len(), dt)?;
        Ok(Field { grid, values })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of time slices (1 for static fields).
    pub fn num_slices(&self) -> usize {
        self.grid.time_steps.max(1)
    }

    /// Slice `n` of a trajectory as a static field; a static field is its own slice 0.
    pub fn slice(&self, n: usize) -> Field {
        let len = self.grid.spatial_len();
        assert!(n < self.num_slices(), "slice {n} out of range");
        Field {
            grid: self.grid.spatial(),
            values: self.values[n * len..(n + 1) * len].to_vec(),
        }
    }

    pub fn slices(&self) -> impl Iterator<Item = Field> + '_ {
        (0..self.num_slices()).map(|n| self.slice(n))
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `self + alpha * other`, elementwise.
    pub fn axpy(&self, alpha: f64, other: &Field) -> Result<Field> {
        self.check_same_shape(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Ok(Field {
            grid: self.grid,
            values,
        })
    }

    pub fn scale(&self, alpha: f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }

    pub fn check_same_shape(&self, other: &Field) -> Result<()> {
        if self.grid.shape() != other.grid.shape() || self.grid.boundary != other.grid.boundary {
            return Err(PgdmError::invalid(format!(
                "shape mismatch: {:?} vs {:?}",
                self.grid.shape(),
                other.grid.shape()
            )));
        }
        Ok(())
    }
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `||u - reference||_2 / ||reference||_2` over every entry, all time slices included.
pub fn relative_l2_error(u: &Field, reference: &Field) -> Result<f64> {
    u.check_same_shape(reference)?;
    let denom = reference.norm();
    if denom == 0.0 {
        return Err(PgdmError::Domain(
            "relative error against a zero-norm reference".into(),
        ));
    }
    let num = u
        .values
        .iter()
        .zip(&reference.values)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(num / denom)
}

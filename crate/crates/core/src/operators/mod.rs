//! Discrete nonlinear operators for the three model problems and the
//! residual systems handed to the least-squares solvers.
//!
//! * nonlinear Poisson, static: `r(u) = -c lap u + u^3 - a`
//! * Allen-Cahn, one implicit-Euler step:
//!   `r(u) = u - dt (kappa lap u + gamma u (1/4 - u^2)) - u_prev`
//! * vorticity Navier-Stokes, one implicit-Euler step:
//!   `r(w) = w - w_prev + dt (mu u(w).grad w - nu lap w - f)`
//!
//! The Navier-Stokes sparse Jacobian freezes the velocity at the current
//! iterate (the exact derivative through the streamfunction is dense); the
//! residual and [`ResidualSystem::jvp`] stay exact.

mod navier_stokes;
mod stencil;

pub use navier_stokes::{reference_step_ns, velocity_from_vorticity, SpectralNsStepper};
pub use stencil::{discrete_laplacian_apply, laplacian_matrix};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{PgdmError, Result};
use crate::field::{Boundary, Field, GridSpec};
use crate::sparse::SparseMatrix;

/// Square nonlinear system `r(u) = 0` with an assembled sparse Jacobian.
pub trait ResidualSystem {
    /// Number of unknowns (and residual entries).
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn residual(&self, u: &[f64]) -> Vec<f64>;

    /// Sparse Jacobian used by the Gauss-Newton family.
    fn jacobian(&self, u: &[f64]) -> SparseMatrix;

    /// Exact directional derivative `r'(u) v`.
    fn jvp(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        self.jacobian(u).mul_vec(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EquationKind {
    NonlinearPoisson,
    AllenCahn,
    NavierStokesVorticity,
}

/// Body force for the vorticity equation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Forcing {
    #[default]
    None,
    /// `f = A (sin(2 pi (x + y)) + cos(2 pi (x + y)))`
    SinCosDiagonal { amplitude: f64 },
}

impl Forcing {
    pub fn evaluate(&self, grid: &GridSpec) -> Field {
        match *self {
            Forcing::None => Field::zeros(grid.spatial()),
            Forcing::SinCosDiagonal { amplitude } => Field::from_fn(*grid, |x| {
                let s = 2.0 * PI * (x[0] + x[1]);
                amplitude * (s.sin() + s.cos())
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquationSpec {
    pub kind: EquationKind,
    /// 0.0005 for Poisson, kappa for Allen-Cahn, nu for Navier-Stokes.
    pub diffusion_coeff: f64,
    #[serde(default)]
    pub reaction_coeff: f64,
    #[serde(default)]
    pub transport_coeff: f64,
    #[serde(default)]
    pub forcing: Forcing,
    pub boundary: Boundary,
    #[serde(default)]
    pub dt: f64,
    #[serde(default)]
    pub time_steps: usize,
}

impl EquationSpec {
    /// `-0.0005 lap u + u^3 = a` with zero Dirichlet data.
    pub fn poisson() -> Self {
        EquationSpec {
            kind: EquationKind::NonlinearPoisson,
            diffusion_coeff: 0.0005,
            reaction_coeff: 0.0,
            transport_coeff: 0.0,
            forcing: Forcing::None,
            boundary: Boundary::DirichletZero,
            dt: 0.0,
            time_steps: 0,
        }
    }

    /// Periodic Allen-Cahn with `kappa = 1e-3`, `dt = 0.05`, 10 steps.
    pub fn allen_cahn(gamma: f64) -> Self {
        EquationSpec {
            kind: EquationKind::AllenCahn,
            diffusion_coeff: 1e-3,
            reaction_coeff: gamma,
            transport_coeff: 0.0,
            forcing: Forcing::None,
            boundary: Boundary::Periodic,
            dt: 0.05,
            time_steps: 10,
        }
    }

    /// Periodic vorticity equation with `mu = 4`, the diagonal forcing of
    /// amplitude 0.2, `dt = 0.05` and 40 steps.
    pub fn navier_stokes(nu: f64) -> Self {
        EquationSpec {
            kind: EquationKind::NavierStokesVorticity,
            diffusion_coeff: nu,
            reaction_coeff: 0.0,
            transport_coeff: 4.0,
            forcing: Forcing::SinCosDiagonal { amplitude: 0.2 },
            boundary: Boundary::Periodic,
            dt: 0.05,
            time_steps: 40,
        }
    }

    pub fn is_evolution(&self) -> bool {
        self.kind != EquationKind::NonlinearPoisson
    }

    pub fn validate(&self) -> Result<()> {
        let expected = match self.kind {
            EquationKind::NonlinearPoisson => Boundary::DirichletZero,
            _ => Boundary::Periodic,
        };
        if self.boundary != expected {
            return Err(PgdmError::invalid(format!(
                "{:?} requires a {:?} boundary",
                self.kind, expected
            )));
        }
        // Allen-Cahn may degenerate to pure reaction (kappa = 0); the others may not.
        let ok = match self.kind {
            EquationKind::AllenCahn => self.diffusion_coeff >= 0.0,
            _ => self.diffusion_coeff > 0.0,
        };
        if !ok || !self.diffusion_coeff.is_finite() {
            return Err(PgdmError::invalid(format!(
                "invalid diffusion coefficient {}",
                self.diffusion_coeff
            )));
        }
        if self.is_evolution() && !(self.dt >= 0.0 && self.dt.is_finite()) {
            return Err(PgdmError::invalid(format!("invalid time step {}", self.dt)));
        }
        Ok(())
    }

    /// Grid of this equation with `cells` per axis (time axis included).
    pub fn grid(&self, spatial_dim: usize, cells: usize) -> Result<GridSpec> {
        let grid = GridSpec::new(spatial_dim, cells, self.boundary)?;
        if self.is_evolution() {
            grid.with_time(self.time_steps, self.dt)
        } else {
            Ok(grid)
        }
    }

    fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        self.validate()?;
        if grid.boundary != self.boundary {
            return Err(PgdmError::invalid(format!(
                "{:?} needs a {:?} grid, got {:?}",
                self.kind, self.boundary, grid.boundary
            )));
        }
        if self.kind == EquationKind::NavierStokesVorticity && grid.spatial_dim != 2 {
            return Err(PgdmError::invalid("the vorticity equation is 2D only"));
        }
        if grid.is_evolution() {
            return Err(PgdmError::invalid("residual systems act on one time slice"));
        }
        Ok(())
    }
}

/// A residual system for one of the model equations on a fixed grid.
#[derive(Clone, Debug)]
pub struct PdeSystem {
    equation: EquationSpec,
    grid: GridSpec,
    /// Source `a` (static) or previous step `u^n` (implicit Euler).
    rhs: Vec<f64>,
    forcing: Vec<f64>,
}

impl PdeSystem {
    /// Static system `L_d u = a`.
    pub fn static_problem(equation: &EquationSpec, a: &Field) -> Result<Self> {
        equation.check_grid(a.grid())?;
        if equation.is_evolution() {
            return Err(PgdmError::invalid(format!(
                "{:?} is an evolution problem",
                equation.kind
            )));
        }
        Ok(PdeSystem {
            equation: *equation,
            grid: *a.grid(),
            rhs: a.values().to_vec(),
            forcing: Vec::new(),
        })
    }

    /// One implicit-Euler step from `u_prev`.
    pub fn implicit_step(equation: &EquationSpec, u_prev: &Field) -> Result<Self> {
        let forcing = equation.forcing.evaluate(u_prev.grid());
        Self::implicit_step_with_forcing(equation, u_prev, &forcing)
    }

    /// As [`PdeSystem::implicit_step`] with an explicit forcing field.
    pub fn implicit_step_with_forcing(
        equation: &EquationSpec,
        u_prev: &Field,
        forcing: &Field,
    ) -> Result<Self> {
        equation.check_grid(u_prev.grid())?;
        if !equation.is_evolution() {
            return Err(PgdmError::invalid("the Poisson problem has no time steps"));
        }
        u_prev.check_same_shape(forcing)?;
        let forcing = if equation.kind == EquationKind::NavierStokesVorticity {
            forcing.values().to_vec()
        } else {
            Vec::new()
        };
        Ok(PdeSystem {
            equation: *equation,
            grid: *u_prev.grid(),
            rhs: u_prev.values().to_vec(),
            forcing,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn equation(&self) -> &EquationSpec {
        &self.equation
    }

    pub fn residual_field(&self, u: &Field) -> Result<Field> {
        self.check_len(u)?;
        Field::from_vec(self.grid, self.residual(u.values()))
    }

    pub fn residual_norm(&self, u: &Field) -> Result<f64> {
        self.check_len(u)?;
        Ok(crate::field::l2_norm(&self.residual(u.values())))
    }

    fn check_len(&self, u: &Field) -> Result<()> {
        if u.len() != self.rhs.len() {
            return Err(PgdmError::invalid(format!(
                "field has {} entries, system has {}",
                u.len(),
                self.rhs.len()
            )));
        }
        Ok(())
    }
}

impl ResidualSystem for PdeSystem {
    fn len(&self) -> usize {
        self.rhs.len()
    }

    fn residual(&self, u: &[f64]) -> Vec<f64> {
        let eq = &self.equation;
        let lap = stencil::laplacian_slice(&self.grid, u);
        match eq.kind {
            EquationKind::NonlinearPoisson => u
                .iter()
                .zip(&lap)
                .zip(&self.rhs)
                .map(|((&ui, &li), &ai)| -eq.diffusion_coeff * li + ui * ui * ui - ai)
                .collect(),
            EquationKind::AllenCahn => u
                .iter()
                .zip(&lap)
                .zip(&self.rhs)
                .map(|((&ui, &li), &pi)| {
                    let reaction = eq.reaction_coeff * ui * (0.25 - ui * ui);
                    ui - eq.dt * (eq.diffusion_coeff * li + reaction) - pi
                })
                .collect(),
            EquationKind::NavierStokesVorticity => {
                let (vx, vy) = navier_stokes::velocity_slice(&self.grid, u);
                let wx = stencil::central_difference_slice(&self.grid, u, 0);
                let wy = stencil::central_difference_slice(&self.grid, u, 1);
                (0..u.len())
                    .map(|p| {
                        let transport = vx[p] * wx[p] + vy[p] * wy[p];
                        u[p] - self.rhs[p]
                            + eq.dt
                                * (eq.transport_coeff * transport
                                    - eq.diffusion_coeff * lap[p]
                                    - self.forcing[p])
                    })
                    .collect()
            }
        }
    }

    fn jacobian(&self, u: &[f64]) -> SparseMatrix {
        let eq = &self.equation;
        let n = u.len();
        let mut t = Vec::with_capacity(n * (4 * self.grid.spatial_dim + 2));
        match eq.kind {
            EquationKind::NonlinearPoisson => {
                stencil::push_laplacian(&self.grid, -eq.diffusion_coeff, &mut t);
                t.extend(u.iter().enumerate().map(|(p, &ui)| (p, p, 3.0 * ui * ui)));
            }
            EquationKind::AllenCahn => {
                stencil::push_laplacian(&self.grid, -eq.dt * eq.diffusion_coeff, &mut t);
                t.extend(u.iter().enumerate().map(|(p, &ui)| {
                    (p, p, 1.0 - eq.dt * eq.reaction_coeff * (0.25 - 3.0 * ui * ui))
                }));
            }
            EquationKind::NavierStokesVorticity => {
                stencil::push_laplacian(&self.grid, -eq.dt * eq.diffusion_coeff, &mut t);
                t.extend((0..n).map(|p| (p, p, 1.0)));
                let (vx, vy) = navier_stokes::velocity_slice(&self.grid, u);
                let scale = eq.dt * eq.transport_coeff;
                let cx: Vec<f64> = vx.iter().map(|v| scale * v).collect();
                let cy: Vec<f64> = vy.iter().map(|v| scale * v).collect();
                stencil::push_central_difference(&self.grid, 0, &cx, &mut t);
                stencil::push_central_difference(&self.grid, 1, &cy, &mut t);
            }
        }
        SparseMatrix::from_triplets(n, n, &t)
    }

    fn jvp(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = self.jacobian(u).mul_vec(v);
        if self.equation.kind == EquationKind::NavierStokesVorticity {
            // velocity is linear in w: add the frozen-velocity correction u(v).grad w
            let (dvx, dvy) = navier_stokes::velocity_slice(&self.grid, v);
            let wx = stencil::central_difference_slice(&self.grid, u, 0);
            let wy = stencil::central_difference_slice(&self.grid, u, 1);
            let scale = self.equation.dt * self.equation.transport_coeff;
            for p in 0..out.len() {
                out[p] += scale * (dvx[p] * wx[p] + dvy[p] * wy[p]);
            }
        }
        out
    }
}

/// `r = -c lap u + u^3 - a`.
pub fn poisson_residual(eq: &EquationSpec, u: &Field, a: &Field) -> Result<Field> {
    u.check_same_shape(a)?;
    PdeSystem::static_problem(eq, a)?.residual_field(u)
}

/// `J = -c lap + 3 diag(u^2)`.
pub fn poisson_jacobian(eq: &EquationSpec, u: &Field) -> Result<SparseMatrix> {
    let system = PdeSystem::static_problem(eq, &Field::zeros(*u.grid()))?;
    Ok(system.jacobian(u.values()))
}

pub fn allen_cahn_step_residual(eq: &EquationSpec, u: &Field, u_prev: &Field) -> Result<Field> {
    u.check_same_shape(u_prev)?;
    PdeSystem::implicit_step(eq, u_prev)?.residual_field(u)
}

/// `J = I - dt (kappa lap + gamma diag(1/4 - 3u^2))`.
pub fn allen_cahn_step_jacobian(eq: &EquationSpec, u: &Field) -> Result<SparseMatrix> {
    let system = PdeSystem::implicit_step(eq, &Field::zeros(*u.grid()))?;
    Ok(system.jacobian(u.values()))
}

pub fn ns_step_residual(eq: &EquationSpec, w: &Field, w_prev: &Field) -> Result<Field> {
    w.check_same_shape(w_prev)?;
    PdeSystem::implicit_step(eq, w_prev)?.residual_field(w)
}

/// Frozen-velocity Jacobian `I + dt (mu u(w).grad - nu lap)`.
pub fn ns_step_jacobian(eq: &EquationSpec, w: &Field) -> Result<SparseMatrix> {
    let system = PdeSystem::implicit_step(eq, &Field::zeros(*w.grid()))?;
    Ok(system.jacobian(w.values()))
}

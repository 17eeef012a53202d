//! Nonlinear least-squares solvers: damped Levenberg-Marquardt for data
//! generation and a single undamped Gauss-Newton step for refinement.

use serde::{Deserialize, Serialize};

use crate::error::{PgdmError, Result};
use crate::field::{l2_norm, Field};
use crate::operators::{EquationSpec, PdeSystem, ResidualSystem};
use crate::sparse::{SparseMatrix, SpdSolver};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LMConfig {
    pub initial_damping: f64,
    /// Stop once `||r|| < tolerance`.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LMConfig {
    fn default() -> Self {
        LMConfig {
            initial_damping: 0.5,
            tolerance: 1e-5,
            max_iterations: 500,
        }
    }
}

impl LMConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_damping > 0.0 && self.initial_damping.is_finite()) {
            return Err(PgdmError::invalid(format!(
                "damping must be positive, got {}",
                self.initial_damping
            )));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(PgdmError::invalid(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(PgdmError::invalid("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

/// Result of a converged Levenberg-Marquardt solve.
#[derive(Clone, Debug)]
pub struct LmOutcome {
    pub solution: Vec<f64>,
    /// Trial steps taken, rejected ones included.
    pub iterations: usize,
    pub residual_norm: f64,
    /// `||r||` at the start and after every accepted step.
    pub accepted_norms: Vec<f64>,
}

fn check_len<S: ResidualSystem + ?Sized>(system: &S, n: usize) -> Result<()> {
    if system.len() != n {
        return Err(PgdmError::invalid(format!(
            "initial guess has {n} entries, system has {}",
            system.len()
        )));
    }
    Ok(())
}

/// Right-hand side `-J^T r` and normal matrix `J^T J`.
fn normal_equations(j: &SparseMatrix, r: &[f64]) -> (SparseMatrix, Vec<f64>) {
    let g = j.transpose_mul_vec(r).into_iter().map(|v| -v).collect();
    (j.normal_matrix(), g)
}

/// Levenberg-Marquardt on raw vectors, returning the full iteration record.
pub fn levenberg_marquardt_traced<S: ResidualSystem + ?Sized>(
    system: &S,
    u0: &[f64],
    config: &LMConfig,
) -> Result<LmOutcome> {
    config.validate()?;
    check_len(system, u0.len())?;
    let mut u = u0.to_vec();
    let mut r = system.residual(&u);
    let mut norm = l2_norm(&r);
    if !norm.is_finite() {
        return Err(PgdmError::Numerical("non-finite initial residual".into()));
    }
    let mut accepted_norms = vec![norm];
    let mut lambda = config.initial_damping;
    let mut solver = SpdSolver::new();
    let mut iterations = 0;
    // normal equations at the current iterate, kept across rejected trials
    let mut cached: Option<(SparseMatrix, Vec<f64>, Vec<f64>)> = None;

    // Repeat-until: the test uses the residual at the start of the
    // iteration, so one more step is taken after the tolerance is met.
    loop {
        let start_norm = norm;
        if iterations == config.max_iterations {
            if start_norm < config.tolerance {
                break;
            }
            return Err(PgdmError::Convergence {
                iterations,
                residual: norm,
                best: u,
            });
        }
        iterations += 1;
        let (normal, g, diag) = cached.get_or_insert_with(|| {
            let (n, g) = normal_equations(&system.jacobian(&u), &r);
            let d = n.diagonal();
            (n, g, d)
        });
        let mut damped = normal.clone();
        let shift: Vec<f64> = diag.iter().map(|d| lambda * d).collect();
        damped.add_to_diagonal(&shift)?;
        let delta = solver.solve(&damped, g)?;
        let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, b)| a + b).collect();
        let r_trial = system.residual(&trial);
        let n_trial = l2_norm(&r_trial);
        if n_trial.is_finite() && n_trial <= norm {
            lambda /= 2.0;
            u = trial;
            r = r_trial;
            norm = n_trial;
            accepted_norms.push(norm);
            cached = None;
        } else {
            lambda *= 2.0;
        }
        log::trace!("LM iteration {iterations}: |r| = {norm:.3e}, lambda = {lambda:.3e}");
        if start_norm < config.tolerance {
            break;
        }
    }
    Ok(LmOutcome {
        solution: u,
        iterations,
        residual_norm: norm,
        accepted_norms,
    })
}

/// Solves `r(u) = 0` in the least-squares sense from `u0`; returns the
/// converged field and the number of trial steps.
pub fn levenberg_marquardt<S: ResidualSystem + ?Sized>(
    system: &S,
    u0: &Field,
    config: &LMConfig,
) -> Result<(Field, usize)> {
    let out = levenberg_marquardt_traced(system, u0.values(), config)?;
    Ok((Field::from_vec(*u0.grid(), out.solution)?, out.iterations))
}

/// One Gauss-Newton update `u - (J^T J)^{-1} J^T r` on raw vectors.
pub fn gauss_newton_step_raw<S: ResidualSystem + ?Sized>(system: &S, u: &[f64]) -> Result<Vec<f64>> {
    check_len(system, u.len())?;
    let r = system.residual(u);
    let (normal, g) = normal_equations(&system.jacobian(u), &r);
    let delta = SpdSolver::new().solve(&normal, &g)?;
    Ok(u.iter().zip(&delta).map(|(a, b)| a + b).collect())
}

pub fn gauss_newton_step<S: ResidualSystem + ?Sized>(system: &S, u: &Field) -> Result<Field> {
    Field::from_vec(*u.grid(), gauss_newton_step_raw(system, u.values())?)
}

/// Implicit-Euler trajectory `u^1..u^{K_t}` from the spatial field `u0`,
/// each step solved by LM warm-started at the previous step.
pub fn implicit_euler_rollout(
    equation: &EquationSpec,
    u0: &Field,
    config: &LMConfig,
) -> Result<Field> {
    implicit_euler_rollout_traced(equation, u0, config).map(|(f, _)| f)
}

/// As [`implicit_euler_rollout`], also returning each step's final residual norm.
pub fn implicit_euler_rollout_traced(
    equation: &EquationSpec,
    u0: &Field,
    config: &LMConfig,
) -> Result<(Field, Vec<f64>)> {
    if !equation.is_evolution() {
        return Err(PgdmError::invalid("rollout needs an evolution equation"));
    }
    if equation.time_steps == 0 {
        return Err(PgdmError::invalid("rollout needs at least one time step"));
    }
    if u0.grid().is_evolution() {
        return Err(PgdmError::invalid("initial condition must be a spatial field"));
    }
    let forcing = equation.forcing.evaluate(u0.grid());
    let mut prev = u0.clone();
    let mut slices = Vec::with_capacity(equation.time_steps);
    let mut norms = Vec::with_capacity(equation.time_steps);
    for step in 1..=equation.time_steps {
        let wrap = |e| PgdmError::Step {
            step,
            source: Box::new(e),
        };
        let system = PdeSystem::implicit_step_with_forcing(equation, &prev, &forcing).map_err(wrap)?;
        let out = levenberg_marquardt_traced(&system, prev.values(), config).map_err(wrap)?;
        norms.push(out.residual_norm);
        prev = Field::from_vec(*u0.grid(), out.solution)?;
        slices.push(prev.clone());
    }
    Ok((Field::stack(&slices, equation.dt)?, norms))
}

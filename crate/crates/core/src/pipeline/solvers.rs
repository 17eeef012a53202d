//! PGDM inference (conditional sample plus Gauss-Newton refinement) and the
//! baseline downscaling solvers it is compared against.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{coarse_solution, solve_at, DatasetManifest};
use crate::denoiser::Denoiser;
use crate::diffusion::{ddim_sample, ddpm_sample, DiffusionConfig};
use crate::error::{PgdmError, Result};
use crate::field::{Field, GridSpec};
use crate::nlsolve::{gauss_newton_step, LMConfig};
use crate::operators::{EquationSpec, PdeSystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Csi,
    CoarseGn,
    Fine,
    Ddpm,
    Ddim,
    Pgdm,
}

impl Solver {
    pub const ALL: [Solver; 6] = [
        Solver::Csi,
        Solver::CoarseGn,
        Solver::Fine,
        Solver::Ddpm,
        Solver::Ddim,
        Solver::Pgdm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Solver::Csi => "csi",
            Solver::CoarseGn => "coarse_gn",
            Solver::Fine => "fine",
            Solver::Ddpm => "ddpm",
            Solver::Ddim => "ddim",
            Solver::Pgdm => "pgdm",
        }
    }

    pub fn needs_model(self) -> bool {
        matches!(self, Solver::Ddpm | Solver::Ddim | Solver::Pgdm)
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Solver {
    type Err = PgdmError;

    fn from_str(s: &str) -> Result<Self> {
        Solver::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| PgdmError::invalid(format!("unknown solver '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Ddpm,
    Ddim,
}

impl FromStr for SamplerKind {
    type Err = PgdmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ddpm" => Ok(SamplerKind::Ddpm),
            "ddim" => Ok(SamplerKind::Ddim),
            _ => Err(PgdmError::invalid(format!("unknown sampler '{s}'"))),
        }
    }
}

/// Fine-grid residual norm of every time step (one entry for static
/// problems). Step `n` uses slice `n - 1` of `u` (or `a`) as `u^{n-1}`.
pub fn step_residuals(equation: &EquationSpec, u: &Field, a: &Field) -> Result<Vec<f64>> {
    if !equation.is_evolution() {
        return Ok(vec![PdeSystem::static_problem(equation, a)?.residual_norm(u)?]);
    }
    if !u.grid().is_evolution() || u.grid().spatial() != a.grid().spatial() {
        return Err(PgdmError::invalid("trajectory and initial condition grids differ"));
    }
    let forcing = equation.forcing.evaluate(a.grid());
    let mut prev = a.clone();
    let mut out = Vec::with_capacity(u.num_slices());
    for cur in u.slices() {
        let system = PdeSystem::implicit_step_with_forcing(equation, &prev, &forcing)?;
        out.push(system.residual_norm(&cur)?);
        prev = cur;
    }
    Ok(out)
}

/// Euclidean norm over all step residuals.
pub fn residual_norm(equation: &EquationSpec, u: &Field, a: &Field) -> Result<f64> {
    Ok(step_residuals(equation, u, a)?.iter().map(|r| r * r).sum::<f64>().sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum RefineStatus {
    /// `rejected` counts Gauss-Newton steps discarded for raising the residual.
    Refined { steps: usize, rejected: usize },
    /// The linear solve failed; the input is returned unchanged.
    Unrefined { reason: String },
}

fn gn_or_keep(system: &PdeSystem, u: Field, rejected: &mut usize) -> Result<Field> {
    let before = system.residual_norm(&u)?;
    let next = gauss_newton_step(system, &u)?;
    let after = system.residual_norm(&next)?;
    if after.is_finite() && after <= before {
        Ok(next)
    } else {
        *rejected += 1;
        Ok(u)
    }
}

/// `steps` Gauss-Newton updates of `u` against the fine-grid residual.
/// Trajectories are refined step by step, each implicit-Euler system using
/// the refined previous slice. A step that would raise the residual is
/// discarded, so the output residual never exceeds the input's.
pub fn refine(equation: &EquationSpec, u: &Field, a: &Field, steps: usize) -> Result<(Field, RefineStatus)> {
    let mut rejected = 0;
    let attempt = (|| -> Result<Field> {
        if !equation.is_evolution() {
            let system = PdeSystem::static_problem(equation, a)?;
            let mut cur = u.clone();
            for _ in 0..steps {
                cur = gn_or_keep(&system, cur, &mut rejected)?;
            }
            return Ok(cur);
        }
        let forcing = equation.forcing.evaluate(a.grid());
        let mut prev = a.clone();
        let mut out = Vec::with_capacity(u.num_slices());
        for slice in u.slices() {
            let system = PdeSystem::implicit_step_with_forcing(equation, &prev, &forcing)?;
            let mut cur = slice;
            for _ in 0..steps {
                cur = gn_or_keep(&system, cur, &mut rejected)?;
            }
            prev = cur.clone();
            out.push(cur);
        }
        Field::stack(&out, u.grid().dt)
    })();
    match attempt {
        Ok(f) => Ok((f, RefineStatus::Refined { steps, rejected })),
        Err(e @ PgdmError::Numerical(_)) => {
            log::warn!("refinement skipped: {e}");
            Ok((u.clone(), RefineStatus::Unrefined { reason: e.to_string() }))
        }
        Err(e) => Err(e),
    }
}

/// Conditional sample in physical units. `seed` fixes the sampler noise.
pub fn sample_conditional(
    model: &Denoiser,
    diffusion: &DiffusionConfig,
    kind: SamplerKind,
    u_c: &Field,
    a: &Field,
    seed: u64,
) -> Result<Field> {
    let cond = model.condition(u_c, a)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let x = match kind {
        SamplerKind::Ddpm => ddpm_sample(&cond, u_c.grid(), diffusion, &mut rng)?,
        SamplerKind::Ddim => ddim_sample(&cond, u_c.grid(), diffusion, &mut rng)?,
    };
    Ok(x.scale(model.scale().u))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PgdmOutput {
    pub raw: Field,
    pub refined: Field,
    pub status: RefineStatus,
}

/// DDIM sample conditioned on `(u_c, a)` followed by `refine_steps`
/// Gauss-Newton updates on the fine grid.
pub fn run_pgdm(
    model: &Denoiser,
    diffusion: &DiffusionConfig,
    equation: &EquationSpec,
    u_c: &Field,
    a: &Field,
    seed: u64,
) -> Result<PgdmOutput> {
    let raw = sample_conditional(model, diffusion, SamplerKind::Ddim, u_c, a, seed)?;
    let (refined, status) = refine(equation, &raw, a, diffusion.refine_steps)?;
    Ok(PgdmOutput { raw, refined, status })
}

/// Shared configuration for running solvers on dataset samples.
#[derive(Clone, Copy, Debug)]
pub struct SolverContext<'a> {
    pub equation: EquationSpec,
    pub coarse_grid: GridSpec,
    pub fine_grid: GridSpec,
    pub lm: LMConfig,
    /// Gauss-Newton steps for `coarse_gn` (and `pgdm` when no model config overrides it).
    pub refine_steps: usize,
    pub model: Option<(&'a Denoiser, &'a DiffusionConfig)>,
}

impl<'a> SolverContext<'a> {
    pub fn from_manifest(manifest: &DatasetManifest, model: Option<(&'a Denoiser, &'a DiffusionConfig)>) -> Self {
        SolverContext {
            equation: manifest.spec.equation,
            coarse_grid: manifest.coarse_grid,
            fine_grid: manifest.fine_grid,
            lm: manifest.spec.lm,
            refine_steps: model.map_or(1, |(_, d)| d.refine_steps),
            model,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOutput {
    pub field: Field,
    /// Residual of the unrefined DDIM sample (PGDM only).
    pub raw_residual: Option<f64>,
    pub status: Option<RefineStatus>,
}

impl SolverOutput {
    fn plain(field: Field) -> Self {
        SolverOutput {
            field,
            raw_residual: None,
            status: None,
        }
    }
}

/// Runs `solver` from the coarse input `u_c` and source `a`.
pub fn run_solver(solver: Solver, ctx: &SolverContext<'_>, u_c: &Field, a: &Field, seed: u64) -> Result<SolverOutput> {
    let model = || {
        ctx.model
            .ok_or_else(|| PgdmError::invalid(format!("solver {solver} needs a trained model")))
    };
    match solver {
        Solver::Csi => Ok(SolverOutput::plain(u_c.clone())),
        Solver::CoarseGn => {
            let (field, status) = refine(&ctx.equation, u_c, a, ctx.refine_steps)?;
            Ok(SolverOutput {
                field,
                raw_residual: None,
                status: Some(status),
            })
        }
        Solver::Fine => Ok(SolverOutput::plain(solve_at(&ctx.equation, a, &ctx.lm)?.0)),
        Solver::Ddpm | Solver::Ddim => {
            let (m, d) = model()?;
            let kind = if solver == Solver::Ddpm {
                SamplerKind::Ddpm
            } else {
                SamplerKind::Ddim
            };
            Ok(SolverOutput::plain(sample_conditional(m, d, kind, u_c, a, seed)?))
        }
        Solver::Pgdm => {
            let (m, d) = model()?;
            let d = DiffusionConfig {
                refine_steps: ctx.refine_steps,
                ..d.clone()
            };
            let out = run_pgdm(m, &d, &ctx.equation, u_c, a, seed)?;
            Ok(SolverOutput {
                raw_residual: Some(residual_norm(&ctx.equation, &out.raw, a)?),
                field: out.refined,
                status: Some(out.status),
            })
        }
    }
}

/// Runs a baseline on a stored sample, using its stored `u_c` as input.
pub fn run_baseline(
    solver: Solver,
    sample: &super::SampleTuple,
    ctx: &SolverContext<'_>,
    seed: u64,
) -> Result<Field> {
    run_solver(solver, ctx, &sample.u_c, &sample.a, seed).map(|o| o.field)
}

/// Runs `solver` end to end from the fine source: the coarse stage is
/// recomputed so that its cost is part of every coarse-based method.
pub fn run_from_source(solver: Solver, ctx: &SolverContext<'_>, a: &Field, seed: u64) -> Result<SolverOutput> {
    if solver == Solver::Fine {
        return Ok(SolverOutput::plain(solve_at(&ctx.equation, a, &ctx.lm)?.0));
    }
    let u_c = coarse_solution(&ctx.equation, a, &ctx.coarse_grid, &ctx.fine_grid, &ctx.lm)?;
    run_solver(solver, ctx, &u_c, a, seed)
}

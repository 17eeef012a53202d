//! Benchmark harness: every solver on every test sample, relative L2 error
//! against the reference and mean wall-clock time.
//!
//! The timed region covers the solver only (coarse stage included for the
//! coarse-based methods); dataset reads and model loading happen outside it.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::dataset::{DatasetManifest, SampleTuple, Split};
use super::render::{render_comparison, Plane};
use super::solvers::{residual_norm, run_from_source, Solver, SolverContext};
use crate::error::{PgdmError, Result};
use crate::field::relative_l2_error;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub solver: Solver,
    pub mean_rel_l2: f64,
    pub mean_seconds: f64,
    /// Samples contributing to the means.
    pub samples: usize,
    /// Samples excluded after a solver failure.
    pub excluded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleResult {
    pub id: usize,
    pub solver: Solver,
    pub rel_l2: f64,
    pub seconds: f64,
    /// Fine-grid residual norm of the output.
    pub residual: f64,
    /// Residual of the unrefined DDIM sample (PGDM only).
    pub raw_residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub per_sample: Vec<SampleResult>,
    pub config_hash: String,
}

impl BenchReport {
    pub fn row(&self, solver: Solver) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.solver == solver)
    }

    pub fn results(&self, solver: Solver) -> impl Iterator<Item = &SampleResult> {
        self.per_sample.iter().filter(move |r| r.solver == solver)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("solver,mean_rel_l2,mean_seconds,M,config_hash,excluded\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.6e},{:.6e},{},{},{}",
                r.solver, r.mean_rel_l2, r.mean_seconds, r.samples, self.config_hash, r.excluded
            );
        }
        out
    }

    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<10} {:>12} {:>12} {:>4} {:>8}\n",
            "solver", "rel. L2", "seconds", "M", "excluded"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<10} {:>12.3e} {:>12.3e} {:>4} {:>8}",
                r.solver.name(),
                r.mean_rel_l2,
                r.mean_seconds,
                r.samples,
                r.excluded
            );
        }
        let _ = writeln!(out, "config {}", self.config_hash);
        out
    }
}

#[derive(Serialize)]
struct ConfigEcho<'a> {
    dataset: &'a super::DatasetSpec,
    solvers: &'a [Solver],
    refine_steps: usize,
    diffusion: Option<&'a crate::diffusion::DiffusionConfig>,
    model_sha256: Option<String>,
}

fn config_hash(manifest: &DatasetManifest, solvers: &[Solver], ctx: &SolverContext<'_>) -> Result<String> {
    let model_sha256 = match ctx.model {
        Some((m, _)) => {
            let mut h = Sha256::new();
            for p in m.parameters()? {
                h.update(p.to_le_bytes());
            }
            Some(hex(&h.finalize()))
        }
        None => None,
    };
    let echo = ConfigEcho {
        dataset: &manifest.spec,
        solvers,
        refine_steps: ctx.refine_steps,
        diffusion: ctx.model.map(|(_, d)| d),
        model_sha256,
    };
    let json = serde_json::to_vec(&echo).map_err(|e| PgdmError::invalid(e.to_string()))?;
    Ok(hex(&Sha256::digest(&json))[..16].to_string())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs `solvers` on the test split of `manifest` (stored in `dir`).
/// Writes the CSV to `report_path` and, with `figures_dir`, one comparison
/// figure for the first test sample.
pub fn benchmark(
    manifest: &DatasetManifest,
    dir: &Path,
    solvers: &[Solver],
    ctx: &SolverContext<'_>,
    report_path: Option<&Path>,
    figures_dir: Option<&Path>,
) -> Result<BenchReport> {
    if solvers.is_empty() {
        return Err(PgdmError::invalid("no solvers requested"));
    }
    if let Some(s) = solvers.iter().find(|s| s.needs_model() && ctx.model.is_none()) {
        return Err(PgdmError::invalid(format!("solver {s} needs a trained model")));
    }
    let tests: Vec<SampleTuple> = manifest.load_split(dir, Split::Test)?;
    if tests.is_empty() {
        return Err(PgdmError::invalid("manifest has no usable test samples"));
    }
    if tests.iter().any(|s| s.u_r.is_none()) {
        return Err(PgdmError::invalid("test samples need a reference solution"));
    }
    let hash = config_hash(manifest, solvers, ctx)?;
    let mut per_sample = Vec::new();
    let mut rows = Vec::new();
    let mut figure: Vec<(String, Plane)> = Vec::new();
    for &solver in solvers {
        let mut excluded = 0;
        for sample in &tests {
            let reference = sample.u_r.as_ref().expect("checked above");
            let seed = manifest.entry(sample.id)?.seed;
            let start = Instant::now();
            let out = run_from_source(solver, ctx, &sample.a, seed);
            let seconds = start.elapsed().as_secs_f64();
            let out = match out {
                Ok(o) => o,
                Err(e @ (PgdmError::InvalidArgument(_) | PgdmError::Io { .. } | PgdmError::Format { .. })) => {
                    return Err(e)
                }
                Err(e) => {
                    log::warn!("{solver} failed on sample {}: {e}", sample.id);
                    excluded += 1;
                    continue;
                }
            };
            if sample.id == tests[0].id {
                figure.push((solver.name().to_string(), Plane::from_field(&out.field)?));
            }
            per_sample.push(SampleResult {
                id: sample.id,
                solver,
                rel_l2: relative_l2_error(&out.field, reference)?,
                seconds,
                residual: residual_norm(&ctx.equation, &out.field, &sample.a)?,
                raw_residual: out.raw_residual,
            });
        }
        let mine: Vec<&SampleResult> = per_sample.iter().filter(|r| r.solver == solver).collect();
        let n = mine.len();
        let mean = |f: fn(&SampleResult) -> f64| {
            if n == 0 {
                f64::NAN
            } else {
                mine.iter().map(|r| f(r)).sum::<f64>() / n as f64
            }
        };
        rows.push(BenchRow {
            solver,
            mean_rel_l2: mean(|r| r.rel_l2),
            mean_seconds: mean(|r| r.seconds),
            samples: n,
            excluded,
        });
        log::info!("{solver}: done");
    }
    let report = BenchReport {
        rows,
        per_sample,
        config_hash: hash,
    };
    if let Some(path) = report_path {
        fs::write(path, report.to_csv()).map_err(|e| PgdmError::io(path, e))?;
    }
    if let Some(fig_dir) = figures_dir {
        fs::create_dir_all(fig_dir).map_err(|e| PgdmError::io(fig_dir, e))?;
        let reference = Plane::from_field(tests[0].u_r.as_ref().expect("checked above"))?;
        if !figure.is_empty() {
            render_comparison(&figure, &reference, &fig_dir.join(format!("sample_{:05}.png", tests[0].id)))?;
        }
    }
    Ok(report)
}

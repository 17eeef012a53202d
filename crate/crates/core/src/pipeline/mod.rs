//! End-to-end orchestration: dataset generation, PGDM inference, baselines,
//! benchmarking and figures.

mod bench;
mod dataset;
pub mod render;
mod solvers;

pub use bench::{benchmark, BenchReport, BenchRow, SampleResult};
pub use dataset::{
    coarse_solution, generate_dataset, sample_seed, solve_at, DatasetManifest, DatasetSpec, SampleEntry,
    SampleStatus, SampleTuple, Split, FORMAT_VERSION, MANIFEST_FILE, NS_REFERENCE_DT, NS_SPINUP_TIME,
};
pub use render::render_fields;
pub use solvers::{
    refine, residual_norm, run_baseline, run_from_source, run_pgdm, run_solver, sample_conditional,
    step_residuals, PgdmOutput, RefineStatus, SamplerKind, Solver, SolverContext, SolverOutput,
};

use crate::denoiser::TrainingPair;

impl SampleTuple {
    pub fn training_pair(&self) -> TrainingPair {
        TrainingPair {
            u_f: self.u_f.clone(),
            u_c: self.u_c.clone(),
            a: self.a.clone(),
        }
    }
}

/// Model and training settings for [`train_on_dataset`].
#[derive(Clone, Debug, PartialEq)]
pub struct TrainSetup {
    pub base_channels: usize,
    pub diffusion_steps: usize,
    pub refine_steps: usize,
    pub model_seed: u64,
    pub train: crate::denoiser::TrainConfig,
}

impl Default for TrainSetup {
    fn default() -> Self {
        TrainSetup {
            base_channels: 8,
            diffusion_steps: 400,
            refine_steps: 1,
            model_seed: 0,
            train: crate::denoiser::TrainConfig::default(),
        }
    }
}

/// Trains a fresh denoiser on the training split of a dataset.
pub fn train_on_dataset(
    manifest: &DatasetManifest,
    dir: &std::path::Path,
    setup: &TrainSetup,
) -> crate::Result<(crate::denoiser::Denoiser, crate::diffusion::DiffusionConfig, crate::denoiser::TrainingMeta)> {
    use crate::denoiser::{Denoiser, TrainingMeta, UNetArch};

    let pairs: Vec<TrainingPair> = manifest
        .load_split(dir, Split::Train)?
        .iter()
        .map(SampleTuple::training_pair)
        .collect();
    let arch = UNetArch::for_grid(&manifest.fine_grid, setup.base_channels)?;
    let mut model = Denoiser::new(arch, setup.model_seed)?;
    let mut diffusion = crate::diffusion::DiffusionConfig::standard(setup.diffusion_steps)?;
    diffusion.refine_steps = setup.refine_steps;
    let losses = model.train(&pairs, &diffusion, &setup.train)?;
    let tail = &losses[losses.len().saturating_sub(100)..];
    let meta = TrainingMeta {
        config: setup.train.clone(),
        samples: pairs.len(),
        final_loss: tail.iter().sum::<f64>() / tail.len() as f64,
    };
    Ok((model, diffusion, meta))
}

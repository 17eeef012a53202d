//! Checkpoint layout: one JSON header line, `\n`, then every parameter as
//! `f32` LE in construction order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataScale, Denoiser, TrainConfig, UNetArch};
use crate::diffusion::DiffusionConfig;
use crate::error::{PgdmError, Result};

const FORMAT: &str = "PGDMCKPT";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub config: TrainConfig,
    pub samples: usize,
    /// Mean loss over the last 100 steps.
    pub final_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub version: u32,
    pub arch: UNetArch,
    pub diffusion: DiffusionConfig,
    pub scale: DataScale,
    pub training: Option<TrainingMeta>,
    pub param_count: usize,
}

pub fn save_checkpoint(
    path: &Path,
    model: &Denoiser,
    diffusion: &DiffusionConfig,
    training: Option<TrainingMeta>,
) -> Result<()> {
    let header = CheckpointHeader {
        format: FORMAT.to_string(),
        version: VERSION,
        arch: model.arch().clone(),
        diffusion: diffusion.clone(),
        scale: model.scale(),
        training,
        param_count: model.param_count(),
    };
    let mut buf = serde_json::to_vec(&header).map_err(|e| PgdmError::format(path, e.to_string()))?;
    buf.push(b'\n');
    for p in model.parameters()? {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| PgdmError::io(path, e))
}

fn read_parts(path: &Path) -> Result<(CheckpointHeader, Vec<f32>)> {
    let bytes = fs::read(path).map_err(|e| PgdmError::io(path, e))?;
    let split = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| PgdmError::format(path, "missing checkpoint header line"))?;
    let header: CheckpointHeader = serde_json::from_slice(&bytes[..split])
        .map_err(|e| PgdmError::format(path, format!("bad checkpoint header: {e}")))?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(PgdmError::format(
            path,
            format!("unsupported checkpoint {} v{}", header.format, header.version),
        ));
    }
    let blob = &bytes[split + 1..];
    let need = 4 * header.param_count;
    if blob.len() < need {
        return Err(PgdmError::format(
            path,
            format!("truncated parameter blob: {} of {need} bytes, {} missing", blob.len(), need - blob.len()),
        ));
    }
    if blob.len() > need {
        return Err(PgdmError::format(path, format!("{} trailing bytes", blob.len() - need)));
    }
    let params = blob
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, params))
}

/// Rebuilds the network stored at `path`.
pub fn load_checkpoint(path: &Path) -> Result<(Denoiser, CheckpointHeader)> {
    let (header, params) = read_parts(path)?;
    header.diffusion.validate()?;
    let mut model = Denoiser::zeroed(header.arch.clone())
        .map_err(|e| PgdmError::format(path, format!("invalid architecture: {e}")))?;
    if model.param_count() != header.param_count {
        return Err(PgdmError::format(
            path,
            format!(
                "header declares {} parameters, architecture has {}",
                header.param_count,
                model.param_count()
            ),
        ));
    }
    model.set_parameters(&params)?;
    model.set_scale(header.scale);
    model.set_schedule(&header.diffusion.schedule);
    Ok((model, header))
}

/// Loads parameters into `model`; its architecture must match exactly.
/// `model` is untouched on any error.
pub fn load_checkpoint_for(path: &Path, model: &mut Denoiser) -> Result<CheckpointHeader> {
    let (header, params) = read_parts(path)?;
    if &header.arch != model.arch() {
        return Err(PgdmError::invalid(format!(
            "checkpoint architecture {:?} does not match model {:?}",
            header.arch,
            model.arch()
        )));
    }
    model.set_parameters(&params)?;
    model.set_scale(header.scale);
    model.set_schedule(&header.diffusion.schedule);
    Ok(header)
}

//! Conditional score network `s_theta(u_t, u_c, a, t)`, its training loop
//! and checkpoint persistence.
//!
//! Fields enter the network as channels on an `N^d` node grid with
//! `N = K`. Zero-Dirichlet fields have `K - 1` interior nodes per axis and
//! get one leading zero (the `x = 0` boundary) so that `N` is divisible by
//! the downsampling factor. Trajectories put time on the channel axis; the
//! input stack is `[noisy (S), coarse (S), source or initial condition (1)]`.

mod checkpoint;
mod unet;

pub use checkpoint::{load_checkpoint, load_checkpoint_for, save_checkpoint, CheckpointHeader, TrainingMeta};

use candle_core::{DType, Device, Tensor};
use candle_nn::{AdamW, Optimizer, ParamsAdamW};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::diffusion::{DiffusionConfig, NoiseSchedule, ScoreModel};
use crate::error::{PgdmError, Result};
use crate::field::{Boundary, Field, GridSpec};
use unet::{ParamInit, UNet};

/// Network shape plus the target grid it was built for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UNetArch {
    pub spatial_dim: usize,
    pub cells: usize,
    pub boundary: Boundary,
    /// 0 for static problems.
    pub time_steps: usize,
    pub base_channels: usize,
    pub channel_multipliers: Vec<usize>,
    pub middle_channels: Vec<usize>,
    /// Upper bound on GroupNorm groups.
    pub groups: usize,
}

impl UNetArch {
    /// Multipliers `1, 2, 4, 8` and two middle blocks at `8 * base`.
    pub fn for_grid(grid: &GridSpec, base_channels: usize) -> Result<Self> {
        let arch = UNetArch {
            spatial_dim: grid.spatial_dim,
            cells: grid.cells,
            boundary: grid.boundary,
            time_steps: grid.time_steps,
            base_channels,
            channel_multipliers: vec![1, 2, 4, 8],
            middle_channels: vec![8 * base_channels, 8 * base_channels],
            groups: 8,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.spatial_dim) {
            return Err(PgdmError::invalid("network supports 2D and 3D grids"));
        }
        if self.base_channels < 2 || !self.base_channels.is_multiple_of(2) {
            return Err(PgdmError::invalid("base channels must be even and >= 2"));
        }
        if self.channel_multipliers.is_empty() || self.channel_multipliers.contains(&0) {
            return Err(PgdmError::invalid("channel multipliers must be positive"));
        }
        if self.groups == 0 || self.middle_channels.contains(&0) {
            return Err(PgdmError::invalid("groups and middle channels must be positive"));
        }
        let factor = 1usize << (self.channel_multipliers.len() - 1);
        if !self.cells.is_multiple_of(factor) {
            return Err(PgdmError::invalid(format!(
                "grid with {} nodes per axis is not divisible by the downsampling factor {factor}",
                self.cells
            )));
        }
        Ok(())
    }

    /// Target grid (trajectory grid for evolution problems; `dt` is not tracked).
    pub fn matches(&self, grid: &GridSpec) -> bool {
        grid.spatial_dim == self.spatial_dim
            && grid.cells == self.cells
            && grid.boundary == self.boundary
            && grid.time_steps == self.time_steps
    }

    /// Field slices carried per sample (`K_t`, or 1 for static problems).
    pub fn slices(&self) -> usize {
        self.time_steps.max(1)
    }

    pub fn in_channels(&self) -> usize {
        2 * self.slices() + 1
    }

    pub fn out_channels(&self) -> usize {
        self.slices()
    }

    fn time_dim(&self) -> usize {
        4 * self.base_channels
    }

    /// Nodes per axis on the network grid.
    pub fn nodes(&self) -> usize {
        self.cells
    }

    fn volume(&self) -> usize {
        self.nodes().pow(self.spatial_dim as u32)
    }

    fn tensor_shape(&self, batch: usize, channels: usize) -> Vec<usize> {
        let mut s = vec![batch, channels];
        s.extend(std::iter::repeat_n(self.nodes(), self.spatial_dim));
        s
    }

    /// Network-grid offset of every field node, per slice.
    fn node_map(&self) -> Vec<usize> {
        let n = self.nodes();
        let (m, offset) = match self.boundary {
            Boundary::DirichletZero => (n - 1, 1),
            Boundary::Periodic => (n, 0),
        };
        let d = self.spatial_dim;
        (0..m.pow(d as u32))
            .map(|flat| {
                let mut rem = flat;
                let mut out = 0;
                let mut stride = 1;
                for _ in 0..d {
                    out += (rem % m + offset) * stride;
                    rem /= m;
                    stride *= n;
                }
                out
            })
            .collect()
    }

    /// Number of parameters the architecture defines.
    pub fn param_count(&self) -> Result<usize> {
        let mut init = ParamInit::new(0, true, DType::F32);
        UNet::new(self, &mut init)?;
        Ok(init.vars.iter().map(|v| v.elem_count()).sum())
    }
}

/// RMS scales used to bring targets, coarse solutions and sources to unit size.
///
/// `prior` is the RMS of `(u_f - u_c) / u`. When positive, the network output
/// is added to the exact score of a Gaussian prior `N(u_c, prior^2)`, so the
/// network only learns the correction to it. Zero disables the term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataScale {
    pub u: f64,
    pub a: f64,
    #[serde(default)]
    pub prior: f64,
}

impl Default for DataScale {
    fn default() -> Self {
        DataScale { u: 1.0, a: 1.0, prior: 0.0 }
    }
}

impl DataScale {
    pub fn from_pairs(pairs: &[TrainingPair]) -> Self {
        let rms = |fields: &mut dyn Iterator<Item = &Field>| {
            let (mut sq, mut n) = (0.0, 0usize);
            for f in fields {
                sq += f.values().iter().map(|v| v * v).sum::<f64>();
                n += f.len();
            }
            let r = (sq / n.max(1) as f64).sqrt();
            if r > 0.0 && r.is_finite() {
                r
            } else {
                1.0
            }
        };
        let u = rms(&mut pairs.iter().map(|p| &p.u_f));
        let (mut sq, mut n) = (0.0, 0usize);
        for p in pairs {
            sq += p.u_f.values().iter().zip(p.u_c.values()).map(|(f, c)| ((f - c) / u).powi(2)).sum::<f64>();
            n += p.u_f.len();
        }
        let prior = (sq / n.max(1) as f64).sqrt();
        DataScale {
            u,
            a: rms(&mut pairs.iter().map(|p| &p.a)),
            prior: if prior > 0.0 && prior.is_finite() { prior } else { 1.0 },
        }
    }
}

/// `(k, sqrt(abar))` such that the prior score is `-k (x - sqrt(abar) c)`.
fn prior_coefficients(var: f64, abar: f64) -> (f64, f64) {
    ((1.0 - abar).sqrt() / (abar * var + 1.0 - abar), abar.sqrt())
}

/// One training tuple; all fields on the fine grid, `a` spatial.
#[derive(Clone, Debug)]
pub struct TrainingPair {
    pub u_f: Field,
    pub u_c: Field,
    pub a: Field,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LrDecay {
    /// `lr0 * max(0, 1 - rate * floor(k / every))`
    StaircaseLinear,
    /// `lr0 * (1 - rate)^floor(k / every)`
    Multiplicative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub total_steps: usize,
    pub lr0: f64,
    pub decay: LrDecay,
    pub decay_every: usize,
    pub decay_rate: f64,
    pub seed: u64,
    /// Draw one `t` per batch element instead of one per batch.
    pub per_element_t: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 4,
            total_steps: 10_000,
            lr0: 2e-4,
            decay: LrDecay::StaircaseLinear,
            decay_every: 5000,
            decay_rate: 0.05,
            seed: 0,
            per_element_t: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.total_steps == 0 || self.decay_every == 0 {
            return Err(PgdmError::invalid("batch size, step count and decay period must be >= 1"));
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(PgdmError::invalid(format!("invalid learning rate {}", self.lr0)));
        }
        Ok(())
    }

    /// Learning rate at 0-based step `k`.
    pub fn learning_rate(&self, k: usize) -> f64 {
        let stage = (k / self.decay_every) as f64;
        match self.decay {
            LrDecay::StaircaseLinear => self.lr0 * (1.0 - self.decay_rate * stage).max(0.0),
            LrDecay::Multiplicative => self.lr0 * (1.0 - self.decay_rate).powf(stage),
        }
    }
}

pub struct Denoiser {
    arch: UNetArch,
    net: UNet,
    vars: Vec<candle_core::Var>,
    dtype: DType,
    scale: DataScale,
    /// `abar_t` for `t = 0..=T`; needed by the prior term.
    alpha_bar: Vec<f64>,
}

impl std::fmt::Debug for Denoiser {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Denoiser")
            .field("arch", &self.arch)
            .field("dtype", &self.dtype)
            .field("scale", &self.scale)
            .finish_non_exhaustive()
    }
}

impl Denoiser {
    /// Randomly initialised network; the draw depends only on `seed`.
    pub fn new(arch: UNetArch, seed: u64) -> Result<Self> {
        Self::build(arch, seed, false, DType::F32)
    }

    /// As [`Denoiser::new`] with an explicit float type (f32 or f64).
    pub fn with_dtype(arch: UNetArch, seed: u64, dtype: DType) -> Result<Self> {
        Self::build(arch, seed, false, dtype)
    }

    /// Network with every parameter zero.
    pub fn zeroed(arch: UNetArch) -> Result<Self> {
        Self::build(arch, 0, true, DType::F32)
    }

    fn build(arch: UNetArch, seed: u64, zero: bool, dtype: DType) -> Result<Self> {
        arch.validate()?;
        if !matches!(dtype, DType::F32 | DType::F64) {
            return Err(PgdmError::invalid("network dtype must be f32 or f64"));
        }
        let mut init = ParamInit::new(seed, zero, dtype);
        let net = UNet::new(&arch, &mut init)?;
        Ok(Denoiser {
            arch,
            net,
            vars: init.vars,
            dtype,
            scale: DataScale::default(),
            alpha_bar: Vec::new(),
        })
    }

    pub fn arch(&self) -> &UNetArch {
        &self.arch
    }

    pub fn scale(&self) -> DataScale {
        self.scale
    }

    pub fn set_scale(&mut self, scale: DataScale) {
        self.scale = scale;
    }

    /// Records the noise schedule the prior term is evaluated with.
    pub fn set_schedule(&mut self, schedule: &NoiseSchedule) {
        self.alpha_bar = (0..=schedule.steps()).map(|t| schedule.alpha_bar(t)).collect();
    }

    /// Prior coefficients at step `t`, or `None` when the term is off.
    fn prior_at(&self, t: usize) -> Result<Option<(f64, f64)>> {
        if self.scale.prior <= 0.0 {
            return Ok(None);
        }
        match self.alpha_bar.get(t) {
            Some(&ab) => Ok(Some(prior_coefficients(self.scale.prior.powi(2), ab))),
            None => Err(PgdmError::invalid(format!(
                "diffusion step {t} is outside the model's schedule ({} steps)",
                self.alpha_bar.len().saturating_sub(1)
            ))),
        }
    }

    pub fn param_count(&self) -> usize {
        self.vars.iter().map(|v| v.elem_count()).sum()
    }

    /// All parameters flattened in construction order.
    pub fn parameters(&self) -> Result<Vec<f32>> {
        let mut out = Vec::with_capacity(self.param_count());
        for v in &self.vars {
            out.extend(v.as_tensor().flatten_all()?.to_dtype(DType::F32)?.to_vec1::<f32>()?);
        }
        Ok(out)
    }

    /// Overwrites all parameters; the length must equal [`Denoiser::param_count`].
    pub fn set_parameters(&self, flat: &[f32]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(PgdmError::invalid(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut offset = 0;
        for v in &self.vars {
            let n = v.elem_count();
            let t = Tensor::from_slice(&flat[offset..offset + n], v.shape(), &Device::Cpu)?
                .to_dtype(self.dtype)?;
            v.set(&t)?;
            offset += n;
        }
        Ok(())
    }

    /// Raw network on a packed batch `(B, C_in, N, ..)`.
    pub fn forward_tensor(&self, x: &Tensor, t: &[usize]) -> Result<Tensor> {
        let expect = self.arch.tensor_shape(t.len(), self.arch.in_channels());
        if x.dims() != expect.as_slice() {
            return Err(PgdmError::invalid(format!(
                "network input {:?} does not match {:?}",
                x.dims(),
                expect
            )));
        }
        self.net.forward(&x.to_dtype(self.dtype)?, t)
    }

    fn check_inputs(&self, u: &Field, u_c: &Field, a: &Field) -> Result<()> {
        if !self.arch.matches(u.grid()) {
            return Err(PgdmError::invalid(format!(
                "field grid {:?} does not match the network",
                u.grid()
            )));
        }
        u.check_same_shape(u_c)?;
        if a.grid().is_evolution() || a.len() != u.grid().spatial_len() {
            return Err(PgdmError::invalid("source must be a spatial field on the target grid"));
        }
        Ok(())
    }

    /// Appends the conditioning channels (scaled coarse solution and source).
    fn pack_condition(&self, u_c: &Field, a: &Field, out: &mut [f64]) {
        let vol = self.arch.volume();
        let s = self.arch.slices();
        pack(&self.arch, u_c.values(), 1.0 / self.scale.u, &mut out[..s * vol]);
        pack(&self.arch, a.values(), 1.0 / self.scale.a, &mut out[s * vol..]);
    }

    /// `s_theta(u_noisy, u_c, a, t)`. `u_noisy` lives in the diffusion's
    /// unit-scale space; `u_c` and `a` are in physical units.
    pub fn denoiser_forward(&self, u_noisy: &Field, u_c: &Field, a: &Field, t: usize) -> Result<Field> {
        self.check_inputs(u_noisy, u_c, a)?;
        self.condition(u_c, a)?
            .score(u_noisy.values(), t)
            .and_then(|v| Field::from_vec(*u_noisy.grid(), v))
    }

    /// Binds the conditioning so the network acts as a [`ScoreModel`].
    pub fn condition(&self, u_c: &Field, a: &Field) -> Result<ConditionedDenoiser<'_>> {
        self.check_inputs(u_c, u_c, a)?;
        let vol = self.arch.volume();
        let s = self.arch.slices();
        let mut cond = vec![0.0; (s + 1) * vol];
        self.pack_condition(u_c, a, &mut cond);
        Ok(ConditionedDenoiser {
            model: self,
            cond,
            coarse: u_c.values().iter().map(|v| v / self.scale.u).collect(),
            grid: *u_c.grid(),
        })
    }

    /// Fits the network to `data` with the denoising objective; returns the
    /// per-step loss. Sets the data scale from `data` first.
    pub fn train(
        &mut self,
        data: &[TrainingPair],
        diffusion: &DiffusionConfig,
        config: &TrainConfig,
    ) -> Result<Vec<f64>> {
        config.validate()?;
        diffusion.validate()?;
        if data.is_empty() {
            return Err(PgdmError::invalid("training set is empty"));
        }
        for p in data {
            self.check_inputs(&p.u_f, &p.u_c, &p.a)?;
        }
        self.scale = DataScale::from_pairs(data);
        self.set_schedule(&diffusion.schedule);
        let arch = self.arch.clone();
        let vol = arch.volume();
        let s = arch.slices();
        let node_map = arch.node_map();
        // packed unit-scale targets and conditioning, computed once
        let targets: Vec<Vec<f64>> = data
            .iter()
            .map(|p| {
                let mut v = vec![0.0; s * vol];
                pack(&arch, p.u_f.values(), 1.0 / self.scale.u, &mut v);
                v
            })
            .collect();
        let conds: Vec<Vec<f64>> = data
            .iter()
            .map(|p| {
                let mut v = vec![0.0; (s + 1) * vol];
                self.pack_condition(&p.u_c, &p.a, &mut v);
                v
            })
            .collect();
        let mut mask = vec![0.0; vol];
        for &i in &node_map[..node_map.len()] {
            mask[i] = 1.0;
        }
        let mask = Tensor::from_vec(mask, arch.tensor_shape(1, 1), &Device::Cpu)?.to_dtype(self.dtype)?;

        let params = ParamsAdamW {
            lr: config.lr0,
            weight_decay: 0.0,
            ..ParamsAdamW::default()
        };
        let mut opt = AdamW::new(self.vars.clone(), params)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let schedule = &diffusion.schedule;
        let b = config.batch_size;
        let mut losses = Vec::with_capacity(config.total_steps);
        let mut input = vec![0.0; b * arch.in_channels() * vol];
        let mut noise = vec![0.0; b * s * vol];
        for step in 0..config.total_steps {
            let picks: Vec<usize> = if data.len() >= b {
                sample_indices(&mut rng, data.len(), b).into_vec()
            } else {
                (0..b).map(|_| rng.random_range(0..data.len())).collect()
            };
            let shared_t = rng.random_range(1..=schedule.steps());
            let ts: Vec<usize> = (0..b)
                .map(|_| {
                    if config.per_element_t {
                        rng.random_range(1..=schedule.steps())
                    } else {
                        shared_t
                    }
                })
                .collect();
            let in_len = arch.in_channels() * vol;
            for (j, (&idx, &t)) in picks.iter().zip(&ts).enumerate() {
                let ab = schedule.alpha_bar(t);
                let (ra, rb) = (ab.sqrt(), (1.0 - ab).sqrt());
                let prior = self.prior_at(t)?;
                let x = &mut input[j * in_len..(j + 1) * in_len];
                let eps = &mut noise[j * s * vol..(j + 1) * s * vol];
                for c in 0..s {
                    for &i in &node_map {
                        let e: f64 = rng.sample(StandardNormal);
                        let k = c * vol + i;
                        x[k] = ra * targets[idx][k] + rb * e;
                        // the network is fitted to -eps minus the prior score
                        eps[k] = match prior {
                            Some((kp, rc)) => e - kp * (x[k] - rc * conds[idx][k]),
                            None => e,
                        };
                    }
                }
                x[s * vol..].copy_from_slice(&conds[idx]);
            }
            let x = Tensor::from_slice(&input, arch.tensor_shape(b, arch.in_channels()), &Device::Cpu)?
                .to_dtype(self.dtype)?;
            let eps = Tensor::from_slice(&noise, arch.tensor_shape(b, s), &Device::Cpu)?
                .to_dtype(self.dtype)?;
            let out = self.net.forward(&x, &ts)?;
            let loss = ((out + eps)?.broadcast_mul(&mask)?.sqr()?.sum_all()? / b as f64)?;
            let value = loss.to_dtype(DType::F64)?.to_scalar::<f64>()?;
            if !value.is_finite() {
                return Err(PgdmError::Training {
                    step,
                    reason: format!("loss is {value}"),
                });
            }
            opt.set_learning_rate(config.learning_rate(step));
            opt.backward_step(&loss)?;
            losses.push(value);
            if (step + 1) % 500 == 0 {
                let recent = &losses[losses.len() - 500..];
                log::info!(
                    "step {}: mean loss {:.4}",
                    step + 1,
                    recent.iter().sum::<f64>() / recent.len() as f64
                );
            }
        }
        Ok(losses)
    }

    /// Denoising loss for a fixed batch, with gradients available through
    /// [`Denoiser::loss_gradient_direction`]. Used for gradient checks.
    fn fixed_batch_loss(&self, x: &Tensor, eps: &Tensor, t: &[usize]) -> Result<Tensor> {
        let out = self.net.forward(x, t)?;
        Ok(((out + eps)?.sqr()?.sum_all()? / t.len() as f64)?)
    }

    /// Directional derivative of the fixed-batch loss along `direction`
    /// (flattened parameter space) via reverse mode.
    pub fn loss_gradient_direction(
        &self,
        x: &Tensor,
        eps: &Tensor,
        t: &[usize],
        direction: &[f64],
    ) -> Result<f64> {
        let loss = self.fixed_batch_loss(&x.to_dtype(self.dtype)?, &eps.to_dtype(self.dtype)?, t)?;
        let grads = loss.backward()?;
        let mut total = 0.0;
        let mut offset = 0;
        for v in &self.vars {
            let n = v.elem_count();
            if let Some(g) = grads.get(v.as_tensor()) {
                let g = g.flatten_all()?.to_dtype(DType::F64)?.to_vec1::<f64>()?;
                total += g.iter().zip(&direction[offset..offset + n]).map(|(a, b)| a * b).sum::<f64>();
            }
            offset += n;
        }
        Ok(total)
    }

    /// Fixed-batch loss value.
    pub fn batch_loss(&self, x: &Tensor, eps: &Tensor, t: &[usize]) -> Result<f64> {
        let loss = self.fixed_batch_loss(&x.to_dtype(self.dtype)?, &eps.to_dtype(self.dtype)?, t)?;
        Ok(loss.to_dtype(DType::F64)?.to_scalar::<f64>()?)
    }

    /// Current parameters in f64 (exact for f64 networks).
    pub fn parameters_f64(&self) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.param_count());
        for v in &self.vars {
            out.extend(v.as_tensor().flatten_all()?.to_dtype(DType::F64)?.to_vec1::<f64>()?);
        }
        Ok(out)
    }

    pub fn set_parameters_f64(&self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(PgdmError::invalid("parameter length mismatch"));
        }
        let mut offset = 0;
        for v in &self.vars {
            let n = v.elem_count();
            let t = Tensor::from_slice(&flat[offset..offset + n], v.shape(), &Device::Cpu)?
                .to_dtype(self.dtype)?;
            v.set(&t)?;
            offset += n;
        }
        Ok(())
    }
}

/// Writes `values * scale` (slice-major field layout) into network channels.
fn pack(arch: &UNetArch, values: &[f64], scale: f64, out: &mut [f64]) {
    let vol = arch.volume();
    let map = arch.node_map();
    for (c, chunk) in values.chunks(map.len()).enumerate() {
        let dst = &mut out[c * vol..(c + 1) * vol];
        for (&i, &v) in map.iter().zip(chunk) {
            dst[i] = v * scale;
        }
    }
}

fn unpack(arch: &UNetArch, data: &[f64], channels: usize) -> Vec<f64> {
    let vol = arch.volume();
    let map = arch.node_map();
    let mut out = Vec::with_capacity(channels * map.len());
    for c in 0..channels {
        out.extend(map.iter().map(|&i| data[c * vol + i]));
    }
    out
}

/// A denoiser with its conditioning channels fixed.
pub struct ConditionedDenoiser<'a> {
    model: &'a Denoiser,
    cond: Vec<f64>,
    /// Unit-scale coarse solution in field layout.
    coarse: Vec<f64>,
    grid: GridSpec,
}

impl ConditionedDenoiser<'_> {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
}

impl ScoreModel for ConditionedDenoiser<'_> {
    fn score(&self, x: &[f64], t: usize) -> Result<Vec<f64>> {
        let arch = &self.model.arch;
        if x.len() != self.grid.len() {
            return Err(PgdmError::invalid("state does not match the conditioned grid"));
        }
        if t == 0 {
            return Err(PgdmError::invalid("diffusion step must be >= 1"));
        }
        let vol = arch.volume();
        let s = arch.slices();
        let prior = self.model.prior_at(t)?;
        let mut input = vec![0.0; arch.in_channels() * vol];
        pack(arch, x, 1.0, &mut input[..s * vol]);
        input[s * vol..].copy_from_slice(&self.cond);
        let xt = Tensor::from_vec(input, arch.tensor_shape(1, arch.in_channels()), &Device::Cpu)?;
        let out = self.model.forward_tensor(&xt, &[t])?;
        let data = out.flatten_all()?.to_dtype(DType::F64)?.to_vec1::<f64>()?;
        let mut score = unpack(arch, &data, s);
        if let Some((kp, rc)) = prior {
            for ((o, xv), cv) in score.iter_mut().zip(x).zip(&self.coarse) {
                *o -= kp * (xv - rc * cv);
            }
        }
        Ok(score)
    }
}

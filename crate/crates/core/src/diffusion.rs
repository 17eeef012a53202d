//! Noise schedules, forward noising, the denoising objective and the
//! DDPM / DDIM reverse samplers.
//!
//! Score models follow the negative-noise convention: a perfect network
//! returns `-eps` for `x_t = sqrt(abar_t) x_0 + sqrt(1 - abar_t) eps`.

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{PgdmError, Result};
use crate::field::{Field, GridSpec};

/// Per-step variances with derived products. Index `t` runs over `1..=T`;
/// `alpha_bar(0) = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleRepr", into = "ScheduleRepr")]
pub struct NoiseSchedule {
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
    sigma: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ScheduleRepr {
    beta: Vec<f64>,
}

impl TryFrom<ScheduleRepr> for NoiseSchedule {
    type Error = PgdmError;

    fn try_from(r: ScheduleRepr) -> Result<Self> {
        NoiseSchedule::from_betas(r.beta)
    }
}

impl From<NoiseSchedule> for ScheduleRepr {
    fn from(s: NoiseSchedule) -> Self {
        ScheduleRepr {
            beta: s.beta[1..].to_vec(),
        }
    }
}

impl NoiseSchedule {
    /// Schedule from `beta_1..beta_T`.
    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(PgdmError::invalid("noise schedule needs at least one step"));
        }
        if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return Err(PgdmError::invalid(format!("beta {b} outside (0, 1)")));
        }
        let t = betas.len();
        let mut beta = Vec::with_capacity(t + 1);
        beta.push(0.0);
        beta.extend(betas);
        let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bar = vec![1.0; t + 1];
        for s in 1..=t {
            alpha_bar[s] = alpha_bar[s - 1] * alpha[s];
        }
        let mut sigma = vec![0.0; t + 1];
        for s in 1..=t {
            let var = (1.0 - alpha[s]) * (1.0 - alpha_bar[s - 1]) / (1.0 - alpha_bar[s]);
            sigma[s] = var.sqrt();
        }
        Ok(NoiseSchedule {
            beta,
            alpha,
            alpha_bar,
            sigma,
        })
    }

    /// Number of diffusion steps `T`.
    pub fn steps(&self) -> usize {
        self.beta.len() - 1
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    pub fn sigma(&self, t: usize) -> f64 {
        self.sigma[t]
    }

    fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            return Err(PgdmError::invalid(format!(
                "diffusion step {t} outside 1..={}",
                self.steps()
            )));
        }
        Ok(())
    }
}

/// `beta_t` linearly spaced from `beta0` to `beta_t` inclusive.
pub fn linear_beta_schedule(steps: usize, beta0: f64, beta_t: f64) -> Result<NoiseSchedule> {
    if steps < 2 {
        return Err(PgdmError::invalid("linear schedule needs T >= 2"));
    }
    if !(beta0 > 0.0 && beta0 <= beta_t && beta_t < 1.0) {
        return Err(PgdmError::invalid(format!(
            "need 0 < beta0 <= betaT < 1, got {beta0}, {beta_t}"
        )));
    }
    let step = (beta_t - beta0) / (steps - 1) as f64;
    NoiseSchedule::from_betas((0..steps).map(|i| beta0 + step * i as f64).collect())
}

/// `[1, 5, 10, ..., T - 5, T]`.
pub fn default_tau(steps: usize) -> Vec<usize> {
    let mut tau = vec![1];
    tau.extend((5..=steps).step_by(5).filter(|&t| t > 1));
    if *tau.last().unwrap() != steps {
        tau.push(steps);
    }
    tau
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionConfig {
    pub schedule: NoiseSchedule,
    pub tau: Vec<usize>,
    pub refine_steps: usize,
}

impl DiffusionConfig {
    /// Linear schedule `1e-4..0.02` over `steps`, default skip sequence, one refinement.
    pub fn standard(steps: usize) -> Result<Self> {
        let cfg = DiffusionConfig {
            schedule: linear_beta_schedule(steps, 1e-4, 0.02)?,
            tau: default_tau(steps),
            refine_steps: 1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.schedule.steps();
        let tau = &self.tau;
        if tau.is_empty() || tau[0] < 1 || *tau.last().unwrap() != t {
            return Err(PgdmError::invalid(format!(
                "skip sequence must start at >= 1 and end at T = {t}"
            )));
        }
        if tau.windows(2).any(|w| w[1] <= w[0]) {
            return Err(PgdmError::invalid("skip sequence must be strictly increasing"));
        }
        Ok(())
    }
}

/// `sqrt(abar_t) x0 + sqrt(1 - abar_t) eps`.
pub fn forward_noising(x0: &Field, t: usize, eps: &Field, schedule: &NoiseSchedule) -> Result<Field> {
    schedule.check_step(t)?;
    x0.check_same_shape(eps)?;
    let ab = schedule.alpha_bar(t);
    x0.scale(ab.sqrt()).axpy((1.0 - ab).sqrt(), eps)
}

/// Batch mean of `||s + eps||^2`.
pub fn denoising_loss(score_out: &[Field], eps: &[Field]) -> Result<f64> {
    if score_out.len() != eps.len() || score_out.is_empty() {
        return Err(PgdmError::invalid(format!(
            "loss needs equal non-empty batches, got {} and {}",
            score_out.len(),
            eps.len()
        )));
    }
    let mut total = 0.0;
    for (s, e) in score_out.iter().zip(eps) {
        s.check_same_shape(e)?;
        total += s.values().iter().zip(e.values()).map(|(a, b)| (a + b).powi(2)).sum::<f64>();
    }
    Ok(total / score_out.len() as f64)
}

/// A (conditioned) score network evaluated on flat state vectors.
pub trait ScoreModel {
    fn score(&self, x: &[f64], t: usize) -> Result<Vec<f64>>;
}

/// The zero network.
pub struct ZeroScore;

impl ScoreModel for ZeroScore {
    fn score(&self, x: &[f64], _t: usize) -> Result<Vec<f64>> {
        Ok(vec![0.0; x.len()])
    }
}

/// Exact score, in the negative-noise convention, for data whose entries are
/// independent `N(mean, std^2)`.
pub struct GaussianScore {
    pub mean: f64,
    pub std: f64,
    pub schedule: NoiseSchedule,
}

impl ScoreModel for GaussianScore {
    fn score(&self, x: &[f64], t: usize) -> Result<Vec<f64>> {
        let ab = self.schedule.alpha_bar(t);
        let var = ab * self.std * self.std + 1.0 - ab;
        let c = (1.0 - ab).sqrt() / var;
        let centre = ab.sqrt() * self.mean;
        Ok(x.iter().map(|v| -c * (v - centre)).collect())
    }
}

/// One DDPM update `x_{t-1}` from `x_t` and its score; `xi` may be `None` for no noise.
pub fn ddpm_step(x: &mut [f64], score: &[f64], t: usize, schedule: &NoiseSchedule, xi: Option<&[f64]>) {
    let a = schedule.alpha(t);
    let k = (1.0 - a).sqrt() / (1.0 - schedule.alpha_bar(t)).sqrt();
    let inv = 1.0 / a.sqrt();
    for (i, (v, s)) in x.iter_mut().zip(score).enumerate() {
        *v = inv * (*v + k * s);
        if let Some(xi) = xi {
            *v += schedule.sigma(t) * xi[i];
        }
    }
}

/// One DDIM update between noise levels `abar_cur` (at `tau_i`) and
/// `abar_prev` (at `tau_{i-1}`).
pub fn ddim_step(x: &mut [f64], score: &[f64], abar_prev: f64, abar_cur: f64) {
    let ratio = (abar_prev / abar_cur).sqrt();
    let coef = (1.0 - abar_cur).sqrt() * ratio - (1.0 - abar_prev).sqrt();
    for (v, s) in x.iter_mut().zip(score) {
        *v = ratio * *v + coef * s;
    }
}

/// Runs the DDPM recursion from `x_T` down to `x_0`. Fresh noise is drawn
/// from `rng` for `t = T..2`; with `rng = None` every `xi` is zero.
pub fn ddpm_reverse<M: ScoreModel + ?Sized>(
    model: &M,
    schedule: &NoiseSchedule,
    mut x: Vec<f64>,
    mut rng: Option<&mut dyn RngCore>,
) -> Result<Vec<f64>> {
    let mut xi = vec![0.0; x.len()];
    for t in (1..=schedule.steps()).rev() {
        let s = model.score(&x, t)?;
        let noise = match rng.as_deref_mut() {
            Some(r) if t > 1 => {
                xi.iter_mut().for_each(|v| *v = r.sample(StandardNormal));
                Some(xi.as_slice())
            }
            _ => None,
        };
        ddpm_step(&mut x, &s, t, schedule, noise);
    }
    Ok(x)
}

/// Runs the deterministic DDIM recursion down the skip sequence `tau`
/// (with `tau_0 = 0`, `abar_0 = 1`).
pub fn ddim_reverse<M: ScoreModel + ?Sized>(
    model: &M,
    schedule: &NoiseSchedule,
    tau: &[usize],
    mut x: Vec<f64>,
) -> Result<Vec<f64>> {
    for i in (0..tau.len()).rev() {
        let cur = tau[i];
        let prev = if i == 0 { 0 } else { tau[i - 1] };
        let s = model.score(&x, cur)?;
        ddim_step(&mut x, &s, schedule.alpha_bar(prev), schedule.alpha_bar(cur));
    }
    Ok(x)
}

fn standard_normal(n: usize, rng: &mut dyn RngCore) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// DDPM sample on `grid`, starting from `x_T ~ N(0, I)` drawn from `rng`.
pub fn ddpm_sample<M: ScoreModel + ?Sized>(
    model: &M,
    grid: &GridSpec,
    config: &DiffusionConfig,
    rng: &mut dyn RngCore,
) -> Result<Field> {
    config.validate()?;
    let x_t = standard_normal(grid.len(), rng);
    let x0 = ddpm_reverse(model, &config.schedule, x_t, Some(rng))?;
    Field::from_vec(*grid, x0).map_err(non_finite_sample)
}

/// DDIM sample on `grid`; `rng` only draws the starting noise.
pub fn ddim_sample<M: ScoreModel + ?Sized>(
    model: &M,
    grid: &GridSpec,
    config: &DiffusionConfig,
    rng: &mut dyn RngCore,
) -> Result<Field> {
    config.validate()?;
    let x_t = standard_normal(grid.len(), rng);
    let x0 = ddim_reverse(model, &config.schedule, &config.tau, x_t)?;
    Field::from_vec(*grid, x0).map_err(non_finite_sample)
}

fn non_finite_sample(e: PgdmError) -> PgdmError {
    match e {
        PgdmError::Domain(msg) => PgdmError::Numerical(format!("sampler diverged: {msg}")),
        other => other,
    }
}

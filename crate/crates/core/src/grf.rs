//! Gaussian random fields `N(0, (-lap + b^2 I)^{-c})` by spectral synthesis.
//!
//! Zero-Dirichlet grids expand in the sine eigenbasis
//! `phi_k = 2^{d/2} prod sin(k_i pi x_i)`, `lambda_k = pi^2 |k|^2 + b^2`.
//! Periodic grids colour white noise in Fourier space with
//! `lambda_k = 4 pi^2 |k|^2 + b^2`, so the discrete Fourier coefficient
//! `K^{-d} sum_x u(x) e^{-2 pi i k.x}` has variance `lambda_k^{-c}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{PgdmError, Result};
use crate::field::{Boundary, Field, GridSpec};
use crate::spectral::{FftNd, SineSynthesis};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GRFConfig {
    pub b: f64,
    pub c: f64,
    pub boundary: Boundary,
    pub seed: u64,
}

impl GRFConfig {
    pub fn new(b: f64, c: f64, boundary: Boundary, seed: u64) -> Result<Self> {
        let cfg = GRFConfig { b, c, boundary, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.b.is_finite() && self.c > 0.0 && self.c.is_finite()) {
            return Err(PgdmError::invalid(format!(
                "GRF needs b > 0 and c > 0, got b = {}, c = {}",
                self.b, self.c
            )));
        }
        Ok(())
    }

    /// Generator for sample `index`, seeded with `seed ^ index`.
    pub fn rng_for(&self, index: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ index)
    }

    /// Covariance eigenvalue of mode `k` (non-negative integers for
    /// Dirichlet, signed for periodic).
    pub fn eigenvalue(&self, k: &[i64]) -> f64 {
        let k2: f64 = k.iter().map(|&v| (v * v) as f64).sum();
        let scale = match self.boundary {
            Boundary::DirichletZero => PI * PI,
            Boundary::Periodic => 4.0 * PI * PI,
        };
        scale * k2 + self.b * self.b
    }

    fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        self.validate()?;
        if grid.boundary != self.boundary {
            return Err(PgdmError::invalid(format!(
                "GRF configured for {:?} but grid is {:?}",
                self.boundary, grid.boundary
            )));
        }
        if grid.is_evolution() {
            return Err(PgdmError::invalid("GRF samples live on spatial grids"));
        }
        Ok(())
    }
}

/// Number of standard normals consumed by one draw on `grid`.
pub fn noise_len(grid: &GridSpec) -> usize {
    grid.spatial_len()
}

/// Draws one field using `rng` for the underlying white noise.
pub fn grf_sample<R: Rng + ?Sized>(config: &GRFConfig, grid: &GridSpec, rng: &mut R) -> Result<Field> {
    config.check_grid(grid)?;
    let noise: Vec<f64> = (0..noise_len(grid)).map(|_| rng.sample(StandardNormal)).collect();
    grf_from_noise(config, grid, &noise)
}

/// Draw number `index` of the seeded stream (`seed ^ index`).
pub fn grf_sample_indexed(config: &GRFConfig, grid: &GridSpec, index: u64) -> Result<Field> {
    grf_sample(config, grid, &mut config.rng_for(index))
}

/// Deterministic map from white noise to the field; linear in `noise`.
///
/// Dirichlet noise is indexed by mode `k - 1` per axis; periodic noise by
/// grid node.
pub fn grf_from_noise(config: &GRFConfig, grid: &GridSpec, noise: &[f64]) -> Result<Field> {
    config.check_grid(grid)?;
    if noise.len() != noise_len(grid) {
        return Err(PgdmError::invalid(format!(
            "expected {} noise values, got {}",
            noise_len(grid),
            noise.len()
        )));
    }
    let d = grid.spatial_dim;
    let k = grid.cells;
    let exponent = -config.c / 2.0;
    let values = match grid.boundary {
        Boundary::DirichletZero => {
            let n = k - 1;
            let norm = 2f64.powf(d as f64 / 2.0);
            let mut coeffs = noise.to_vec();
            let mut mode = vec![0i64; d];
            for (flat, c) in coeffs.iter_mut().enumerate() {
                let mut rem = flat;
                for axis in (0..d).rev() {
                    mode[axis] = (rem % n) as i64 + 1;
                    rem /= n;
                }
                *c *= norm * config.eigenvalue(&mode).powf(exponent);
            }
            SineSynthesis::new(k, d).apply(&mut coeffs);
            coeffs
        }
        Boundary::Periodic => {
            let mut fft = FftNd::new(k, d);
            let mut data: Vec<Complex64> = noise.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            fft.forward(&mut data);
            for (z, mode) in data.iter_mut().zip(fft.wavenumbers()) {
                *z *= config.eigenvalue(&mode).powf(exponent);
            }
            fft.inverse(&mut data);
            // inverse carries 1/K^d; the coefficient scaling wants K^{-d/2}
            let scale = (k as f64).powf(d as f64 / 2.0);
            data.iter().map(|z| z.re * scale).collect()
        }
    };
    Field::from_vec(grid.spatial(), values)
}

/// Pointwise variance `sum_k lambda_k^{-c} |phi_k(x)|^2` averaged over the
/// domain, i.e. `sum_k lambda_k^{-c}` over the modes the grid resolves.
pub fn pointwise_variance(config: &GRFConfig, grid: &GridSpec) -> f64 {
    let d = grid.spatial_dim;
    let (lo, hi): (i64, i64) = match grid.boundary {
        Boundary::DirichletZero => (1, grid.cells as i64 - 1),
        Boundary::Periodic => {
            let k = grid.cells as i64;
            (-((k - 1) / 2), k / 2)
        }
    };
    let mut total = 0.0;
    let mut mode = vec![lo; d];
    loop {
        total += config.eigenvalue(&mode).powf(-config.c);
        let mut axis = 0;
        loop {
            if axis == d {
                return total;
            }
            if mode[axis] < hi {
                mode[axis] += 1;
                break;
            }
            mode[axis] = lo;
            axis += 1;
        }
    }
}

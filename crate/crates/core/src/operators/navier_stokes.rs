//! Streamfunction-vorticity helpers and the pseudo-spectral Crank-Nicolson
//! reference integrator for 2D periodic Navier-Stokes.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::EquationSpec;
use crate::error::{PgdmError, Result};
use crate::field::{Boundary, Field, GridSpec};
use crate::spectral::{derivative_wavenumber, wavenumber, FftNd};

fn check_periodic_2d(grid: &GridSpec) -> Result<()> {
    if grid.boundary != Boundary::Periodic || grid.spatial_dim != 2 {
        return Err(PgdmError::invalid(
            "vorticity operators need a periodic 2D grid",
        ));
    }
    Ok(())
}

fn to_complex(v: &[f64]) -> Vec<Complex64> {
    v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

/// Velocity `(u, v) = (d psi/dy, -d psi/dx)` of one vorticity slice, where
/// `-lap psi = w` is solved spectrally with the mean of `psi` set to zero.
pub(crate) fn velocity_slice(grid: &GridSpec, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = grid.nodes_per_dim();
    let mut fft = FftNd::new(n, 2);
    let mut w_hat = to_complex(w);
    fft.forward(&mut w_hat);
    let mut u_hat = vec![Complex64::default(); n * n];
    let mut v_hat = vec![Complex64::default(); n * n];
    for i in 0..n {
        let kx = wavenumber(i, n) as f64;
        let dx = 2.0 * PI * derivative_wavenumber(i, n);
        for j in 0..n {
            let ky = wavenumber(j, n) as f64;
            let dy = 2.0 * PI * derivative_wavenumber(j, n);
            let k2 = kx * kx + ky * ky;
            if k2 == 0.0 {
                continue;
            }
            let psi = w_hat[i * n + j] / (4.0 * PI * PI * k2);
            u_hat[i * n + j] = Complex64::new(0.0, dy) * psi;
            v_hat[i * n + j] = -Complex64::new(0.0, dx) * psi;
        }
    }
    fft.inverse(&mut u_hat);
    fft.inverse(&mut v_hat);
    (
        u_hat.iter().map(|z| z.re).collect(),
        v_hat.iter().map(|z| z.re).collect(),
    )
}

/// Spectral velocity recovery from a static vorticity field.
pub fn velocity_from_vorticity(w: &Field) -> Result<(Field, Field)> {
    check_periodic_2d(w.grid())?;
    if w.grid().is_evolution() {
        return Err(PgdmError::invalid("velocity recovery expects one time slice"));
    }
    let (u, v) = velocity_slice(w.grid(), w.values());
    Ok((Field::from_vec(*w.grid(), u)?, Field::from_vec(*w.grid(), v)?))
}

/// Semi-implicit Crank-Nicolson integrator: diffusion treated with the
/// trapezoidal rule, transport and forcing explicit, nonlinear products
/// evaluated pseudo-spectrally with 2/3-rule dealiasing.
pub struct SpectralNsStepper {
    n: usize,
    dt: f64,
    mu: f64,
    fft: FftNd,
    forcing_hat: Vec<Complex64>,
    // 4 pi^2 |k|^2
    lambda: Vec<f64>,
    dx: Vec<f64>,
    dy: Vec<f64>,
    keep: Vec<bool>,
    implicit: Vec<f64>,
    explicit: Vec<f64>,
}

impl SpectralNsStepper {
    /// Stepper for `eq` on `grid` with time step `dt` (usually much smaller
    /// than the implicit-Euler step stored in `eq`).
    pub fn new(eq: &EquationSpec, grid: &GridSpec, dt: f64) -> Result<Self> {
        check_periodic_2d(grid)?;
        let n = grid.nodes_per_dim();
        let mut fft = FftNd::new(n, 2);
        let forcing = eq.forcing.evaluate(&grid.spatial());
        let mut forcing_hat = to_complex(forcing.values());
        fft.forward(&mut forcing_hat);

        let kmax = n as f64 / 3.0;
        let mut lambda = Vec::with_capacity(n * n);
        let mut dx = Vec::with_capacity(n * n);
        let mut dy = Vec::with_capacity(n * n);
        let mut keep = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let (kx, ky) = (wavenumber(i, n) as f64, wavenumber(j, n) as f64);
                lambda.push(4.0 * PI * PI * (kx * kx + ky * ky));
                dx.push(2.0 * PI * derivative_wavenumber(i, n));
                dy.push(2.0 * PI * derivative_wavenumber(j, n));
                keep.push(kx.abs() <= kmax && ky.abs() <= kmax);
            }
        }
        let nu = eq.diffusion_coeff;
        let implicit = lambda.iter().map(|l| 1.0 + 0.5 * dt * nu * l).collect();
        let explicit = lambda.iter().map(|l| 1.0 - 0.5 * dt * nu * l).collect();
        Ok(SpectralNsStepper {
            n,
            dt,
            mu: eq.transport_coeff,
            fft,
            forcing_hat,
            lambda,
            dx,
            dy,
            keep,
            implicit,
            explicit,
        })
    }

    /// Advances the spectral state by one step.
    pub fn step_hat(&mut self, w_hat: &mut [Complex64]) {
        let len = self.n * self.n;
        let mut u = vec![Complex64::default(); len];
        let mut v = vec![Complex64::default(); len];
        let mut wx = vec![Complex64::default(); len];
        let mut wy = vec![Complex64::default(); len];
        for p in 0..len {
            let wh = w_hat[p];
            if self.lambda[p] > 0.0 {
                let psi = wh / self.lambda[p];
                u[p] = Complex64::new(0.0, self.dy[p]) * psi;
                v[p] = -Complex64::new(0.0, self.dx[p]) * psi;
            }
            wx[p] = Complex64::new(0.0, self.dx[p]) * wh;
            wy[p] = Complex64::new(0.0, self.dy[p]) * wh;
        }
        for buf in [&mut u, &mut v, &mut wx, &mut wy] {
            self.fft.inverse(buf);
        }
        let mut nonlinear: Vec<Complex64> = (0..len)
            .map(|p| Complex64::new(u[p].re * wx[p].re + v[p].re * wy[p].re, 0.0))
            .collect();
        self.fft.forward(&mut nonlinear);
        for p in 0..len {
            let adv = if self.keep[p] {
                nonlinear[p]
            } else {
                Complex64::default()
            };
            let rhs = self.explicit[p] * w_hat[p] + self.dt * (self.forcing_hat[p] - self.mu * adv);
            w_hat[p] = rhs / self.implicit[p];
        }
    }

    pub fn forward_transform(&mut self, w: &[f64]) -> Vec<Complex64> {
        let mut hat = to_complex(w);
        self.fft.forward(&mut hat);
        hat
    }

    pub fn inverse_transform(&mut self, hat: &[Complex64]) -> Vec<f64> {
        let mut buf = hat.to_vec();
        self.fft.inverse(&mut buf);
        buf.iter().map(|z| z.re).collect()
    }

    /// Runs `steps` steps starting from the static slice `w`.
    pub fn evolve(&mut self, w: &Field, steps: usize) -> Result<Field> {
        let mut hat = self.forward_transform(w.values());
        for _ in 0..steps {
            self.step_hat(&mut hat);
        }
        Field::from_vec(*w.grid(), self.inverse_transform(&hat))
    }
}

/// One reference Crank-Nicolson step of size `dt`.
pub fn reference_step_ns(eq: &EquationSpec, w: &Field, dt: f64) -> Result<Field> {
    SpectralNsStepper::new(eq, w.grid(), dt)?.evolve(w, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::Forcing;

    fn grid(k: usize) -> GridSpec {
        GridSpec::new(2, k, Boundary::Periodic).unwrap()
    }

    #[test]
    fn zero_vorticity_has_zero_velocity() {
        let (u, v) = velocity_from_vorticity(&Field::zeros(grid(16))).unwrap();
        assert_eq!(u.max_abs(), 0.0);
        assert_eq!(v.max_abs(), 0.0);
    }

    #[test]
    fn single_mode_velocity_closed_form() {
        let g = grid(32);
        let w = Field::from_fn(g, |x| (2.0 * PI * x[0]).sin());
        let (u, v) = velocity_from_vorticity(&w).unwrap();
        let v_exact = Field::from_fn(g, |x| -(2.0 * PI * x[0]).cos() / (2.0 * PI));
        assert!(u.max_abs() < 1e-14);
        assert!(v.axpy(-1.0, &v_exact).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn recovered_velocity_is_divergence_free() {
        let g = grid(16);
        let w = Field::from_fn(g, |x| {
            (2.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).cos() + (6.0 * PI * (x[0] + x[1])).sin()
        });
        let (u, v) = velocity_from_vorticity(&w).unwrap();
        let n = 16;
        let mut fft = FftNd::new(n, 2);
        let mut uh = to_complex(u.values());
        let mut vh = to_complex(v.values());
        fft.forward(&mut uh);
        fft.forward(&mut vh);
        let mut div: Vec<Complex64> = (0..n * n)
            .map(|p| {
                let (i, j) = (p / n, p % n);
                Complex64::new(0.0, derivative_wavenumber(i, n)) * uh[p]
                    + Complex64::new(0.0, derivative_wavenumber(j, n)) * vh[p]
            })
            .collect();
        fft.inverse(&mut div);
        assert!(div.iter().all(|z| z.norm() < 1e-12));
    }

    fn viscous(nu: f64) -> EquationSpec {
        EquationSpec {
            transport_coeff: 0.0,
            forcing: Forcing::None,
            ..EquationSpec::navier_stokes(nu)
        }
    }

    #[test]
    fn pure_diffusion_matches_amplification_factor() {
        let g = grid(32);
        let (nu, dt) = (1e-2, 5e-3);
        let eq = viscous(nu);
        let w = Field::from_fn(g, |x| (2.0 * PI * (2.0 * x[0] + x[1])).cos());
        let out = reference_step_ns(&eq, &w, dt).unwrap();
        let lambda = 4.0 * PI * PI * 5.0;
        let factor = (1.0 - dt * nu * lambda / 2.0) / (1.0 + dt * nu * lambda / 2.0);
        assert!(out.axpy(-factor, &w).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn zero_state_without_forcing_stays_zero() {
        let eq = EquationSpec {
            forcing: Forcing::None,
            ..EquationSpec::navier_stokes(1e-4)
        };
        let out = reference_step_ns(&eq, &Field::zeros(grid(16)), 5e-5).unwrap();
        assert_eq!(out.max_abs(), 0.0);
    }

    #[test]
    fn energy_decays_without_transport_or_forcing() {
        let g = grid(16);
        let eq = viscous(1e-3);
        let mut w = Field::from_fn(g, |x| (2.0 * PI * x[0]).sin() + (4.0 * PI * x[1]).cos() + 0.3);
        let mut stepper = SpectralNsStepper::new(&eq, &g, 1e-2).unwrap();
        for _ in 0..20 {
            let next = stepper.evolve(&w, 1).unwrap();
            assert!(next.norm() <= w.norm() + 1e-12);
            w = next;
        }
    }
}

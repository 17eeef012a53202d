//! FFT plumbing for periodic grids and the type-I sine synthesis used on
//! zero-Dirichlet grids. All transforms act on `n^d` row-major arrays.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Signed wavenumber of FFT bin `m` on an `n`-point periodic axis.
pub fn wavenumber(m: usize, n: usize) -> i64 {
    if m <= n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

/// Wavenumber used for first derivatives: the Nyquist bin is dropped so
/// that real fields stay real.
pub fn derivative_wavenumber(m: usize, n: usize) -> f64 {
    if n.is_multiple_of(2) && m == n / 2 {
        0.0
    } else {
        wavenumber(m, n) as f64
    }
}

/// Separable d-dimensional FFT on an `n^d` cube.
pub struct FftNd {
    n: usize,
    dim: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    line: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl FftNd {
    pub fn new(n: usize, dim: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        FftNd {
            n,
            dim,
            forward,
            inverse,
            line: vec![Complex64::default(); n],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized forward transform `X_k = sum_j x_j e^{-2 pi i k.j/n}`.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        let plan = Arc::clone(&self.forward);
        self.apply(data, plan.as_ref());
    }

    /// Inverse transform including the `1/n^d` factor.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        let plan = Arc::clone(&self.inverse);
        self.apply(data, plan.as_ref());
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    fn apply(&mut self, data: &mut [Complex64], plan: &dyn Fft<f64>) {
        assert_eq!(data.len(), self.len());
        let n = self.n;
        for axis in 0..self.dim {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            if stride == 1 {
                for chunk in data.chunks_exact_mut(n) {
                    plan.process_with_scratch(chunk, &mut self.scratch);
                }
                continue;
            }
            let block = stride * n;
            for outer in (0..data.len()).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (k, slot) in self.line.iter_mut().enumerate() {
                        *slot = data[base + k * stride];
                    }
                    plan.process_with_scratch(&mut self.line, &mut self.scratch);
                    for (k, v) in self.line.iter().enumerate() {
                        data[base + k * stride] = *v;
                    }
                }
            }
        }
    }

    /// Per-entry wavenumber vectors in FFT order.
    pub fn wavenumbers(&self) -> Vec<Vec<i64>> {
        let n = self.n;
        (0..self.len())
            .map(|flat| {
                let mut k = vec![0i64; self.dim];
                let mut rem = flat;
                for axis in (0..self.dim).rev() {
                    k[axis] = wavenumber(rem % n, n);
                    rem /= n;
                }
                k
            })
            .collect()
    }
}

/// Sine synthesis on the interior nodes of a zero-Dirichlet grid with `cells`
/// cells per axis: `u_i = sum_{k=1}^{K-1} c_k sin(pi k i / K)` along every axis.
/// `data` holds `(K-1)^dim` coefficients and is overwritten with node values.
pub struct SineSynthesis {
    cells: usize,
    dim: usize,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl SineSynthesis {
    pub fn new(cells: usize, dim: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(2 * cells);
        let scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        SineSynthesis {
            cells,
            dim,
            fft,
            buf: vec![Complex64::default(); 2 * cells],
            scratch,
        }
    }

    pub fn apply(&mut self, data: &mut [f64]) {
        let n = self.cells - 1;
        assert_eq!(data.len(), n.pow(self.dim as u32));
        let mut line = vec![0.0; n];
        for axis in 0..self.dim {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            let block = stride * n;
            for outer in (0..data.len()).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (k, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + k * stride];
                    }
                    self.synthesize_line(&mut line);
                    for (k, v) in line.iter().enumerate() {
                        data[base + k * stride] = *v;
                    }
                }
            }
        }
    }

    fn synthesize_line(&mut self, line: &mut [f64]) {
        // odd extension of length 2K: z_k = c_k, z_{2K-k} = -c_k
        let k2 = 2 * self.cells;
        self.buf.iter_mut().for_each(|z| *z = Complex64::default());
        for (k, &c) in line.iter().enumerate() {
            self.buf[k + 1] = Complex64::new(c, 0.0);
            self.buf[k2 - k - 1] = Complex64::new(-c, 0.0);
        }
        self.fft
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        // FFT_i = -2i sum_k c_k sin(pi k i / K)
        for (i, out) in line.iter_mut().enumerate() {
            *out = -0.5 * self.buf[i + 1].im;
        }
    }
}

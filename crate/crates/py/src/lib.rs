//! Python bindings: grids, fields, equations, solvers, GRF sampling, the
//! trained denoiser and the dataset/benchmark pipeline.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use pgdm_core::denoiser::{load_checkpoint, Denoiser};
use pgdm_core::diffusion::{linear_beta_schedule, DiffusionConfig};
use pgdm_core::field::{self, Boundary, Field, GridSpec};
use pgdm_core::grf::{grf_sample_indexed, GRFConfig};
use pgdm_core::nlsolve::LMConfig;
use pgdm_core::operators::EquationSpec;
use pgdm_core::pipeline::{self, DatasetManifest, DatasetSpec, SamplerKind, Solver, SolverContext};
use pgdm_core::PgdmError;

fn to_py(e: PgdmError) -> PyErr {
    match e.root() {
        PgdmError::InvalidArgument(_) | PgdmError::Domain(_) => PyValueError::new_err(e.to_string()),
        PgdmError::Io { .. } | PgdmError::Format { .. } => PyIOError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

pub fn parse_boundary(name: &str) -> PyResult<Boundary> {
    match name {
        "dirichlet" => Ok(Boundary::DirichletZero),
        "periodic" => Ok(Boundary::Periodic),
        _ => Err(PyValueError::new_err(format!(
            "boundary must be 'dirichlet' or 'periodic', got '{name}'"
        ))),
    }
}

/// Uniform grid on the unit cube, optionally with a time axis.
#[pyclass(name = "Grid", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyGrid {
    pub inner: GridSpec,
}

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (dim, cells, boundary = "dirichlet", time_steps = 0, dt = 0.0))]
    fn new(dim: usize, cells: usize, boundary: &str, time_steps: usize, dt: f64) -> PyResult<Self> {
        let mut g = GridSpec::new(dim, cells, parse_boundary(boundary)?).map_err(to_py)?;
        if time_steps > 0 {
            g = g.with_time(time_steps, dt).map_err(to_py)?;
        }
        Ok(PyGrid { inner: g })
    }

    #[getter]
    fn shape(&self) -> Vec<usize> {
        self.inner.shape()
    }

    #[getter]
    fn cells(&self) -> usize {
        self.inner.cells
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Grid({:?})", self.inner)
    }
}

/// Values on a grid, row-major with the last axis fastest.
#[pyclass(name = "Field", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyField {
    pub inner: Field,
}

#[pymethods]
impl PyField {
    #[new]
    fn new(grid: &PyGrid, values: Vec<f64>) -> PyResult<Self> {
        Ok(PyField {
            inner: Field::from_vec(grid.inner, values).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn zeros(grid: &PyGrid) -> Self {
        PyField {
            inner: Field::zeros(grid.inner),
        }
    }

    /// Reads a PGDMFLD1 file laid out on `grid`.
    #[staticmethod]
    fn load(path: PathBuf, grid: &PyGrid) -> PyResult<Self> {
        Ok(PyField {
            inner: field::read_field(&path, &grid.inner).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        field::write_field(&path, &self.inner).map_err(to_py)
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid {
            inner: *self.inner.grid(),
        }
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn norm(&self) -> f64 {
        self.inner.norm()
    }

    fn max_abs(&self) -> f64 {
        self.inner.max_abs()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Field(shape={:?}, norm={:.6e})", self.inner.grid().shape(), self.inner.norm())
    }
}

/// One of the three model equations.
#[pyclass(name = "Equation", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyEquation {
    pub inner: EquationSpec,
}

#[pymethods]
impl PyEquation {
    #[staticmethod]
    fn poisson() -> Self {
        PyEquation {
            inner: EquationSpec::poisson(),
        }
    }

    #[staticmethod]
    #[pyo3(signature = (gamma = 5.0, time_steps = 10, dt = 0.05))]
    fn allen_cahn(gamma: f64, time_steps: usize, dt: f64) -> Self {
        PyEquation {
            inner: EquationSpec {
                time_steps,
                dt,
                ..EquationSpec::allen_cahn(gamma)
            },
        }
    }

    #[staticmethod]
    #[pyo3(signature = (nu = 1e-4, time_steps = 40, dt = 0.05))]
    fn navier_stokes(nu: f64, time_steps: usize, dt: f64) -> Self {
        PyEquation {
            inner: EquationSpec {
                time_steps,
                dt,
                ..EquationSpec::navier_stokes(nu)
            },
        }
    }

    fn is_evolution(&self) -> bool {
        self.inner.is_evolution()
    }

    fn __repr__(&self) -> String {
        format!("Equation({:?})", self.inner)
    }
}

#[pyfunction]
fn csi_upsample(u: &PyField, cells: usize) -> PyResult<PyField> {
    let target = u.inner.grid().with_cells(cells).map_err(to_py)?;
    Ok(PyField {
        inner: field::csi_upsample(&u.inner, &target).map_err(to_py)?,
    })
}

#[pyfunction]
fn restrict(u: &PyField, cells: usize) -> PyResult<PyField> {
    let target = u.inner.grid().with_cells(cells).map_err(to_py)?;
    Ok(PyField {
        inner: field::restrict(&u.inner, &target).map_err(to_py)?,
    })
}

#[pyfunction]
fn relative_l2_error(u: &PyField, reference: &PyField) -> PyResult<f64> {
    field::relative_l2_error(&u.inner, &reference.inner).map_err(to_py)
}

/// Draw `index` of the GRF `N(0, (-lap + b^2)^{-c})` on `grid`.
#[pyfunction]
#[pyo3(signature = (grid, b, c, seed, index = 0))]
fn grf_sample(grid: &PyGrid, b: f64, c: f64, seed: u64, index: u64) -> PyResult<PyField> {
    let cfg = GRFConfig::new(b, c, grid.inner.boundary, seed).map_err(to_py)?;
    Ok(PyField {
        inner: grf_sample_indexed(&cfg, &grid.inner, index).map_err(to_py)?,
    })
}

/// LM solve (static) or implicit-Euler rollout (evolution) from `a`.
#[pyfunction]
fn solve(py: Python<'_>, equation: &PyEquation, a: &PyField) -> PyResult<PyField> {
    let (eq, a) = (equation.inner, a.inner.clone());
    let (u, _) = py
        .detach(|| pipeline::solve_at(&eq, &a, &LMConfig::default()))
        .map_err(to_py)?;
    Ok(PyField { inner: u })
}

#[pyfunction]
fn residual_norm(equation: &PyEquation, u: &PyField, a: &PyField) -> PyResult<f64> {
    pipeline::residual_norm(&equation.inner, &u.inner, &a.inner).map_err(to_py)
}

/// `steps` Gauss-Newton refinement steps of `u` on its own grid.
#[pyfunction]
#[pyo3(signature = (equation, u, a, steps = 1))]
fn gauss_newton(equation: &PyEquation, u: &PyField, a: &PyField, steps: usize) -> PyResult<PyField> {
    let (out, _) = pipeline::refine(&equation.inner, &u.inner, &a.inner, steps).map_err(to_py)?;
    Ok(PyField { inner: out })
}

/// `alpha_bar_t` for `t = 0..=T` of the linear schedule.
#[pyfunction]
#[pyo3(signature = (steps, beta0 = 1e-4, beta_t = 0.02))]
fn linear_schedule(steps: usize, beta0: f64, beta_t: f64) -> PyResult<Vec<f64>> {
    let s = linear_beta_schedule(steps, beta0, beta_t).map_err(to_py)?;
    Ok((0..=steps).map(|t| s.alpha_bar(t)).collect())
}

/// A trained conditional denoiser loaded from a checkpoint.
#[pyclass(name = "Denoiser", frozen, unsendable)]
pub struct PyDenoiser {
    model: Denoiser,
    diffusion: DiffusionConfig,
}

#[pymethods]
impl PyDenoiser {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (model, header) = load_checkpoint(&path).map_err(to_py)?;
        Ok(PyDenoiser {
            model,
            diffusion: header.diffusion,
        })
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.model.param_count()
    }

    #[getter]
    fn diffusion_steps(&self) -> usize {
        self.diffusion.schedule.steps()
    }

    /// Raw conditional sample (`method` is "ddim" or "ddpm").
    #[pyo3(signature = (u_c, a, method = "ddim", seed = 0))]
    fn sample(&self, u_c: &PyField, a: &PyField, method: &str, seed: u64) -> PyResult<PyField> {
        let kind: SamplerKind = method.parse().map_err(to_py)?;
        let out = pipeline::sample_conditional(&self.model, &self.diffusion, kind, &u_c.inner, &a.inner, seed)
            .map_err(to_py)?;
        Ok(PyField { inner: out })
    }

    /// DDIM sample followed by Gauss-Newton refinement; returns `(raw, refined)`.
    #[pyo3(signature = (equation, u_c, a, seed = 0))]
    fn pgdm(&self, equation: &PyEquation, u_c: &PyField, a: &PyField, seed: u64) -> PyResult<(PyField, PyField)> {
        let out = pipeline::run_pgdm(&self.model, &self.diffusion, &equation.inner, &u_c.inner, &a.inner, seed)
            .map_err(to_py)?;
        Ok((PyField { inner: out.raw }, PyField { inner: out.refined }))
    }
}

/// Generates a dataset into `out` and returns the manifest as JSON.
#[pyfunction]
#[pyo3(signature = (equation, dim, kc, kf, n_train, n_test, out, b = 7.0, c = 1.6, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn generate_dataset(
    py: Python<'_>,
    equation: &PyEquation,
    dim: usize,
    kc: usize,
    kf: usize,
    n_train: usize,
    n_test: usize,
    out: PathBuf,
    b: f64,
    c: f64,
    seed: u64,
) -> PyResult<String> {
    let eq = equation.inner;
    let spec = DatasetSpec {
        equation: eq,
        spatial_dim: dim,
        coarse_cells: kc,
        fine_cells: kf,
        grf: GRFConfig::new(b, c, eq.boundary, seed).map_err(to_py)?,
        n_train,
        n_test,
        lm: LMConfig::default(),
    };
    let manifest = py.detach(|| pipeline::generate_dataset(&spec, &out)).map_err(to_py)?;
    serde_json::to_string(&manifest).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Benchmarks `solvers` on the test split of the dataset in `data`;
/// returns `(solver, mean_rel_l2, mean_seconds, samples)` rows.
#[pyfunction]
#[pyo3(signature = (data, solvers, model = None, report = None))]
fn benchmark(
    data: PathBuf,
    solvers: Vec<String>,
    model: Option<&PyDenoiser>,
    report: Option<PathBuf>,
) -> PyResult<Vec<(String, f64, f64, usize)>> {
    let manifest = DatasetManifest::load(&data).map_err(to_py)?;
    let solvers = solvers
        .iter()
        .map(|s| s.parse::<Solver>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(to_py)?;
    let ctx = SolverContext::from_manifest(&manifest, model.map(|m| (&m.model, &m.diffusion)));
    let r = pipeline::benchmark(&manifest, &data, &solvers, &ctx, report.as_deref(), None).map_err(to_py)?;
    Ok(r
        .rows
        .iter()
        .map(|row| (row.solver.to_string(), row.mean_rel_l2, row.mean_seconds, row.samples))
        .collect())
}

#[pymodule]
pub fn pgdm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyEquation>()?;
    m.add_class::<PyDenoiser>()?;
    m.add_function(wrap_pyfunction!(csi_upsample, m)?)?;
    m.add_function(wrap_pyfunction!(restrict, m)?)?;
    m.add_function(wrap_pyfunction!(relative_l2_error, m)?)?;
    m.add_function(wrap_pyfunction!(grf_sample, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(residual_norm, m)?)?;
    m.add_function(wrap_pyfunction!(gauss_newton, m)?)?;
    m.add_function(wrap_pyfunction!(linear_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(benchmark, m)?)?;
    Ok(())
}

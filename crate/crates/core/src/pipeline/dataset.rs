//! Dataset generation: GRF sources or initial conditions, coarse solve plus
//! spline upsampling, fine solve and (test split) reference solve.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PgdmError, Result};
use crate::field::{csi_upsample, read_field, restrict, write_field, Field, GridSpec};
use crate::grf::{grf_sample, GRFConfig};
use crate::nlsolve::{implicit_euler_rollout_traced, levenberg_marquardt_traced, LMConfig};
use crate::operators::{EquationKind, EquationSpec, PdeSystem, SpectralNsStepper};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FORMAT_VERSION: u32 = 1;
/// Reference time step of the spectral vorticity solver.
pub const NS_REFERENCE_DT: f64 = 5e-5;
/// Spin-up applied to vorticity initial conditions.
pub const NS_SPINUP_TIME: f64 = 2.0;

/// Everything needed to generate a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub equation: EquationSpec,
    pub spatial_dim: usize,
    pub coarse_cells: usize,
    pub fine_cells: usize,
    pub grf: GRFConfig,
    pub n_train: usize,
    pub n_test: usize,
    #[serde(default)]
    pub lm: LMConfig,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        self.equation.validate()?;
        self.grf.validate()?;
        self.lm.validate()?;
        if self.grf.boundary != self.equation.boundary {
            return Err(PgdmError::invalid("GRF boundary must match the equation"));
        }
        if self.coarse_cells < 2 || self.fine_cells < self.coarse_cells {
            return Err(PgdmError::invalid(format!(
                "need 2 <= K_c <= K_f, got K_c = {}, K_f = {}",
                self.coarse_cells, self.fine_cells
            )));
        }
        if !self.fine_cells.is_multiple_of(self.coarse_cells) {
            return Err(PgdmError::invalid("K_f must be a multiple of K_c"));
        }
        if self.n_train + self.n_test == 0 {
            return Err(PgdmError::invalid("dataset needs at least one sample"));
        }
        if self.equation.is_evolution() && self.equation.time_steps == 0 {
            return Err(PgdmError::invalid("evolution datasets need K_t >= 1"));
        }
        if self.equation.kind == EquationKind::NavierStokesVorticity {
            let ratio = self.equation.dt / NS_REFERENCE_DT;
            if (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 {
                return Err(PgdmError::invalid(format!(
                    "vorticity dt must be a multiple of {NS_REFERENCE_DT}"
                )));
            }
        }
        self.equation.grid(self.spatial_dim, self.coarse_cells)?;
        Ok(())
    }

    pub fn coarse_grid(&self) -> Result<GridSpec> {
        self.equation.grid(self.spatial_dim, self.coarse_cells)
    }

    pub fn fine_grid(&self) -> Result<GridSpec> {
        self.equation.grid(self.spatial_dim, self.fine_cells)
    }

    /// Reference grid at `2 K_f`; its time axis records the reference step.
    pub fn reference_grid(&self) -> Result<GridSpec> {
        let g = GridSpec::new(self.spatial_dim, 2 * self.fine_cells, self.equation.boundary)?;
        let eq = &self.equation;
        match eq.kind {
            EquationKind::NonlinearPoisson => Ok(g),
            EquationKind::AllenCahn => g.with_time(2 * eq.time_steps, eq.dt / 2.0),
            EquationKind::NavierStokesVorticity => {
                let sub = (eq.dt / NS_REFERENCE_DT).round() as usize;
                g.with_time(sub * eq.time_steps, NS_REFERENCE_DT)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum SampleStatus {
    Ok {
        /// Final fine-solve residual norm (largest over time steps).
        fine_residual: f64,
    },
    Failed {
        stage: String,
        reason: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub id: usize,
    pub split: Split,
    pub seed: u64,
    pub status: SampleStatus,
    /// Role (`a`, `u_c`, `u_f`, `u_r`) to path relative to the dataset directory.
    pub files: BTreeMap<String, String>,
}

impl SampleEntry {
    pub fn is_ok(&self) -> bool {
        matches!(self.status, SampleStatus::Ok { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub spec: DatasetSpec,
    pub coarse_grid: GridSpec,
    pub fine_grid: GridSpec,
    pub reference_grid: GridSpec,
    pub samples: Vec<SampleEntry>,
}

/// One sample on the fine grid. `a` is the source (static problems) or the
/// initial condition (evolution problems) and is always a spatial field.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleTuple {
    pub id: usize,
    pub u_c: Field,
    pub u_f: Field,
    pub u_r: Option<Field>,
    pub a: Field,
}

impl DatasetManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| PgdmError::io(&path, e))?;
        let manifest: DatasetManifest =
            serde_json::from_str(&text).map_err(|e| PgdmError::format(&path, e.to_string()))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(PgdmError::format(
                &path,
                format!("unsupported manifest version {}", manifest.format_version),
            ));
        }
        manifest.spec.validate()?;
        Ok(manifest)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self).map_err(|e| PgdmError::format(&path, e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| PgdmError::io(&path, e))
    }

    pub fn entries(&self, split: Split) -> impl Iterator<Item = &SampleEntry> {
        self.samples.iter().filter(move |s| s.split == split)
    }

    pub fn entry(&self, id: usize) -> Result<&SampleEntry> {
        self.samples
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| PgdmError::invalid(format!("no sample with id {id}")))
    }

    /// Reads every field of sample `id`; failed samples are an error.
    pub fn load_sample(&self, dir: &Path, id: usize) -> Result<SampleTuple> {
        let entry = self.entry(id)?;
        if !entry.is_ok() {
            return Err(PgdmError::invalid(format!("sample {id} failed during generation")));
        }
        let file = |role: &str| -> Result<PathBuf> {
            entry
                .files
                .get(role)
                .map(|p| dir.join(p))
                .ok_or_else(|| PgdmError::format(dir.join(MANIFEST_FILE), format!("sample {id} has no {role} file")))
        };
        let spatial = self.fine_grid.spatial();
        let u_r = match entry.files.get("u_r") {
            Some(p) => Some(read_field(&dir.join(p), &self.fine_grid)?),
            None => None,
        };
        Ok(SampleTuple {
            id,
            u_c: read_field(&file("u_c")?, &self.fine_grid)?,
            u_f: read_field(&file("u_f")?, &self.fine_grid)?,
            u_r,
            a: read_field(&file("a")?, &spatial)?,
        })
    }

    /// All successful samples of `split`, in id order.
    pub fn load_split(&self, dir: &Path, split: Split) -> Result<Vec<SampleTuple>> {
        self.entries(split)
            .filter(|e| e.is_ok())
            .map(|e| self.load_sample(dir, e.id))
            .collect()
    }

    /// Checks that every referenced file parses and that seeds are distinct.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        let mut seeds: Vec<u64> = self.samples.iter().map(|s| s.seed).collect();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return Err(PgdmError::format(dir.join(MANIFEST_FILE), "duplicate sample seeds"));
        }
        for e in self.samples.iter().filter(|e| e.is_ok()) {
            self.load_sample(dir, e.id)?;
        }
        Ok(())
    }
}

/// Solution on `a.grid()`: LM from zero for static problems, an
/// implicit-Euler rollout from `a` for evolution problems. Returns the
/// solution and its largest per-step residual norm.
pub fn solve_at(equation: &EquationSpec, a: &Field, lm: &LMConfig) -> Result<(Field, f64)> {
    if equation.is_evolution() {
        let (u, norms) = implicit_euler_rollout_traced(equation, a, lm)?;
        Ok((u, norms.into_iter().fold(0.0, f64::max)))
    } else {
        let system = PdeSystem::static_problem(equation, a)?;
        let out = levenberg_marquardt_traced(&system, &vec![0.0; a.len()], lm)?;
        Ok((Field::from_vec(*a.grid(), out.solution)?, out.residual_norm))
    }
}

/// Coarse solve on `coarse` (spatial data injected from the fine `a`)
/// followed by spline upsampling to `fine`.
pub fn coarse_solution(
    equation: &EquationSpec,
    a: &Field,
    coarse: &GridSpec,
    fine: &GridSpec,
    lm: &LMConfig,
) -> Result<Field> {
    let a_c = restrict(a, &coarse.spatial())?;
    let (u, _) = solve_at(equation, &a_c, lm)?;
    csi_upsample(&u, fine)
}

/// Reference solution restricted to the fine grid.
fn reference_solution(spec: &DatasetSpec, draw: &Field, fine: &GridSpec) -> Result<Field> {
    let eq = &spec.equation;
    let ref_grid = spec.reference_grid()?;
    match eq.kind {
        EquationKind::NonlinearPoisson => {
            let (u, _) = solve_at(eq, draw, &spec.lm)?;
            restrict(&u, fine)
        }
        EquationKind::AllenCahn => {
            let fine_eq = EquationSpec {
                dt: ref_grid.dt,
                time_steps: ref_grid.time_steps,
                ..*eq
            };
            let (u, _) = solve_at(&fine_eq, draw, &spec.lm)?;
            let kept: Vec<Field> = (0..eq.time_steps).map(|n| u.slice(2 * n + 1)).collect();
            restrict(&Field::stack(&kept, eq.dt)?, fine)
        }
        EquationKind::NavierStokesVorticity => {
            let sub = ref_grid.time_steps / eq.time_steps;
            let mut stepper = SpectralNsStepper::new(eq, draw.grid(), NS_REFERENCE_DT)?;
            let mut hat = stepper.forward_transform(draw.values());
            let mut kept = Vec::with_capacity(eq.time_steps);
            for _ in 0..eq.time_steps {
                for _ in 0..sub {
                    stepper.step_hat(&mut hat);
                }
                kept.push(Field::from_vec(*draw.grid(), stepper.inverse_transform(&hat))?);
            }
            restrict(&Field::stack(&kept, eq.dt)?, fine)
        }
    }
}

fn generate_sample(spec: &DatasetSpec, seed: u64, with_reference: bool) -> std::result::Result<SampleTuple, (String, PgdmError)> {
    let stage = |name: &'static str| move |e: PgdmError| (name.to_string(), e);
    let ref_spatial = spec.reference_grid().map_err(stage("setup"))?.spatial();
    let fine = spec.fine_grid().map_err(stage("setup"))?;
    let coarse = spec.coarse_grid().map_err(stage("setup"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = grf_sample(&spec.grf, &ref_spatial, &mut rng).map_err(stage("grf"))?;
    if spec.equation.kind == EquationKind::NavierStokesVorticity {
        let steps = (NS_SPINUP_TIME / NS_REFERENCE_DT).round() as usize;
        draw = SpectralNsStepper::new(&spec.equation, &ref_spatial, NS_REFERENCE_DT)
            .and_then(|mut s| s.evolve(&draw, steps))
            .map_err(stage("spin-up"))?;
    }
    let a = restrict(&draw, &fine.spatial()).map_err(stage("restrict"))?;
    let u_c = coarse_solution(&spec.equation, &a, &coarse, &fine, &spec.lm).map_err(stage("coarse"))?;
    let (u_f, _) = solve_at(&spec.equation, &a, &spec.lm).map_err(stage("fine"))?;
    let u_r = if with_reference {
        Some(reference_solution(spec, &draw, &fine).map_err(stage("reference"))?)
    } else {
        None
    };
    Ok(SampleTuple {
        id: 0,
        u_c,
        u_f,
        u_r,
        a,
    })
}

/// Seed of sample `id` under the dataset seed.
pub fn sample_seed(seed: u64, id: usize) -> u64 {
    seed ^ id as u64
}

/// Generates `n_train` training and `n_test` test samples into `out_dir`.
/// Samples whose solves fail are recorded as failed and skipped.
pub fn generate_dataset(spec: &DatasetSpec, out_dir: &Path) -> Result<DatasetManifest> {
    spec.validate()?;
    for sub in ["train", "test"] {
        let d = out_dir.join(sub);
        fs::create_dir_all(&d).map_err(|e| PgdmError::io(&d, e))?;
    }
    let fine = spec.fine_grid()?;
    let mut samples = Vec::with_capacity(spec.n_train + spec.n_test);
    for id in 0..spec.n_train + spec.n_test {
        let split = if id < spec.n_train { Split::Train } else { Split::Test };
        let seed = sample_seed(spec.grf.seed, id);
        let (status, files) = match generate_sample(spec, seed, split == Split::Test) {
            Ok(tuple) => {
                let fine_residual = residual_of(spec, &tuple)?;
                let mut files = BTreeMap::new();
                let dir = if split == Split::Train { "train" } else { "test" };
                let mut put = |role: &str, f: &Field| -> Result<()> {
                    let rel = format!("{dir}/{id:05}_{role}.fld");
                    write_field(&out_dir.join(&rel), f)?;
                    files.insert(role.to_string(), rel);
                    Ok(())
                };
                put("a", &tuple.a)?;
                put("u_c", &tuple.u_c)?;
                put("u_f", &tuple.u_f)?;
                if let Some(r) = &tuple.u_r {
                    put("u_r", r)?;
                }
                (SampleStatus::Ok { fine_residual }, files)
            }
            Err((stage, e @ (PgdmError::Io { .. } | PgdmError::InvalidArgument(_)))) => {
                log::error!("sample {id}: {stage} failed: {e}");
                return Err(e);
            }
            Err((stage, e)) => {
                log::warn!("sample {id}: {stage} failed: {e}");
                (
                    SampleStatus::Failed {
                        stage,
                        reason: e.to_string(),
                    },
                    BTreeMap::new(),
                )
            }
        };
        log::info!("sample {id} ({split:?}) done");
        samples.push(SampleEntry {
            id,
            split,
            seed,
            status,
            files,
        });
    }
    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        spec: spec.clone(),
        coarse_grid: spec.coarse_grid()?,
        fine_grid: fine,
        reference_grid: spec.reference_grid()?,
        samples,
    };
    manifest.save(out_dir)?;
    Ok(manifest)
}

fn residual_of(spec: &DatasetSpec, tuple: &SampleTuple) -> Result<f64> {
    super::solvers::step_residuals(&spec.equation, &tuple.u_f, &tuple.a)
        .map(|r| r.into_iter().fold(0.0, f64::max))
}

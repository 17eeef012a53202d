use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pgdm_core::denoiser::{load_checkpoint, save_checkpoint, TrainConfig};
use pgdm_core::field::{read_array, write_field, Boundary};
use pgdm_core::grf::GRFConfig;
use pgdm_core::nlsolve::LMConfig;
use pgdm_core::operators::EquationSpec;
use pgdm_core::pipeline::render::{render_comparison, render_rows, Panel, Plane};
use pgdm_core::pipeline::{
    benchmark, generate_dataset, refine, sample_conditional, train_on_dataset, DatasetManifest, DatasetSpec,
    SamplerKind, Solver, SolverContext, TrainSetup,
};
use pgdm_core::{PgdmError, Result};

#[derive(Parser)]
#[command(name = "pgdm", version, about = "Coarse-to-fine PDE solutions via conditional diffusion and Gauss-Newton refinement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Eq {
    Poisson2d,
    Poisson3d,
    AllenCahn,
    NavierStokes,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Ddpm,
    Ddim,
}

#[derive(Subcommand)]
enum Command {
    /// Generate training and test samples
    GenData(GenDataArgs),
    /// Train the conditional denoiser on a dataset
    Train(TrainArgs),
    /// Draw one conditional sample for a dataset entry
    Sample(SampleArgs),
    /// Run solvers on the test split and write a CSV report
    Bench(BenchArgs),
    /// Render field files as heatmaps
    Plot(PlotArgs),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long, value_enum)]
    eq: Eq,
    #[arg(long)]
    kc: usize,
    #[arg(long)]
    kf: usize,
    /// Time steps (evolution problems)
    #[arg(long)]
    kt: Option<usize>,
    /// Time step size (evolution problems)
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = 7.0)]
    grf_b: f64,
    #[arg(long, default_value_t = 1.6)]
    grf_c: f64,
    /// Allen-Cahn reaction coefficient
    #[arg(long, default_value_t = 5.0)]
    gamma: f64,
    /// Navier-Stokes viscosity
    #[arg(long, default_value_t = 1e-4)]
    nu: f64,
    #[arg(long)]
    n_train: usize,
    #[arg(long)]
    n_test: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    steps: usize,
    #[arg(long = "T", default_value_t = 400)]
    diffusion_steps: usize,
    #[arg(long, default_value_t = 4)]
    batch: usize,
    #[arg(long, default_value_t = 2e-4)]
    lr0: f64,
    #[arg(long, default_value_t = 8)]
    base_channels: usize,
    /// Gauss-Newton steps stored with the model
    #[arg(long, default_value_t = 1)]
    refine: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    id: usize,
    #[arg(long, value_enum, default_value_t = Method::Ddim)]
    method: Method,
    #[arg(long, default_value_t = 1)]
    refine: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "csi,coarse_gn,fine,ddpm,ddim,pgdm")]
    solvers: Vec<String>,
    /// Gauss-Newton steps for coarse_gn and pgdm (default: the checkpoint's)
    #[arg(long)]
    refine: Option<usize>,
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    figures: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    /// Slice index for 3-axis arrays (default: middle)
    #[arg(long)]
    index: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn gen_data(args: GenDataArgs) -> Result<()> {
    let GenDataArgs {
        eq,
        kc,
        kf,
        kt,
        dt,
        grf_b,
        grf_c,
        gamma,
        nu,
        n_train,
        n_test,
        seed,
        out,
    } = args;
    let (mut equation, dim) = match eq {
        Eq::Poisson2d => (EquationSpec::poisson(), 2),
        Eq::Poisson3d => (EquationSpec::poisson(), 3),
        Eq::AllenCahn => (EquationSpec::allen_cahn(gamma), 2),
        Eq::NavierStokes => (EquationSpec::navier_stokes(nu), 2),
    };
    if equation.is_evolution() {
        equation.time_steps = kt.unwrap_or(equation.time_steps);
        equation.dt = dt.unwrap_or(equation.dt);
    } else if kt.is_some() || dt.is_some() {
        return Err(PgdmError::InvalidArgument("--kt/--dt apply to evolution problems only".into()));
    }
    let boundary = if equation.is_evolution() {
        Boundary::Periodic
    } else {
        Boundary::DirichletZero
    };
    let spec = DatasetSpec {
        equation,
        spatial_dim: dim,
        coarse_cells: kc,
        fine_cells: kf,
        grf: GRFConfig::new(grf_b, grf_c, boundary, seed)?,
        n_train,
        n_test,
        lm: LMConfig::default(),
    };
    let manifest = generate_dataset(&spec, &out)?;
    let failed = manifest.samples.iter().filter(|s| !s.is_ok()).count();
    println!(
        "wrote {} samples ({} failed) to {}",
        manifest.samples.len(),
        failed,
        out.display()
    );
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let TrainArgs {
        data,
        steps,
        diffusion_steps,
        batch,
        lr0,
        base_channels,
        refine,
        seed,
        out,
    } = args;
    let manifest = DatasetManifest::load(&data)?;
    let setup = TrainSetup {
        base_channels,
        diffusion_steps,
        refine_steps: refine,
        model_seed: seed,
        train: TrainConfig {
            batch_size: batch,
            total_steps: steps,
            lr0,
            seed,
            ..TrainConfig::default()
        },
    };
    let (model, diffusion, meta) = train_on_dataset(&manifest, &data, &setup)?;
    save_checkpoint(&out, &model, &diffusion, Some(meta.clone()))?;
    println!(
        "trained {} parameters on {} samples, final loss {:.4}; saved {}",
        model.param_count(),
        meta.samples,
        meta.final_loss,
        out.display()
    );
    Ok(())
}

fn sample(args: SampleArgs) -> Result<()> {
    let SampleArgs {
        ckpt,
        data,
        id,
        method,
        refine: steps,
        out,
    } = args;
    let manifest = DatasetManifest::load(&data)?;
    let (model, header) = load_checkpoint(&ckpt)?;
    let s = manifest.load_sample(&data, id)?;
    let kind = match method {
        Method::Ddpm => SamplerKind::Ddpm,
        Method::Ddim => SamplerKind::Ddim,
    };
    let raw = sample_conditional(&model, &header.diffusion, kind, &s.u_c, &s.a, manifest.entry(id)?.seed)?;
    let (field, status) = refine(&manifest.spec.equation, &raw, &s.a, steps)?;
    write_field(&out, &field)?;
    println!("sample {id}: {status:?}; wrote {}", out.display());
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let BenchArgs {
        data,
        ckpt,
        solvers,
        refine,
        report,
        figures,
    } = args;
    let manifest = DatasetManifest::load(&data)?;
    let solvers = solvers.iter().map(|s| s.parse()).collect::<Result<Vec<Solver>>>()?;
    let loaded = ckpt.as_deref().map(load_checkpoint).transpose()?;
    let model = loaded.as_ref().map(|(m, h)| (m, &h.diffusion));
    let mut ctx = SolverContext::from_manifest(&manifest, model);
    if let Some(r) = refine {
        ctx.refine_steps = r;
    }
    let result = benchmark(&manifest, &data, &solvers, &ctx, Some(&report), figures.as_deref())?;
    print!("{}", result.table());
    Ok(())
}

fn plane(path: &Path, index: Option<usize>) -> Result<Plane> {
    let (dims, values) = read_array(path)?;
    Plane::from_array(&dims, &values, index)
}

fn title(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn plot(args: PlotArgs) -> Result<()> {
    let PlotArgs {
        inputs,
        reference,
        index,
        out,
    } = args;
    let panels = inputs
        .iter()
        .map(|p| Ok((title(p), plane(p, index)?)))
        .collect::<Result<Vec<_>>>()?;
    match reference {
        Some(r) => render_comparison(&panels, &plane(&r, index)?, &out)?,
        None => {
            let row = panels
                .into_iter()
                .map(|(title, plane)| Panel { title, plane })
                .collect();
            render_rows(&[row], &out)?
        }
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn exit_code(e: &PgdmError) -> u8 {
    match e.root() {
        PgdmError::InvalidArgument(_) | PgdmError::Domain(_) => 2,
        PgdmError::Convergence { .. } | PgdmError::Numerical(_) | PgdmError::Training { .. } => 3,
        PgdmError::Io { .. } | PgdmError::Format { .. } => 4,
        PgdmError::Tensor(_) | PgdmError::Step { .. } => 1,
    }
}

fn main() -> ExitCode {
    if std::env::var("PGDM_DETERMINISTIC").is_ok_and(|v| v == "1") {
        std::env::set_var("RAYON_NUM_THREADS", "1");
    }
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train(a),
        Command::Sample(a) => sample(a),
        Command::Bench(a) => bench(a),
        Command::Plot(a) => plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

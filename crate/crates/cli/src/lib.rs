//! Command line for the layered microflake BSDF.
//!
//! Every command is reachable through [`run`], which writes its report to a
//! caller-supplied writer; the binary only maps errors to exit codes.

pub mod dataset;
pub mod error;
pub mod furnace;
pub mod image;
pub mod lobe;
pub mod params;
pub mod render;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use flakelayer::multiscatter::{eval_added, fit_direct, FitOptions, ThreeLobeParams};
use flakelayer::oracle::{tabulate, BsdfTable, DirectionGrid, TabulateConfig, WalkMode};
use flakelayer::single::{delta_transmittance, eval_stack_single};
use flakelayer::stats::{check_sampler, sidak, SphereHistogram};
use flakelayer::{serialize_material, Spectrum, Vec3};

pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "flakelayer", version, about = "Layered microflake BSDF tools")]
pub struct Cli {
    /// Seed for every random choice a command makes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Network weight file used to predict the added lobes.
    #[arg(long, global = true)]
    pub weights: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the BSDF for one pair of directions.
    Eval(EvalArgs),
    /// Write a lobe image (PFM plus PNG preview).
    Lobe(LobeArgs),
    /// Directional albedo for incidence angles from 0 to 75 degrees.
    Furnace(FurnaceArgs),
    /// Generate random stacks and their multiple-scattering tables.
    Dataset(DatasetArgs),
    /// Fit the added lobes of one material to a multiple-scattering table.
    Fit(FitArgs),
    /// Chi-square test of the direction sampler against its density.
    SampleTest(SampleTestArgs),
    /// Direct-lighting render of the material on a sphere.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub material: PathBuf,
    /// Incident direction, pointing away from the surface.
    #[arg(long, value_parser = parse_direction, allow_hyphen_values = true)]
    pub wi: Vec3<f64>,
    /// Outgoing direction.
    #[arg(long, value_parser = parse_direction, allow_hyphen_values = true)]
    pub wo: Vec3<f64>,
    /// Single scattering only.
    #[arg(long, conflicts_with = "full")]
    pub single: bool,
    /// Single scattering plus the added lobes (the default).
    #[arg(long)]
    pub full: bool,
    /// Added-lobe parameters (JSON), overrides --weights.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LobeArgs {
    pub material: PathBuf,
    #[arg(long, value_enum, default_value_t = lobe::LobeMode::Single)]
    pub mode: lobe::LobeMode,
    #[arg(long, value_enum, default_value_t = lobe::Layout::Incidence)]
    pub layout: lobe::Layout,
    /// Incident polar angle in radians (incidence layout).
    #[arg(long, default_value_t = 0.3)]
    pub theta: f64,
    /// Default for --rows and --cols.
    #[arg(long, default_value_t = 32)]
    pub res: usize,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    /// Random walks per incident direction (Monte Carlo modes).
    #[arg(long, default_value_t = 100_000)]
    pub spp: u64,
    /// Quadrature points per pixel side (analytic modes).
    #[arg(long, default_value_t = 4)]
    pub sub: usize,
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Output PFM path; the preview goes next to it with a .png extension.
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct FurnaceArgs {
    pub material: PathBuf,
    #[arg(long, value_enum, default_value_t = furnace::FurnaceMode::SingleDelta)]
    pub mode: furnace::FurnaceMode,
    #[arg(long, default_value_t = 16)]
    pub steps: usize,
    /// Random walks per angle (Monte Carlo modes).
    #[arg(long, default_value_t = 1_000_000)]
    pub walks: u64,
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    #[arg(long, default_value_t = 200)]
    pub count: usize,
    #[arg(long, default_value_t = 1)]
    pub layers: usize,
    #[arg(long, default_value_t = 16)]
    pub res: usize,
    #[arg(long, default_value_t = 10_000)]
    pub spp: u64,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    pub material: PathBuf,
    /// Multiple-only table to fit; tabulated on the fly when absent.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    pub res: usize,
    #[arg(long, default_value_t = 50_000)]
    pub spp: u64,
    #[arg(long, default_value_t = 2000)]
    pub max_evals: usize,
    /// Where to write the fitted parameters (JSON).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleTestArgs {
    pub material: PathBuf,
    /// Incident polar angles in degrees.
    #[arg(long, value_delimiter = ',', default_values_t = [10.0, 45.0, 70.0])]
    pub angles: Vec<f64>,
    #[arg(long, default_value_t = 400_000)]
    pub samples: u64,
    /// Histogram rows; columns are twice this.
    #[arg(long, default_value_t = 24)]
    pub res: usize,
    #[arg(long, default_value_t = 0.01)]
    pub significance: f64,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    pub material: PathBuf,
    #[arg(long, value_enum, default_value_t = render::Strategy::Mis)]
    pub strategy: render::Strategy,
    #[arg(long, default_value_t = 64)]
    pub spp: u64,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 48)]
    pub height: usize,
    #[arg(long, short)]
    pub output: PathBuf,
}

/// Parses `x,y,z` and normalizes it.
pub fn parse_direction(s: &str) -> Result<Vec3<f64>, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let [x, y, z] = parts[..] else {
        return Err(format!("expected three components, got {}", parts.len()));
    };
    Vec3::new(x, y, z)
        .try_normalize()
        .filter(|v| v.is_finite())
        .ok_or_else(|| "direction must be finite and non-zero".to_string())
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            write!(out, "{e}").map_err(|e| CliError::io("stdout", e))?;
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.render().to_string())),
    };
    run_cli(&cli, out)
}

pub fn run_cli(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    // commands report into a buffer so the worker pool never touches `out`
    let mut buf = Vec::new();
    let result = pool.install(|| dispatch(cli, &mut buf));
    out.write_all(&buf).map_err(|e| CliError::io("stdout", e))?;
    result
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    let weights = cli.weights.as_deref();
    match &cli.command {
        Command::Eval(a) => cmd_eval(a, weights, out),
        Command::Lobe(a) => cmd_lobe(a, weights, cli.seed, out),
        Command::Furnace(a) => cmd_furnace(a, weights, cli.seed, out),
        Command::Dataset(a) => cmd_dataset(a, cli.seed, out),
        Command::Fit(a) => cmd_fit(a, cli.seed, out),
        Command::SampleTest(a) => cmd_sample_test(a, cli.seed, out),
        Command::Render(a) => cmd_render(a, cli.seed, out),
    }
}

fn emit(out: &mut dyn Write, text: std::fmt::Arguments) -> CliResult<()> {
    out.write_fmt(text).map_err(|e| CliError::io("stdout", e))
}

fn rgb(s: Spectrum<f64>) -> String {
    format!("{:.6} {:.6} {:.6}", s.r, s.g, s.b)
}

fn cmd_eval(a: &EvalArgs, weights: Option<&Path>, out: &mut dyn Write) -> CliResult<()> {
    let stack = params::load_material(&a.material)?;
    if a.wi.z == 0.0 || a.wo.z == 0.0 {
        return Err(CliError::from_core("eval", flakelayer::Error::GrazingSingularity));
    }
    let single = eval_stack_single(&stack, a.wi, a.wo);
    let mut lines = vec![("single", single)];
    let mut total = single;
    if !a.single {
        let p = params::resolve_params(&stack, a.params.as_deref(), weights)?;
        let added = eval_added(&stack, &p, a.wi, a.wo);
        let mut lambert_only = p.clone();
        lambert_only.w1 = 0.0;
        let lambert = eval_added(&stack, &lambert_only, a.wi, a.wo);
        lines.push(("modified", added - lambert));
        lines.push(("lambert", lambert));
        total += added;
    }
    lines.push(("total", total));
    if stack.delta_enabled() {
        // discrete component along -wi, reported separately from the density
        lines.push(("delta", delta_transmittance(&stack, a.wi)));
    }
    if lines.iter().any(|(_, v)| !v.is_finite()) {
        return Err(CliError::Numerical("evaluation produced a non-finite value".into()));
    }
    for (name, v) in lines {
        emit(out, format_args!("{name:<9}{}\n", rgb(v)))?;
    }
    Ok(())
}

fn cmd_lobe(a: &LobeArgs, weights: Option<&Path>, seed: u64, out: &mut dyn Write) -> CliResult<()> {
    let stack = params::load_material(&a.material)?;
    let rows = a.rows.unwrap_or(a.res);
    let cols = a.cols.unwrap_or(a.res);
    if rows == 0 || cols == 0 {
        return Err(CliError::Usage("image dimensions must be positive".into()));
    }
    if a.layout == lobe::Layout::Incidence && !(0.0..std::f64::consts::FRAC_PI_2).contains(&a.theta) {
        return Err(CliError::Usage("--theta must lie in [0, pi/2)".into()));
    }
    let p = if a.mode == lobe::LobeMode::Full {
        params::resolve_params(&stack, a.params.as_deref(), weights)?
    } else {
        ThreeLobeParams::zero(&stack)
    };
    let img = lobe::render_lobe(&lobe::LobeRequest {
        stack: &stack,
        params: &p,
        mode: a.mode,
        layout: a.layout,
        theta: a.theta,
        rows,
        cols,
        spp: a.spp,
        sub: a.sub,
        seed,
    });
    img.save(&a.output)?;
    emit(out, format_args!("wrote {} ({}x{})\n", a.output.display(), img.width, img.height))
}

fn cmd_furnace(a: &FurnaceArgs, weights: Option<&Path>, seed: u64, out: &mut dyn Write) -> CliResult<()> {
    let stack = params::load_material(&a.material)?;
    let p = if a.mode == furnace::FurnaceMode::Full {
        params::resolve_params(&stack, a.params.as_deref(), weights)?
    } else {
        ThreeLobeParams::zero(&stack)
    };
    emit(out, format_args!("theta_deg r g b\n"))?;
    for row in furnace::sweep(&stack, &p, a.mode, a.steps, a.walks, seed) {
        emit(out, format_args!("{:.2} {}\n", row.theta_deg, rgb(row.albedo)))?;
    }
    Ok(())
}

fn cmd_dataset(a: &DatasetArgs, seed: u64, out: &mut dyn Write) -> CliResult<()> {
    if a.layers == 0 || a.res < 2 || a.spp == 0 {
        return Err(CliError::Usage("need --layers >= 1, --res >= 2, --spp >= 1".into()));
    }
    let cfg = dataset::DatasetConfig {
        count: a.count,
        layers: a.layers,
        res: a.res,
        spp: a.spp,
        seed,
    };
    let m = dataset::generate(&cfg, &a.output)?;
    emit(out, format_args!("wrote {} tables to {}\n", m.entries.len(), a.output.display()))
}

fn cmd_fit(a: &FitArgs, seed: u64, out: &mut dyn Write) -> CliResult<()> {
    let stack = params::load_material(&a.material)?;
    let table = match &a.table {
        Some(path) => {
            let f = std::fs::File::open(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
            BsdfTable::read_from(std::io::BufReader::new(f))
                .map_err(|e| CliError::from_core(path.display().to_string(), e))?
        }
        None => {
            if a.res < 2 || a.spp == 0 {
                return Err(CliError::Usage("need --res >= 2 and --spp >= 1".into()));
            }
            let cfg = TabulateConfig::new(DirectionGrid::square(a.res), a.spp, WalkMode::MultipleOnly, seed);
            tabulate(&stack, serialize_material(&stack), &cfg)
        }
    };
    let opts = FitOptions {
        max_evals: a.max_evals,
        ..FitOptions::default()
    };
    let r = fit_direct(&stack, &table, &opts).map_err(|e| CliError::from_core("fit", e))?;
    emit(
        out,
        format_args!(
            "mae {:.6e}\nbaseline {:.6e}\nimprovement {:.4}\nw1 {:.6}\nw2 {:.6}\nevaluations {}\nconverged {}\n",
            r.mae,
            r.baseline_mae,
            r.improvement(),
            r.params.w1,
            r.params.w2,
            r.evaluations,
            r.converged
        ),
    )?;
    if let Some(path) = &a.output {
        params::ParamsFile::from_params(&r.params).save(path)?;
    }
    Ok(())
}

fn cmd_sample_test(a: &SampleTestArgs, seed: u64, out: &mut dyn Write) -> CliResult<()> {
    let stack = params::load_material(&a.material)?;
    if a.res < 2 || a.samples == 0 || a.angles.is_empty() {
        return Err(CliError::Usage("need --res >= 2, --samples >= 1 and one angle".into()));
    }
    let hist = SphereHistogram::new(a.res, 2 * a.res);
    let sig = sidak(a.significance, a.angles.len());
    let mut failed = 0;
    emit(out, format_args!("theta_deg chi2 dof p_value albedo quadrature rel_error result\n"))?;
    for (k, deg) in a.angles.iter().enumerate() {
        if !(0.0..90.0).contains(deg) {
            return Err(CliError::Usage(format!("angle {deg} outside [0, 90)")));
        }
        let wi = Vec3::from_spherical(deg.to_radians().cos(), 0.0);
        let r = check_sampler(&stack, wi, a.samples, &hist, flakelayer::oracle::stream_seed(seed, k as u64));
        let ok = r.chi_square.passes(sig) && r.albedo_relative_error() < 0.01;
        failed += usize::from(!ok);
        emit(
            out,
            format_args!(
                "{deg:.2} {:.3} {} {:.4} {:.6} {:.6} {:.2e} {}\n",
                r.chi_square.statistic,
                r.chi_square.dof,
                r.chi_square.p_value,
                r.estimated_albedo.mean(),
                r.quadrature_albedo.mean(),
                r.albedo_relative_error(),
                if ok { "PASS" } else { "FAIL" }
            ),
        )?;
    }
    if failed > 0 {
        return Err(CliError::Numerical(format!("{failed} sampler check(s) failed")));
    }
    Ok(())
}

fn cmd_render(a: &RenderArgs, seed: u64, out: &mut dyn Write) -> CliResult<()> {
    let stack = params::load_material(&a.material)?;
    if a.width == 0 || a.height == 0 || a.spp == 0 {
        return Err(CliError::Usage("need positive --width, --height and --spp".into()));
    }
    let r = render::render(&stack, a.strategy, a.width, a.height, a.spp, seed);
    r.image.save(&a.output)?;
    emit(
        out,
        format_args!(
            "wrote {} mean {:.6} variance {:.6e}\n",
            a.output.display(),
            r.image.mean(),
            r.mean_variance()
        ),
    )
}

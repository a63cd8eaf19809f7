//! `transferlab`: asymptotic predictions and seeded Monte Carlo experiments
//! for warm-started interpolation, from the command line.
//!
//! Every command resolves its parameters as flags > config file > defaults,
//! echoes the resolved configuration into a manifest next to any file it
//! writes, and is bytewise reproducible from that manifest plus the seed.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{ConfigError, FileConfig};

/// Failures grouped by exit code: configuration problems exit 2, runtime
/// (domain or I/O) problems exit 1.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<transfer_asymptotics::Error> for CliError {
    fn from(e: transfer_asymptotics::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "transferlab",
    version,
    about = "Asymptotic theory and Monte Carlo harness for transfer learning with interpolating linear models",
    after_help = "Parameters resolve as: command-line flags, then --config file values, then defaults.\n\
                  Output directory resolves as: --out-dir, then run.out_dir, then $TRANSFERLAB_OUTPUT_DIR, then the current directory."
)]
struct Cli {
    /// Configuration file (`key = value` lines under [section] headers)
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Directory for data files and manifests
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    /// Worker threads for Monte Carlo trials (default: available parallelism)
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the closed-form asymptotic predictions
    #[command(subcommand)]
    Predict(PredictTarget),
    /// Run seeded Monte Carlo trials at one configuration
    #[command(subcommand)]
    Simulate(SimulateTarget),
    /// Sweep one variable over a grid with Monte Carlo at every point
    Sweep(SweepArgs),
    /// Sweep with several entry distributions and report standardized gaps
    Universality(SweepArgs),
    /// Regenerate the pinned figure datasets
    Reproduce(ReproduceArgs),
}

#[derive(Subcommand)]
enum PredictTarget {
    /// Regression: excess risk of interpolating from a warm start
    Reg(PredictRegArgs),
    /// Classification: test error of the rescaled warm-started interpolator
    Class(PredictClassArgs),
}

#[derive(Args)]
struct PredictRegArgs {
    /// Overparametrization ratio d/n (> 1)
    #[arg(long)]
    kappa: Option<f64>,
    /// Label noise standard deviation
    #[arg(long)]
    sigma: Option<f64>,
    /// Warm-start generalization error e_a
    #[arg(long)]
    ea: Option<f64>,
    /// Covariance spectrum preset
    #[arg(long, value_enum)]
    spectrum: Option<SpectrumPreset>,
    /// Custom atomic spectrum, e.g. [[1.0, 0.3], [5.0, 0.7]]
    #[arg(long, value_name = "LITERAL", conflicts_with = "spectrum")]
    atoms: Option<String>,
    /// Also write the printed record to this file
    #[arg(long, value_name = "FILE")]
    record: Option<PathBuf>,
}

#[derive(Args)]
struct PredictClassArgs {
    /// Overparametrization ratio d/n (scalar route)
    #[arg(long)]
    kappa: Option<f64>,
    /// Signal-to-noise ratio n(1-r)/sigma2 (scalar route)
    #[arg(long)]
    rho: Option<f64>,
    /// Warm-start classification error in (0, 1/2)
    #[arg(long)]
    ea: Option<f64>,
    /// Sample count (general route)
    #[arg(long)]
    n: Option<usize>,
    /// Feature dimension (general route)
    #[arg(long)]
    d: Option<usize>,
    /// Isotropic class covariance scale (general route)
    #[arg(long)]
    sigma2: Option<f64>,
    /// Shared fraction of the class means
    #[arg(long)]
    r: Option<f64>,
    /// Warm-start weight on the oracle direction
    #[arg(long)]
    t_star: Option<f64>,
    /// Warm-start weight on the confounder direction
    #[arg(long)]
    t_eta: Option<f64>,
    /// Also write the printed record to this file
    #[arg(long, value_name = "FILE")]
    record: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SimulateTarget {
    /// Regression trials: sample, interpolate, score
    Reg(SimulateRegArgs),
    /// Classification trials: sample, rescale, interpolate, score
    Class(SimulateClassArgs),
}

#[derive(Args)]
struct SimulateRegArgs {
    /// Sample count
    #[arg(long)]
    n: Option<usize>,
    /// Feature dimension
    #[arg(long)]
    d: Option<usize>,
    /// Label noise standard deviation
    #[arg(long)]
    sigma: Option<f64>,
    /// Warm-start generalization error e_a
    #[arg(long)]
    ea: Option<f64>,
    /// Covariance spectrum preset
    #[arg(long, value_enum)]
    spectrum: Option<SpectrumPreset>,
    /// Custom atomic spectrum, e.g. [[1.0, 0.3], [5.0, 0.7]]
    #[arg(long, value_name = "LITERAL", conflicts_with = "spectrum")]
    atoms: Option<String>,
    /// Draw label noise from the entry distribution instead of a Gaussian
    #[arg(long)]
    entry_noise: bool,
    /// Design entry distribution (gauss, ber, chi)
    #[arg(long, value_name = "NAME")]
    dist: Option<String>,
    /// Trials to run
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Per-trial output file name (CSV)
    #[arg(long, value_name = "NAME")]
    out: Option<String>,
}

#[derive(Args)]
struct SimulateClassArgs {
    /// Sample count (even)
    #[arg(long)]
    n: Option<usize>,
    /// Feature dimension
    #[arg(long)]
    d: Option<usize>,
    /// Isotropic class covariance scale
    #[arg(long)]
    sigma2: Option<f64>,
    /// Shared fraction of the class means
    #[arg(long)]
    r: Option<f64>,
    /// Warm-start weight on the oracle direction
    #[arg(long)]
    t_star: Option<f64>,
    /// Warm-start weight on the confounder direction
    #[arg(long)]
    t_eta: Option<f64>,
    /// Design entry distribution (gauss, ber, chi)
    #[arg(long, value_name = "NAME")]
    dist: Option<String>,
    /// Trials to run
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Per-trial output file name (CSV)
    #[arg(long, value_name = "NAME")]
    out: Option<String>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum SpectrumPreset {
    /// One atom at 1.0 (isotropic)
    Single,
    /// Atoms at 1.0 (weight 0.3) and 5.0 (weight 0.7)
    Bilevel,
    /// Uniform density on [1, 5]
    Uniform,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum SweepMode {
    /// Regression sweeps (variables: kappa, sigma)
    Reg,
    /// Classification sweeps (variables: kappa, rho)
    Class,
}

#[derive(Args)]
struct SweepArgs {
    /// Which experiment family to sweep
    #[arg(long, value_enum)]
    mode: Option<SweepMode>,
    /// Swept variable: kappa, rho, or sigma
    #[arg(long, value_name = "NAME")]
    var: Option<String>,
    /// Grid: comma list (1.25,2,4) or start:stop:count (1.25:5:8)
    #[arg(long, value_name = "SPEC")]
    grid: Option<String>,
    /// Trials per grid point and distribution
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Entry distributions, comma-separated (gauss, ber, chi) or `all`
    #[arg(long, value_name = "LIST")]
    dists: Option<String>,
    /// Output data file name (default: derived from the configuration)
    #[arg(long, value_name = "NAME")]
    out: Option<String>,
    /// Feature dimension
    #[arg(long)]
    d: Option<usize>,
    /// Fixed kappa (when kappa is not the swept variable)
    #[arg(long)]
    kappa: Option<f64>,
    /// Fixed noise standard deviation (regression)
    #[arg(long)]
    sigma: Option<f64>,
    /// Warm-start generalization error e_a (regression)
    #[arg(long)]
    ea: Option<f64>,
    /// Covariance spectrum preset (regression)
    #[arg(long, value_enum)]
    spectrum: Option<SpectrumPreset>,
    /// Custom atomic spectrum (regression), e.g. [[1.0, 0.3], [5.0, 0.7]]
    #[arg(long, value_name = "LITERAL", conflicts_with = "spectrum")]
    atoms: Option<String>,
    /// Draw label noise from the entry distribution (regression)
    #[arg(long)]
    entry_noise: bool,
    /// Fixed signal-to-noise ratio (classification)
    #[arg(long)]
    rho: Option<f64>,
    /// Shared fraction of the class means (classification)
    #[arg(long)]
    r: Option<f64>,
    /// Warm-start weight on the oracle direction (classification)
    #[arg(long)]
    t_star: Option<f64>,
    /// Warm-start weight on the confounder direction (classification)
    #[arg(long)]
    t_eta: Option<f64>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum FigureId {
    /// Regression kappa sweeps, bilevel spectrum, sigma in {0.01, 0.15, 2}
    Fig1,
    /// Regression kappa sweeps, uniform spectrum, sigma in {0.01, 0.15, 2}
    Fig2,
    /// Classification sweeps: kappa at rho in {1, 2}, and rho at kappa = 2
    Fig3,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Which figure's datasets to regenerate
    #[arg(value_enum)]
    figure: FigureId,
    /// Trials per grid point and distribution (reduced desk-scale default;
    /// raise for tighter error bars)
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Master seed
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Feature dimension (lower for a quick dry run)
    #[arg(long, default_value_t = 1000)]
    dim: usize,
    /// Also emit a gnuplot script referencing the data files
    #[arg(long)]
    gnuplot: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            match e {
                CliError::Config(_) => ExitCode::from(2),
                CliError::Runtime(_) => ExitCode::from(1),
            }
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };

    let out_dir = cli
        .out_dir
        .clone()
        .or_else(|| file.raw("run.out_dir").map(PathBuf::from))
        .or_else(|| std::env::var_os("TRANSFERLAB_OUTPUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));

    let ctx = commands::Context {
        file,
        out_dir,
        command_line: std::env::args().collect::<Vec<_>>().join(" "),
    };

    let threads = match cli.threads {
        Some(t) => Some(t),
        None => ctx.file.usize("run.threads")?,
    };

    let body = move || -> CliResult<()> {
        match cli.command {
            Command::Predict(PredictTarget::Reg(args)) => commands::predict_reg(&args, &ctx),
            Command::Predict(PredictTarget::Class(args)) => commands::predict_class(&args, &ctx),
            Command::Simulate(SimulateTarget::Reg(args)) => commands::simulate_reg(&args, &ctx),
            Command::Simulate(SimulateTarget::Class(args)) => {
                commands::simulate_class(&args, &ctx)
            }
            Command::Sweep(args) => commands::sweep(&args, &ctx, false),
            Command::Universality(args) => commands::sweep(&args, &ctx, true),
            Command::Reproduce(args) => commands::reproduce(&args, &ctx),
        }
    };

    match threads {
        Some(t) => {
            if t == 0 {
                return Err(CliError::Config("threads must be at least 1".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
            pool.install(body)
        }
        None => body(),
    }
}

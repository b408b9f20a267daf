//! `corrcov` command-line tool.

mod commands;
mod input;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use corrcov::Distribution;

#[derive(Debug, Parser)]
#[command(name = "corrcov", version, about = "Covariance estimation from correlated sub-Gaussian samples")]
struct Cli {
    /// Base seed of every random stream.
    #[arg(long, global = true, env = "CORRCOV_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads for Monte-Carlo trials (default: available cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Write the CSV table to this file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Trace and norms of a correlation pattern.
    Pattern(PatternArgs),
    /// Error bound split into its bias and concentration parts.
    Bound(BoundArgs),
    /// Monte-Carlo protocols.
    Simulate(SimulateArgs),
    /// Numerical checks of the identities behind the bounds.
    Verify(VerifyArgs),
    /// Fits the constant of the expectation bound over a grid.
    FitConstant(FitArgs),
}

#[derive(Debug, Args)]
struct PatternArgs {
    /// `identity`, `toeplitz:<ω>`, `phase:<c>` or `custom:<re.csv>[+<im.csv>]`.
    spec: String,
    #[arg(long)]
    m: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Form {
    Tail,
    Expectation,
}

#[derive(Debug, Args)]
struct BoundArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value = "identity")]
    pattern: String,
    #[arg(long, default_value = "gaussian")]
    dist: Distribution,
    /// Override the ψ₂ constant implied by `--dist`.
    #[arg(long = "K")]
    k: Option<f64>,
    #[arg(long = "C", default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// CSV file with Σ; only its spectral norm enters the bound.
    #[arg(long, conflicts_with = "sigma_norm")]
    sigma: Option<PathBuf>,
    /// `‖Σ‖` (default 1).
    #[arg(long)]
    sigma_norm: Option<f64>,
    #[arg(long, value_enum, default_value_t = Form::Tail)]
    form: Form,
    /// Report the confidence for complex samples.
    #[arg(long)]
    complex: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    SampleSize,
    Convergence,
    Complex,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(value_enum)]
    kind: Kind,
    #[arg(long, default_value = "gaussian")]
    dist: Distribution,
    /// Comma-separated pattern specs.
    #[arg(long)]
    patterns: Option<String>,
    /// Values and `start:stop:step` ranges of n.
    #[arg(long)]
    n: Option<String>,
    /// Values and ranges of m (convergence only).
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    m_cap: Option<usize>,
    /// CSV file with a positive definite Σ (default: identity).
    #[arg(long)]
    sigma: Option<PathBuf>,
    /// Also write an SVG line chart.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 200)]
    instances: usize,
    /// Run a single check.
    #[arg(long)]
    only: Option<String>,
    /// CSV matrix to check instead of random instances.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// CSV of imaginary parts of `--matrix`.
    #[arg(long, requires = "matrix")]
    matrix_imag: Option<PathBuf>,
    #[arg(long, default_value_t = corrcov::verify::DEFAULT_EPSILON)]
    epsilon: f64,
    /// Trials of the quadratic-form tail check.
    #[arg(long, default_value_t = 100_000)]
    hw_trials: usize,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long, default_value = "gaussian,rademacher,uniform")]
    dists: String,
    #[arg(long, default_value = "identity")]
    patterns: String,
    #[arg(long, default_value = "5,10,20")]
    n: String,
    #[arg(long, default_value = "100,400")]
    m: String,
    #[arg(long, default_value_t = 200)]
    trials: usize,
}

/// Why a command did not succeed.
#[derive(Debug)]
pub enum Failure {
    /// Bad input; exit code 2.
    Usage(String),
    /// The computation ran but a check failed or trials were censored; exit code 1.
    Check(String),
}

impl From<corrcov::Error> for Failure {
    fn from(e: corrcov::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

pub struct Common {
    pub seed: u64,
    pub workers: usize,
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = Common {
        seed: cli.seed,
        workers: cli.workers.unwrap_or_else(corrcov::exec::default_workers).max(1),
        out: cli.out,
    };
    let result = match cli.command {
        Command::Pattern(a) => commands::pattern(&common, &a.spec, a.m),
        Command::Bound(a) => commands::bound(&common, &a),
        Command::Simulate(a) => commands::simulate(&common, &a),
        Command::Verify(a) => commands::verify(&common, &a),
        Command::FitConstant(a) => commands::fit_constant(&common, &a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("corrcov: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("corrcov: {msg}");
            ExitCode::from(2)
        }
    }
}

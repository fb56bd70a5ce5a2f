//! `bmaster`: fit, simulate, benchmark, and evaluate sparse multivariate
//! regressions with combined entrywise-L1 / rowwise-L2 shrinkage.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
//! Every failure prints a single line `error: <category>: <message>` to
//! stderr.

mod commands;
mod config;
mod outputs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bmaster",
    version,
    about = "Sparse Bayesian multivariate regression with master-predictor selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model to predictor/response CSV files and select edges.
    Fit(FitArgs),
    /// Generate synthetic replicates, fit each one, and score recovery.
    Simulate(SimulateArgs),
    /// Time the sampler across problem sizes and fit a scaling slope.
    Benchmark(BenchmarkArgs),
    /// Score a stored posterior archive against truth or holdout data.
    Evaluate(EvaluateArgs),
}

/// Sampler settings shared by every command that runs chains. Any flag left
/// unset falls back to the config file, then to the built-in default.
#[derive(Args, Debug, Clone)]
struct SamplerFlags {
    /// Total Gibbs iterations.
    #[arg(long)]
    iterations: Option<u64>,
    /// Iterations discarded before retention.
    #[arg(long)]
    burnin: Option<u64>,
    /// Keep every thin-th post-burn-in draw.
    #[arg(long)]
    thin: Option<u64>,
    /// Master RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (never changes results).
    #[arg(long)]
    threads: Option<usize>,
    /// Entrywise shrinkage Gamma prior shape.
    #[arg(long)]
    a1: Option<f64>,
    /// Entrywise shrinkage Gamma prior rate.
    #[arg(long)]
    b1: Option<f64>,
    /// Rowwise shrinkage Gamma prior shape.
    #[arg(long)]
    a2: Option<f64>,
    /// Rowwise shrinkage Gamma prior rate.
    #[arg(long)]
    b2: Option<f64>,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Predictor CSV (samples as rows, header row, id first column).
    #[arg(long)]
    x: Option<PathBuf>,
    /// Response CSV (same layout as --x).
    #[arg(long)]
    y: Option<PathBuf>,
    /// Optional 0/1 penalization mask CSV (predictors × responses).
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Key=value config file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    sampler: SamplerFlags,
    /// Credible level for edge selection.
    #[arg(long)]
    alpha: Option<f64>,
    /// Leave predictors on their input scale.
    #[arg(long = "no-standardize-x")]
    no_standardize_x: bool,
    /// Leave responses on their input scale.
    #[arg(long = "no-standardize-y")]
    no_standardize_y: bool,
    /// Treat --x as a nonnegative abundance table: filter, then apply the
    /// centered log-ratio transform before standardization.
    #[arg(long)]
    clr: bool,
    /// Prevalence filter threshold (with --clr): keep features with a
    /// nonzero count in at least this fraction of samples.
    #[arg(long)]
    prevalence: Option<f64>,
    /// Abundance filter threshold (with --clr): keep features whose mean
    /// per-sample relative abundance is at least this value.
    #[arg(long = "min-abundance")]
    min_abundance: Option<f64>,
    /// Read --x transposed (features as rows).
    #[arg(long = "transpose-x")]
    transpose_x: bool,
    /// Read --y transposed (features as rows).
    #[arg(long = "transpose-y")]
    transpose_y: bool,
    /// Output directory (created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Key=value config file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of predictors.
    #[arg(long)]
    p: Option<usize>,
    /// Number of responses.
    #[arg(long)]
    q: Option<usize>,
    /// Number of samples.
    #[arg(long)]
    n: Option<usize>,
    /// Lag-one autocorrelation of predictor columns.
    #[arg(long)]
    rho: Option<f64>,
    /// Probability a predictor row is active.
    #[arg(long = "pi-row")]
    pi_row: Option<f64>,
    /// Probability an entry of an active row is nonzero.
    #[arg(long = "pi-col")]
    pi_col: Option<f64>,
    /// Response noise standard deviation.
    #[arg(long = "noise-sd")]
    noise_sd: Option<f64>,
    /// Number of independent replicates.
    #[arg(long)]
    replicates: Option<usize>,
    #[command(flatten)]
    sampler: SamplerFlags,
    /// Credible level for edge selection.
    #[arg(long)]
    alpha: Option<f64>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    /// Key=value config file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated square sizes (P = Q = N) for the scaling benchmark.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Sample-size sweep mode: fix P = Q = --p and time N in {P, 5P, 10P}.
    #[arg(long = "n-sweep")]
    n_sweep: bool,
    /// Problem size for --n-sweep.
    #[arg(long)]
    p: Option<usize>,
    /// Lag-one autocorrelation of predictor columns.
    #[arg(long)]
    rho: Option<f64>,
    #[command(flatten)]
    sampler: SamplerFlags,
    /// Output directory (created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Posterior archive produced by `fit` or `simulate`.
    #[arg(long)]
    archive: Option<PathBuf>,
    /// Key=value config file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// True coefficient CSV (predictors × responses) for recovery metrics.
    #[arg(long)]
    btrue: Option<PathBuf>,
    /// Holdout predictor CSV for prediction error.
    #[arg(long = "x-test")]
    x_test: Option<PathBuf>,
    /// Holdout response CSV for prediction error.
    #[arg(long = "y-test")]
    y_test: Option<PathBuf>,
    /// Predictor CSV on the fitting scale (needed with --subset).
    #[arg(long)]
    x: Option<PathBuf>,
    /// Response CSV on the fitting scale (needed with --subset).
    #[arg(long)]
    y: Option<PathBuf>,
    /// File with one response name per line: rank master predictors over
    /// this subset and emit the cumulative canonical-correlation curve.
    #[arg(long)]
    subset: Option<PathBuf>,
    /// Credible level for edge selection.
    #[arg(long)]
    alpha: Option<f64>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(args) => commands::fit(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::Benchmark(args) => commands::benchmark(args),
        Command::Evaluate(args) => commands::evaluate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(config::CliError::Usage(msg)) => {
            let message = msg.replace('\n', "; ");
            eprintln!("error: usage: {message}");
            ExitCode::from(2)
        }
        Err(config::CliError::Core(err)) => {
            let message = err.to_string().replace('\n', "; ");
            eprintln!("error: {}: {}", err.category(), message);
            if err.is_data_error() {
                ExitCode::from(3)
            } else {
                ExitCode::from(4)
            }
        }
    }
}

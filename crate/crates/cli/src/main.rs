//! Command-line entry point: dataset ingestion or synthesis, the k-fold
//! evaluation protocol, single-model training with checkpoints, and
//! plot-ready quantile forecasts.
//!
//! Exit codes: 0 on success, 2 on usage errors, 1 on runtime failures.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug)]
pub enum AppError {
    Usage(String),
    Runtime(String),
}

impl AppError {
    pub fn usage(msg: impl Into<String>) -> Self {
        AppError::Usage(msg.into())
    }

    pub fn runtime(msg: impl std::fmt::Display) -> Self {
        AppError::Runtime(msg.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "pvcast",
    version,
    about = "Multi-output quantile forecasting of PV generation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the k-fold evaluation protocol and write score reports.
    Evaluate(EvaluateArgs),
    /// Train one model on a fold's training block and save a checkpoint.
    Train(TrainArgs),
    /// Forecast one day from a checkpoint as plot-ready CSV.
    Forecast(ForecastArgs),
    /// Generate a synthetic dataset and write it as CSV files.
    Synth(SynthArgs),
}

/// Where the data comes from: measurement files or the synthetic generator.
#[derive(Args, Clone, Default)]
pub struct DataArgs {
    /// PV measurements CSV with columns timestamp_iso8601,power_kw.
    #[arg(long, value_name = "PATH")]
    pub(crate) pv: Option<PathBuf>,
    /// Weather runs CSV with columns
    /// issue_time_iso8601,valid_time_iso8601,irradiance_wm2,temperature_c.
    #[arg(long, value_name = "PATH")]
    pub(crate) weather: Option<PathBuf>,
    /// Synthetic dataset spec, e.g. "days=157,seed=7".
    #[arg(long, value_name = "SPEC")]
    pub(crate) synthetic: Option<String>,
    /// Installed capacity in kW.
    #[arg(long, value_name = "KW")]
    pub(crate) capacity: Option<f64>,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// JSON config file; command-line flags override its fields.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Comma-separated models: mlp,lstm,ed1,ed2,gbr,climatology.
    #[arg(long, value_name = "LIST")]
    models: Option<String>,
    /// Comma-separated gates: dayahead12,intra00,intra06,intra12,intra18.
    #[arg(long, value_name = "LIST")]
    gates: Option<String>,
    /// Output directory for report artifacts.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for fold-level parallelism (0 = all cores).
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    /// Run seed; recorded in every output artifact.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Override the per-architecture epoch default.
    #[arg(long, value_name = "N")]
    epochs: Option<usize>,
    /// Override the per-architecture learning-rate default.
    #[arg(long, value_name = "X")]
    learning_rate: Option<f64>,
    /// Override the per-architecture batch-size default.
    #[arg(long, value_name = "N")]
    batch_size: Option<usize>,
    /// Boosting stages for the GBR model.
    #[arg(long, value_name = "N")]
    estimators: Option<usize>,
    /// Number of cross-validation pairs.
    #[arg(long, value_name = "N")]
    folds: Option<usize>,
    /// Test window length in days.
    #[arg(long, value_name = "N")]
    test_days: Option<usize>,
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Model to train: mlp,lstm,ed1,ed2,gbr,climatology.
    #[arg(long, value_name = "NAME")]
    model: String,
    /// Gate to train for.
    #[arg(long, value_name = "NAME")]
    gate: String,
    /// Checkpoint output path.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Fold pair whose training block to use; defaults to the tuning pair.
    #[arg(long, value_name = "N")]
    fold: Option<usize>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, value_name = "N")]
    epochs: Option<usize>,
    #[arg(long, value_name = "X")]
    learning_rate: Option<f64>,
    #[arg(long, value_name = "N")]
    batch_size: Option<usize>,
    #[arg(long, value_name = "N")]
    estimators: Option<usize>,
    #[arg(long, value_name = "N")]
    folds: Option<usize>,
    #[arg(long, value_name = "N")]
    test_days: Option<usize>,
}

#[derive(Args)]
pub struct ForecastArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Trained model checkpoint.
    #[arg(long, value_name = "PATH")]
    checkpoint: PathBuf,
    /// Target day, e.g. 2020-08-02.
    #[arg(long, value_name = "DATE")]
    date: String,
    /// Gate to forecast; must match the checkpoint.
    #[arg(long, value_name = "NAME")]
    gate: Option<String>,
    /// Output CSV path.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Number of days to generate.
    #[arg(long, default_value_t = 157)]
    days: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = pvcast_core::DEFAULT_CAPACITY_KW)]
    capacity: f64,
    /// Output directory for pv.csv and weather.csv.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Evaluate(args) => commands::evaluate(args),
        Command::Train(args) => commands::train(args),
        Command::Forecast(args) => commands::forecast(args),
        Command::Synth(args) => commands::synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(AppError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

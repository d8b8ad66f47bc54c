//! `turblucky` command line tool.
//!
//! Exit codes: 0 success, 1 usage, 2 I/O, 3 validation, 4 numeric failure.
//! The `TURBLUCKY_THREADS` environment variable caps the worker thread count.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::Method;
use turblucky::{Error, Result};

#[derive(Parser)]
#[command(name = "turblucky", version, about = "Event-guided turbulence mitigation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset of turbulent sequences with events.
    Simulate(SimulateArgs),
    /// Restore every sample of a dataset with one fusion method.
    Fuse(FuseArgs),
    /// Train the guidance network.
    Train(TrainArgs),
    /// Compare mean, inverse-voxel and (with a model) learned fusion.
    Eval(EvalArgs),
    /// Correlate local event counts with per-pixel turbulence error.
    Analyze(AnalyzeArgs),
    /// Report parameter count and FLOPs of the network.
    Params(ParamsArgs),
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    /// JSON file with default values for any of the flags below.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Output dataset directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    samples: Option<usize>,
    /// Image size as WIDTHxHEIGHT.
    #[arg(long)]
    size: Option<String>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    frame_interval_us: Option<u64>,
    /// 1 (grayscale) or 3 (RGB).
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory of clean PNG images to use instead of procedural scenes.
    #[arg(long)]
    clean_dir: Option<PathBuf>,
    /// RMS tilt displacement in pixels.
    #[arg(long)]
    tilt: Option<f64>,
    #[arg(long)]
    correlation_length: Option<f64>,
    /// Temporal correlation of consecutive tilt sub-steps.
    #[arg(long)]
    rho: Option<f64>,
    /// Blur sigma in pixels; defaults to 0.8, or 0 when --tilt is 0.
    #[arg(long)]
    blur: Option<f64>,
    #[arg(long)]
    supersample: Option<usize>,
    /// Spread of the per-frame turbulence strength (log scale).
    #[arg(long)]
    intermittency: Option<f64>,
    #[arg(long)]
    contrast_threshold: Option<f64>,
    #[arg(long)]
    log_eps: Option<f64>,
    /// Background noise events per pixel per second.
    #[arg(long)]
    noise_rate: Option<f64>,
    /// Replace existing samples in a non-empty output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Args, Serialize)]
struct FuseArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Dataset directory.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Model file, required for the egtm method.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Box window of the inverse-voxel density smoothing.
    #[arg(long)]
    window: Option<usize>,
    /// Offset added to densities before inversion.
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Directory receiving model.egtm and metrics.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Initial learning rate.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    adam_eps: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Share of samples held out for validation.
    #[arg(long)]
    val_fraction: Option<f64>,
    /// Weight of the gradient-magnitude term.
    #[arg(long)]
    lambda: Option<f64>,
    /// Train with the L1 term only.
    #[arg(long)]
    no_perceptual: bool,
    /// Reduce gradients in a fixed order.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Args, Serialize)]
struct AnalyzeArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Maximum number of samples to use.
    #[arg(long)]
    samples: Option<usize>,
    /// Pixels drawn per sample.
    #[arg(long)]
    pixels: Option<usize>,
    /// Comma-separated square window sides.
    #[arg(long, value_delimiter = ',')]
    spatial_sizes: Option<Vec<usize>>,
    /// Comma-separated temporal window lengths in milliseconds.
    #[arg(long, value_delimiter = ',')]
    temporal_windows_ms: Option<Vec<f64>>,
    /// Temporal span of the spatial sweep in milliseconds.
    #[arg(long)]
    spatial_window_ms: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Serialize)]
struct ParamsArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    channels: Option<usize>,
    /// Input size for the FLOP count, WIDTHxHEIGHT.
    #[arg(long)]
    size: Option<String>,
}

fn init_threads() -> Result<()> {
    let Ok(value) = std::env::var("TURBLUCKY_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Usage(format!("TURBLUCKY_THREADS={value:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::State(e.to_string()))
}

fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    match cli.command {
        Command::Simulate(a) => commands::simulate(config::resolve(a.config.as_deref(), &a)?),
        Command::Fuse(a) => commands::fuse(config::resolve(a.config.as_deref(), &a)?),
        Command::Train(a) => commands::train(config::resolve(a.config.as_deref(), &a)?),
        Command::Eval(a) => commands::eval(config::resolve(a.config.as_deref(), &a)?),
        Command::Analyze(a) => commands::analyze(config::resolve(a.config.as_deref(), &a)?),
        Command::Params(a) => commands::params(config::resolve(a.config.as_deref(), &a)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

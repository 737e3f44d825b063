//! `boxseg`: Box-Cox prefiltering, pixel classification and evaluation.
//!
//! Exit status: 0 success, 2 usage or I/O error, 3 degenerate data,
//! 4 numerical failure.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use boxseg_core::ErrorCategory;
use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{EstimatorFlags, LambdaArg};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] boxseg_core::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e.category() {
                ErrorCategory::Usage => 2,
                ErrorCategory::Degenerate => 3,
                ErrorCategory::Numerical => 4,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "boxseg", version, about = "Box-Cox prefiltering for pixel-level image segmentation")]
struct Cli {
    /// Worker threads for parallel sections (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML config file; command-line flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Grayscale, Box-Cox and stretch an image.
    Transform(TransformArgs),
    /// Estimate λ by maximum profile likelihood.
    EstimateLambda(EstimateArgs),
    /// Train a pixel classifier on a split of a labelled image and segment it.
    Segment(SegmentArgs),
    /// Compare a predicted mask with the ground truth.
    Evaluate(EvaluateArgs),
    /// Segmentation quality over a grid of λ values.
    Sweep(SweepArgs),
    /// Write a seeded synthetic test image (and mask).
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct TransformArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// `mle` or a fixed value.
    #[arg(long)]
    lambda: Option<LambdaArg>,
    #[arg(long)]
    shift: Option<f64>,
    /// Stretch target as `lo:hi`.
    #[arg(long, allow_hyphen_values = true)]
    range: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    estimator: EstimatorFlags,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    shift: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    estimator: EstimatorFlags,
    /// CSV of `lambda,loglik` over the coarse grid.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Full estimate as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct SegmentArgs {
    #[arg(long)]
    input: PathBuf,
    /// Ground-truth mask.
    #[arg(long)]
    mask: PathBuf,
    /// Predicted mask to write (PNG or PGM).
    #[arg(long)]
    output: PathBuf,
    /// Mask value to class map, e.g. `0=0,255=1` or `#000000=0,#ff0000=1`.
    #[arg(long)]
    palette: Option<String>,
    /// Apply the Box-Cox pipeline before classifying.
    #[arg(long)]
    prefilter: Option<OnOff>,
    #[arg(long)]
    lambda: Option<LambdaArg>,
    #[arg(long)]
    shift: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    range: Option<String>,
    /// `lda`, `qda`, `knn[:K]`, `svm` or `svm:<kernel>`.
    #[arg(long)]
    classifier: Option<String>,
    /// `intensity` or `window:<odd size>`.
    #[arg(long)]
    featurizer: Option<String>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    estimator: EstimatorFlags,
    /// Held-out metrics as CSV.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Held-out and whole-image reports as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Save the trained model as JSON.
    #[arg(long)]
    model_out: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct EvaluateArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    palette: Option<String>,
    #[arg(long)]
    metrics: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct SweepArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    /// Main CSV; annotations and timing files are written beside it.
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    palette: Option<String>,
    /// `lo:hi:n` or a comma list (default -1:5:61).
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    #[arg(long)]
    classifier: Option<String>,
    #[arg(long)]
    featurizer: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    range: Option<String>,
    #[arg(long)]
    shift: Option<f64>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// `macro`, `weighted` or `class:<k>`.
    #[arg(long)]
    precision: Option<String>,
    /// Skip the maximum-likelihood annotation.
    #[arg(long)]
    no_mle: bool,
    /// Also write long-format `lambda,metric,value` rows here.
    #[arg(long)]
    plot_data: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    /// Log-normal background with dark log-normal cracks; needs `--mask`.
    Crack,
    Lognormal,
    Normal,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    kind: SynthKind,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long, default_value_t = 128)]
    width: usize,
    #[arg(long, default_value_t = 128)]
    height: usize,
    /// Location (log scale for log-normal kinds).
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => config::FileConfig::load(p)?,
        None => config::FileConfig::default(),
    };
    let threads = cli.threads.or(file.threads);
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Transform(a) => commands::transform(&a, &file, threads),
        Command::EstimateLambda(a) => commands::estimate_lambda(&a, &file, threads),
        Command::Segment(a) => commands::segment(&a, &file, threads),
        Command::Evaluate(a) => commands::evaluate(&a, &file, threads),
        Command::Sweep(a) => commands::sweep(&a, &file, threads),
        Command::Synth(a) => commands::synth(&a, &file, threads),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

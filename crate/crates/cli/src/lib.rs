//! Command-line runner: dataset synthesis, training, prediction, counting,
//! evaluation, benchmarking and streaming replay over files in one output
//! directory.

pub mod commands;
pub mod config;
pub mod report;
pub mod stream;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{Overrides, RunConfig};

/// Environment variable selecting the worker count.
pub const WORKERS_ENV: &str = "PRIMSEQ_WORKERS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

macro_rules! runtime_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Runtime(e.to_string())
            }
        }
    )*};
}
runtime_from!(
    std::io::Error,
    serde_json::Error,
    csv::Error,
    primseq::pipeline::PipelineError,
    primseq::dataset::DatasetError,
    primseq::model::ModelError,
    primseq::decode::DecodeError,
    primseq::eval::EvalError,
    primseq::baseline::BaselineError,
    primseq::preprocess::PreprocessError
);

#[derive(Debug, Parser)]
#[command(name = "primseq", version, about = "Functional-primitive sequence decoding and counting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; overrides the config's `out_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labeled dataset into `<out>/dataset`.
    Synth(Common),
    /// Train the ensemble and the pointwise baseline.
    Train {
        #[command(flatten)]
        common: Common,
        /// Ensemble members (one per subject fold).
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Decode the held-out recordings with the ensemble and the baseline.
    Predict(Common),
    /// Stitch predictions into per-recording primitive counts.
    Count(Common),
    /// Score predictions against labels.
    Eval(Common),
    /// Time the decode, stitch and count path.
    Bench(Common),
    /// Replay held-out recordings on a real-time clock.
    Stream {
        #[command(flatten)]
        common: Common,
        /// Replay speed relative to real time; `inf` disables throttling.
        #[arg(long)]
        speed: Option<f64>,
    },
}

/// Worker threads: `PRIMSEQ_WORKERS` if set to a positive integer, otherwise
/// the available parallelism.
pub fn workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (common, overrides_extra, name) = match &cli.command {
        Command::Synth(c) => (c, Overrides::default(), "synth"),
        Command::Train { common, folds } => (common, Overrides { folds: *folds, ..Default::default() }, "train"),
        Command::Predict(c) => (c, Overrides::default(), "predict"),
        Command::Count(c) => (c, Overrides::default(), "count"),
        Command::Eval(c) => (c, Overrides::default(), "eval"),
        Command::Bench(c) => (c, Overrides::default(), "bench"),
        Command::Stream { common, speed } => (common, Overrides { speed: *speed, ..Default::default() }, "stream"),
    };
    let overrides = Overrides { seed: common.seed, out: common.out.clone(), ..overrides_extra };
    let cfg = RunConfig::load(&common.config, &overrides)?;
    cfg.validate(name != "synth")?;
    let ctx = commands::Context { cfg, workers: workers() };
    match name {
        "synth" => commands::synth(&ctx),
        "train" => commands::train(&ctx),
        "predict" => commands::predict(&ctx),
        "count" => commands::count_command(&ctx),
        "eval" => commands::eval(&ctx),
        "bench" => commands::bench(&ctx),
        _ => commands::stream(&ctx),
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code: 0 on success, 1 on a runtime failure, 2 on a usage or
/// configuration error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("primseq: {e}");
            e.exit_code()
        }
    }
}

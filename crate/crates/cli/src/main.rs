//! `qres` — command-line entry point wiring dataset generation,
//! training, evaluation, ROC export, and circuit simulation into
//! reproducible workflows.
//!
//! Conventions:
//! * results go to standard output; logs, progress, and the effective
//!   configuration echo go to standard error;
//! * every command echoes its effective settings at startup, so a run
//!   is reproducible from the echoed line alone;
//! * exit codes: 0 success, 1 runtime failure, 2 usage/argument error.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use qres_core::Error;

use config::HeadChoice;

#[derive(Parser)]
#[command(
    name = "qres",
    version,
    about = "Hybrid quantum-classical volumetric image classifier",
    max_term_width = 100
)]
struct Cli {
    /// Cap on worker threads (env QRES_THREADS is the fallback;
    /// default: all available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic two-class volume dataset with a manifest.
    Generate(GenerateArgs),
    /// Train a model and write checkpoints plus a training log.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset split.
    Eval(EvalArgs),
    /// Write the ROC curve of a checkpoint on a split to a file.
    Roc(RocArgs),
    /// Simulate a gate-list circuit or a quantum-layer evaluation.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Output directory for volumes and manifest.tsv.
    #[arg(long)]
    out: PathBuf,
    /// Volumes per class.
    #[arg(long, default_value_t = 100)]
    n_per_class: usize,
    /// Cube side length in voxels (at least 8).
    #[arg(long, default_value_t = 16)]
    side: usize,
    /// Seed for the generation and split streams.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Class-separability knob in [0, 1]: 0 easiest, 1 identical classes.
    #[arg(long, default_value_t = 0.2)]
    difficulty: f64,
}

/// Flags shared by commands that read a config file. Flags override
/// file values; the file covers anything not flagged.
#[derive(Args)]
struct ConfigArgs {
    /// TOML run-configuration file (all fields optional).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory containing manifest.tsv.
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Directory receiving best.qrck, last.qrck, and train.log.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Resume from this checkpoint (must carry optimizer state).
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    head: Option<HeadChoice>,
    #[arg(long)]
    patience: Option<usize>,
    /// Decision threshold for accuracy-type metrics.
    #[arg(long)]
    threshold: Option<f64>,
    /// Resize target and network input side.
    #[arg(long)]
    input_side: Option<usize>,
    /// Comma-separated stage widths, e.g. 8,16.
    #[arg(long, value_delimiter = ',')]
    channels: Option<Vec<usize>>,
    #[arg(long)]
    blocks_per_stage: Option<usize>,
    /// Feature count handed to the head (qubit count for the quantum head).
    #[arg(long)]
    n_out: Option<usize>,
    #[arg(long)]
    n_qubits: Option<usize>,
    #[arg(long)]
    feature_map_reps: Option<usize>,
    #[arg(long)]
    ansatz_reps: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Checkpoint to evaluate.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset split to evaluate on.
    #[arg(long, value_parser = ["train", "val", "test"], default_value = "test")]
    split: String,
    /// Decision threshold for accuracy-type metrics.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args)]
struct RocArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Checkpoint whose scores define the curve.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset split to score.
    #[arg(long, value_parser = ["train", "val", "test"], default_value = "test")]
    split: String,
    /// Output file for fpr/tpr/threshold lines.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct SimulateModeArgs {
    /// Gate-list file: one gate per line, `KIND [angle] qubits`,
    /// `#` comments allowed.
    #[arg(long)]
    circuit: Option<PathBuf>,
    /// Evaluate the quantum layer: print probability and gradients.
    #[arg(long)]
    qlayer: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    mode: SimulateModeArgs,
    /// Qubit count (--circuit: overrides the inferred count;
    /// --qlayer: layer width).
    #[arg(long, required_if_eq("qlayer", "true"))]
    qubits: Option<usize>,
    /// Also dump the final statevector after a --circuit run.
    #[arg(long)]
    dump_state: bool,
    /// Comma-separated feature vector for --qlayer (default: zeros).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    features: Option<Vec<f64>>,
    /// Comma-separated ansatz angles for --qlayer (default: zeros).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    params: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    feature_map_reps: usize,
    #[arg(long, default_value_t = 1)]
    ansatz_reps: usize,
}

/// --threads, then QRES_THREADS, then every available core.
fn resolve_threads(flag: Option<usize>) -> Result<usize, Error> {
    let from_env = || -> Result<Option<usize>, Error> {
        match std::env::var("QRES_THREADS") {
            Err(_) => Ok(None),
            Ok(raw) => raw
                .parse::<usize>()
                .map(Some)
                .map_err(|_| Error::Argument(format!("QRES_THREADS={raw:?} is not a thread count"))),
        }
    };
    let n = match flag {
        Some(n) => n,
        None => match from_env()? {
            Some(n) => n,
            None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        },
    };
    if n == 0 {
        return Err(Error::Argument("thread count must be at least 1".into()));
    }
    Ok(n)
}

fn run(cli: Cli) -> Result<(), Error> {
    let threads = resolve_threads(cli.threads)?;
    // One global pool, sized once; per-sample and per-volume work in the
    // core library fans out over it.
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::State(format!("thread pool: {e}")))?;
    match cli.command {
        Command::Generate(args) => commands::generate(&args, threads),
        Command::Train(args) => commands::train(&args, threads),
        Command::Eval(args) => commands::eval(&args, threads),
        Command::Roc(args) => commands::roc(&args, threads),
        Command::Simulate(args) => commands::simulate(&args, threads),
    }
}

fn main() {
    let cli = Cli::parse(); // clap itself exits 2 on usage errors
    let code = match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Argument(_) | Error::Capacity { .. } | Error::QubitIndex { .. } => 2,
                _ => 1,
            }
        }
    };
    std::process::exit(code);
}

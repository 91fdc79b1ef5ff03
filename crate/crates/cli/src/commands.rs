//! Subcommand implementations. Results print to stdout; progress,
//! training logs, and the effective-settings echo print to stderr.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use qres_core::checkpoint::load_checkpoint;
use qres_core::circuits::{format_gates, parse_gates, real_amplitudes_param_count};
use qres_core::data::{generate_synthetic, load_split, Manifest, Split, SyntheticSpec};
use qres_core::metrics::{write_roc, EvalReport};
use qres_core::qlayer::{QuantumLayer, QuantumLayerConfig};
use qres_core::statevector::{Gate, StateVector};
use qres_core::train::{evaluate, train_from_manifest};
use qres_core::{Error, Result};

use crate::config::RunConfig;
use crate::{EvalArgs, GenerateArgs, RocArgs, SimulateArgs, TrainArgs};

/// Join numbers into a comma list for echo lines.
fn comma<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

pub fn generate(args: &GenerateArgs, threads: usize) -> Result<()> {
    eprintln!(
        "# effective: qres generate --out {} --n-per-class {} --side {} --seed {} --difficulty {} --threads {threads}",
        args.out.display(),
        args.n_per_class,
        args.side,
        args.seed,
        args.difficulty
    );
    let spec = SyntheticSpec {
        n_per_class: args.n_per_class,
        side: args.side,
        seed: args.seed,
        difficulty: args.difficulty,
    };
    let manifest = generate_synthetic(&args.out, &spec)?;
    let count = |s: Split| manifest.split_entries(s).len();
    println!(
        "generated {} volumes ({} per class) in {}",
        2 * args.n_per_class,
        args.n_per_class,
        args.out.display()
    );
    println!(
        "splits: train {} / val {} / test {}",
        count(Split::Train),
        count(Split::Val),
        count(Split::Test)
    );
    Ok(())
}

/// Load the config file and fold the command-line overrides into it.
fn effective_config(args: &TrainArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(args.cfg.config.as_deref())?;
    macro_rules! set {
        ($field:expr, $value:expr) => {
            if let Some(v) = &$value {
                $field = v.clone();
            }
        };
    }
    set!(cfg.data.dir, args.cfg.data_dir);
    set!(cfg.train.out_dir, args.out_dir);
    set!(cfg.train.epochs, args.epochs);
    set!(cfg.train.batch_size, args.batch_size);
    set!(cfg.train.learning_rate, args.learning_rate);
    set!(cfg.train.seed, args.seed);
    set!(cfg.train.head, args.head);
    set!(cfg.train.patience, args.patience);
    set!(cfg.train.threshold, args.threshold);
    set!(cfg.net.input_side, args.input_side);
    set!(cfg.net.channels, args.channels);
    set!(cfg.net.blocks_per_stage, args.blocks_per_stage);
    set!(cfg.net.n_out, args.n_out);
    set!(cfg.qlayer.n_qubits, args.n_qubits);
    set!(cfg.qlayer.feature_map_reps, args.feature_map_reps);
    set!(cfg.qlayer.ansatz_reps, args.ansatz_reps);
    Ok(cfg)
}

/// Every field as a flag, so rerunning the echoed line reproduces the
/// run without the original config file.
fn echo_train(cfg: &RunConfig, resume: Option<&Path>, threads: usize) {
    let mut line = format!(
        "# effective: qres train --data-dir {} --out-dir {} --epochs {} --batch-size {} \
         --learning-rate {} --seed {} --head {} --patience {} --threshold {} --input-side {} \
         --channels {} --blocks-per-stage {} --n-out {} --n-qubits {} --feature-map-reps {} \
         --ansatz-reps {} --threads {threads}",
        cfg.data.dir.display(),
        cfg.train.out_dir.display(),
        cfg.train.epochs,
        cfg.train.batch_size,
        cfg.train.learning_rate,
        cfg.train.seed,
        cfg.train.head,
        cfg.train.patience,
        cfg.train.threshold,
        cfg.net.input_side,
        comma(&cfg.net.channels),
        cfg.net.blocks_per_stage,
        cfg.net.n_out,
        cfg.qlayer.n_qubits,
        cfg.qlayer.feature_map_reps,
        cfg.qlayer.ansatz_reps,
    );
    if let Some(p) = resume {
        let _ = write!(line, " --resume {}", p.display());
    }
    eprintln!("{line}");
}

fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join("manifest.tsv");
    if !path.is_file() {
        return Err(Error::Argument(format!(
            "no manifest at {} — generate a dataset first or pass --data-dir",
            path.display()
        )));
    }
    Manifest::read(&path)
}

pub fn train(args: &TrainArgs, threads: usize) -> Result<()> {
    let cfg = effective_config(args)?;
    echo_train(&cfg, args.resume.as_deref(), threads);
    if let Some(resume) = &args.resume {
        check_checkpoint_path(resume)?;
    }
    let manifest = read_manifest(&cfg.data.dir)?;
    std::fs::create_dir_all(&cfg.train.out_dir)?;

    let log_path = cfg.train.out_dir.join("train.log");
    let mut log_file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&log_path)?;
    let mut log = |line: &str| {
        eprintln!("{line}");
        let _ = writeln!(log_file, "{line}");
    };

    let (_, outcome) = train_from_manifest(
        &manifest,
        &cfg.data.dir,
        cfg.net_config(),
        cfg.qlayer_config(),
        &cfg.train_config(),
        &cfg.train.out_dir,
        args.resume.as_deref(),
        &mut log,
    )?;

    println!(
        "trained {} epoch{} with the {} head{}",
        outcome.epochs_run,
        if outcome.epochs_run == 1 { "" } else { "s" },
        cfg.train.head,
        if outcome.stopped_early { " (stopped early)" } else { "" }
    );
    println!(
        "best epoch {}: validation AUC {:.6}",
        outcome.best_epoch, outcome.best_val_auc
    );
    for (name, path) in [("best", &outcome.best_path), ("last", &outcome.last_path)] {
        if let Some(p) = path {
            println!("{name} checkpoint: {}", p.display());
        }
    }
    println!("training log: {}", log_path.display());
    Ok(())
}

/// A missing checkpoint is a usage mistake (nothing was trained yet or
/// the path is wrong), not a runtime failure.
fn check_checkpoint_path(path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(Error::Argument(format!(
            "checkpoint {} does not exist — train first or pass a valid --checkpoint",
            path.display()
        )));
    }
    Ok(())
}

/// Shared eval/roc plumbing: load checkpoint + split, score it.
fn report_on_split(
    checkpoint: &Path,
    data_dir: &Path,
    split: Split,
    threshold: f64,
) -> Result<(EvalReport, usize)> {
    check_checkpoint_path(checkpoint)?;
    let mut model = load_checkpoint(checkpoint)?.model;
    let side = model.config().net.input_side;
    let manifest = read_manifest(data_dir)?;
    let data = load_split(&manifest, data_dir, split, side)?;
    if data.is_empty() {
        return Err(Error::Argument(format!(
            "split {:?} has no volumes in {}",
            split.as_str(),
            data_dir.display()
        )));
    }
    let n = data.len();
    Ok((evaluate(&mut model, &data, threshold)?, n))
}

fn eval_table(report: &EvalReport, split: Split, n: usize, threshold: f64) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "split {}: {} volumes, decision threshold {}", split.as_str(), n, threshold);
    let _ = writeln!(t);
    let _ = writeln!(t, "{:>12}  {:>11}  {:>11}", "", "predicted 1", "predicted 0");
    let _ = writeln!(t, "{:>12}  {:>11}  {:>11}", "actual 1", report.tp, report.fn_);
    let _ = writeln!(t, "{:>12}  {:>11}  {:>11}", "actual 0", report.fp, report.tn);
    let _ = writeln!(t);
    for (name, value) in [
        ("AUC", report.auc),
        ("ACC", report.acc),
        ("SEN", report.sen),
        ("SPE", report.spe),
    ] {
        let _ = writeln!(t, "{:>12}  {:>11.4}", name, value);
    }
    if report.sen_undefined {
        let _ = writeln!(t, "note: no positive volumes — SEN reported as 0, AUC as 0.5");
    }
    if report.spe_undefined {
        let _ = writeln!(t, "note: no negative volumes — SPE reported as 0, AUC as 0.5");
    }
    t
}

pub fn eval(args: &EvalArgs, threads: usize) -> Result<()> {
    let cfg = RunConfig::load(args.cfg.config.as_deref())?;
    let data_dir = args.cfg.data_dir.clone().unwrap_or(cfg.data.dir);
    let threshold = args.threshold.unwrap_or(cfg.train.threshold);
    eprintln!(
        "# effective: qres eval --checkpoint {} --split {} --data-dir {} --threshold {threshold} --threads {threads}",
        args.checkpoint.display(),
        args.split,
        data_dir.display()
    );
    let split = Split::parse(&args.split)?;
    let (report, n) = report_on_split(&args.checkpoint, &data_dir, split, threshold)?;
    print!("{}", eval_table(&report, split, n, threshold));
    println!("{}", report.summary_line());
    Ok(())
}

pub fn roc(args: &RocArgs, threads: usize) -> Result<()> {
    let cfg = RunConfig::load(args.cfg.config.as_deref())?;
    let data_dir = args.cfg.data_dir.clone().unwrap_or(cfg.data.dir);
    eprintln!(
        "# effective: qres roc --checkpoint {} --split {} --out {} --data-dir {} --threads {threads}",
        args.checkpoint.display(),
        args.split,
        args.out.display(),
        data_dir.display()
    );
    let split = Split::parse(&args.split)?;
    let (report, _) = report_on_split(&args.checkpoint, &data_dir, split, cfg.train.threshold)?;
    write_roc(&report.roc_points, &args.out)?;
    println!(
        "wrote {} ROC points (AUC {:.4}) to {}",
        report.roc_points.len(),
        report.auc,
        args.out.display()
    );
    Ok(())
}

fn simulate_circuit(args: &SimulateArgs, path: &Path, threads: usize) -> Result<()> {
    eprintln!(
        "# effective: qres simulate --circuit {}{}{} --threads {threads}",
        path.display(),
        args.qubits.map_or(String::new(), |q| format!(" --qubits {q}")),
        if args.dump_state { " --dump-state" } else { "" }
    );
    let text = std::fs::read_to_string(path)?;
    let gates = parse_gates(&text)?;
    let needed = gates
        .iter()
        .flat_map(Gate::qubits)
        .max()
        .map(|q| q + 1);
    let n = match (args.qubits, needed) {
        (Some(n), Some(needed)) if n < needed => {
            return Err(Error::Argument(format!(
                "--qubits {n} is too small: the circuit touches qubit {}",
                needed - 1
            )));
        }
        (Some(n), _) => n,
        (None, Some(needed)) => needed,
        (None, None) => {
            return Err(Error::Argument(
                "empty circuit: pass --qubits to pick a register size".into(),
            ));
        }
    };
    // The gate list echoes in its stable text form, so stdout re-parses
    // to the identical circuit.
    print!("{}", format_gates(&gates));
    if args.dump_state {
        let mut state = StateVector::new(n)?;
        for gate in &gates {
            state.apply(gate)?;
        }
        println!("# statevector: {n} qubits, index\\tre\\tim");
        print!("{}", state.dump_amplitudes());
    }
    Ok(())
}

fn simulate_qlayer(args: &SimulateArgs, threads: usize) -> Result<()> {
    let n_qubits = args.qubits.expect("clap enforces --qubits with --qlayer");
    let config = QuantumLayerConfig {
        n_qubits,
        feature_map_reps: args.feature_map_reps,
        ansatz_reps: args.ansatz_reps,
    };
    let mut layer = QuantumLayer::new(config)?;
    let features = args
        .features
        .clone()
        .unwrap_or_else(|| vec![0.0; n_qubits]);
    let params = args
        .params
        .clone()
        .unwrap_or_else(|| vec![0.0; real_amplitudes_param_count(n_qubits, args.ansatz_reps)]);
    eprintln!(
        "# effective: qres simulate --qlayer --qubits {n_qubits} --feature-map-reps {} --ansatz-reps {} --features {} --params {} --threads {threads}",
        args.feature_map_reps,
        args.ansatz_reps,
        comma(&features),
        comma(&params)
    );
    layer.set_params(&params)?;
    let fwd = layer.forward_with_grad(&features)?;
    println!("p={}", fwd.p);
    println!("dp_dparams={}", comma(&fwd.dp_dparams));
    println!("dp_dfeatures={}", comma(&fwd.dp_dfeatures));
    Ok(())
}

pub fn simulate(args: &SimulateArgs, threads: usize) -> Result<()> {
    match &args.mode.circuit {
        Some(path) => simulate_circuit(args, path, threads),
        None => simulate_qlayer(args, threads),
    }
}

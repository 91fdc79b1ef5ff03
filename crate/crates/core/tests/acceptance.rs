//! End-to-end acceptance gate. Each numbered criterion prints one
//! `[PASS]`/`[FAIL]` line (run with `--nocapture` to see them live);
//! the test fails if any criterion fails or exceeds its time budget.
//!
//! Oracles here are written independently of the library's internal
//! test helpers: a fresh dense-matrix simulator for gate checks and a
//! direct pairwise count for AUC.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use qres_core::cnn3d::{HeadKind, Mode, NetConfig};
use qres_core::data::{
    generate_synthetic, load_split, normalize_minmax, resize_trilinear, stratified_split,
    ManifestEntry, Split, SyntheticSpec, Volume,
};
use qres_core::metrics::roc_auc;
use qres_core::model::{HybridModel, ModelConfig};
use qres_core::qlayer::{QuantumLayer, QuantumLayerConfig};
use qres_core::rng::SplitMix64;
use qres_core::statevector::{Gate, StateVector};
use qres_core::train::{bce_grad, bce_loss, evaluate, train, TrainConfig};

// ---------------------------------------------------------------------
// Independent dense-matrix oracle (criterion 1)
// ---------------------------------------------------------------------

type Mat = Vec<Vec<Complex64>>;

fn mat_identity(dim: usize) -> Mat {
    let mut m = vec![vec![Complex64::new(0.0, 0.0); dim]; dim];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = Complex64::new(1.0, 0.0);
    }
    m
}

fn kron(a: &Mat, b: &Mat) -> Mat {
    let (ra, rb) = (a.len(), b.len());
    let mut out = vec![vec![Complex64::new(0.0, 0.0); ra * rb]; ra * rb];
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

/// Full 2^n matrix for a gate, little-endian (qubit 0 = least
/// significant index bit).
fn gate_matrix(gate: &Gate, n: usize) -> Mat {
    let dim = 1usize << n;
    let embed_1q = |u: [[Complex64; 2]; 2], q: usize| -> Mat {
        let u: Mat = vec![vec![u[0][0], u[0][1]], vec![u[1][0], u[1][1]]];
        // High-index bits (qubits above q) sit on the left of the kron.
        let hi = mat_identity(1 << (n - 1 - q));
        let lo = mat_identity(1 << q);
        kron(&kron(&hi, &u), &lo)
    };
    let c = |re: f64, im: f64| Complex64::new(re, im);
    match *gate {
        Gate::H { q } => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            embed_1q([[c(s, 0.0), c(s, 0.0)], [c(s, 0.0), c(-s, 0.0)]], q)
        }
        Gate::Ry { q, theta } => {
            let (sin, cos) = (theta / 2.0).sin_cos();
            embed_1q([[c(cos, 0.0), c(-sin, 0.0)], [c(sin, 0.0), c(cos, 0.0)]], q)
        }
        Gate::Rz { q, theta } => {
            let e = |sign: f64| Complex64::from_polar(1.0, sign * theta / 2.0);
            embed_1q([[e(-1.0), c(0.0, 0.0)], [c(0.0, 0.0), e(1.0)]], q)
        }
        Gate::Cx { control, target } => {
            let mut m = vec![vec![c(0.0, 0.0); dim]; dim];
            for j in 0..dim {
                let out = if j >> control & 1 == 1 { j ^ (1 << target) } else { j };
                m[out][j] = c(1.0, 0.0);
            }
            m
        }
        Gate::Zz { a, b, theta } => {
            let mut m = vec![vec![c(0.0, 0.0); dim]; dim];
            for (j, row) in m.iter_mut().enumerate() {
                let parity = (j >> a & 1) ^ (j >> b & 1);
                let sign = if parity == 0 { -1.0 } else { 1.0 };
                row[j] = Complex64::from_polar(1.0, sign * theta / 2.0);
            }
            m
        }
    }
}

fn mat_vec(m: &Mat, v: &[Complex64]) -> Vec<Complex64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn random_gate(n: usize, rng: &mut SplitMix64) -> Gate {
    let q = rng.below(n as u64) as usize;
    let theta = rng.uniform(-std::f64::consts::PI, std::f64::consts::PI);
    match rng.below(if n > 1 { 5 } else { 3 }) {
        0 => Gate::H { q },
        1 => Gate::Ry { q, theta },
        2 => Gate::Rz { q, theta },
        3 => {
            let mut t = rng.below(n as u64) as usize;
            while t == q {
                t = rng.below(n as u64) as usize;
            }
            Gate::Cx { control: q, target: t }
        }
        _ => {
            let mut b = rng.below(n as u64) as usize;
            while b == q {
                b = rng.below(n as u64) as usize;
            }
            Gate::Zz { a: q, b, theta }
        }
    }
}

fn random_state(n: usize, rng: &mut SplitMix64) -> Vec<Complex64> {
    let dim = 1usize << n;
    let mut amps: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.normal(), rng.normal()))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut amps {
        *a /= norm;
    }
    amps
}

fn criterion_1() -> Result<(), String> {
    let mut rng = SplitMix64::new(0xACC1);
    for case in 0..100 {
        let n = 1 + rng.below(3) as usize;
        let mut amps = random_state(n, &mut rng);
        let mut sv = StateVector::from_amplitudes(amps.clone())
            .map_err(|e| format!("case {case}: {e}"))?;
        for step in 0..5 {
            let gate = random_gate(n, &mut rng);
            sv.apply(&gate).map_err(|e| format!("case {case}: {e}"))?;
            amps = mat_vec(&gate_matrix(&gate, n), &amps);
            for (i, (a, b)) in sv.amplitudes().iter().zip(&amps).enumerate() {
                let err = (a - b).norm();
                if err > 1e-12 {
                    return Err(format!(
                        "case {case} step {step} ({gate:?}): amplitude {i} off by {err:e}"
                    ));
                }
            }
        }
    }
    for seq in 0..10 {
        let n = 1 + rng.below(6) as usize;
        let mut sv = StateVector::new(n).map_err(|e| e.to_string())?;
        for _ in 0..100 {
            sv.apply(&random_gate(n, &mut rng)).map_err(|e| e.to_string())?;
        }
        let drift = (sv.norm_sqr() - 1.0).abs();
        if drift > 1e-12 {
            return Err(format!("sequence {seq}: norm drifted by {drift:e} after 100 gates"));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------
// Criterion 2: parameter-shift vs finite differences
// ---------------------------------------------------------------------

fn criterion_2() -> Result<(), String> {
    let mut rng = SplitMix64::new(0xACC2);
    let h = 1e-6;
    for case in 0..100 {
        let cfg = QuantumLayerConfig {
            n_qubits: 1 + rng.below(4) as usize,
            feature_map_reps: 1 + rng.below(2) as usize,
            ansatz_reps: 1 + rng.below(2) as usize,
        };
        let mut layer = QuantumLayer::new(cfg).map_err(|e| e.to_string())?;
        let params: Vec<f64> = (0..layer.param_count())
            .map(|_| rng.uniform(-std::f64::consts::PI, std::f64::consts::PI))
            .collect();
        layer.set_params(&params).map_err(|e| e.to_string())?;
        let features: Vec<f64> = (0..cfg.n_qubits).map(|_| rng.uniform(-1.5, 1.5)).collect();

        let grad = layer.forward_with_grad(&features).map_err(|e| e.to_string())?;

        for k in 0..params.len() {
            let mut shifted = params.clone();
            shifted[k] += h;
            layer.set_params(&shifted).unwrap();
            let plus = layer.forward(&features).unwrap();
            shifted[k] -= 2.0 * h;
            layer.set_params(&shifted).unwrap();
            let minus = layer.forward(&features).unwrap();
            layer.set_params(&params).unwrap();
            let fd = (plus - minus) / (2.0 * h);
            if (fd - grad.dp_dparams[k]).abs() > 1e-5 {
                return Err(format!(
                    "case {case} ({cfg:?}): param {k} fd {fd} vs shift {}",
                    grad.dp_dparams[k]
                ));
            }
        }
        for i in 0..features.len() {
            let mut shifted = features.clone();
            shifted[i] += h;
            let plus = layer.forward(&shifted).unwrap();
            shifted[i] -= 2.0 * h;
            let minus = layer.forward(&shifted).unwrap();
            let fd = (plus - minus) / (2.0 * h);
            if (fd - grad.dp_dfeatures[i]).abs() > 1e-5 {
                return Err(format!(
                    "case {case} ({cfg:?}): feature {i} fd {fd} vs chained {}",
                    grad.dp_dfeatures[i]
                ));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------
// Criterion 3: hybrid end-to-end gradient
// ---------------------------------------------------------------------

fn criterion_3() -> Result<(), String> {
    let cfg = ModelConfig {
        net: NetConfig {
            input_side: 8,
            channels: vec![2],
            blocks_per_stage: 1,
            n_out: 2,
            head: HeadKind::Quantum,
        },
        qlayer: QuantumLayerConfig {
            n_qubits: 2,
            feature_map_reps: 1,
            ansatz_reps: 1,
        },
    };
    let mut model = HybridModel::new(cfg, 0xACC3).map_err(|e| e.to_string())?;
    let mut rng = SplitMix64::new(0x3D);
    let sample: Vec<f64> = (0..512).map(|_| rng.next_f64()).collect();
    let batch = HybridModel::batch_tensor(&[&sample], 8).unwrap();
    let y = 1u8;

    model.zero_grad();
    let (probs, cache) = model.forward_grad(&batch, Mode::Eval).map_err(|e| e.to_string())?;
    model
        .backward(&cache, &[bce_grad(probs[0], y)])
        .map_err(|e| e.to_string())?;
    let mut grads = Vec::new();
    model.visit_params(&mut |_, _, g| grads.extend_from_slice(g));

    let h = 1e-5;
    let n = grads.len();
    for k in 0..n {
        let mut loss_with = |delta: f64| -> f64 {
            let mut idx = 0;
            model.visit_params(&mut |_, v, _| {
                if k >= idx && k < idx + v.len() {
                    v[k - idx] += delta;
                }
                idx += v.len();
            });
            let p = model.predict(&batch).unwrap()[0];
            let mut idx = 0;
            model.visit_params(&mut |_, v, _| {
                if k >= idx && k < idx + v.len() {
                    v[k - idx] -= delta;
                }
                idx += v.len();
            });
            bce_loss(p, y)
        };
        let fd = (loss_with(h) - loss_with(-h)) / (2.0 * h);
        let tol = 1e-4 * fd.abs().max(grads[k].abs()) + 1e-6;
        if (fd - grads[k]).abs() > tol {
            return Err(format!(
                "parameter {k} of {n}: fd {fd} vs backprop {} (tol {tol:e})",
                grads[k]
            ));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------
// Criterion 4: AUC oracle
// ---------------------------------------------------------------------

fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            wins += if si > sj {
                1.0
            } else if si == sj {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / pairs
}

fn criterion_4() -> Result<(), String> {
    let (auc, _) = roc_auc(&[0.8, 0.6, 0.4, 0.2], &[1, 0, 1, 0]).map_err(|e| e.to_string())?;
    if auc != 0.75 {
        return Err(format!("hand example: expected exactly 0.75, got {auc}"));
    }
    let mut rng = SplitMix64::new(0xACC4);
    for trial in 0..1000 {
        let n = 2 + rng.below(50) as usize;
        let grid = if trial % 2 == 0 { 0 } else { 1 + rng.below(9) };
        let (scores, labels) = loop {
            let scores: Vec<f64> = (0..n)
                .map(|_| {
                    if grid == 0 {
                        rng.next_f64()
                    } else {
                        rng.below(grid + 1) as f64 / grid as f64
                    }
                })
                .collect();
            let labels: Vec<u8> = (0..n).map(|_| (rng.next_u64() & 1) as u8).collect();
            let pos = labels.iter().filter(|&&l| l == 1).count();
            if pos > 0 && pos < n {
                break (scores, labels);
            }
        };
        let (auc, _) = roc_auc(&scores, &labels).map_err(|e| e.to_string())?;
        let oracle = pairwise_auc(&scores, &labels);
        if (auc - oracle).abs() > 1e-12 {
            return Err(format!(
                "trial {trial}: trapezoid {auc} vs pairwise {oracle} (diff {:e})",
                (auc - oracle).abs()
            ));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------
// Criteria 5 & 6: synthetic benchmark + determinism
// ---------------------------------------------------------------------

struct BenchmarkRun {
    epoch_lines: Vec<String>,
    summary_line: String,
    test_acc: f64,
    test_auc: f64,
}

fn benchmark_configs() -> (NetConfig, QuantumLayerConfig, TrainConfig) {
    (
        NetConfig {
            input_side: 16,
            channels: vec![8, 16],
            blocks_per_stage: 1,
            n_out: 4,
            head: HeadKind::Quantum,
        },
        QuantumLayerConfig {
            n_qubits: 4,
            feature_map_reps: 2,
            ansatz_reps: 1,
        },
        TrainConfig {
            epochs: 20,
            batch_size: 16,
            learning_rate: 3e-3,
            seed: 42,
            head: HeadKind::Quantum,
            patience: 0,
            ..TrainConfig::default()
        },
    )
}

/// One full criterion-5 run for a head: generate → train 20 epochs →
/// evaluate the best-validation checkpoint on the test split.
fn run_benchmark(head: HeadKind, verbose: bool) -> Result<BenchmarkRun, String> {
    let (mut net, qlayer, mut cfg) = benchmark_configs();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = SyntheticSpec {
        n_per_class: 100,
        side: 16,
        seed: 42,
        difficulty: 0.2,
    };
    let manifest = generate_synthetic(dir.path(), &spec).map_err(|e| e.to_string())?;

    net.head = head;
    cfg.head = head;
    let mut model =
        HybridModel::new(ModelConfig { net, qlayer }, cfg.seed).map_err(|e| e.to_string())?;

    let side = 16;
    let train_data = load_split(&manifest, dir.path(), Split::Train, side).map_err(|e| e.to_string())?;
    let val_data = load_split(&manifest, dir.path(), Split::Val, side).map_err(|e| e.to_string())?;
    let test_data = load_split(&manifest, dir.path(), Split::Test, side).map_err(|e| e.to_string())?;

    let ckpt_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut epoch_lines = Vec::new();
    train(
        &mut model,
        &train_data,
        &val_data,
        &cfg,
        Some(ckpt_dir.path()),
        None,
        &mut |line| {
            if verbose {
                println!("      [{head:?}] {line}");
            }
            epoch_lines.push(line.to_string());
        },
    )
    .map_err(|e| e.to_string())?;

    let mut best = qres_core::checkpoint::load_checkpoint(&ckpt_dir.path().join("best.qrck"))
        .map_err(|e| e.to_string())?
        .model;
    let report = evaluate(&mut best, &test_data, cfg.threshold).map_err(|e| e.to_string())?;
    Ok(BenchmarkRun {
        epoch_lines,
        summary_line: report.summary_line(),
        test_acc: report.acc,
        test_auc: report.auc,
    })
}

fn check_column_order(line: &str) -> Result<(), String> {
    let positions: Vec<usize> = ["AUC=", "ACC=", "SEN=", "SPE="]
        .iter()
        .map(|k| {
            line.find(k)
                .ok_or_else(|| format!("summary line {line:?} missing {k}"))
        })
        .collect::<Result<_, _>>()?;
    if positions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(format!("summary line {line:?} not in AUC, ACC, SEN, SPE order"));
    }
    Ok(())
}

fn criterion_5() -> Result<(BenchmarkRun, BenchmarkRun), String> {
    let quantum = run_benchmark(HeadKind::Quantum, true)?;
    println!("      [Quantum] test:   {}", quantum.summary_line);
    if quantum.test_acc < 0.90 {
        return Err(format!(
            "quantum head test accuracy {:.4} < 0.90",
            quantum.test_acc
        ));
    }
    if quantum.test_auc < 0.95 {
        return Err(format!("quantum head test AUC {:.4} < 0.95", quantum.test_auc));
    }
    let classical = run_benchmark(HeadKind::Classical, true)?;
    println!("      [Classical] test: {}", classical.summary_line);
    check_column_order(&quantum.summary_line)?;
    check_column_order(&classical.summary_line)?;
    Ok((quantum, classical))
}

fn criterion_6(first: &(BenchmarkRun, BenchmarkRun)) -> Result<(), String> {
    let quantum = run_benchmark(HeadKind::Quantum, false)?;
    let classical = run_benchmark(HeadKind::Classical, false)?;
    for (name, a, b) in [
        ("quantum", &first.0, &quantum),
        ("classical", &first.1, &classical),
    ] {
        if a.epoch_lines != b.epoch_lines {
            let diff = a
                .epoch_lines
                .iter()
                .zip(&b.epoch_lines)
                .find(|(x, y)| x != y);
            return Err(format!("{name} head epoch logs differ between runs: {diff:?}"));
        }
        if a.summary_line != b.summary_line {
            return Err(format!(
                "{name} head test summaries differ: {:?} vs {:?}",
                a.summary_line, b.summary_line
            ));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------
// Criterion 7: preprocessing conformance
// ---------------------------------------------------------------------

fn criterion_7() -> Result<(), String> {
    let mut rng = SplitMix64::new(0xACC7);
    // Resize → normalize conformance over assorted source shapes.
    for (case, dims) in [(0, (9, 13, 7)), (1, (16, 16, 16)), (2, (5, 24, 11)), (3, (32, 8, 8))] {
        let len = dims.0 * dims.1 * dims.2;
        let voxels: Vec<f32> = (0..len).map(|_| rng.uniform(-3.0, 5.0) as f32).collect();
        let vol = Volume::new(dims, voxels).map_err(|e| e.to_string())?;
        for target in [12usize, 16] {
            let out = normalize_minmax(&resize_trilinear(&vol, target).map_err(|e| e.to_string())?);
            if out.dims != (target, target, target) {
                return Err(format!("case {case}: dims {:?} != {target}³", out.dims));
            }
            let min = out.voxels.iter().cloned().fold(f32::INFINITY, f32::min);
            let max = out.voxels.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
            if min != 0.0 || max != 1.0 {
                return Err(format!(
                    "case {case} target {target}: range [{min}, {max}] != [0, 1]"
                ));
            }
        }
    }
    // Subject disjointness across 1000 randomized split trials.
    for trial in 0..1000u64 {
        let n0 = 3 + rng.below(40) as usize;
        let n1 = 3 + rng.below(40) as usize;
        let mut entries = Vec::new();
        for (label, n) in [(0u8, n0), (1u8, n1)] {
            for s in 0..n {
                // Several volumes can share a subject; keep them together.
                let copies = 1 + rng.below(3);
                for c in 0..copies {
                    entries.push(ManifestEntry {
                        path: format!("c{label}_{s}_{c}.qvol"),
                        label,
                        subject_id: format!("subj{label}_{s}"),
                        split: Split::Train,
                    });
                }
            }
        }
        let manifest = stratified_split(&entries, (0.65, 0.15, 0.20), trial)
            .map_err(|e| format!("trial {trial}: {e}"))?;
        manifest
            .check_subjects_disjoint()
            .map_err(|e| format!("trial {trial}: {e}"))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------
// Harness
// ---------------------------------------------------------------------

fn report(
    failures: &mut Vec<String>,
    number: u32,
    name: &str,
    budget: Option<Duration>,
    outcome: Result<(), String>,
    elapsed: Duration,
) {
    let within_budget = budget.map_or(true, |b| elapsed <= b);
    let budget_note = match budget {
        Some(b) => format!(" (budget {:.0?})", b),
        None => String::new(),
    };
    match (&outcome, within_budget) {
        (Ok(()), true) => {
            println!("[PASS] criterion {number}: {name} — {elapsed:.2?}{budget_note}");
        }
        (Ok(()), false) => {
            println!("[FAIL] criterion {number}: {name} — over budget: {elapsed:.2?}{budget_note}");
            failures.push(format!("criterion {number} exceeded its time budget ({elapsed:.2?})"));
        }
        (Err(e), _) => {
            println!("[FAIL] criterion {number}: {name} — {e} ({elapsed:.2?}{budget_note})");
            failures.push(format!("criterion {number}: {e}"));
        }
    }
}

#[test]
fn acceptance_criteria() {
    let mut failures = Vec::new();

    let t = Instant::now();
    let outcome = criterion_1();
    report(
        &mut failures,
        1,
        "statevector matches dense-matrix oracles (1e-12); norm preserved over 100-gate sequences",
        Some(Duration::from_secs(5)),
        outcome,
        t.elapsed(),
    );

    let t = Instant::now();
    let outcome = criterion_2();
    report(
        &mut failures,
        2,
        "parameter-shift gradients (params + encoded features) match finite differences (1e-5)",
        Some(Duration::from_secs(30)),
        outcome,
        t.elapsed(),
    );

    let t = Instant::now();
    let outcome = criterion_3();
    report(
        &mut failures,
        3,
        "hybrid end-to-end gradient check on every parameter (1e-4 relative)",
        Some(Duration::from_secs(120)),
        outcome,
        t.elapsed(),
    );

    let t = Instant::now();
    let outcome = criterion_4();
    report(
        &mut failures,
        4,
        "trapezoidal AUC equals Mann-Whitney pair counting (1e-12); hand example exact",
        None,
        outcome,
        t.elapsed(),
    );

    let t = Instant::now();
    let five = criterion_5();
    let five_elapsed = t.elapsed();
    match five {
        Ok(runs) => {
            report(
                &mut failures,
                5,
                "synthetic benchmark: quantum head reaches test acc ≥ 0.90, AUC ≥ 0.95 in ≤ 20 epochs; both heads report AUC/ACC/SEN/SPE",
                Some(Duration::from_secs(900)),
                Ok(()),
                five_elapsed,
            );

            let t = Instant::now();
            let outcome = criterion_6(&runs);
            report(
                &mut failures,
                6,
                "repeating the benchmark reproduces every logged metric bit-identically",
                None,
                outcome,
                t.elapsed(),
            );
        }
        Err(e) => {
            report(
                &mut failures,
                5,
                "synthetic benchmark: quantum head reaches test acc ≥ 0.90, AUC ≥ 0.95 in ≤ 20 epochs; both heads report AUC/ACC/SEN/SPE",
                Some(Duration::from_secs(900)),
                Err(e),
                five_elapsed,
            );
            println!("[FAIL] criterion 6: skipped (criterion 5 failed)");
            failures.push("criterion 6: skipped because criterion 5 failed".to_string());
        }
    }

    let t = Instant::now();
    let outcome = criterion_7();
    report(
        &mut failures,
        7,
        "resize→normalize emits target³ volumes spanning [0,1]; splits subject-disjoint over 1000 trials",
        None,
        outcome,
        t.elapsed(),
    );

    assert!(
        failures.is_empty(),
        "{} acceptance criteria failed:\n  {}",
        failures.len(),
        failures.join("\n  ")
    );
}

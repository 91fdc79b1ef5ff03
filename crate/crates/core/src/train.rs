//! Minibatch training: BCE loss, bias-corrected Adam, seeded epoch
//! shuffling, validation-AUC model selection, early stopping, and
//! bit-exact resume from checkpoints.
//!
//! Determinism contract: (seed, configs, dataset) fixes every logged
//! number. To make "save, reload, continue" indistinguishable from an
//! uninterrupted run, all trainable state — parameters, batch-norm
//! buffers, Adam moments — is rounded through f32 at each epoch
//! boundary (checkpoints store f32), *before* the validation pass that
//! produces the epoch's logged metrics.

use std::path::{Path, PathBuf};

use crate::checkpoint::{load_checkpoint, save_checkpoint, OptimizerState};
use crate::cnn3d::{HeadKind, Mode, NetConfig};
use crate::data::{load_split, Manifest, Split, SplitData};
use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::model::{HybridModel, ModelConfig};
use crate::qlayer::QuantumLayerConfig;
use crate::rng::SplitMix64;

/// RNG stream id for the epoch shuffle, separating it from weight init.
const SHUFFLE_STREAM: u64 = 0x73687566; // "shuf"

/// Samples per forward pass during inference-only evaluation (a memory
/// bound; eval-mode results are independent of the batching).
const EVAL_BATCH: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub seed: u64,
    pub head: HeadKind,
    /// Stop after this many epochs without a validation-AUC
    /// improvement; 0 disables early stopping.
    pub patience: usize,
    /// Decision threshold for accuracy-type metrics.
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 16,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            seed: 0,
            head: HeadKind::Quantum,
            patience: 0,
            threshold: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::argument("epochs and batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::argument(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::argument(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.eps_adam > 0.0) {
            return Err(Error::argument(format!(
                "eps_adam must be positive, got {}",
                self.eps_adam
            )));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::argument(format!(
                "threshold {} outside [0, 1]",
                self.threshold
            )));
        }
        Ok(())
    }
}

const BCE_CLIP: f64 = 1e-7;

fn clip_prob(p: f64) -> f64 {
    p.clamp(BCE_CLIP, 1.0 - BCE_CLIP)
}

/// Binary cross-entropy −[y·ln p + (1−y)·ln(1−p)], with p clipped to
/// [1e-7, 1−1e-7] so the logs stay finite.
pub fn bce_loss(p: f64, y: u8) -> f64 {
    let p = clip_prob(p);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// dL/dp = (p − y)/(p(1−p)), evaluated on the clipped probability.
pub fn bce_grad(p: f64, y: u8) -> f64 {
    let p = clip_prob(p);
    (p - f64::from(y)) / (p * (1.0 - p))
}

/// One scalar Adam update. `c1`/`c2` are the bias corrections
/// 1 − β₁ᵗ and 1 − β₂ᵗ for the *incremented* step count t.
#[allow(clippy::too_many_arguments)]
fn adam_element(
    w: &mut f64,
    g: f64,
    m: &mut f64,
    v: &mut f64,
    c1: f64,
    c2: f64,
    cfg: &TrainConfig,
) {
    *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
    *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
    let m_hat = *m / c1;
    let v_hat = *v / c2;
    *w -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps_adam);
}

/// Adam state across steps: per-parameter first/second moments plus the
/// shared step counter. Buffers are allocated lazily on the first step
/// to match the model's parameter walk.
#[derive(Debug, Clone, Default)]
pub struct Adam {
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new() -> Adam {
        Adam::default()
    }

    /// Rebuild from checkpointed state.
    pub fn from_state(step: u64, m: Vec<Vec<f64>>, v: Vec<Vec<f64>>) -> Adam {
        Adam { step, m, v }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn moments(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.m, &self.v)
    }

    /// Apply one update using the gradients currently stored in the
    /// model. Moment buffers must match the parameter walk.
    pub fn step(&mut self, model: &mut HybridModel, cfg: &TrainConfig) -> Result<()> {
        if self.m.is_empty() {
            model.visit_params(&mut |_, value, _| {
                self.m.push(vec![0.0; value.len()]);
                self.v.push(vec![0.0; value.len()]);
            });
        }
        self.step += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.step as i32);
        let c2 = 1.0 - cfg.beta2.powi(self.step as i32);
        let mut idx = 0;
        let mut mismatch = None;
        let (m, v) = (&mut self.m, &mut self.v);
        model.visit_params(&mut |_, value, grad| {
            if mismatch.is_some() {
                return;
            }
            let ok = idx < m.len() && m[idx].len() == value.len() && v[idx].len() == value.len();
            if !ok {
                mismatch = Some(idx);
                return;
            }
            for (j, w) in value.iter_mut().enumerate() {
                adam_element(w, grad[j], &mut m[idx][j], &mut v[idx][j], c1, c2, cfg);
            }
            idx += 1;
        });
        if let Some(i) = mismatch {
            return Err(Error::State(format!(
                "optimizer moment buffer {i} does not match the model's parameters"
            )));
        }
        if idx != self.m.len() {
            return Err(Error::State(format!(
                "optimizer holds {} moment buffers but the model has {idx} parameter tensors",
                self.m.len()
            )));
        }
        Ok(())
    }

    /// Round moments through f32 (same epoch-boundary contract as the
    /// model's parameters).
    pub fn quantize_f32(&mut self) {
        for buf in self.m.iter_mut().chain(self.v.iter_mut()) {
            for x in buf {
                *x = *x as f32 as f64;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auc: f64,
    pub val_acc: f64,
}

impl EpochLog {
    pub fn line(&self) -> String {
        format!(
            "{}  {:.6}  {:.6}  {:.6}",
            self.epoch, self.train_loss, self.val_auc, self.val_acc
        )
    }
}

#[derive(Debug)]
pub struct TrainOutcome {
    /// One entry per epoch run in this call.
    pub log: Vec<EpochLog>,
    pub epochs_run: usize,
    pub best_val_auc: f64,
    /// Epoch (1-based, counted across resumes) that produced the best
    /// validation AUC.
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub best_path: Option<PathBuf>,
    pub last_path: Option<PathBuf>,
}

fn check_data(model: &HybridModel, data: &SplitData, what: &str) -> Result<()> {
    if data.is_empty() {
        return Err(Error::argument(format!("{what} split is empty")));
    }
    let side = model.config().net.input_side;
    let want = side * side * side;
    for (i, s) in data.samples.iter().enumerate() {
        if s.len() != want {
            return Err(Error::argument(format!(
                "{what} sample {i} has {} voxels but the model expects {side}³ = {want}",
                s.len()
            )));
        }
    }
    Ok(())
}

/// Inference over a whole split, in eval mode, producing the metric
/// report at the given decision threshold.
pub fn evaluate(model: &mut HybridModel, data: &SplitData, threshold: f64) -> Result<EvalReport> {
    check_data(model, data, "evaluation")?;
    let side = model.config().net.input_side;
    let mut scores = Vec::with_capacity(data.len());
    let mut start = 0;
    while start < data.len() {
        let end = (start + EVAL_BATCH).min(data.len());
        let rows: Vec<&[f64]> = data.samples[start..end]
            .iter()
            .map(|s| s.as_slice())
            .collect();
        let batch = HybridModel::batch_tensor(&rows, side)?;
        scores.extend(model.predict(&batch)?);
        start = end;
    }
    EvalReport::from_scores(&scores, &data.labels, threshold)
}

/// Run the training loop on an already-constructed model.
///
/// `out_dir`, when given, receives `last.qrck` every epoch and
/// `best.qrck` whenever validation AUC improves. `resume` carries the
/// optimizer/schedule state from a loaded checkpoint; training then
/// continues from the epoch after `resume.epochs_done` as if it had
/// never stopped. Epoch lines (`epoch  train_loss  val_auc  val_acc`)
/// go to `log`.
pub fn train(
    model: &mut HybridModel,
    train_data: &SplitData,
    val_data: &SplitData,
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
    resume: Option<OptimizerState>,
    log: &mut dyn FnMut(&str),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if cfg.head != model.head_kind() {
        return Err(Error::argument(format!(
            "config asks for a {:?} head but the model was built with {:?}",
            cfg.head,
            model.head_kind()
        )));
    }
    check_data(model, train_data, "training")?;
    check_data(model, val_data, "validation")?;
    if train_data.len() < 2 {
        return Err(Error::argument(
            "training needs at least 2 samples (batch statistics are undefined for 1)",
        ));
    }

    let side = model.config().net.input_side;
    let (mut adam, mut shuffle_rng, mut best_val_auc, mut epochs_since_best, start_epoch) =
        match resume {
            None => (
                Adam::new(),
                SplitMix64::derive(cfg.seed, SHUFFLE_STREAM),
                f64::NEG_INFINITY,
                0usize,
                0usize,
            ),
            Some(state) => (
                Adam::from_state(state.step, state.m, state.v),
                SplitMix64::from_state(state.shuffle_state),
                state.best_val_auc,
                state.epochs_since_best as usize,
                state.epochs_done as usize,
            ),
        };

    let best_path = out_dir.map(|d| d.join("best.qrck"));
    let last_path = out_dir.map(|d| d.join("last.qrck"));
    let mut out_log = Vec::new();
    let mut stopped_early = false;
    let mut last_epoch = start_epoch;

    for epoch in (start_epoch + 1)..=cfg.epochs {
        let mut order: Vec<usize> = (0..train_data.len()).collect();
        shuffle_rng.shuffle(&mut order);
        let mut batches: Vec<Vec<usize>> = order
            .chunks(cfg.batch_size)
            .map(|c| c.to_vec())
            .collect();
        // A trailing single-sample batch has no train-mode batch
        // statistics; fold it into its neighbor instead of dropping it.
        if batches.len() > 1 && batches.last().unwrap().len() == 1 {
            let orphan = batches.pop().unwrap();
            batches.last_mut().unwrap().extend(orphan);
        }

        let mut loss_sum = 0.0;
        for batch in &batches {
            let rows: Vec<&[f64]> = batch
                .iter()
                .map(|&i| train_data.samples[i].as_slice())
                .collect();
            let input = HybridModel::batch_tensor(&rows, side)?;
            model.zero_grad();
            let (probs, cache) = model.forward_grad(&input, Mode::Train)?;
            let mut d_probs = Vec::with_capacity(batch.len());
            for (j, &i) in batch.iter().enumerate() {
                let y = train_data.labels[i];
                let loss = bce_loss(probs[j], y);
                if !loss.is_finite() {
                    return Err(Error::State(format!(
                        "non-finite loss at epoch {epoch} (p = {})",
                        probs[j]
                    )));
                }
                loss_sum += loss;
                d_probs.push(bce_grad(probs[j], y) / batch.len() as f64);
            }
            model.backward(&cache, &d_probs)?;
            adam.step(model, cfg)?;
        }
        let train_loss = loss_sum / train_data.len() as f64;

        // Epoch boundary: freeze state exactly as a checkpoint stores it,
        // then measure. This keeps logged metrics identical whether or
        // not the run is interrupted here.
        model.quantize_f32();
        adam.quantize_f32();

        let report = evaluate(model, val_data, cfg.threshold)?;
        let entry = EpochLog {
            epoch,
            train_loss,
            val_auc: report.auc,
            val_acc: report.acc,
        };
        log(&entry.line());

        let improved = entry.val_auc > best_val_auc;
        if improved {
            best_val_auc = entry.val_auc;
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
        }
        out_log.push(entry);
        last_epoch = epoch;

        if out_dir.is_some() {
            let (m, v) = adam.moments();
            let state = OptimizerState {
                step: adam.step_count(),
                epochs_done: epoch as u32,
                best_val_auc,
                epochs_since_best: epochs_since_best as u32,
                shuffle_state: shuffle_rng.state(),
                m: m.to_vec(),
                v: v.to_vec(),
            };
            save_checkpoint(model, Some(&state), last_path.as_ref().unwrap())?;
            if improved {
                save_checkpoint(model, Some(&state), best_path.as_ref().unwrap())?;
            }
        }

        if cfg.patience > 0 && epochs_since_best >= cfg.patience {
            stopped_early = true;
            break;
        }
    }

    Ok(TrainOutcome {
        epochs_run: out_log.len(),
        log: out_log,
        best_val_auc,
        best_epoch: last_epoch - epochs_since_best,
        stopped_early,
        best_path,
        last_path,
    })
}

/// Load splits from a manifest, build (or resume) the model, and train.
///
/// The head requested in `cfg` overrides `net_cfg.head`, making the
/// train config the single source of truth for head selection.
#[allow(clippy::too_many_arguments)]
pub fn train_from_manifest(
    manifest: &Manifest,
    base_dir: &Path,
    mut net_cfg: NetConfig,
    qlayer_cfg: QuantumLayerConfig,
    cfg: &TrainConfig,
    out_dir: &Path,
    resume: Option<&Path>,
    log: &mut dyn FnMut(&str),
) -> Result<(HybridModel, TrainOutcome)> {
    for split in [Split::Train, Split::Val, Split::Test] {
        if manifest.split_entries(split).is_empty() {
            return Err(Error::argument(format!(
                "manifest has no {} entries",
                split.as_str()
            )));
        }
    }
    net_cfg.head = cfg.head;
    let model_cfg = ModelConfig {
        net: net_cfg,
        qlayer: qlayer_cfg,
    };
    let (mut model, resume_state) = match resume {
        None => (HybridModel::new(model_cfg, cfg.seed)?, None),
        Some(path) => {
            let ckpt = load_checkpoint(path)?;
            if ckpt.model.config() != &model_cfg {
                return Err(Error::argument(format!(
                    "checkpoint {} was built with a different configuration",
                    path.display()
                )));
            }
            let state = ckpt.optimizer.ok_or_else(|| {
                Error::argument(format!(
                    "checkpoint {} has no optimizer state to resume from",
                    path.display()
                ))
            })?;
            (ckpt.model, Some(state))
        }
    };
    let side = model.config().net.input_side;
    let train_data = load_split(manifest, base_dir, Split::Train, side)?;
    let val_data = load_split(manifest, base_dir, Split::Val, side)?;
    std::fs::create_dir_all(out_dir)?;
    let outcome = train(
        &mut model,
        &train_data,
        &val_data,
        cfg,
        Some(out_dir),
        resume_state,
        log,
    )?;
    Ok((model, outcome))
}

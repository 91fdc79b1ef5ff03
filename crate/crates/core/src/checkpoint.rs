//! Versioned binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset 0   magic  "QRCK"
//! offset 4   format version u32 = 1
//! offset 8   config block:
//!              input_side u32, channel count u32, channels u32×count,
//!              blocks_per_stage u32, n_out u32, head u8 (0 classical,
//!              1 quantum), n_qubits u32, feature_map_reps u32,
//!              ansatz_reps u32, init_seed u64
//! then       parameter tensors in the model's fixed walk order,
//!              each: rank u32, dims u32×rank, f32 data
//! then       buffer tensors (batch-norm running stats), same encoding
//! then       optimizer flag u8; when 1:
//!              step u64, epochs_done u32, best_val_auc f64 (raw bits),
//!              epochs_since_best u32, shuffle RNG state u64,
//!              Adam first moments then second moments, tensor-encoded
//!              with the matching parameter's shape
//! ```
//!
//! Values are stored as f32; training rounds its state through f32 at
//! every epoch boundary, so a save → load cycle is bit-transparent.

use std::path::Path;

use crate::cnn3d::{HeadKind, NetConfig};
use crate::error::{Error, Result};
use crate::model::{HybridModel, ModelConfig};
use crate::qlayer::QuantumLayerConfig;

pub const QRCK_MAGIC: &[u8; 4] = b"QRCK";
pub const QRCK_VERSION: u32 = 1;

/// Optimizer and schedule state needed to resume training exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    /// Adam update count (bias-correction exponent).
    pub step: u64,
    pub epochs_done: u32,
    pub best_val_auc: f64,
    pub epochs_since_best: u32,
    /// The epoch-shuffle RNG's internal state.
    pub shuffle_state: u64,
    /// Adam first moments, one flat buffer per parameter tensor.
    pub m: Vec<Vec<f64>>,
    /// Adam second moments, same shapes as `m`.
    pub v: Vec<Vec<f64>>,
}

#[derive(Debug)]
pub struct Checkpoint {
    pub model: HybridModel,
    pub optimizer: Option<OptimizerState>,
}

struct ByteWriter {
    bytes: Vec<u8>,
}

impl ByteWriter {
    fn new() -> Self {
        ByteWriter { bytes: Vec::new() }
    }
    fn u8(&mut self, v: u8) {
        self.bytes.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.bytes.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.bytes.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.bytes.extend_from_slice(&v.to_le_bytes());
    }
    fn tensor(&mut self, dims: &[usize], data: &[f64]) {
        self.u32(dims.len() as u32);
        for &d in dims {
            self.u32(d as u32);
        }
        for &v in data {
            self.bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        ByteReader { bytes, pos: 0 }
    }

    fn offset(&self) -> u64 {
        self.pos as u64
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::format(
                self.pos as u64,
                format!("file ends inside {what}"),
            ));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let b = self.take(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        let b = self.take(8, what)?;
        Ok(f64::from_le_bytes(b.try_into().unwrap()))
    }

    /// Read one tensor record, insisting its shape matches `want_dims`.
    fn tensor(&mut self, want_dims: &[usize], what: &str) -> Result<Vec<f64>> {
        let at = self.offset();
        let rank = self.u32(what)? as usize;
        if rank != want_dims.len() {
            return Err(Error::format(
                at,
                format!("{what}: rank {rank} does not match expected shape {want_dims:?}"),
            ));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(self.u32(what)? as usize);
        }
        if dims != want_dims {
            return Err(Error::format(
                at,
                format!("{what}: stored shape {dims:?} does not match expected {want_dims:?}"),
            ));
        }
        let len: usize = dims.iter().product();
        let raw = self.take(len * 4, what)?;
        Ok(raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect())
    }
}

/// Serialize model (+ optional optimizer state) to bytes.
pub fn checkpoint_to_bytes(model: &mut HybridModel, optimizer: Option<&OptimizerState>) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes.extend_from_slice(QRCK_MAGIC);
    w.u32(QRCK_VERSION);

    let cfg = model.config().clone();
    w.u32(cfg.net.input_side as u32);
    w.u32(cfg.net.channels.len() as u32);
    for &c in &cfg.net.channels {
        w.u32(c as u32);
    }
    w.u32(cfg.net.blocks_per_stage as u32);
    w.u32(cfg.net.n_out as u32);
    w.u8(match cfg.net.head {
        HeadKind::Classical => 0,
        HeadKind::Quantum => 1,
    });
    w.u32(cfg.qlayer.n_qubits as u32);
    w.u32(cfg.qlayer.feature_map_reps as u32);
    w.u32(cfg.qlayer.ansatz_reps as u32);
    w.u64(model.net().init_seed());

    model.visit_params(&mut |dims, value, _| w.tensor(dims, value));
    model.visit_buffers(&mut |t| w.tensor(t.dims(), t.data()));

    match optimizer {
        None => w.u8(0),
        Some(opt) => {
            w.u8(1);
            w.u64(opt.step);
            w.u32(opt.epochs_done);
            w.f64(opt.best_val_auc);
            w.u32(opt.epochs_since_best);
            w.u64(opt.shuffle_state);
            let mut idx = 0;
            model.visit_params(&mut |dims, _, _| {
                w.tensor(dims, &opt.m[idx]);
                idx += 1;
            });
            idx = 0;
            model.visit_params(&mut |dims, _, _| {
                w.tensor(dims, &opt.v[idx]);
                idx += 1;
            });
        }
    }
    w.bytes
}

/// Reconstruct a checkpoint from bytes, validating every shape against
/// the config block.
pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = ByteReader::new(bytes);

    let magic = r.take(4, "the magic header")?;
    if magic != QRCK_MAGIC {
        return Err(Error::format(
            0,
            format!("bad magic {:?}, expected \"QRCK\"", String::from_utf8_lossy(magic)),
        ));
    }
    let version = r.u32("the version field")?;
    if version != QRCK_VERSION {
        return Err(Error::format(
            4,
            format!("unsupported version {version}, expected {QRCK_VERSION}"),
        ));
    }

    let config_at = r.offset();
    let input_side = r.u32("the config block")? as usize;
    let n_channels = r.u32("the config block")? as usize;
    if n_channels > 64 {
        return Err(Error::format(
            config_at + 4,
            format!("implausible channel count {n_channels}"),
        ));
    }
    let mut channels = Vec::with_capacity(n_channels);
    for _ in 0..n_channels {
        channels.push(r.u32("the config block")? as usize);
    }
    let blocks_per_stage = r.u32("the config block")? as usize;
    let n_out = r.u32("the config block")? as usize;
    let head = match r.u8("the config block")? {
        0 => HeadKind::Classical,
        1 => HeadKind::Quantum,
        other => {
            return Err(Error::format(
                r.offset() - 1,
                format!("unknown head tag {other}"),
            ))
        }
    };
    let n_qubits = r.u32("the config block")? as usize;
    let feature_map_reps = r.u32("the config block")? as usize;
    let ansatz_reps = r.u32("the config block")? as usize;
    let init_seed = r.u64("the config block")?;

    let cfg = ModelConfig {
        net: NetConfig {
            input_side,
            channels,
            blocks_per_stage,
            n_out,
            head,
        },
        qlayer: QuantumLayerConfig {
            n_qubits,
            feature_map_reps,
            ansatz_reps,
        },
    };
    let mut model = HybridModel::new(cfg, init_seed)
        .map_err(|e| Error::format(config_at, format!("config block invalid: {e}")))?;

    // Fill parameters, then buffers, tracking the first I/O error from
    // inside the walk (the visitor itself cannot return early).
    let mut pending: Result<()> = Ok(());
    model.visit_params(&mut |dims, value, _| {
        if pending.is_ok() {
            match r.tensor(dims, "a parameter tensor") {
                Ok(data) => value.copy_from_slice(&data),
                Err(e) => pending = Err(e),
            }
        }
    });
    pending?;
    let mut pending: Result<()> = Ok(());
    model.visit_buffers(&mut |t| {
        if pending.is_ok() {
            match r.tensor(t.dims(), "a buffer tensor") {
                Ok(data) => t.data_mut().copy_from_slice(&data),
                Err(e) => pending = Err(e),
            }
        }
    });
    pending?;

    let optimizer = match r.u8("the optimizer flag")? {
        0 => None,
        1 => {
            let step = r.u64("the optimizer state")?;
            let epochs_done = r.u32("the optimizer state")?;
            let best_val_auc = r.f64("the optimizer state")?;
            let epochs_since_best = r.u32("the optimizer state")?;
            let shuffle_state = r.u64("the optimizer state")?;
            let mut m = Vec::new();
            let mut pending: Result<()> = Ok(());
            model.visit_params(&mut |dims, _, _| {
                if pending.is_ok() {
                    match r.tensor(dims, "a first-moment tensor") {
                        Ok(data) => m.push(data),
                        Err(e) => pending = Err(e),
                    }
                }
            });
            pending?;
            let mut v = Vec::new();
            let mut pending: Result<()> = Ok(());
            model.visit_params(&mut |dims, _, _| {
                if pending.is_ok() {
                    match r.tensor(dims, "a second-moment tensor") {
                        Ok(data) => v.push(data),
                        Err(e) => pending = Err(e),
                    }
                }
            });
            pending?;
            Some(OptimizerState {
                step,
                epochs_done,
                best_val_auc,
                epochs_since_best,
                shuffle_state,
                m,
                v,
            })
        }
        other => {
            return Err(Error::format(
                r.offset() - 1,
                format!("optimizer flag must be 0 or 1, got {other}"),
            ))
        }
    };

    if r.pos != bytes.len() {
        return Err(Error::format(
            r.offset(),
            format!("{} trailing bytes after the checkpoint", bytes.len() - r.pos),
        ));
    }
    Ok(Checkpoint { model, optimizer })
}

pub fn save_checkpoint(
    model: &mut HybridModel,
    optimizer: Option<&OptimizerState>,
    path: &Path,
) -> Result<()> {
    std::fs::write(path, checkpoint_to_bytes(model, optimizer))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path)?;
    checkpoint_from_bytes(&bytes)
}

//! Run configuration: a TOML file mirroring the network, quantum-layer,
//! and training settings plus data paths. Every field has a default, so
//! an empty file (or no file) is valid; unknown keys are rejected; CLI
//! flags override file values.

use std::path::{Path, PathBuf};

use qres_core::cnn3d::{HeadKind, NetConfig};
use qres_core::qlayer::QuantumLayerConfig;
use qres_core::train::TrainConfig;
use qres_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Head selection as it appears in config files and flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum HeadChoice {
    Quantum,
    Classical,
}

impl From<HeadChoice> for HeadKind {
    fn from(h: HeadChoice) -> HeadKind {
        match h {
            HeadChoice::Quantum => HeadKind::Quantum,
            HeadChoice::Classical => HeadKind::Classical,
        }
    }
}

impl std::fmt::Display for HeadChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            HeadChoice::Quantum => "quantum",
            HeadChoice::Classical => "classical",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    /// Dataset directory containing `manifest.tsv`.
    pub dir: PathBuf,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection { dir: PathBuf::from("data") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetSection {
    /// Cube side every volume is resized to before entering the network.
    pub input_side: usize,
    /// Output channels per stage; stages after the first downsample 2×.
    pub channels: Vec<usize>,
    pub blocks_per_stage: usize,
    /// Feature count handed to the head (qubit count for the quantum head).
    pub n_out: usize,
}

impl Default for NetSection {
    fn default() -> Self {
        NetSection {
            input_side: 16,
            channels: vec![8, 16],
            blocks_per_stage: 1,
            n_out: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QlayerSection {
    pub n_qubits: usize,
    pub feature_map_reps: usize,
    pub ansatz_reps: usize,
}

impl Default for QlayerSection {
    fn default() -> Self {
        QlayerSection {
            n_qubits: 4,
            feature_map_reps: 2,
            ansatz_reps: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub seed: u64,
    pub head: HeadChoice,
    /// Epochs without a validation-AUC improvement before stopping;
    /// 0 disables early stopping.
    pub patience: usize,
    /// Decision threshold for accuracy-type metrics.
    pub threshold: f64,
    /// Directory receiving `best.qrck`, `last.qrck`, and `train.log`.
    pub out_dir: PathBuf,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            epochs: 20,
            batch_size: 16,
            learning_rate: 3e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            seed: 42,
            head: HeadChoice::Quantum,
            patience: 0,
            threshold: 0.5,
            out_dir: PathBuf::from("runs"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataSection,
    pub net: NetSection,
    pub qlayer: QlayerSection,
    pub train: TrainSection,
}

impl RunConfig {
    /// Load from a TOML file; a missing `path` of `None` yields defaults.
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    Error::Argument(format!("cannot read config {}: {e}", p.display()))
                })?;
                toml::from_str(&text)
                    .map_err(|e| Error::Argument(format!("config {}: {e}", p.display())))
            }
        }
    }

    pub fn net_config(&self) -> NetConfig {
        NetConfig {
            input_side: self.net.input_side,
            channels: self.net.channels.clone(),
            blocks_per_stage: self.net.blocks_per_stage,
            n_out: self.net.n_out,
            head: self.train.head.into(),
        }
    }

    pub fn qlayer_config(&self) -> QuantumLayerConfig {
        QuantumLayerConfig {
            n_qubits: self.qlayer.n_qubits,
            feature_map_reps: self.qlayer.feature_map_reps,
            ansatz_reps: self.qlayer.ansatz_reps,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            learning_rate: self.train.learning_rate,
            beta1: self.train.beta1,
            beta2: self.train.beta2,
            eps_adam: self.train.eps_adam,
            seed: self.train.seed,
            head: self.train.head.into(),
            patience: self.train.patience,
            threshold: self.train.threshold,
        }
    }
}

//! The hybrid classifier: residual 3D front-end plus an interchangeable
//! head. The quantum head encodes the network's feature vector into a
//! variational circuit and reads a probability off the parity
//! observable; the classical head is a dense layer to one logit plus a
//! sigmoid. Both heads expose identical forward/backward surfaces so
//! the training loop is head-agnostic.

use crate::cnn3d::{sigmoid, Dense, Mode, NetCache, NetConfig, ResNet3d};
use crate::error::{Error, Result};
use crate::qlayer::{QuantumForward, QuantumLayer, QuantumLayerConfig};
use crate::rng::SplitMix64;
use crate::tensor::Tensor;

pub use crate::cnn3d::HeadKind;

/// RNG stream id separating head init from the net's own init stream.
const HEAD_STREAM: u64 = 0x68656164; // "head"

/// Full model shape. `qlayer` is consulted only when `net.head` is
/// [`HeadKind::Quantum`], in which case its qubit count must equal the
/// net's feature count.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub net: NetConfig,
    pub qlayer: QuantumLayerConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            net: NetConfig::default(),
            qlayer: QuantumLayerConfig {
                n_qubits: NetConfig::default().n_out,
                feature_map_reps: 2,
                ansatz_reps: 1,
            },
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        if self.net.head == HeadKind::Quantum && self.qlayer.n_qubits != self.net.n_out {
            return Err(Error::argument(format!(
                "quantum head needs one qubit per feature: net emits {} features but the layer has {} qubits",
                self.net.n_out, self.qlayer.n_qubits
            )));
        }
        Ok(())
    }
}

/// The classifier head: consumes one feature vector, emits one
/// probability.
#[derive(Debug, Clone)]
pub enum Head {
    Quantum {
        layer: QuantumLayer,
        /// dL/dθ for each ansatz angle, accumulated by `backward`.
        grad: Vec<f64>,
    },
    Classical {
        dense: Dense,
    },
}

/// Per-batch activations the backward pass consumes.
pub struct BatchCache {
    net: NetCache,
    head: HeadCache,
}

enum HeadCache {
    Quantum(Vec<QuantumForward>),
    Classical { features: Tensor, probs: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct HybridModel {
    net: ResNet3d,
    head: Head,
    cfg: ModelConfig,
}

impl HybridModel {
    /// Build and randomly initialize. The seed fixes every weight: the
    /// net uses it directly, the head a derived stream.
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<HybridModel> {
        cfg.validate()?;
        let net = ResNet3d::new(cfg.net.clone(), seed)?;
        let mut head_rng = SplitMix64::derive(seed, HEAD_STREAM);
        let head = match cfg.net.head {
            HeadKind::Quantum => {
                let mut layer = QuantumLayer::new(cfg.qlayer)?;
                layer.init_params(&mut head_rng);
                let grad = vec![0.0; layer.param_count()];
                Head::Quantum { layer, grad }
            }
            HeadKind::Classical => Head::Classical {
                dense: Dense::new(cfg.net.n_out, 1, &mut head_rng),
            },
        };
        Ok(HybridModel { net, head, cfg })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn head_kind(&self) -> HeadKind {
        self.cfg.net.head
    }

    pub fn net(&self) -> &ResNet3d {
        &self.net
    }

    pub fn head(&self) -> &Head {
        &self.head
    }

    /// Stack flat side³ samples into the `[N, 1, S, S, S]` input layout.
    pub fn batch_tensor(samples: &[&[f64]], side: usize) -> Result<Tensor> {
        if samples.is_empty() {
            return Err(Error::argument("empty batch"));
        }
        let voxels = side * side * side;
        let mut data = Vec::with_capacity(samples.len() * voxels);
        for (i, s) in samples.iter().enumerate() {
            if s.len() != voxels {
                return Err(Error::argument(format!(
                    "sample {i} has {} voxels, expected {side}³ = {voxels}",
                    s.len()
                )));
            }
            data.extend_from_slice(s);
        }
        Tensor::from_vec(&[samples.len(), 1, side, side, side], data)
    }

    /// Forward pass that also caches everything `backward` needs.
    /// `mode` controls batch-norm statistics; gradients flow correctly
    /// from either mode's cache.
    pub fn forward_grad(&mut self, batch: &Tensor, mode: Mode) -> Result<(Vec<f64>, BatchCache)> {
        let (features, net_cache) = self.net.forward(batch, mode)?;
        let n = features.dims()[0];
        let n_out = features.dims()[1];
        let (probs, head_cache) = match &mut self.head {
            Head::Quantum { layer, .. } => {
                // Each sample simulates its own circuits, so the batch
                // fans out across threads; collecting by sample index
                // keeps results identical at any thread count.
                let layer = &*layer;
                let rows: Vec<&[f64]> = (0..n)
                    .map(|i| &features.data()[i * n_out..(i + 1) * n_out])
                    .collect();
                #[cfg(feature = "parallel")]
                let fwds: Vec<QuantumForward> = {
                    use rayon::prelude::*;
                    rows.par_iter()
                        .map(|row| layer.forward_with_grad(row))
                        .collect::<Result<_>>()?
                };
                #[cfg(not(feature = "parallel"))]
                let fwds: Vec<QuantumForward> = rows
                    .iter()
                    .map(|row| layer.forward_with_grad(row))
                    .collect::<Result<_>>()?;
                let probs = fwds.iter().map(|f| f.p).collect();
                (probs, HeadCache::Quantum(fwds))
            }
            Head::Classical { dense } => {
                let logits = dense.forward(&features)?;
                let probs_t = sigmoid(&logits);
                let probs = probs_t.data().to_vec();
                (
                    probs.clone(),
                    HeadCache::Classical {
                        features: features.clone(),
                        probs,
                    },
                )
            }
        };
        Ok((
            probs,
            BatchCache {
                net: net_cache,
                head: head_cache,
            },
        ))
    }

    /// Inference-only forward in eval mode (skips gradient bookkeeping,
    /// which for the quantum head avoids all shifted re-simulations).
    pub fn predict(&mut self, batch: &Tensor) -> Result<Vec<f64>> {
        let (features, _) = self.net.forward(batch, Mode::Eval)?;
        let n = features.dims()[0];
        let n_out = features.dims()[1];
        match &self.head {
            Head::Quantum { layer, .. } => {
                let rows: Vec<&[f64]> = (0..n)
                    .map(|i| &features.data()[i * n_out..(i + 1) * n_out])
                    .collect();
                #[cfg(feature = "parallel")]
                {
                    use rayon::prelude::*;
                    rows.par_iter().map(|row| layer.forward(row)).collect()
                }
                #[cfg(not(feature = "parallel"))]
                rows.iter().map(|row| layer.forward(row)).collect()
            }
            Head::Classical { dense } => {
                let logits = dense.forward(&features)?;
                Ok(sigmoid(&logits).into_data())
            }
        }
    }

    /// Accumulate dL/d(param) everywhere given dL/d(probability) per
    /// sample. Pair with the cache from the same `forward_grad` call.
    pub fn backward(&mut self, cache: &BatchCache, d_probs: &[f64]) -> Result<()> {
        let n_out = self.cfg.net.n_out;
        let n = d_probs.len();
        let d_features = match (&mut self.head, &cache.head) {
            (Head::Quantum { grad, .. }, HeadCache::Quantum(fwds)) => {
                if fwds.len() != n {
                    return Err(Error::State(format!(
                        "cache holds {} samples but got {n} gradients",
                        fwds.len()
                    )));
                }
                let mut d_features = Tensor::zeros(&[n, n_out]);
                for (i, fwd) in fwds.iter().enumerate() {
                    for (j, df) in fwd.dp_dfeatures.iter().enumerate() {
                        d_features.data_mut()[i * n_out + j] = d_probs[i] * df;
                    }
                    for (k, dp) in fwd.dp_dparams.iter().enumerate() {
                        grad[k] += d_probs[i] * dp;
                    }
                }
                d_features
            }
            (Head::Classical { dense }, HeadCache::Classical { features, probs }) => {
                if probs.len() != n {
                    return Err(Error::State(format!(
                        "cache holds {} samples but got {n} gradients",
                        probs.len()
                    )));
                }
                // dL/dlogit = dL/dp · p(1−p).
                let d_logits = Tensor::from_vec(
                    &[n, 1],
                    probs
                        .iter()
                        .zip(d_probs)
                        .map(|(&p, &dp)| dp * p * (1.0 - p))
                        .collect(),
                )?;
                dense.backward(features, &d_logits)?
            }
            _ => return Err(Error::State("cache built for a different head".into())),
        };
        self.net.backward(&cache.net, &d_features)?;
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.net.zero_grad();
        match &mut self.head {
            Head::Quantum { grad, .. } => grad.iter_mut().for_each(|g| *g = 0.0),
            Head::Classical { dense } => {
                dense.weight.zero_grad();
                dense.bias.zero_grad();
            }
        }
    }

    /// Walk every trainable tensor in a fixed order:
    /// net parameters first, then the head's. The optimizer, the
    /// checkpoint format, and the f32 quantizer all share this walk.
    pub fn visit_params(&mut self, f: &mut dyn FnMut(&[usize], &mut [f64], &mut [f64])) {
        self.net.visit_params(&mut |p| {
            let (dims, value, grad) = p.split_mut();
            f(dims, value, grad);
        });
        match &mut self.head {
            Head::Quantum { layer, grad } => {
                let dims = [layer.param_count()];
                f(&dims, layer.params_mut(), grad);
            }
            Head::Classical { dense } => {
                for p in [&mut dense.weight, &mut dense.bias] {
                    let (dims, value, grad) = p.split_mut();
                    f(dims, value, grad);
                }
            }
        }
    }

    /// Walk every non-trained state tensor (batch-norm running stats)
    /// in the same fixed order convention.
    pub fn visit_buffers(&mut self, f: &mut dyn FnMut(&mut Tensor)) {
        self.net.visit_buffers(f);
    }

    pub fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, v, _| n += v.len());
        n
    }

    /// Round every parameter and buffer through f32. Run at epoch
    /// boundaries so in-memory state matches what a checkpoint stores,
    /// making save → load → continue bit-identical to never saving.
    pub fn quantize_f32(&mut self) {
        self.visit_params(&mut |_, value, _| {
            for v in value {
                *v = *v as f32 as f64;
            }
        });
        self.visit_buffers(&mut |t| t.quantize_f32());
    }
}

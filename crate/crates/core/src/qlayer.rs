//! Quantum classification layer: feature-map encoding, trainable ansatz,
//! parity readout, and exact analytic gradients.
//!
//! Forward pass for a feature vector x ∈ R^n:
//!
//! 1. start in |0…0⟩ on n qubits,
//! 2. apply [`zz_feature_map`](crate::circuits::zz_feature_map)`(x, feature_map_reps)`,
//! 3. apply [`real_amplitudes`](crate::circuits::real_amplitudes) with the
//!    layer's trainable angles,
//! 4. read out `p = (1 + ⟨Z⊗Z⊗…⊗Z⟩) / 2 ∈ [0, 1]`, the probability
//!    assigned to the positive class.
//!
//! Gradients use the parameter-shift rule: every parameterized gate here
//! (RY, RZ, ZZ) has the form `exp(−i(θ/2)·G)` with `G² = I`, for which
//! `∂E/∂θ = [E(θ+π/2) − E(θ−π/2)] / 2` holds exactly — and the same
//! two-point formula applies to `p` because `p` is affine in `E`. Feature
//! gradients chain through the encoding angles: `θ = 2·x_i` for the
//! single-qubit phases and `θ_ij = x_i·(2π − x_j)` for the entanglers,
//! so one encoded feature contributes through several gates and the
//! partials sum.

use crate::circuits::{real_amplitudes, real_amplitudes_param_count, zz_feature_map};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::statevector::{Gate, StateVector};

/// Shape of the quantum layer; qubit count equals input feature count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantumLayerConfig {
    pub n_qubits: usize,
    pub feature_map_reps: usize,
    pub ansatz_reps: usize,
}

impl QuantumLayerConfig {
    pub fn param_count(&self) -> usize {
        real_amplitudes_param_count(self.n_qubits, self.ansatz_reps)
    }
}

/// Result of a differentiated forward pass.
#[derive(Debug, Clone)]
pub struct QuantumForward {
    /// Positive-class probability, in [0, 1].
    pub p: f64,
    /// ∂p/∂θ_k for each trainable ansatz angle.
    pub dp_dparams: Vec<f64>,
    /// ∂p/∂x_i for each input feature.
    pub dp_dfeatures: Vec<f64>,
}

/// Where a gate angle's derivative flows: into a trainable parameter or
/// back out through an input feature, scaled by a chain-rule factor.
#[derive(Debug, Clone, Copy)]
enum GradSink {
    Param { index: usize, factor: f64 },
    Feature { index: usize, factor: f64 },
}

/// Trainable quantum head.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumLayer {
    config: QuantumLayerConfig,
    params: Vec<f64>,
}

impl QuantumLayer {
    /// New layer with all angles zero (readout is then feature-independent
    /// in expectation only for special inputs; call [`init_params`]
    /// before training).
    ///
    /// [`init_params`]: QuantumLayer::init_params
    pub fn new(config: QuantumLayerConfig) -> Result<Self> {
        if config.n_qubits == 0 {
            return Err(Error::argument("quantum layer needs at least one qubit"));
        }
        if config.feature_map_reps == 0 {
            return Err(Error::argument("quantum layer needs feature_map_reps >= 1"));
        }
        // Fail early if the register itself would be rejected.
        StateVector::new(config.n_qubits)?;
        let params = vec![0.0; config.param_count()];
        Ok(QuantumLayer { config, params })
    }

    pub fn config(&self) -> QuantumLayerConfig {
        self.config
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::argument(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    /// Draw initial angles uniformly from [−π/8, π/8]: small enough to
    /// start near the maximally mixed readout (p ≈ 0.5), random enough
    /// to break the symmetries of the all-zero configuration.
    pub fn init_params(&mut self, rng: &mut SplitMix64) {
        let bound = std::f64::consts::FRAC_PI_8;
        for p in &mut self.params {
            *p = rng.uniform(-bound, bound);
        }
    }

    /// Full circuit for `features` plus, per gate, where its angle
    /// gradient should be routed.
    fn build_circuit(&self, features: &[f64]) -> Result<(Vec<Gate>, Vec<Vec<GradSink>>)> {
        let n = self.config.n_qubits;
        if features.len() != n {
            return Err(Error::argument(format!(
                "quantum layer with {n} qubits takes {n} features, got {}",
                features.len()
            )));
        }
        if let Some(bad) = features.iter().find(|x| !x.is_finite()) {
            return Err(Error::argument(format!("non-finite feature value {bad}")));
        }

        let mut gates = zz_feature_map(features, self.config.feature_map_reps)?;
        let mut sinks: Vec<Vec<GradSink>> = gates
            .iter()
            .map(|g| match *g {
                // Encoding phase: θ = 2·x_q.
                Gate::Rz { q, .. } => vec![GradSink::Feature { index: q, factor: 2.0 }],
                // Entangling phase: θ = x_a·(2π − x_b).
                Gate::Zz { a, b, .. } => vec![
                    GradSink::Feature {
                        index: a,
                        factor: 2.0 * std::f64::consts::PI - features[b],
                    },
                    GradSink::Feature {
                        index: b,
                        factor: -features[a],
                    },
                ],
                _ => Vec::new(),
            })
            .collect();

        let ansatz = real_amplitudes(n, self.config.ansatz_reps, &self.params)?;
        let mut param_index = 0;
        for gate in ansatz {
            sinks.push(match gate {
                Gate::Ry { .. } => {
                    let s = vec![GradSink::Param { index: param_index, factor: 1.0 }];
                    param_index += 1;
                    s
                }
                _ => Vec::new(),
            });
            gates.push(gate);
        }
        debug_assert_eq!(param_index, self.params.len());
        Ok((gates, sinks))
    }

    fn run(&self, gates: &[Gate]) -> Result<f64> {
        let mut state = StateVector::new(self.config.n_qubits)?;
        for g in gates {
            state.apply(g)?;
        }
        // Roundoff in the norm can push the parity a few ulps past ±1;
        // clamp so downstream probability checks never see p ∉ [0, 1].
        Ok(((1.0 + state.expect_z_parity()) / 2.0).clamp(0.0, 1.0))
    }

    /// Positive-class probability for one feature vector.
    pub fn forward(&self, features: &[f64]) -> Result<f64> {
        let (gates, _) = self.build_circuit(features)?;
        self.run(&gates)
    }

    /// Probability plus exact gradients with respect to the trainable
    /// angles and the input features.
    ///
    /// Costs two extra circuit evaluations per parameterized gate.
    pub fn forward_with_grad(&self, features: &[f64]) -> Result<QuantumForward> {
        let (gates, sinks) = self.build_circuit(features)?;
        let p = self.run(&gates)?;

        let mut dp_dparams = vec![0.0; self.params.len()];
        let mut dp_dfeatures = vec![0.0; features.len()];
        let mut shifted = gates.clone();

        for (gate_index, gate_sinks) in sinks.iter().enumerate() {
            if gate_sinks.is_empty() {
                continue;
            }
            let theta = gates[gate_index]
                .angle()
                .expect("parameterized gate has an angle");
            shifted[gate_index] = gates[gate_index].with_angle(theta + std::f64::consts::FRAC_PI_2);
            let p_plus = self.run(&shifted)?;
            shifted[gate_index] = gates[gate_index].with_angle(theta - std::f64::consts::FRAC_PI_2);
            let p_minus = self.run(&shifted)?;
            shifted[gate_index] = gates[gate_index];

            let dp_dtheta = (p_plus - p_minus) / 2.0;
            for sink in gate_sinks {
                match *sink {
                    GradSink::Param { index, factor } => dp_dparams[index] += factor * dp_dtheta,
                    GradSink::Feature { index, factor } => {
                        dp_dfeatures[index] += factor * dp_dtheta
                    }
                }
            }
        }

        Ok(QuantumForward {
            p,
            dp_dparams,
            dp_dfeatures,
        })
    }
}

//! Browser bindings for the interactive demo page.
//!
//! Three operations back the page's panels, all running the same code
//! the native binary uses:
//!
//! 1. [`qlayer_eval`] / [`qlayer_amplitudes`] / [`qlayer_train_step`] —
//!    the variational quantum layer: probability, exact gradients, the
//!    underlying statevector, and single gradient-descent steps.
//! 2. [`volume_pair`] — one synthetic background/lesion volume pair for
//!    slice-by-slice inspection.
//! 3. [`roc_demo`] — ROC curve and AUC for two score clouds with a
//!    controllable separation.

use qres_core::circuits::{real_amplitudes, real_amplitudes_param_count, zz_feature_map};
use qres_core::data::synthesize_pair;
use qres_core::metrics::roc_auc;
use qres_core::qlayer::{QuantumLayer, QuantumLayerConfig};
use qres_core::rng::SplitMix64;
use qres_core::statevector::StateVector;
use qres_core::train::bce_grad;
use wasm_bindgen::prelude::*;

fn err_to_js(e: qres_core::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn build_layer(
    n_qubits: usize,
    feature_map_reps: usize,
    ansatz_reps: usize,
    params: &[f64],
) -> Result<QuantumLayer, JsValue> {
    let mut layer = QuantumLayer::new(QuantumLayerConfig {
        n_qubits,
        feature_map_reps,
        ansatz_reps,
    })
    .map_err(err_to_js)?;
    layer.set_params(params).map_err(err_to_js)?;
    Ok(layer)
}

/// Ansatz parameter count for a layer shape — lets the page build the
/// right number of sliders.
#[wasm_bindgen]
pub fn qlayer_param_count(n_qubits: usize, ansatz_reps: usize) -> usize {
    real_amplitudes_param_count(n_qubits, ansatz_reps)
}

/// Evaluate the quantum layer. Returns a flat vector:
/// `[p, dp/dθ_0 … dp/dθ_{k-1}, dp/dx_0 … dp/dx_{n-1}]`
/// (probability, then one exact parameter-shift derivative per ansatz
/// angle, then one chained derivative per input feature).
#[wasm_bindgen]
pub fn qlayer_eval(
    n_qubits: usize,
    feature_map_reps: usize,
    ansatz_reps: usize,
    features: &[f64],
    params: &[f64],
) -> Result<Vec<f64>, JsValue> {
    let layer = build_layer(n_qubits, feature_map_reps, ansatz_reps, params)?;
    let fwd = layer.forward_with_grad(features).map_err(err_to_js)?;
    let mut out = Vec::with_capacity(1 + fwd.dp_dparams.len() + fwd.dp_dfeatures.len());
    out.push(fwd.p);
    out.extend_from_slice(&fwd.dp_dparams);
    out.extend_from_slice(&fwd.dp_dfeatures);
    Ok(out)
}

/// Final statevector of the feature-map + ansatz circuit, interleaved
/// as `[re_0, im_0, re_1, im_1, …]` over the `2^n` basis states
/// (little-endian: qubit 0 is the least significant index bit).
#[wasm_bindgen]
pub fn qlayer_amplitudes(
    n_qubits: usize,
    feature_map_reps: usize,
    ansatz_reps: usize,
    features: &[f64],
    params: &[f64],
) -> Result<Vec<f64>, JsValue> {
    if features.len() != n_qubits {
        return Err(JsValue::from_str(&format!(
            "expected {n_qubits} features, got {}",
            features.len()
        )));
    }
    let mut state = StateVector::new(n_qubits).map_err(err_to_js)?;
    let mut gates = zz_feature_map(features, feature_map_reps).map_err(err_to_js)?;
    gates.extend(real_amplitudes(n_qubits, ansatz_reps, params).map_err(err_to_js)?);
    for gate in &gates {
        state.apply(gate).map_err(err_to_js)?;
    }
    Ok(state
        .amplitudes()
        .iter()
        .flat_map(|a| [a.re, a.im])
        .collect())
}

/// One gradient-descent step of the binary cross-entropy toward
/// `target` (0 or 1), using the exact parameter-shift gradient.
/// Returns the updated ansatz angles.
#[wasm_bindgen]
pub fn qlayer_train_step(
    n_qubits: usize,
    feature_map_reps: usize,
    ansatz_reps: usize,
    features: &[f64],
    params: &[f64],
    target: u8,
    learning_rate: f64,
) -> Result<Vec<f64>, JsValue> {
    if target > 1 {
        return Err(JsValue::from_str("target must be 0 or 1"));
    }
    let layer = build_layer(n_qubits, feature_map_reps, ansatz_reps, params)?;
    let fwd = layer.forward_with_grad(features).map_err(err_to_js)?;
    let dl_dp = bce_grad(fwd.p, target);
    Ok(params
        .iter()
        .zip(&fwd.dp_dparams)
        .map(|(w, g)| w - learning_rate * dl_dp * g)
        .collect())
}

/// One synthetic volume pair, concatenated: the first `side³` values
/// are the class-0 background, the next `side³` its class-1 lesioned
/// copy. Identical to what the dataset generator writes for
/// `(seed, pair_index)`.
#[wasm_bindgen]
pub fn volume_pair(
    side: usize,
    difficulty: f64,
    seed: u64,
    pair_index: u64,
) -> Result<Vec<f32>, JsValue> {
    let (mut background, lesioned) =
        synthesize_pair(side, difficulty, seed, pair_index).map_err(err_to_js)?;
    background.extend(lesioned);
    Ok(background)
}

/// ROC demo over two synthetic score clouds. Negative scores are drawn
/// near 0.5 − separation/2 and positives near 0.5 + separation/2 (both
/// with noise, squashed into (0, 1)). Returns
/// `[auc, fpr_0, tpr_0, fpr_1, tpr_1, …]`.
#[wasm_bindgen]
pub fn roc_demo(n_per_class: usize, separation: f64, seed: u64) -> Result<Vec<f64>, JsValue> {
    if n_per_class == 0 {
        return Err(JsValue::from_str("need at least one score per class"));
    }
    let mut rng = SplitMix64::new(seed);
    let mut scores = Vec::with_capacity(2 * n_per_class);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    let squash = |x: f64| 1.0 / (1.0 + (-x).exp());
    for label in [0u8, 1] {
        let shift = (f64::from(label) - 0.5) * separation;
        for _ in 0..n_per_class {
            scores.push(squash(shift + 0.8 * rng.normal()));
            labels.push(label);
        }
    }
    let (auc, points) = roc_auc(&scores, &labels).map_err(err_to_js)?;
    let mut out = Vec::with_capacity(1 + 2 * points.len());
    out.push(auc);
    for p in &points {
        out.push(p.fpr);
        out.push(p.tpr);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qlayer_eval_layout_and_all_zero_probability() {
        let out = qlayer_eval(1, 1, 1, &[0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(out.len(), 1 + 2 + 1);
        assert!((out[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn train_steps_move_probability_toward_the_target() {
        let features = [0.4, -0.3];
        let mut params = vec![0.3, -0.2, 0.1, 0.5];
        let p0 = qlayer_eval(2, 1, 1, &features, &params).unwrap()[0];
        for _ in 0..80 {
            params = qlayer_train_step(2, 1, 1, &features, &params, 1, 0.2).unwrap();
        }
        let p1 = qlayer_eval(2, 1, 1, &features, &params).unwrap()[0];
        assert!(p1 > p0, "{p0} → {p1}");
        assert!(p1 > 0.9, "{p1}");
    }

    #[test]
    fn amplitudes_are_normalized() {
        let amps = qlayer_amplitudes(2, 1, 1, &[0.7, 0.2], &[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(amps.len(), 8);
        let norm: f64 = amps.chunks(2).map(|c| c[0] * c[0] + c[1] * c[1]).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn volume_pair_concatenates_the_two_classes() {
        let side = 8;
        let both = volume_pair(side, 0.2, 5, 0).unwrap();
        assert_eq!(both.len(), 2 * side * side * side);
        assert_ne!(both[..512], both[512..]);
    }

    #[test]
    fn roc_demo_auc_grows_with_separation() {
        let weak = roc_demo(200, 0.2, 11).unwrap()[0];
        let strong = roc_demo(200, 4.0, 11).unwrap()[0];
        assert!(strong > weak, "{weak} vs {strong}");
        assert!(strong > 0.9);
        assert_eq!((roc_demo(10, 1.0, 1).unwrap().len() - 1) % 2, 0);
    }
}

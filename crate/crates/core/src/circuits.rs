//! Circuit builders: data-encoding feature map and trainable ansatz.
//!
//! Both builders return flat gate lists for the [`StateVector`] simulator,
//! so a circuit is just `Vec<Gate>` and composition is concatenation.
//!
//! * [`zz_feature_map`] encodes a feature vector x ∈ R^n with, per
//!   repetition: H on every qubit, `RZ(2·x_i)` on qubit i, then for every
//!   pair i < j (lexicographic) an entangling `ZZ(θ_ij)` with
//!   `θ_ij = x_i · (2π − x_j)`.
//! * [`real_amplitudes`] is the hardware-efficient ansatz: an RY layer,
//!   then per repetition a CX(i, i+1) chain followed by another RY layer.
//!   Parameter count is `n · (reps + 1)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::statevector::Gate;

/// Gate list for one feature-map encoding of `features`, repeated `reps`
/// times. `features.len()` fixes the qubit count.
pub fn zz_feature_map(features: &[f64], reps: usize) -> Result<Vec<Gate>> {
    let n = features.len();
    if n == 0 {
        return Err(Error::argument("feature map needs at least one feature"));
    }
    if reps == 0 {
        return Err(Error::argument("feature map needs reps >= 1"));
    }
    // Encoding angles are meant for squashed inputs; far larger values
    // signal a wiring bug upstream, so reject them.
    if let Some(bad) = features.iter().find(|x| !(x.abs() <= 2.0 * PI)) {
        return Err(Error::argument(format!(
            "feature value {bad} outside the encodable range [-2π, 2π]"
        )));
    }
    let mut gates = Vec::new();
    for _ in 0..reps {
        for q in 0..n {
            gates.push(Gate::H { q });
        }
        for (q, &x) in features.iter().enumerate() {
            gates.push(Gate::Rz { q, theta: 2.0 * x });
        }
        for i in 0..n {
            for j in i + 1..n {
                gates.push(Gate::Zz {
                    a: i,
                    b: j,
                    theta: features[i] * (2.0 * PI - features[j]),
                });
            }
        }
    }
    Ok(gates)
}

/// Number of trainable angles in [`real_amplitudes`].
pub fn real_amplitudes_param_count(n_qubits: usize, reps: usize) -> usize {
    n_qubits * (reps + 1)
}

/// Gate list for the RY/CX ansatz on `n_qubits` qubits with `reps`
/// entangling repetitions. `params` supplies the RY angles in layer
/// order: angles `[r·n, (r+1)·n)` feed the RY layer after the r-th CX
/// chain (layer 0 has no chain before it).
pub fn real_amplitudes(n_qubits: usize, reps: usize, params: &[f64]) -> Result<Vec<Gate>> {
    if n_qubits == 0 {
        return Err(Error::argument("ansatz needs at least one qubit"));
    }
    let expected = real_amplitudes_param_count(n_qubits, reps);
    if params.len() != expected {
        return Err(Error::argument(format!(
            "ansatz with {n_qubits} qubits and {reps} reps takes {expected} parameters, got {}",
            params.len()
        )));
    }
    let mut gates = Vec::new();
    for (q, &theta) in params[..n_qubits].iter().enumerate() {
        gates.push(Gate::Ry { q, theta });
    }
    for r in 1..=reps {
        for q in 0..n_qubits.saturating_sub(1) {
            gates.push(Gate::Cx {
                control: q,
                target: q + 1,
            });
        }
        for q in 0..n_qubits {
            gates.push(Gate::Ry {
                q,
                theta: params[r * n_qubits + q],
            });
        }
    }
    Ok(gates)
}

/// Stable text form of a gate list: one gate per line, kind first, then
/// the angle (for rotations), then the qubit indices. Angles print with
/// Rust's shortest round-trip `f64` formatting, so
/// `parse_gates(&format_gates(g)) == g` exactly.
pub fn format_gates(gates: &[Gate]) -> String {
    let mut out = String::new();
    for gate in gates {
        match *gate {
            Gate::H { q } => out.push_str(&format!("H {q}\n")),
            Gate::Ry { q, theta } => out.push_str(&format!("RY {theta} {q}\n")),
            Gate::Rz { q, theta } => out.push_str(&format!("RZ {theta} {q}\n")),
            Gate::Cx { control, target } => out.push_str(&format!("CX {control} {target}\n")),
            Gate::Zz { a, b, theta } => out.push_str(&format!("ZZ {theta} {a} {b}\n")),
        }
    }
    out
}

/// Parse the text form produced by [`format_gates`]. Blank lines and
/// lines starting with `#` are skipped, so annotated dumps re-parse.
/// Gate kinds are case-insensitive. Errors name the offending 1-based
/// line.
pub fn parse_gates(text: &str) -> Result<Vec<Gate>> {
    let mut gates = Vec::new();
    let mut offset = 0u64;
    for (idx, raw) in text.split('\n').enumerate() {
        let line_start = offset;
        offset += raw.len() as u64 + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |what: &str| {
            Error::format(line_start, format!("line {}: {what} in {line:?}", idx + 1))
        };
        let mut parts = line.split_whitespace();
        let kind = parts.next().expect("non-empty line has a first token");
        let rest: Vec<&str> = parts.collect();
        let angle = |s: &str| s.parse::<f64>().map_err(|_| bad("unreadable angle"));
        let qubit = |s: &str| s.parse::<usize>().map_err(|_| bad("unreadable qubit index"));
        let arity = |want: usize| {
            if rest.len() == want {
                Ok(())
            } else {
                Err(bad(&format!("expected {want} fields after the kind, got {}", rest.len())))
            }
        };
        let gate = match kind.to_ascii_uppercase().as_str() {
            "H" => {
                arity(1)?;
                Gate::H { q: qubit(rest[0])? }
            }
            "RY" => {
                arity(2)?;
                Gate::Ry { theta: angle(rest[0])?, q: qubit(rest[1])? }
            }
            "RZ" => {
                arity(2)?;
                Gate::Rz { theta: angle(rest[0])?, q: qubit(rest[1])? }
            }
            "CX" => {
                arity(2)?;
                let (control, target) = (qubit(rest[0])?, qubit(rest[1])?);
                if control == target {
                    return Err(bad("control and target coincide"));
                }
                Gate::Cx { control, target }
            }
            "ZZ" => {
                arity(3)?;
                let (theta, a, b) = (angle(rest[0])?, qubit(rest[1])?, qubit(rest[2])?);
                if a == b {
                    return Err(bad("the two qubits coincide"));
                }
                Gate::Zz { a, b, theta }
            }
            other => return Err(bad(&format!("unknown gate kind {other:?}"))),
        };
        gates.push(gate);
    }
    Ok(gates)
}

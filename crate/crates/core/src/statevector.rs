//! Dense statevector simulation of small qubit registers.
//!
//! Conventions, fixed once for the whole crate:
//!
//! * Qubit ordering is little-endian: qubit 0 is the least-significant bit
//!   of the amplitude index, so basis state |q_{n-1} … q_1 q_0⟩ lives at
//!   index Σ q_k 2^k.
//! * `RY(θ) = [[cos(θ/2), −sin(θ/2)], [sin(θ/2), cos(θ/2)]]`
//! * `RZ(θ) = diag(e^{−iθ/2}, e^{+iθ/2})`
//! * `H = (1/√2)·[[1, 1], [1, −1]]`
//! * `CX` flips the target bit where the control bit is 1.
//! * `ZZ(θ) = exp(−i(θ/2)·Z⊗Z) = diag(e^{−iθ/2}, e^{+iθ/2}, e^{+iθ/2},
//!   e^{−iθ/2})`, applied as a diagonal phase keyed on the parity of the
//!   two target bits.
//!
//! Global phase is not tracked; every observable used here is insensitive
//! to it.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Hard capacity bound; 2^20 complex amplitudes is 16 MiB, plenty for a
/// quantum head with a handful of qubits and still safe on a laptop.
pub const MAX_QUBITS: usize = 20;

/// A single gate from the fixed gate set.
///
/// Angles are radians. `Cx` is directed (control, target); `Zz` is
/// symmetric in its two qubits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    H { q: usize },
    Ry { q: usize, theta: f64 },
    Rz { q: usize, theta: f64 },
    Cx { control: usize, target: usize },
    Zz { a: usize, b: usize, theta: f64 },
}

impl Gate {
    /// Inverse gate: H and CX are self-inverse, rotations negate the angle.
    pub fn inverse(&self) -> Gate {
        match *self {
            Gate::H { q } => Gate::H { q },
            Gate::Ry { q, theta } => Gate::Ry { q, theta: -theta },
            Gate::Rz { q, theta } => Gate::Rz { q, theta: -theta },
            Gate::Cx { control, target } => Gate::Cx { control, target },
            Gate::Zz { a, b, theta } => Gate::Zz { a, b, theta: -theta },
        }
    }

    /// Qubits the gate acts on.
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::H { q } | Gate::Ry { q, .. } | Gate::Rz { q, .. } => vec![q],
            Gate::Cx { control, target } => vec![control, target],
            Gate::Zz { a, b, .. } => vec![a, b],
        }
    }

    /// Rotation angle, if the gate is parameterized.
    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::Ry { theta, .. } | Gate::Rz { theta, .. } | Gate::Zz { theta, .. } => Some(theta),
            Gate::H { .. } | Gate::Cx { .. } => None,
        }
    }

    /// Copy of the gate with its angle replaced; no-op for H and CX.
    pub fn with_angle(&self, theta: f64) -> Gate {
        match *self {
            Gate::Ry { q, .. } => Gate::Ry { q, theta },
            Gate::Rz { q, .. } => Gate::Rz { q, theta },
            Gate::Zz { a, b, .. } => Gate::Zz { a, b, theta },
            g => g,
        }
    }
}

/// Full complex amplitude vector of an n-qubit pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Prepare |0…0⟩ on `n_qubits` qubits.
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::Capacity {
                requested: n_qubits,
                max: MAX_QUBITS,
            });
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector {
            n_qubits,
            amplitudes,
        })
    }

    /// Build a state from raw amplitudes; the length must be a power of two.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::argument(format!(
                "amplitude vector length {len} is not a power of two ≥ 2"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(Error::Capacity {
                requested: n_qubits,
                max: MAX_QUBITS,
            });
        }
        Ok(StateVector {
            n_qubits,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Σ |a_b|², should stay at 1 under gate application.
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            Err(Error::QubitIndex {
                index: q,
                n_qubits: self.n_qubits,
            })
        } else {
            Ok(())
        }
    }

    /// Apply one gate in place.
    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        match *gate {
            Gate::H { q } => {
                self.check_qubit(q)?;
                let f = std::f64::consts::FRAC_1_SQRT_2;
                self.map_pairs(q, |a0, a1| (f * (a0 + a1), f * (a0 - a1)));
            }
            Gate::Ry { q, theta } => {
                self.check_qubit(q)?;
                let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
                self.map_pairs(q, |a0, a1| (c * a0 - s * a1, s * a0 + c * a1));
            }
            Gate::Rz { q, theta } => {
                self.check_qubit(q)?;
                let p0 = Complex64::from_polar(1.0, -theta / 2.0);
                let p1 = Complex64::from_polar(1.0, theta / 2.0);
                let mask = 1usize << q;
                for (idx, amp) in self.amplitudes.iter_mut().enumerate() {
                    *amp *= if idx & mask == 0 { p0 } else { p1 };
                }
            }
            Gate::Cx { control, target } => {
                self.check_qubit(control)?;
                self.check_qubit(target)?;
                if control == target {
                    return Err(Error::argument(format!(
                        "CX control and target both {control}"
                    )));
                }
                let cmask = 1usize << control;
                let tmask = 1usize << target;
                for idx in 0..self.amplitudes.len() {
                    if idx & cmask != 0 && idx & tmask == 0 {
                        self.amplitudes.swap(idx, idx | tmask);
                    }
                }
            }
            Gate::Zz { a, b, theta } => {
                self.check_qubit(a)?;
                self.check_qubit(b)?;
                if a == b {
                    return Err(Error::argument(format!("ZZ qubits both {a}")));
                }
                let even = Complex64::from_polar(1.0, -theta / 2.0);
                let odd = Complex64::from_polar(1.0, theta / 2.0);
                let amask = 1usize << a;
                let bmask = 1usize << b;
                for (idx, amp) in self.amplitudes.iter_mut().enumerate() {
                    let parity = ((idx & amask != 0) as u8) ^ ((idx & bmask != 0) as u8);
                    *amp *= if parity == 0 { even } else { odd };
                }
            }
        }
        Ok(())
    }

    /// Apply a 2x2 update to every (bit q = 0, bit q = 1) amplitude pair.
    fn map_pairs<F>(&mut self, q: usize, f: F)
    where
        F: Fn(Complex64, Complex64) -> (Complex64, Complex64),
    {
        let step = 1usize << q;
        let mut base = 0;
        while base < self.amplitudes.len() {
            for offset in base..base + step {
                let (a0, a1) = (self.amplitudes[offset], self.amplitudes[offset + step]);
                let (b0, b1) = f(a0, a1);
                self.amplitudes[offset] = b0;
                self.amplitudes[offset + step] = b1;
            }
            base += 2 * step;
        }
    }

    /// Expectation of the full parity observable Z⊗Z⊗…⊗Z:
    /// Σ_b (−1)^popcount(b) |a_b|², a real number in [−1, 1].
    pub fn expect_z_parity(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(idx, amp)| {
                let sign = if idx.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                sign * amp.norm_sqr()
            })
            .sum()
    }

    /// Text dump: one line per basis state, `index<TAB>re<TAB>im`, 17
    /// significant digits so the amplitudes round-trip exactly.
    pub fn dump_amplitudes(&self) -> String {
        let mut out = String::new();
        for (idx, amp) in self.amplitudes.iter().enumerate() {
            out.push_str(&format!("{idx}\t{:.16e}\t{:.16e}\n", amp.re, amp.im));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Random normalized state for property tests.
    fn random_state(n: usize, rng: &mut SplitMix64) -> StateVector {
        let mut amps: Vec<Complex64> = (0..1usize << n)
            .map(|_| c(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in &mut amps {
            *a /= norm;
        }
        StateVector::from_amplitudes(amps).unwrap()
    }

    fn random_gate(n: usize, rng: &mut SplitMix64) -> Gate {
        let q = rng.below(n as u64) as usize;
        let theta = rng.uniform(-PI, PI);
        match rng.below(5) {
            0 => Gate::H { q },
            1 => Gate::Ry { q, theta },
            2 => Gate::Rz { q, theta },
            3 if n >= 2 => {
                let mut t = rng.below(n as u64) as usize;
                while t == q {
                    t = rng.below(n as u64) as usize;
                }
                Gate::Cx {
                    control: q,
                    target: t,
                }
            }
            4 if n >= 2 => {
                let mut b = rng.below(n as u64) as usize;
                while b == q {
                    b = rng.below(n as u64) as usize;
                }
                Gate::Zz { a: q, b, theta }
            }
            _ => Gate::Ry { q, theta },
        }
    }

    // --- dense-matrix oracle ------------------------------------------------
    //
    // Independent check: expand each gate to a full 2^n x 2^n matrix with
    // Kronecker products (little-endian: the factor for qubit 0 sits
    // rightmost in index order) and multiply it out.

    type Matrix = Vec<Vec<Complex64>>;

    fn identity(dim: usize) -> Matrix {
        let mut m = vec![vec![c(0.0, 0.0); dim]; dim];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = c(1.0, 0.0);
        }
        m
    }

    fn kron(a: &Matrix, b: &Matrix) -> Matrix {
        let (ra, ca) = (a.len(), a[0].len());
        let (rb, cb) = (b.len(), b[0].len());
        let mut out = vec![vec![c(0.0, 0.0); ca * cb]; ra * rb];
        for i in 0..ra {
            for j in 0..ca {
                for k in 0..rb {
                    for l in 0..cb {
                        out[i * rb + k][j * cb + l] = a[i][j] * b[k][l];
                    }
                }
            }
        }
        out
    }

    fn single_qubit_matrix(gate: &Gate) -> Matrix {
        match *gate {
            Gate::H { .. } => {
                let f = FRAC_1_SQRT_2;
                vec![vec![c(f, 0.0), c(f, 0.0)], vec![c(f, 0.0), c(-f, 0.0)]]
            }
            Gate::Ry { theta, .. } => {
                let (cs, sn) = ((theta / 2.0).cos(), (theta / 2.0).sin());
                vec![
                    vec![c(cs, 0.0), c(-sn, 0.0)],
                    vec![c(sn, 0.0), c(cs, 0.0)],
                ]
            }
            Gate::Rz { theta, .. } => {
                vec![
                    vec![Complex64::from_polar(1.0, -theta / 2.0), c(0.0, 0.0)],
                    vec![c(0.0, 0.0), Complex64::from_polar(1.0, theta / 2.0)],
                ]
            }
            _ => unreachable!(),
        }
    }

    /// Full 2^n x 2^n unitary for `gate` on an n-qubit register.
    fn dense_gate_matrix(gate: &Gate, n: usize) -> Matrix {
        let dim = 1usize << n;
        match *gate {
            Gate::H { q } | Gate::Ry { q, .. } | Gate::Rz { q, .. } => {
                let u = single_qubit_matrix(gate);
                let mut m = identity(1);
                for k in 0..n {
                    m = if k == q { kron(&u, &m) } else { kron(&identity(2), &m) };
                }
                m
            }
            Gate::Cx { control, target } => {
                let mut m = vec![vec![c(0.0, 0.0); dim]; dim];
                for idx in 0..dim {
                    let out = if idx & (1 << control) != 0 {
                        idx ^ (1 << target)
                    } else {
                        idx
                    };
                    m[out][idx] = c(1.0, 0.0);
                }
                m
            }
            Gate::Zz { a, b, theta } => {
                let mut m = vec![vec![c(0.0, 0.0); dim]; dim];
                for idx in 0..dim {
                    let parity = ((idx >> a) & 1) ^ ((idx >> b) & 1);
                    let phase = if parity == 0 { -theta / 2.0 } else { theta / 2.0 };
                    m[idx][idx] = Complex64::from_polar(1.0, phase);
                }
                m
            }
        }
    }

    fn mat_vec(m: &Matrix, v: &[Complex64]) -> Vec<Complex64> {
        m.iter()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
        let dim = a.len();
        let mut out = vec![vec![c(0.0, 0.0); dim]; dim];
        for i in 0..dim {
            for j in 0..dim {
                out[i][j] = (0..dim).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        out
    }

    fn dagger(m: &Matrix) -> Matrix {
        let dim = m.len();
        let mut out = vec![vec![c(0.0, 0.0); dim]; dim];
        for i in 0..dim {
            for j in 0..dim {
                out[i][j] = m[j][i].conj();
            }
        }
        out
    }

    // --- examples -----------------------------------------------------------

    #[test]
    fn init_one_qubit() {
        let s = StateVector::new(1).unwrap();
        assert_eq!(s.amplitudes(), &[c(1.0, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn init_two_qubits() {
        let s = StateVector::new(2).unwrap();
        assert_eq!(s.amplitudes()[0], c(1.0, 0.0));
        assert!(s.amplitudes()[1..].iter().all(|a| *a == c(0.0, 0.0)));
    }

    #[test]
    fn init_rejects_out_of_range() {
        assert!(matches!(
            StateVector::new(0),
            Err(Error::Capacity { requested: 0, max: MAX_QUBITS })
        ));
        assert!(matches!(
            StateVector::new(MAX_QUBITS + 1),
            Err(Error::Capacity { .. })
        ));
        assert!(StateVector::new(MAX_QUBITS).is_ok());
    }

    #[test]
    fn hadamard_on_zero() {
        let mut s = StateVector::new(1).unwrap();
        s.apply(&Gate::H { q: 0 }).unwrap();
        assert!((s.amplitudes()[0].re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((s.amplitudes()[1].re - FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn cnot_truth_table() {
        // |10⟩ (q1 = 1) with CX(control=1, target=0) -> |11⟩
        let mut s = StateVector::from_amplitudes(vec![
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(1.0, 0.0),
            c(0.0, 0.0),
        ])
        .unwrap();
        s.apply(&Gate::Cx {
            control: 1,
            target: 0,
        })
        .unwrap();
        assert_eq!(s.amplitudes()[3], c(1.0, 0.0));
        assert_eq!(s.amplitudes()[2], c(0.0, 0.0));
    }

    #[test]
    fn zz_matches_diagonal_matrix_oracle() {
        let theta = PI / 2.0;
        let mut s = StateVector::from_amplitudes(vec![
            c(0.5, 0.0),
            c(0.5, 0.0),
            c(0.5, 0.0),
            c(0.5, 0.0),
        ])
        .unwrap();
        let gate = Gate::Zz { a: 0, b: 1, theta };
        let expected = mat_vec(&dense_gate_matrix(&gate, 2), s.amplitudes());
        s.apply(&gate).unwrap();
        for (got, want) in s.amplitudes().iter().zip(&expected) {
            assert!((got - want).norm() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn parity_of_basis_states_exact() {
        for n in 1..=6usize {
            for idx in 0..1usize << n {
                let mut amps = vec![c(0.0, 0.0); 1 << n];
                amps[idx] = c(1.0, 0.0);
                let s = StateVector::from_amplitudes(amps).unwrap();
                let expected = if idx.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                assert_eq!(s.expect_z_parity(), expected);
            }
        }
    }

    #[test]
    fn parity_of_plus_state_is_zero() {
        let mut s = StateVector::new(1).unwrap();
        s.apply(&Gate::H { q: 0 }).unwrap();
        assert!(s.expect_z_parity().abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_targets() {
        let mut s = StateVector::new(2).unwrap();
        assert!(matches!(
            s.apply(&Gate::H { q: 2 }),
            Err(Error::QubitIndex { index: 2, n_qubits: 2 })
        ));
        assert!(matches!(
            s.apply(&Gate::Cx { control: 1, target: 1 }),
            Err(Error::Argument(_))
        ));
    }

    // --- properties ----------------------------------------------------------

    #[test]
    fn norm_preserved_over_long_sequences() {
        let mut rng = SplitMix64::new(0xABCD);
        for n in 1..=5usize {
            let mut s = random_state(n, &mut rng);
            for _ in 0..100 {
                s.apply(&random_gate(n, &mut rng)).unwrap();
            }
            assert!((s.norm_sqr().sqrt() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn gate_then_inverse_restores_state() {
        let mut rng = SplitMix64::new(0x5EED);
        for _ in 0..200 {
            let n = 1 + rng.below(4) as usize;
            let original = random_state(n, &mut rng);
            let gate = random_gate(n, &mut rng);
            let mut s = original.clone();
            s.apply(&gate).unwrap();
            s.apply(&gate.inverse()).unwrap();
            for (got, want) in s.amplitudes().iter().zip(original.amplitudes()) {
                assert!((got - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn gates_are_unitary_matrices() {
        let mut rng = SplitMix64::new(0x717);
        for _ in 0..50 {
            let n = 1 + rng.below(3) as usize;
            let gate = random_gate(n, &mut rng);
            let m = dense_gate_matrix(&gate, n);
            let product = mat_mul(&m, &dagger(&m));
            let id = identity(1 << n);
            for i in 0..1 << n {
                for j in 0..1 << n {
                    assert!((product[i][j] - id[i][j]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn dense_matrix_equivalence_small_registers() {
        let mut rng = SplitMix64::new(0xFACE);
        for _ in 0..100 {
            let n = 1 + rng.below(3) as usize;
            let s0 = random_state(n, &mut rng);
            let gate = random_gate(n, &mut rng);
            let expected = mat_vec(&dense_gate_matrix(&gate, n), s0.amplitudes());
            let mut s = s0.clone();
            s.apply(&gate).unwrap();
            for (got, want) in s.amplitudes().iter().zip(&expected) {
                assert!((got - want).norm() < 1e-12, "gate {gate:?}");
            }
        }
    }

    #[test]
    fn amplitude_dump_has_17_significant_digits() {
        let mut s = StateVector::new(1).unwrap();
        s.apply(&Gate::H { q: 0 }).unwrap();
        let dump = s.dump_amplitudes();
        let first = dump.lines().next().unwrap();
        let fields: Vec<&str> = first.split('\t').collect();
        assert_eq!(fields[0], "0");
        let re: f64 = fields[1].parse().unwrap();
        assert_eq!(re, FRAC_1_SQRT_2);
    }
}

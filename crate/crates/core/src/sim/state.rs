//! Dense statevector with the dynamic-circuit primitives.
//!
//! Qubit `q` is bit `q` of the basis index (little endian). The state is
//! never serialized; checkpoints carry only what measurement made classical.

use num_complex::Complex;

use super::pauli::{Pauli, PauliString};
use super::rng::RngStream;
use super::SimError;
use crate::circuit_ir::{Gate, MAX_QUBITS};
use crate::scalar::Real;

/// Recorded outcomes below this probability are treated as impossible on replay.
pub const ZERO_PROBABILITY: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<T: Real = f64> {
    num_qubits: usize,
    amps: Vec<Complex<T>>,
}

type Matrix2<T> = [[Complex<T>; 2]; 2];

fn c<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

fn gate_matrix<T: Real>(gate: &Gate) -> Option<Matrix2<T>> {
    let zero = T::zero();
    let one = T::one();
    let half = T::from_f64_lossy(0.5);
    let m = match *gate {
        Gate::H => {
            let s = T::FRAC_1_SQRT_2();
            [[c(s, zero), c(s, zero)], [c(s, zero), c(-s, zero)]]
        }
        Gate::X => [[c(zero, zero), c(one, zero)], [c(one, zero), c(zero, zero)]],
        Gate::Y => [[c(zero, zero), c(zero, -one)], [c(zero, one), c(zero, zero)]],
        Gate::Z => [[c(one, zero), c(zero, zero)], [c(zero, zero), c(-one, zero)]],
        Gate::S => [[c(one, zero), c(zero, zero)], [c(zero, zero), c(zero, one)]],
        Gate::T => {
            let s = T::FRAC_1_SQRT_2();
            [[c(one, zero), c(zero, zero)], [c(zero, zero), c(s, s)]]
        }
        Gate::Rx(theta) => {
            let h = T::from_f64_lossy(theta) * half;
            let (s, co) = (h.sin(), h.cos());
            [[c(co, zero), c(zero, -s)], [c(zero, -s), c(co, zero)]]
        }
        Gate::Ry(theta) => {
            let h = T::from_f64_lossy(theta) * half;
            let (s, co) = (h.sin(), h.cos());
            [[c(co, zero), c(-s, zero)], [c(s, zero), c(co, zero)]]
        }
        Gate::Rz(theta) => {
            let h = T::from_f64_lossy(theta) * half;
            let (s, co) = (h.sin(), h.cos());
            [[c(co, -s), c(zero, zero)], [c(zero, zero), c(co, s)]]
        }
        Gate::Cx | Gate::Cz => return None,
    };
    Some(m)
}

impl<T: Real> StateVector<T> {
    /// `|0…0⟩` on `n` qubits, `1 ≤ n ≤ 22`.
    pub fn new(num_qubits: usize) -> Result<Self, SimError> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(SimError::QubitCountOutOfRange(num_qubits));
        }
        let mut amps = vec![Complex::new(T::zero(), T::zero()); 1usize << num_qubits];
        amps[0] = Complex::new(T::one(), T::zero());
        Ok(Self { num_qubits, amps })
    }

    /// Builds a state from raw amplitudes, normalizing them.
    pub fn from_amplitudes(amps: Vec<Complex<T>>) -> Result<Self, SimError> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(SimError::BadAmplitudeCount(len));
        }
        let num_qubits = len.trailing_zeros() as usize;
        if num_qubits > MAX_QUBITS {
            return Err(SimError::QubitCountOutOfRange(num_qubits));
        }
        let norm = amps.iter().fold(T::zero(), |acc, a| acc + a.norm_sqr()).sqrt();
        if norm <= T::zero() || !norm.is_finite() {
            return Err(SimError::BadAmplitudeCount(len));
        }
        let amps = amps.into_iter().map(|a| a / norm).collect();
        Ok(Self { num_qubits, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().fold(T::zero(), |acc, a| acc + a.norm_sqr())
    }

    fn check_qubit(&self, qubit: usize) -> Result<(), SimError> {
        if qubit >= self.num_qubits {
            Err(SimError::QubitOutOfRange {
                qubit,
                num_qubits: self.num_qubits,
            })
        } else {
            Ok(())
        }
    }

    pub fn apply_gate(&mut self, gate: &Gate, qubits: &[usize]) -> Result<(), SimError> {
        if qubits.len() != gate.arity() {
            return Err(SimError::Arity {
                gate: gate.name(),
                expected: gate.arity(),
                got: qubits.len(),
            });
        }
        for &q in qubits {
            self.check_qubit(q)?;
        }
        if qubits.len() == 2 && qubits[0] == qubits[1] {
            return Err(SimError::DuplicateQubit(qubits[0]));
        }
        match gate {
            Gate::Cx => self.apply_cx(qubits[0], qubits[1]),
            Gate::Cz => self.apply_cz(qubits[0], qubits[1]),
            g => {
                if let Some(m) = gate_matrix::<T>(g) {
                    self.apply_single(&m, qubits[0]);
                }
            }
        }
        Ok(())
    }

    /// Applies a gate given by name, for callers outside the fixed-enum path.
    pub fn apply_named(&mut self, name: &str, params: &[f64], qubits: &[usize]) -> Result<(), SimError> {
        let gate = Gate::from_name(name, params).map_err(|e| SimError::UnknownGate(e.to_string()))?;
        self.apply_gate(&gate, qubits)
    }

    fn apply_single(&mut self, m: &Matrix2<T>, qubit: usize) {
        let bit = 1usize << qubit;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let a = self.amps[i];
                let b = self.amps[i | bit];
                self.amps[i] = m[0][0] * a + m[0][1] * b;
                self.amps[i | bit] = m[1][0] * a + m[1][1] * b;
            }
        }
    }

    fn apply_cx(&mut self, control: usize, target: usize) {
        let (cb, tb) = (1usize << control, 1usize << target);
        for i in 0..self.amps.len() {
            if i & cb != 0 && i & tb == 0 {
                self.amps.swap(i, i | tb);
            }
        }
    }

    fn apply_cz(&mut self, a: usize, b: usize) {
        let mask = (1usize << a) | (1usize << b);
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if i & mask == mask {
                *amp = -*amp;
            }
        }
    }

    /// Squared norm of the half of the state where `qubit` reads `outcome`.
    fn outcome_weight(&self, qubit: usize, outcome: u8) -> T {
        let bit = 1usize << qubit;
        let want = if outcome == 0 { 0 } else { bit };
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & bit == want)
            .fold(T::zero(), |acc, (_, a)| acc + a.norm_sqr())
    }

    /// Probability that `qubit` reads 0, clamped to `[0, 1]`.
    pub fn prob_zero(&self, qubit: usize) -> Result<f64, SimError> {
        self.check_qubit(qubit)?;
        Ok(self.outcome_weight(qubit, 0).to_f64_lossy().clamp(0.0, 1.0))
    }

    /// Projects onto `outcome` and renormalizes. Shared by sampled and forced
    /// measurement so both produce bit-identical post-states.
    fn collapse(&mut self, qubit: usize, outcome: u8) {
        let bit = 1usize << qubit;
        let keep = if outcome == 0 { 0 } else { bit };
        let scale = T::one() / self.outcome_weight(qubit, outcome).sqrt();
        let zero = Complex::new(T::zero(), T::zero());
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if i & bit == keep {
                *amp *= scale;
            } else {
                *amp = zero;
            }
        }
    }

    /// Measures with an explicit uniform draw `u`: outcome 0 iff `u < p0`.
    pub fn measure_with_draw(&mut self, qubit: usize, u: f64) -> Result<u8, SimError> {
        let p0 = self.prob_zero(qubit)?;
        let outcome = if u < p0 { 0 } else { 1 };
        self.collapse(qubit, outcome);
        Ok(outcome)
    }

    /// Z-basis measurement. Always consumes exactly one draw.
    pub fn measure(&mut self, qubit: usize, rng: &mut RngStream) -> Result<u8, SimError> {
        self.check_qubit(qubit)?;
        let u = rng.next_unit();
        self.measure_with_draw(qubit, u)
    }

    /// Measurement pinned to a recorded outcome. Consumes (and discards) one
    /// draw so the stream stays aligned with free sampling.
    pub fn force_measure(&mut self, qubit: usize, outcome: u8, rng: &mut RngStream) -> Result<(), SimError> {
        self.check_qubit(qubit)?;
        if outcome > 1 {
            return Err(SimError::BadOutcome(outcome));
        }
        let _ = rng.next_unit();
        let p = self.outcome_weight(qubit, outcome).to_f64_lossy();
        if p.is_nan() || p < ZERO_PROBABILITY {
            return Err(SimError::ZeroProbabilityOutcome {
                qubit,
                outcome,
                probability: p,
                op_index: None,
            });
        }
        self.collapse(qubit, outcome);
        Ok(())
    }

    /// Measure, then flip back to `|0⟩` if the result was 1. Returns the
    /// pre-reset bit.
    pub fn reset(&mut self, qubit: usize, rng: &mut RngStream) -> Result<u8, SimError> {
        let bit = self.measure(qubit, rng)?;
        if bit == 1 {
            self.apply_gate(&Gate::X, &[qubit])?;
        }
        Ok(bit)
    }

    pub fn reset_with_draw(&mut self, qubit: usize, u: f64) -> Result<u8, SimError> {
        let bit = self.measure_with_draw(qubit, u)?;
        if bit == 1 {
            self.apply_gate(&Gate::X, &[qubit])?;
        }
        Ok(bit)
    }

    /// Reset whose pre-reset bit is pinned to `outcome`.
    pub fn force_reset(&mut self, qubit: usize, outcome: u8, rng: &mut RngStream) -> Result<(), SimError> {
        self.force_measure(qubit, outcome, rng)?;
        if outcome == 1 {
            self.apply_gate(&Gate::X, &[qubit])?;
        }
        Ok(())
    }

    /// `⟨ψ|P|ψ⟩` for a Pauli string whose character `i` acts on qubit `i`.
    pub fn expectation(&self, pauli: &PauliString) -> Result<T, SimError> {
        if pauli.len() != self.num_qubits {
            return Err(SimError::BadPauliString(format!(
                "length {} does not match {} qubits",
                pauli.len(),
                self.num_qubits
            )));
        }
        let mut flip = 0usize;
        let mut zmask = 0usize;
        let mut ycount = 0u32;
        for (q, p) in pauli.iter().enumerate() {
            match p {
                Pauli::I => {}
                Pauli::X => flip |= 1 << q,
                Pauli::Y => {
                    flip |= 1 << q;
                    zmask |= 1 << q;
                    ycount += 1;
                }
                Pauli::Z => zmask |= 1 << q,
            }
        }
        // P|i⟩ = i^ycount (-1)^{popcount(i & zmask)} |i ^ flip⟩
        let mut acc = Complex::new(T::zero(), T::zero());
        for (i, amp) in self.amps.iter().enumerate() {
            let term = self.amps[i ^ flip].conj() * *amp;
            if (i & zmask).count_ones() % 2 == 1 {
                acc -= term;
            } else {
                acc += term;
            }
        }
        let phase = match ycount % 4 {
            0 => Complex::new(T::one(), T::zero()),
            1 => Complex::new(T::zero(), T::one()),
            2 => Complex::new(-T::one(), T::zero()),
            _ => Complex::new(T::zero(), -T::one()),
        };
        Ok((acc * phase).re)
    }

    pub fn expectation_str(&self, pauli: &str) -> Result<T, SimError> {
        self.expectation(&pauli.parse()?)
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &StateVector<T>) -> Result<T, SimError> {
        if other.num_qubits != self.num_qubits {
            return Err(SimError::QubitCountOutOfRange(other.num_qubits));
        }
        let overlap = self
            .amps
            .iter()
            .zip(&other.amps)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a.conj() * *b);
        Ok(overlap.norm_sqr())
    }
}

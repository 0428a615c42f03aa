//! Feedback-based quantum optimization. Each layer evolves under the
//! problem Hamiltonian for `dt`, then under the driver scaled by the current
//! feedback coefficient; the next coefficient is read off the state.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::workload::{header_num, pauli_arg};
use super::RuntimeError;
use crate::circuit_ir::Gate;
use crate::sim::{Pauli, PauliString, PauliSum, SimError, StateVector};

pub const MAX_FALQON_QUBITS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FalqonConfig {
    /// Problem Hamiltonian.
    pub hp: PauliSum,
    /// Driver Hamiltonian.
    pub hd: PauliSum,
    pub dt: f64,
    pub layers: u64,
}

impl FalqonConfig {
    /// `Hp = ZZ`, `Hd = XI + IX`, `dt = 0.01`, 50 layers.
    pub fn two_qubit_default() -> Self {
        FalqonConfig {
            hp: "1*ZZ".parse().unwrap(),
            hd: "1*XI,1*IX".parse().unwrap(),
            dt: 0.01,
            layers: 50,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.hp.num_qubits().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), RuntimeError> {
        let n = self.hp.num_qubits().map_err(|e| RuntimeError::Config(e.to_string()))?;
        let nd = self.hd.num_qubits().map_err(|e| RuntimeError::Config(e.to_string()))?;
        if n != nd {
            return Err(RuntimeError::Config(format!(
                "problem Hamiltonian acts on {n} qubits, driver on {nd}"
            )));
        }
        if !(1..=MAX_FALQON_QUBITS).contains(&n) {
            return Err(RuntimeError::Config(format!(
                "FALQON supports 1..={MAX_FALQON_QUBITS} qubits, got {n}"
            )));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(RuntimeError::Config("dt must be positive".into()));
        }
        if self.layers == 0 {
            return Err(RuntimeError::Config("at least one layer is needed".into()));
        }
        Ok(())
    }

    pub(crate) fn header(&self) -> String {
        format!(
            "falqon hp={} hd={} dt={:?} layers={}",
            self.hp, self.hd, self.dt, self.layers
        )
    }

    pub(crate) fn from_header_args(args: &BTreeMap<String, String>) -> Result<Self, RuntimeError> {
        Ok(FalqonConfig {
            hp: pauli_arg(args, "hp")?,
            hd: pauli_arg(args, "hd")?,
            dt: header_num(args, "dt")?,
            layers: header_num(args, "layers")?,
        })
    }

    /// Program text of the state preparation plus one layer with feedback
    /// coefficient `beta`.
    pub(crate) fn layer_text(&self, beta: f64) -> String {
        let n = self.num_qubits();
        let mut s = format!("qubits {n}\nregion prep\n");
        for q in 0..n {
            writeln!(s, "x {q}\nh {q}").unwrap();
        }
        s.push_str("region cost\n");
        for (gate, qubits) in evolution_gates(&self.hp, self.dt) {
            write_gate(&mut s, &gate, &qubits);
        }
        s.push_str("region driver\n");
        for (gate, qubits) in evolution_gates(&self.hd, beta * self.dt) {
            write_gate(&mut s, &gate, &qubits);
        }
        s
    }

    /// `|−⟩` on every qubit, the driver ground state for `Hd = Σ Xᵢ`.
    pub fn initial_state(&self) -> Result<StateVector, SimError> {
        let mut state = StateVector::new(self.num_qubits())?;
        for q in 0..self.num_qubits() {
            state.apply_gate(&Gate::X, &[q])?;
            state.apply_gate(&Gate::H, &[q])?;
        }
        Ok(state)
    }

    /// One layer: `exp(−i·Hd·β·dt) · exp(−i·Hp·dt)`.
    pub fn apply_layer(&self, state: &mut StateVector, beta: f64) -> Result<(), SimError> {
        for (gate, qubits) in evolution_gates(&self.hp, self.dt)
            .into_iter()
            .chain(evolution_gates(&self.hd, beta * self.dt))
        {
            state.apply_gate(&gate, &qubits)?;
        }
        Ok(())
    }

    /// `⟨i[Hd, Hp]⟩`; the next coefficient is its negation.
    pub fn feedback(&self, state: &StateVector) -> Result<f64, SimError> {
        self.hd.i_commutator(&self.hp).expectation(state)
    }
}

fn write_gate(s: &mut String, gate: &Gate, qubits: &[usize]) {
    let qs: Vec<String> = qubits.iter().map(|q| q.to_string()).collect();
    match gate.angle() {
        Some(a) => writeln!(s, "{}({a:?}) {}", gate.name(), qs.join(" ")).unwrap(),
        None => writeln!(s, "{} {}", gate.name(), qs.join(" ")).unwrap(),
    }
}

/// Gates for `exp(−i·t·w·P)`: basis change onto Z, a CNOT ladder onto the
/// last support qubit, `rz(2tw)`, and the ladder undone.
pub fn pauli_rotation_gates(pauli: &PauliString, t: f64) -> Vec<(Gate, Vec<usize>)> {
    let support: Vec<(usize, Pauli)> = pauli.iter().enumerate().filter(|(_, p)| *p != Pauli::I).collect();
    let Some(&(last, _)) = support.last() else {
        return Vec::new();
    };
    let mut into = Vec::new();
    for &(q, p) in &support {
        match p {
            Pauli::X => into.push((Gate::H, vec![q])),
            Pauli::Y => into.push((Gate::Rx(FRAC_PI_2), vec![q])),
            _ => {}
        }
    }
    let ladder: Vec<(Gate, Vec<usize>)> = support.windows(2).map(|w| (Gate::Cx, vec![w[0].0, w[1].0])).collect();
    let mut gates = into.clone();
    gates.extend(ladder.iter().cloned());
    gates.push((Gate::Rz(2.0 * t), vec![last]));
    gates.extend(ladder.into_iter().rev());
    for (gate, qubits) in into {
        let undo = match gate {
            Gate::Rx(a) => Gate::Rx(-a),
            g => g,
        };
        gates.push((undo, qubits));
    }
    gates
}

/// First-order product formula for `exp(−i·t·H)`, one factor per term.
pub fn evolution_gates(h: &PauliSum, t: f64) -> Vec<(Gate, Vec<usize>)> {
    h.terms
        .iter()
        .flat_map(|term| pauli_rotation_gates(&term.pauli, t * term.coeff))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FalqonOutput {
    pub layers: u64,
    /// `⟨Hp⟩` before the first layer and after each layer.
    pub hp_expectation: Vec<f64>,
    /// Coefficients `β₁, β₂, …`; `β₁ = 0`.
    pub betas: Vec<f64>,
    /// `⟨i[Hd, Hp]⟩` measured after each layer.
    pub feedback: Vec<f64>,
    pub final_hp: f64,
}

//! Variational eigensolver: hardware-efficient ry/cx ansatz, exact energies,
//! parameter-shift gradients and plain gradient descent.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::workload::{header_num, pauli_arg};
use super::RuntimeError;
use crate::circuit_ir::{InstructionKind, Program};
use crate::sim::{PauliSum, RngStream, SimError, StateVector};

pub const MAX_VQE_QUBITS: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VqeConfig {
    pub hamiltonian: PauliSum,
    /// Number of ry+cx layers before the final ry layer.
    pub depth: usize,
    pub learning_rate: f64,
    /// Stop once the gradient norm falls below this.
    pub tolerance: f64,
    pub max_iterations: u64,
    /// Starting parameters; drawn from the master seed when absent.
    pub initial: Option<Vec<f64>>,
}

impl VqeConfig {
    pub fn new(hamiltonian: PauliSum) -> Self {
        VqeConfig {
            hamiltonian,
            depth: 1,
            learning_rate: 0.2,
            tolerance: 1e-6,
            max_iterations: 200,
            initial: None,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.hamiltonian.num_qubits().unwrap_or(0)
    }

    pub fn parameter_count(&self) -> usize {
        self.num_qubits() * (self.depth + 1)
    }

    pub fn validate(&self) -> Result<(), RuntimeError> {
        let n = self
            .hamiltonian
            .num_qubits()
            .map_err(|e| RuntimeError::Config(e.to_string()))?;
        if !(1..=MAX_VQE_QUBITS).contains(&n) {
            return Err(RuntimeError::Config(format!(
                "VQE Hamiltonian acts on {n} qubits, at most {MAX_VQE_QUBITS} supported"
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(RuntimeError::Config("learning rate must be positive".into()));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(RuntimeError::Config("tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(RuntimeError::Config("max iterations must be at least 1".into()));
        }
        if self.depth > 8 {
            return Err(RuntimeError::Config("ansatz depth above 8".into()));
        }
        if let Some(init) = &self.initial {
            if init.len() != self.parameter_count() {
                return Err(RuntimeError::Config(format!(
                    "{} initial parameters given, ansatz has {}",
                    init.len(),
                    self.parameter_count()
                )));
            }
            if init.iter().any(|x| !x.is_finite()) {
                return Err(RuntimeError::Config("initial parameters must be finite".into()));
            }
        }
        Ok(())
    }

    pub(crate) fn header(&self) -> String {
        let init = match &self.initial {
            Some(v) => v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(";"),
            None => "seed".into(),
        };
        format!(
            "vqe hamiltonian={} depth={} lr={:?} tol={:?} max_iter={} init={init}",
            self.hamiltonian, self.depth, self.learning_rate, self.tolerance, self.max_iterations
        )
    }

    pub(crate) fn from_header_args(args: &BTreeMap<String, String>) -> Result<Self, RuntimeError> {
        let initial = match args.get("init").map(String::as_str) {
            None | Some("seed") => None,
            Some(list) => Some(
                list.split(';')
                    .map(|x| {
                        x.parse::<f64>()
                            .map_err(|_| RuntimeError::Config(format!("bad initial parameter `{x}`")))
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            ),
        };
        Ok(VqeConfig {
            hamiltonian: pauli_arg(args, "hamiltonian")?,
            depth: header_num(args, "depth")?,
            learning_rate: header_num(args, "lr")?,
            tolerance: header_num(args, "tol")?,
            max_iterations: header_num(args, "max_iter")?,
            initial,
        })
    }

    /// Ansatz template with every angle 0.
    pub(crate) fn ansatz_text(&self) -> String {
        let n = self.num_qubits();
        let mut s = format!("qubits {n}\nregion ansatz\n");
        for _ in 0..self.depth {
            for q in 0..n {
                writeln!(s, "ry(0) {q}").unwrap();
            }
            for q in 0..n.saturating_sub(1) {
                writeln!(s, "cx {q} {} ", q + 1).unwrap();
            }
        }
        for q in 0..n {
            writeln!(s, "ry(0) {q}").unwrap();
        }
        s
    }

    /// Starting point: explicit, or uniform in `[-π, π)` from a SplitMix64
    /// stream seeded with the master seed.
    pub fn initial_parameters(&self, master_seed: u64) -> Vec<f64> {
        match &self.initial {
            Some(v) => v.clone(),
            None => {
                let mut rng = RngStream::new(master_seed);
                (0..self.parameter_count())
                    .map(|_| (2.0 * rng.next_unit() - 1.0) * PI)
                    .collect()
            }
        }
    }
}

/// Statevector of the ansatz at `params`.
pub fn ansatz_state(template: &Program, params: &[f64]) -> Result<StateVector, SimError> {
    let bound = template
        .bind_parameters(params)
        .map_err(|e| SimError::UnknownGate(e.to_string()))?;
    let mut state = StateVector::new(bound.num_qubits)?;
    for instr in &bound.instructions {
        if let InstructionKind::Gate { gate, qubits } = &instr.kind {
            state.apply_gate(gate, qubits)?;
        }
    }
    Ok(state)
}

pub fn energy(config: &VqeConfig, template: &Program, params: &[f64]) -> Result<f64, SimError> {
    config.hamiltonian.expectation(&ansatz_state(template, params)?)
}

/// Parameter-shift gradient: `(E(θ + π/2 eⱼ) − E(θ − π/2 eⱼ)) / 2`.
pub fn gradient(config: &VqeConfig, template: &Program, params: &[f64]) -> Result<Vec<f64>, SimError> {
    let mut shifted = params.to_vec();
    (0..params.len())
        .map(|j| {
            shifted[j] = params[j] + FRAC_PI_2;
            let plus = energy(config, template, &shifted)?;
            shifted[j] = params[j] - FRAC_PI_2;
            let minus = energy(config, template, &shifted)?;
            shifted[j] = params[j];
            Ok((plus - minus) / 2.0)
        })
        .collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VqeOutput {
    pub iterations: u64,
    pub converged: bool,
    pub final_energy: f64,
    pub final_parameters: Vec<f64>,
    /// Energy at the start of each iteration.
    pub energies: Vec<f64>,
    pub grad_norms: Vec<f64>,
    /// Parameters before the first iteration and after each update.
    pub trajectory: Vec<Vec<f64>>,
}

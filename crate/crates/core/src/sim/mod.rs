//! Statevector simulator with the dynamic-circuit primitives the runtime
//! needs: gates, mid-circuit measurement, pinned measurement, reset and
//! exact Pauli expectations.

pub mod pauli;
pub mod rng;
pub mod shot;
pub mod state;

use thiserror::Error;

pub use pauli::{Pauli, PauliString, PauliSum, PauliTerm};
pub use rng::{derive_shot_seed, RngStream};
pub use shot::{
    registers_from_events, run_shot, ControlFlowEntry, MeasurementEvent, Registers, ShotContext, ShotExecutor, ShotRun,
    Transcript,
};
pub use state::{StateVector, ZERO_PROBABILITY};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("qubit count {0} outside 1..=22")]
    QubitCountOutOfRange(usize),
    #[error("amplitude count {0} is not a power of two")]
    BadAmplitudeCount(usize),
    #[error("qubit {qubit} out of range for {num_qubits} qubits")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },
    #[error("gate {gate} takes {expected} qubits, got {got}")]
    Arity {
        gate: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("qubit {0} used twice in one gate")]
    DuplicateQubit(usize),
    #[error("{0}")]
    UnknownGate(String),
    #[error("outcome must be 0 or 1, got {0}")]
    BadOutcome(u8),
    #[error("recorded outcome {outcome} on qubit {qubit} has probability {probability:e}{}", op_index.map(|i| format!(" at op {i}")).unwrap_or_default())]
    ZeroProbabilityOutcome {
        qubit: usize,
        outcome: u8,
        probability: f64,
        op_index: Option<usize>,
    },
    #[error("{0}")]
    BadPauliString(String),
    #[error("pinned event for op {pinned_op} but execution reached {}", reached.map(|i| format!("op {i}")).unwrap_or_else(|| "the end of the shot".into()))]
    TranscriptOrderMismatch { pinned_op: usize, reached: Option<usize> },
    #[error("register {creg}[{index}] is not declared")]
    UndeclaredBit { creg: String, index: usize },
}

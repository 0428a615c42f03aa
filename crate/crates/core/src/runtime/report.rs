//! The JSON run report. Layout is documented in `docs/report.md`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::falqon::FalqonOutput;
use super::vqe::VqeOutput;
use crate::circuit_ir::{CheckpointClass, Position};
use crate::sim::{Registers, Transcript};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// An injected crash stopped the run; the store holds what was committed.
    Killed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodedShot {
    pub syndrome_history: Vec<Vec<u8>>,
    pub pauli_frame: String,
    pub logical: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WorkloadOutput {
    Shots {
        shots: u64,
        /// Final registers of every shot, in shot order.
        registers: Vec<Registers>,
        /// Outcome string (`creg=bits` joined by spaces) to count.
        histogram: BTreeMap<String, u64>,
        transcript: Transcript,
        /// `|⟨GHZ|ψ⟩|²` after correction, per shot (GHZ workloads only).
        ghz_fidelity: Option<Vec<f64>>,
        /// Decoder result per shot (repetition code only).
        decoder: Option<Vec<DecodedShot>>,
    },
    Vqe(VqeOutput),
    Falqon(FalqonOutput),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSummary {
    pub id: String,
    pub parent_id: Option<String>,
    pub class: CheckpointClass,
    pub iteration: u64,
    pub position: Position,
    pub completed_shots: u64,
    pub in_flight_shot: Option<u64>,
    /// Size of the stored record.
    pub bytes: u64,
    /// Wall time to seal, serialize and commit the record.
    pub create_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    /// Failure spec in CLI syntax.
    pub kind: String,
    pub at: String,
    /// `crash`, `rollback`, `restart`, `restart_fallback` or `reschedule`.
    pub action: String,
    pub resumed_from: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    /// One entry per restore (startup resume or in-process recovery).
    pub restore_ms: Vec<f64>,
    pub total_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    /// Shots run to completion by this process, replayed ones included.
    pub shots_executed: u64,
    /// In-flight shots rebuilt by pinned replay.
    pub shots_replayed: u64,
    pub iterations_executed: u64,
    /// Measurements and resets sampled freely.
    pub measurements: u64,
    /// Measurements and resets forced from a transcript during replay.
    pub replayed_measurements: u64,
    pub checkpoints_created: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub workload: String,
    pub program_digest: String,
    /// Decimal string, as in checkpoint records.
    pub master_seed: String,
    pub policy: String,
    pub status: RunStatus,
    pub resumed: bool,
    pub resumed_from: Option<String>,
    /// Absent when the run was killed.
    pub output: Option<WorkloadOutput>,
    pub checkpoints: Vec<CheckpointSummary>,
    pub failures: Vec<FailureRecord>,
    pub timing: Timing,
    pub counts: Counts,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The report with wall-clock fields zeroed, for comparing runs.
    pub fn without_timing(&self) -> RunReport {
        let mut r = self.clone();
        r.timing = Timing::default();
        for c in &mut r.checkpoints {
            c.create_ms = 0.0;
        }
        r
    }
}

/// `m=01 out=110`: every creg in declaration order.
pub fn outcome_key(registers: &Registers, order: &[String]) -> String {
    order
        .iter()
        .map(|name| {
            let bits: String = registers[name].iter().map(|b| char::from(b'0' + b)).collect();
            format!("{name}={bits}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

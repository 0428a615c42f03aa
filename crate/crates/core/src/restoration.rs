//! Rebuilding execution from a checkpoint record: pinned replay of the
//! in-flight shot for classicalized and logical records, parameter
//! rehydration for algorithmic ones.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checkpoint_store::{CheckpointRecord, ShotCursor};
use crate::circuit_ir::{region_boundaries, CheckpointClass, Position, Program};
use crate::sim::{Registers, ShotExecutor, ShotRun, SimError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RestoreError {
    #[error("checkpoint was taken for program {record}, not {program}")]
    ProgramMismatch { record: String, program: String },
    #[error("{0} is not a checkpointable boundary of this program")]
    BoundaryNotFound(Position),
    #[error("shot {0} is neither completed nor in flight in this checkpoint")]
    ShotNotInRecord(u64),
    #[error("replay diverged from the checkpoint: {0}")]
    ReplayDiverged(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RestorationMode {
    TranscriptReplay,
    AlgorithmicRestart,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rehydrated {
    pub iteration: u64,
    pub parameters: Vec<f64>,
    pub registers: Registers,
    pub master_seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RestorationPlan {
    pub mode: RestorationMode,
    pub checkpoint: CheckpointRecord,
    pub resume_position: Position,
    pub shots_to_replay: Vec<u64>,
    pub rehydrated: Rehydrated,
}

/// Where the orchestrator picks up after a restore.
#[derive(Clone, Debug, PartialEq)]
pub struct RuntimeState {
    pub program: Program,
    pub position: Position,
    pub shot_cursor: ShotCursor,
    pub iteration: u64,
    pub parameters: Vec<f64>,
    pub histories: BTreeMap<String, Vec<f64>>,
    /// The in-flight shot, replayed up to `position`.
    pub in_flight: Option<ShotRun>,
}

fn is_boundary(program: &Program, position: Position) -> bool {
    position == Position::START
        || region_boundaries(program)
            .iter()
            .any(|b| b.checkpointable && b.position == position)
}

/// Decide how to restore `record` against `program`.
pub fn plan_restoration(record: &CheckpointRecord, program: &Program) -> Result<RestorationPlan, RestoreError> {
    if record.program_digest != program.source_digest {
        return Err(RestoreError::ProgramMismatch {
            record: record.program_digest.clone(),
            program: program.source_digest.clone(),
        });
    }
    if !is_boundary(program, record.position) {
        return Err(RestoreError::BoundaryNotFound(record.position));
    }
    let (mode, shots_to_replay) = match record.class {
        CheckpointClass::Algorithmic => (RestorationMode::AlgorithmicRestart, Vec::new()),
        CheckpointClass::Classicalized | CheckpointClass::Logical => (
            RestorationMode::TranscriptReplay,
            record.shot_cursor.in_flight_shot.into_iter().collect(),
        ),
    };
    Ok(RestorationPlan {
        mode,
        checkpoint: record.clone(),
        resume_position: record.position,
        shots_to_replay,
        rehydrated: Rehydrated {
            iteration: record.iteration,
            parameters: record.parameters.clone(),
            registers: record.registers.clone(),
            master_seed: record.master_seed,
        },
    })
}

/// Replay one shot with its recorded outcomes pinned. The in-flight shot
/// halts at the record's position and is checked against the recorded
/// registers and guard decisions; a completed shot runs to its end.
pub fn replay_to_boundary(program: &Program, record: &CheckpointRecord, shot: u64) -> Result<ShotRun, RestoreError> {
    let cursor = &record.shot_cursor;
    let in_flight = cursor.in_flight_shot == Some(shot);
    if !in_flight && shot >= cursor.completed_shots {
        return Err(RestoreError::ShotNotInRecord(shot));
    }
    let pinned = record.transcript.iter().filter(|e| e.shot_index == shot).copied();
    let mut ex = ShotExecutor::<f64>::for_master_seed(program, shot, record.master_seed, pinned)?;
    if !in_flight {
        return Ok(ex.run_to_end()?);
    }
    ex.run_until(record.position.op_index)?;
    if ex.pinned_remaining() > 0 {
        return Err(RestoreError::ReplayDiverged(format!(
            "{} recorded events lie beyond {}",
            ex.pinned_remaining(),
            record.position
        )));
    }
    let ctx = ex.context();
    if ctx.registers != record.registers {
        return Err(RestoreError::ReplayDiverged(format!(
            "registers {:?}, recorded {:?}",
            ctx.registers, record.registers
        )));
    }
    if ctx.control_flow != record.control_flow {
        return Err(RestoreError::ReplayDiverged("guard decisions differ".into()));
    }
    Ok(ex.into_run())
}

/// Plan and execute the restore, producing the state the orchestrator
/// continues from. Completed shots are not touched.
pub fn resume(record: &CheckpointRecord, program: &Program) -> Result<RuntimeState, RestoreError> {
    let plan = plan_restoration(record, program)?;
    let in_flight = match plan.shots_to_replay.first() {
        Some(&shot) => Some(replay_to_boundary(program, record, shot)?),
        None => None,
    };
    Ok(RuntimeState {
        program: program.clone(),
        position: plan.resume_position,
        shot_cursor: record.shot_cursor,
        iteration: plan.rehydrated.iteration,
        parameters: plan.rehydrated.parameters,
        histories: record.histories.clone(),
        in_flight,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit_ir::parse_program;
    use crate::sim::{run_shot, MeasurementEvent};

    const BELL: &str = "qubits 2\ncreg m 1\nregion prep\nh 0\ncx 0 1\nmeasure 0 -> m[0]\nckpt\nregion tail\nx 1\n";

    fn record_for(program: &Program, class: CheckpointClass) -> CheckpointRecord {
        CheckpointRecord::new(class, &program.source_digest, 0)
    }

    #[test]
    fn algorithmic_plan() {
        let p = parse_program(BELL).unwrap();
        let mut r = record_for(&p, CheckpointClass::Algorithmic);
        r.iteration = 5;
        r.parameters = vec![0.3, 0.7];
        let plan = plan_restoration(&r, &p).unwrap();
        assert_eq!(plan.mode, RestorationMode::AlgorithmicRestart);
        assert_eq!(plan.rehydrated.iteration, 5);
        assert_eq!(plan.rehydrated.parameters, [0.3, 0.7]);
        assert!(plan.shots_to_replay.is_empty());
    }

    #[test]
    fn mismatch_and_bad_boundary() {
        let p = parse_program(BELL).unwrap();
        let mut r = record_for(&p, CheckpointClass::Classicalized);
        r.program_digest = "0".repeat(64);
        assert!(matches!(
            plan_restoration(&r, &p),
            Err(RestoreError::ProgramMismatch { .. })
        ));
        let mut r = record_for(&p, CheckpointClass::Classicalized);
        r.position = Position {
            region_index: 0,
            op_index: 2,
        };
        assert!(matches!(
            plan_restoration(&r, &p),
            Err(RestoreError::BoundaryNotFound(_))
        ));
    }

    /// Find a seed whose free run of shot 0 measures `want`.
    fn seed_for(p: &Program, want: u8) -> u64 {
        (0..64)
            .find(|&s| {
                let run = run_shot::<f64>(p, 0, crate::sim::derive_shot_seed(s, 0), &[]).unwrap();
                run.context.registers["m"][0] == want
            })
            .unwrap()
    }

    #[test]
    fn bell_replay_reaches_boundary() {
        let p = parse_program(BELL).unwrap();
        let seed = seed_for(&p, 1);
        let mut ex = ShotExecutor::<f64>::for_master_seed(&p, 0, seed, []).unwrap();
        ex.run_until(4).unwrap();
        let live = ex.context().clone();

        let mut r = CheckpointRecord::new(CheckpointClass::Classicalized, &p.source_digest, seed);
        r.position = Position {
            region_index: 0,
            op_index: 4,
        };
        r.shot_cursor = ShotCursor {
            completed_shots: 0,
            shots_total: 1,
            in_flight_shot: Some(0),
        };
        r.registers = live.registers.clone();
        r.transcript = live.transcript.clone();

        let plan = plan_restoration(&r, &p).unwrap();
        assert_eq!(plan.mode, RestorationMode::TranscriptReplay);
        assert_eq!(plan.shots_to_replay, [0]);

        let run = replay_to_boundary(&p, &r, 0).unwrap();
        assert_eq!(run.context.registers["m"], [1]);
        assert_eq!(run.context.rng, live.rng);
        assert_eq!(run.context.pc, 4);
        // Post-measurement state is |11⟩.
        assert!((run.state.amplitudes()[3].norm_sqr() - 1.0).abs() < 1e-12);

        let a = resume(&r, &p).unwrap();
        let b = resume(&r, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_transcript_at_start() {
        let p = parse_program(BELL).unwrap();
        let mut r = record_for(&p, CheckpointClass::Classicalized);
        r.shot_cursor = ShotCursor {
            completed_shots: 0,
            shots_total: 3,
            in_flight_shot: Some(0),
        };
        r.registers = p.empty_registers();
        let run = replay_to_boundary(&p, &r, 0).unwrap();
        assert_eq!(run.context.pc, 0);
        assert_eq!(run.context.rng.draws(), 0);
    }

    #[test]
    fn impossible_outcome_surfaces() {
        let p = parse_program("qubits 1\ncreg m 1\nmeasure 0 -> m[0]\nckpt\nx 0\n").unwrap();
        let mut r = record_for(&p, CheckpointClass::Classicalized);
        r.position = Position {
            region_index: 0,
            op_index: 1,
        };
        r.shot_cursor = ShotCursor {
            completed_shots: 0,
            shots_total: 1,
            in_flight_shot: Some(0),
        };
        r.registers.insert("m".into(), vec![1]);
        r.transcript.push(MeasurementEvent {
            shot_index: 0,
            op_index: 0,
            qubit: 0,
            outcome: 1,
            forced: false,
        });
        let err = resume(&r, &p).unwrap_err();
        assert!(matches!(
            err,
            RestoreError::Sim(SimError::ZeroProbabilityOutcome { .. })
        ));
    }

    #[test]
    fn cursor_arithmetic() {
        let p = parse_program(BELL).unwrap();
        let mut r = record_for(&p, CheckpointClass::Classicalized);
        r.shot_cursor = ShotCursor {
            completed_shots: 37,
            shots_total: 100,
            in_flight_shot: Some(37),
        };
        r.registers = p.empty_registers();
        let state = resume(&r, &p).unwrap();
        assert_eq!(state.shot_cursor.completed_shots, 37);
        assert_eq!(state.in_flight.unwrap().context.shot_index, 37);
    }
}

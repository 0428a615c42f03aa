//! Dry-run check that a store can be restored: every record's digest is
//! re-verified, then each record on the latest lineage is planned against the
//! program and its shots are replayed from the transcript.

use serde::Serialize;

use qcr_core::checkpoint_store::{CheckpointRecord, Store, StoreError};
use qcr_core::circuit_ir::{CheckpointClass, Program};
use qcr_core::restoration::{plan_restoration, replay_to_boundary, RestoreError};

use super::Exit;

#[derive(Serialize)]
pub struct Summary {
    pub records: usize,
    pub lineage: Vec<Checked>,
}

#[derive(Serialize)]
pub struct Checked {
    pub id: String,
    pub class: CheckpointClass,
    pub shots_replayed: u64,
}

fn failed(id: &str, kind: &str, detail: impl std::fmt::Display) -> Exit {
    Exit::new(6, format!("verification failed: checkpoint {id}: {kind}: {detail}"))
}

fn store_kind(e: &StoreError) -> &'static str {
    match e {
        StoreError::DigestMismatch { .. } => "DigestMismatch",
        StoreError::VersionUnsupported(_) => "VersionUnsupported",
        StoreError::SchemaError(_) => "SchemaError",
        StoreError::NotFound(_) => "NotFound",
        StoreError::ParentMissing(_) => "ParentMissing",
        StoreError::StorageIO(_) => "StorageIO",
    }
}

fn restore_kind(e: &RestoreError) -> &'static str {
    match e {
        RestoreError::ProgramMismatch { .. } => "ProgramMismatch",
        RestoreError::BoundaryNotFound(_) => "BoundaryNotFound",
        RestoreError::ShotNotInRecord(_) => "ShotNotInRecord",
        RestoreError::ReplayDiverged(_) => "ReplayDiverged",
        RestoreError::Sim(_) => "ReplayDiverged",
    }
}

fn read(store: &Store, id: &str) -> Result<CheckpointRecord, Exit> {
    store.get(id).map_err(|e| match e {
        StoreError::StorageIO(_) => e.into(),
        e => failed(id, store_kind(&e), e),
    })
}

pub fn verify(store: &Store, program: &Program) -> Result<Summary, Exit> {
    let ids = store.list()?;
    let latest = super::latest(store)?;
    for id in &ids {
        read(store, id)?;
    }
    let mut lineage = Vec::new();
    let mut next = Some(latest);
    while let Some(id) = next {
        let record = read(store, &id)?;
        let shots_replayed = check(program, &record).map_err(|e| failed(&id, restore_kind(&e), e))?;
        next = record.parent_id.clone();
        if next.as_deref().is_some_and(|p| !ids.iter().any(|i| i == p)) {
            return Err(failed(&id, "ParentMissing", next.unwrap()));
        }
        lineage.push(Checked {
            id,
            class: record.class,
            shots_replayed,
        });
    }
    lineage.reverse();
    Ok(Summary {
        records: ids.len(),
        lineage,
    })
}

/// Plan the restore and replay every shot the record covers with its
/// outcomes pinned. Completed shots must consume exactly their recorded
/// events; the in-flight shot must reproduce the recorded registers.
fn check(program: &Program, record: &CheckpointRecord) -> Result<u64, RestoreError> {
    let plan = plan_restoration(record, program)?;
    if record.class == CheckpointClass::Algorithmic {
        return Ok(0);
    }
    let cursor = &record.shot_cursor;
    let shots = (0..cursor.completed_shots).chain(plan.shots_to_replay.iter().copied());
    let mut replayed = 0;
    for shot in shots {
        let run = replay_to_boundary(program, record, shot)?;
        let recorded: Vec<_> = record
            .transcript
            .iter()
            .filter(|e| e.shot_index == shot)
            .map(|e| (e.op_index, e.qubit, e.outcome))
            .collect();
        let got: Vec<_> = run
            .context
            .transcript
            .iter()
            .map(|e| (e.op_index, e.qubit, e.outcome))
            .collect();
        if got != recorded {
            return Err(RestoreError::ReplayDiverged(format!(
                "shot {shot}: replay produced {} events, transcript holds {}",
                got.len(),
                recorded.len()
            )));
        }
        replayed += 1;
    }
    Ok(replayed)
}

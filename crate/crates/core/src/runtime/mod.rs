//! Checkpoint manager, failure policy engine and algorithm drivers.

pub mod engine;
pub mod falqon;
pub mod policy;
pub mod report;
pub mod vqe;
pub mod workload;

use thiserror::Error;

use crate::checkpoint_store::StoreError;
use crate::circuit_ir::ParseError;
use crate::restoration::RestoreError;
use crate::sim::SimError;

pub use engine::{ghz_target, resume_workflow, run_workflow, RunConfig};
pub use falqon::{FalqonConfig, FalqonOutput};
pub use policy::{
    on_failure, FailureAction, FailureEvent, FailureKind, FailureSpec, Policy, Recovery, Trigger, DEFAULT_BACKEND,
};
pub use report::{RunReport, RunStatus, WorkloadOutput};
pub use vqe::{VqeConfig, VqeOutput};
pub use workload::{ShotKind, Workload};

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("failure spec out of range: {0}")]
    SpecOutOfRange(String),
    #[error(transparent)]
    Parse(ParseError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Restore(#[from] RestoreError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

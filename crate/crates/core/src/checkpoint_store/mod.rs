//! Classical checkpoint records: canonical JSON form, content addressing,
//! and a directory-backed store with parent-linked lineage.

pub mod record;
pub mod store;

use thiserror::Error;

pub use record::{
    canonical_serialize, deserialize, deserialize_addressed, now_timestamp, CheckpointRecord, DecoderState, ShotCursor,
    FORMAT_VERSION,
};
pub use store::{FaultPoint, Store};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StoreError {
    #[error("checkpoint digest mismatch: stated {expected}, computed {actual}")]
    DigestMismatch { expected: String, actual: String },
    #[error("unsupported checkpoint format version {0}")]
    VersionUnsupported(u64),
    #[error("malformed checkpoint: {0}")]
    SchemaError(String),
    #[error("checkpoint {0} not found")]
    NotFound(String),
    #[error("parent checkpoint {0} missing")]
    ParentMissing(String),
    #[error("storage error: {0}")]
    StorageIO(String),
}

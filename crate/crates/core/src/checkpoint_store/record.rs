//! The checkpoint record and its canonical byte form.

use std::collections::BTreeMap;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::StoreError;
use crate::circuit_ir::{hex_lower, CheckpointClass, Position};
use crate::sim::shot::{ControlFlowEntry, Registers, Transcript};

pub const FORMAT_VERSION: u64 = 1;

/// Fields left out of the content digest.
const UNDIGESTED: [&str; 2] = ["checkpoint_id", "created_at"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShotCursor {
    pub completed_shots: u64,
    pub shots_total: u64,
    pub in_flight_shot: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderState {
    /// One of `I`, `X`, `Y`, `Z` per data qubit.
    pub pauli_frame: String,
    pub syndrome_history: Vec<Vec<u8>>,
}

/// Classical state from which a run can be restored. Holds no amplitudes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointRecord {
    pub version: u64,
    pub checkpoint_id: String,
    pub parent_id: Option<String>,
    pub class: CheckpointClass,
    pub program_digest: String,
    pub position: Position,
    pub shot_cursor: ShotCursor,
    #[serde(with = "decimal_u64")]
    pub master_seed: u64,
    /// Registers of the in-flight shot, if any.
    pub registers: Registers,
    pub transcript: Transcript,
    pub iteration: u64,
    pub parameters: Vec<f64>,
    pub control_flow: Vec<ControlFlowEntry>,
    pub calibration_metadata: BTreeMap<String, String>,
    pub decoder_state: Option<DecoderState>,
    /// Per-iteration scalar series (energies, feedback values, ...).
    pub histories: BTreeMap<String, Vec<f64>>,
    pub created_at: String,
}

mod decimal_u64 {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        let s = String::deserialize(d)?;
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) || (s.len() > 1 && s.starts_with('0')) {
            return Err(D::Error::custom(format!("`{s}` is not a decimal u64")));
        }
        s.parse().map_err(D::Error::custom)
    }
}

pub fn now_timestamp() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Micros, true)
}

fn is_digest(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

fn schema(msg: impl Into<String>) -> StoreError {
    StoreError::SchemaError(msg.into())
}

fn check_bits(what: &str, bits: &[u8]) -> Result<(), StoreError> {
    match bits.iter().find(|&&b| b > 1) {
        Some(b) => Err(schema(format!("{what} holds non-bit value {b}"))),
        None => Ok(()),
    }
}

fn check_finite(what: &str, xs: &[f64]) -> Result<(), StoreError> {
    match xs.iter().find(|x| !x.is_finite()) {
        Some(x) => Err(schema(format!("{what} holds non-finite value {x}"))),
        None => Ok(()),
    }
}

/// Compact JSON with keys in byte order (serde_json's map is a BTreeMap).
fn canonical_value_bytes(v: &Value) -> Vec<u8> {
    serde_json::to_vec(v).expect("serializing a JSON value cannot fail")
}

fn digest_of_value(mut v: Value) -> String {
    if let Value::Object(map) = &mut v {
        for k in UNDIGESTED {
            map.remove(k);
        }
    }
    hex_lower(&Sha256::digest(canonical_value_bytes(&v)))
}

impl CheckpointRecord {
    /// Unsealed record with empty contents; fill in fields, then `seal`.
    pub fn new(class: CheckpointClass, program_digest: &str, master_seed: u64) -> Self {
        CheckpointRecord {
            version: FORMAT_VERSION,
            checkpoint_id: String::new(),
            parent_id: None,
            class,
            program_digest: program_digest.to_string(),
            position: Position::START,
            shot_cursor: ShotCursor {
                completed_shots: 0,
                shots_total: 0,
                in_flight_shot: None,
            },
            master_seed,
            registers: Registers::new(),
            transcript: Vec::new(),
            iteration: 0,
            parameters: Vec::new(),
            control_flow: Vec::new(),
            calibration_metadata: BTreeMap::new(),
            decoder_state: None,
            histories: BTreeMap::new(),
            created_at: now_timestamp(),
        }
    }

    fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("record fields serialize infallibly")
    }

    /// SHA-256 over the canonical form with `checkpoint_id` and
    /// `created_at` removed.
    pub fn compute_id(&self) -> String {
        digest_of_value(self.to_value())
    }

    /// Check every invariant except the id itself.
    pub fn check_invariants(&self) -> Result<(), StoreError> {
        if self.version != FORMAT_VERSION {
            return Err(StoreError::VersionUnsupported(self.version));
        }
        if !is_digest(&self.program_digest) {
            return Err(schema("program_digest is not 64 lowercase hex chars"));
        }
        if let Some(p) = &self.parent_id {
            if !is_digest(p) {
                return Err(schema("parent_id is not 64 lowercase hex chars"));
            }
        }
        let c = &self.shot_cursor;
        if c.completed_shots > c.shots_total {
            return Err(schema(format!(
                "completed_shots {} exceeds shots_total {}",
                c.completed_shots, c.shots_total
            )));
        }
        if let Some(s) = c.in_flight_shot {
            if s < c.completed_shots || s >= c.shots_total {
                return Err(schema(format!("in_flight_shot {s} outside the open shot range")));
            }
        }
        for (name, bits) in &self.registers {
            check_bits(&format!("register {name}"), bits)?;
        }
        if let Some(e) = self.transcript.iter().find(|e| e.outcome > 1) {
            return Err(schema(format!("transcript outcome {} at op {}", e.outcome, e.op_index)));
        }
        check_finite("parameters", &self.parameters)?;
        for (name, xs) in &self.histories {
            check_finite(&format!("history {name}"), xs)?;
        }
        match (&self.class, &self.decoder_state) {
            (CheckpointClass::Logical, None) => return Err(schema("logical checkpoint without decoder_state")),
            (CheckpointClass::Logical, Some(d)) => {
                if let Some(ch) = d.pauli_frame.chars().find(|c| !"IXYZ".contains(*c)) {
                    return Err(schema(format!("pauli_frame holds `{ch}`")));
                }
                for round in &d.syndrome_history {
                    check_bits("syndrome_history", round)?;
                }
            }
            (_, Some(_)) => return Err(schema("decoder_state on a non-logical checkpoint")),
            (_, None) => {}
        }
        DateTime::parse_from_rfc3339(&self.created_at)
            .map_err(|e| schema(format!("created_at `{}`: {e}", self.created_at)))?;
        Ok(())
    }

    /// Validate and stamp the content id.
    pub fn seal(mut self) -> Result<Self, StoreError> {
        self.check_invariants()?;
        self.checkpoint_id = self.compute_id();
        Ok(self)
    }

    pub fn is_sealed(&self) -> bool {
        is_digest(&self.checkpoint_id) && self.checkpoint_id == self.compute_id()
    }
}

pub fn canonical_serialize(record: &CheckpointRecord) -> Vec<u8> {
    canonical_value_bytes(&record.to_value())
}

/// Parse and verify a record.
///
/// Bytes that carry a checkpoint id but no longer parse are reported as
/// `DigestMismatch`: the content does not match its address.
pub fn deserialize(bytes: &[u8]) -> Result<CheckpointRecord, StoreError> {
    decode(bytes, None)
}

/// Like [`deserialize`], for bytes fetched under the address `id`. Anything
/// that stops the content from hashing to `id`, including bytes that no
/// longer parse, is a `DigestMismatch`.
pub fn deserialize_addressed(bytes: &[u8], id: &str) -> Result<CheckpointRecord, StoreError> {
    decode(bytes, Some(id))
}

fn decode(bytes: &[u8], address: Option<&str>) -> Result<CheckpointRecord, StoreError> {
    let mismatch = |expected: String, actual: String| StoreError::DigestMismatch { expected, actual };
    let value: Value = match serde_json::from_slice(bytes) {
        Ok(v) => v,
        Err(e) => {
            let actual = format!("unparseable ({e})");
            return Err(match address.map(str::to_string).or_else(|| claimed_id(bytes)) {
                Some(id) => mismatch(id, actual),
                None => schema(format!("not a JSON checkpoint: {e}")),
            });
        }
    };
    let Value::Object(map) = &value else {
        return Err(match address {
            Some(id) => mismatch(id.to_string(), "top level is not an object".into()),
            None => schema("top level is not an object"),
        });
    };
    let stated = match (map.get("checkpoint_id").and_then(Value::as_str), address) {
        (Some(s), _) => s.to_string(),
        (None, Some(id)) => return Err(mismatch(id.to_string(), "no checkpoint_id".into())),
        (None, None) => return Err(schema("missing checkpoint_id")),
    };
    let actual = digest_of_value(value.clone());
    if let Some(id) = address {
        if id != actual {
            return Err(mismatch(id.to_string(), actual));
        }
    }
    if stated != actual {
        return Err(mismatch(stated, actual));
    }
    if canonical_value_bytes(&value) != bytes {
        return Err(mismatch(stated, "bytes are not in canonical form".into()));
    }
    // The id rules do not depend on the version, so integrity is settled
    // before the version gates the schema.
    match map.get("version").and_then(Value::as_u64) {
        Some(FORMAT_VERSION) => {}
        Some(v) => return Err(StoreError::VersionUnsupported(v)),
        None => return Err(schema("version is missing or not an integer")),
    }
    let record: CheckpointRecord = serde_json::from_value(value).map_err(|e| schema(e.to_string()))?;
    if !is_digest(&record.checkpoint_id) {
        return Err(schema("checkpoint_id is not 64 lowercase hex chars"));
    }
    record.check_invariants()?;
    Ok(record)
}

fn claimed_id(bytes: &[u8]) -> Option<String> {
    const KEY: &[u8] = b"\"checkpoint_id\":\"";
    let at = bytes.windows(KEY.len()).position(|w| w == KEY)? + KEY.len();
    let id = std::str::from_utf8(bytes.get(at..at + 64)?).ok()?;
    is_digest(id).then(|| id.to_string())
}

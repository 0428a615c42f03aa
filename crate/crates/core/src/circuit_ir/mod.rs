//! Dynamic-circuit program representation.
//!
//! A [`Program`] is a flat instruction list partitioned into named regions.
//! Region starts and explicit `ckpt` markers are the only places a checkpoint
//! can be cut, because those are the points where everything the rest of the
//! shot depends on is already classical.

mod gate;
mod parser;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use gate::{Gate, GateError};
pub use parser::{parse_program, parse_program_bytes, ParseError, ParseErrorKind};
pub use validate::{validate, Diagnostic, Severity};

/// Statevector cap; programs wider than this are rejected up front.
pub const MAX_QUBITS: usize = 22;

/// Name given to the region covering instructions before the first `region` line.
pub const IMPLICIT_REGION: &str = "main";

/// Class of a checkpoint, as hinted by a `ckpt` marker or chosen by policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckpointClass {
    Classicalized,
    Algorithmic,
    Logical,
}

impl CheckpointClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            CheckpointClass::Classicalized => "classicalized",
            CheckpointClass::Algorithmic => "algorithmic",
            CheckpointClass::Logical => "logical",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "classicalized" => Some(CheckpointClass::Classicalized),
            "algorithmic" => Some(CheckpointClass::Algorithmic),
            "logical" => Some(CheckpointClass::Logical),
            _ => None,
        }
    }
}

impl fmt::Display for CheckpointClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CregDecl {
    pub name: String,
    pub width: usize,
}

/// Reference to one bit of a classical register, `name[index]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitRef {
    pub creg: String,
    pub index: usize,
}

impl fmt::Display for BitRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.creg, self.index)
    }
}

/// `if <bit> == <value>:` guard.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub bit: BitRef,
    pub value: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum InstructionKind {
    Gate {
        gate: Gate,
        qubits: Vec<usize>,
    },
    Measure {
        qubit: usize,
        target: BitRef,
    },
    Reset {
        qubit: usize,
    },
    Guarded {
        condition: Condition,
        inner: Box<InstructionKind>,
    },
    RegionStart {
        name: String,
    },
    CheckpointMarker {
        class: Option<CheckpointClass>,
    },
}

impl InstructionKind {
    pub fn gate(gate: Gate, qubits: &[usize]) -> Self {
        InstructionKind::Gate {
            gate,
            qubits: qubits.to_vec(),
        }
    }

    pub fn measure(qubit: usize, creg: &str, index: usize) -> Self {
        InstructionKind::Measure {
            qubit,
            target: BitRef {
                creg: creg.to_string(),
                index,
            },
        }
    }

    pub fn guarded(creg: &str, index: usize, value: u8, inner: InstructionKind) -> Self {
        InstructionKind::Guarded {
            condition: Condition {
                bit: BitRef {
                    creg: creg.to_string(),
                    index,
                },
                value,
            },
            inner: Box::new(inner),
        }
    }

    pub fn region(name: &str) -> Self {
        InstructionKind::RegionStart { name: name.to_string() }
    }

    /// True for instructions that produce a measurement event when executed.
    pub fn is_measurement(&self) -> bool {
        matches!(self, InstructionKind::Measure { .. } | InstructionKind::Reset { .. })
    }

    /// True for region starts and checkpoint markers, which do nothing at run time.
    pub fn is_marker(&self) -> bool {
        matches!(
            self,
            InstructionKind::RegionStart { .. } | InstructionKind::CheckpointMarker { .. }
        )
    }

    pub fn qubits(&self) -> Vec<usize> {
        match self {
            InstructionKind::Gate { qubits, .. } => qubits.clone(),
            InstructionKind::Measure { qubit, .. } | InstructionKind::Reset { qubit } => vec![*qubit],
            InstructionKind::Guarded { inner, .. } => inner.qubits(),
            _ => Vec::new(),
        }
    }
}

impl fmt::Display for InstructionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstructionKind::Gate { gate, qubits } => {
                write!(f, "{gate}")?;
                for q in qubits {
                    write!(f, " {q}")?;
                }
                Ok(())
            }
            InstructionKind::Measure { qubit, target } => write!(f, "measure {qubit} -> {target}"),
            InstructionKind::Reset { qubit } => write!(f, "reset {qubit}"),
            InstructionKind::Guarded { condition, inner } => {
                write!(f, "if {} == {}: {inner}", condition.bit, condition.value)
            }
            InstructionKind::RegionStart { name } => write!(f, "region {name}"),
            InstructionKind::CheckpointMarker { class: None } => f.write_str("ckpt"),
            InstructionKind::CheckpointMarker { class: Some(c) } => write!(f, "ckpt {c}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    pub op_index: usize,
    pub kind: InstructionKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionDescriptor {
    pub name: String,
    pub start_op: usize,
    /// Exclusive.
    pub end_op: usize,
    pub checkpointable: bool,
}

/// Where execution stands: all ops with index `< op_index` have run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Position {
    pub region_index: usize,
    pub op_index: usize,
}

impl Position {
    pub const START: Position = Position {
        region_index: 0,
        op_index: 0,
    };
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "region {} op {}", self.region_index, self.op_index)
    }
}

/// A place where a checkpoint may be cut.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Boundary {
    pub region: String,
    pub position: Position,
    pub checkpointable: bool,
    /// Class requested by an explicit `ckpt` marker at this op, if any.
    pub class_hint: Option<CheckpointClass>,
    pub is_region_start: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Program {
    pub num_qubits: usize,
    pub cregs: Vec<CregDecl>,
    pub instructions: Vec<Instruction>,
    pub regions: Vec<RegionDescriptor>,
    pub source_digest: String,
}

/// Lowercase hex SHA-256 of the exact source bytes.
pub fn program_digest(text: &str) -> String {
    hex_lower(&Sha256::digest(text.as_bytes()))
}

pub(crate) fn hex_lower(bytes: &[u8]) -> String {
    use std::fmt::Write;
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Contiguous regions covering `kinds`. A leading run of instructions with no
/// `region` line gets the implicit region.
pub(crate) fn compute_regions(kinds: &[InstructionKind]) -> Vec<RegionDescriptor> {
    let mut regions: Vec<RegionDescriptor> = Vec::new();
    for (i, kind) in kinds.iter().enumerate() {
        match kind {
            InstructionKind::RegionStart { name } => {
                if let Some(last) = regions.last_mut() {
                    last.end_op = i;
                }
                regions.push(RegionDescriptor {
                    name: name.clone(),
                    start_op: i,
                    end_op: i + 1,
                    checkpointable: true,
                });
            }
            _ if regions.is_empty() => regions.push(RegionDescriptor {
                name: IMPLICIT_REGION.to_string(),
                start_op: 0,
                end_op: i + 1,
                checkpointable: true,
            }),
            _ => {}
        }
    }
    if let Some(last) = regions.last_mut() {
        last.end_op = kinds.len();
    }
    regions
}

impl Program {
    /// Builds a program from parts without validating it. Op indices and
    /// regions are derived; the digest is that of the printed form.
    pub fn from_parts(num_qubits: usize, cregs: Vec<CregDecl>, kinds: Vec<InstructionKind>) -> Self {
        let regions = compute_regions(&kinds);
        let instructions = kinds
            .into_iter()
            .enumerate()
            .map(|(op_index, kind)| Instruction { op_index, kind })
            .collect();
        let mut program = Program {
            num_qubits,
            cregs,
            instructions,
            regions,
            source_digest: String::new(),
        };
        program.source_digest = program_digest(&program.to_string());
        program
    }

    /// Builds and validates; any error diagnostic is returned as `Err`.
    pub fn build(
        num_qubits: usize,
        cregs: Vec<CregDecl>,
        kinds: Vec<InstructionKind>,
    ) -> Result<Self, Vec<Diagnostic>> {
        let program = Self::from_parts(num_qubits, cregs, kinds);
        let errors: Vec<_> = validate(&program)
            .into_iter()
            .filter(|d| d.severity == Severity::Error)
            .collect();
        if errors.is_empty() {
            Ok(program)
        } else {
            Err(errors)
        }
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    /// Instructions that do something at run time (everything but markers).
    pub fn body_len(&self) -> usize {
        self.instructions.iter().filter(|i| !i.kind.is_marker()).count()
    }

    pub fn creg_width(&self, name: &str) -> Option<usize> {
        self.cregs.iter().find(|c| c.name == name).map(|c| c.width)
    }

    pub fn region_index_of(&self, op_index: usize) -> Option<usize> {
        self.regions
            .iter()
            .position(|r| r.start_op <= op_index && op_index < r.end_op)
    }

    pub fn position_of(&self, op_index: usize) -> Option<Position> {
        self.region_index_of(op_index)
            .map(|region_index| Position { region_index, op_index })
    }

    /// Zeroed registers for every declared creg.
    pub fn empty_registers(&self) -> BTreeMap<String, Vec<u8>> {
        self.cregs
            .iter()
            .map(|c| (c.name.clone(), vec![0u8; c.width]))
            .collect()
    }

    /// Number of rotation angles, in program order (guarded gates included).
    pub fn parameter_count(&self) -> usize {
        self.instructions
            .iter()
            .filter(|i| gate_of(&i.kind).and_then(|g| g.angle()).is_some())
            .count()
    }

    /// Same program with rotation angles replaced, in order, by `params`.
    pub fn bind_parameters(&self, params: &[f64]) -> Result<Program, BindError> {
        let expected = self.parameter_count();
        if params.len() != expected {
            return Err(BindError {
                expected,
                got: params.len(),
            });
        }
        let mut next = params.iter().copied();
        let kinds = self.instructions.iter().map(|i| rebind(&i.kind, &mut next)).collect();
        Ok(Program::from_parts(self.num_qubits, self.cregs.clone(), kinds))
    }

    /// Equality ignoring `source_digest`.
    pub fn structurally_eq(&self, other: &Program) -> bool {
        self.num_qubits == other.num_qubits
            && self.cregs == other.cregs
            && self.instructions == other.instructions
            && self.regions == other.regions
    }
}

fn gate_of(kind: &InstructionKind) -> Option<&Gate> {
    match kind {
        InstructionKind::Gate { gate, .. } => Some(gate),
        InstructionKind::Guarded { inner, .. } => gate_of(inner),
        _ => None,
    }
}

fn rebind(kind: &InstructionKind, params: &mut impl Iterator<Item = f64>) -> InstructionKind {
    match kind {
        InstructionKind::Gate { gate, qubits } if gate.angle().is_some() => InstructionKind::Gate {
            gate: gate.with_angle(params.next().unwrap_or_default()),
            qubits: qubits.clone(),
        },
        InstructionKind::Guarded { condition, inner } => InstructionKind::Guarded {
            condition: condition.clone(),
            inner: Box::new(rebind(inner, params)),
        },
        other => other.clone(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("program has {expected} rotation angle(s), {got} value(s) supplied")]
pub struct BindError {
    pub expected: usize,
    pub got: usize,
}

impl fmt::Display for Program {
    /// Canonical DSL text; reparsing it yields a structurally identical program.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "qubits {}", self.num_qubits)?;
        for c in &self.cregs {
            writeln!(f, "creg {} {}", c.name, c.width)?;
        }
        for instr in &self.instructions {
            writeln!(f, "{}", instr.kind)?;
        }
        Ok(())
    }
}

/// Checkpointable boundaries in program order: every region start plus every
/// `ckpt` marker. A marker at a region's first op is merged into that region's
/// boundary, so op indices are strictly increasing.
pub fn region_boundaries(program: &Program) -> Vec<Boundary> {
    let mut out: Vec<Boundary> = Vec::new();
    for (region_index, region) in program.regions.iter().enumerate() {
        out.push(Boundary {
            region: region.name.clone(),
            position: Position {
                region_index,
                op_index: region.start_op,
            },
            checkpointable: region.checkpointable,
            class_hint: None,
            is_region_start: true,
        });
        for instr in &program.instructions[region.start_op..region.end_op] {
            if let InstructionKind::CheckpointMarker { class } = instr.kind {
                match out.last_mut() {
                    Some(last) if last.position.op_index == instr.op_index => {
                        last.class_hint = class;
                    }
                    _ => out.push(Boundary {
                        region: region.name.clone(),
                        position: Position {
                            region_index,
                            op_index: instr.op_index,
                        },
                        checkpointable: true,
                        class_hint: class,
                        is_region_start: false,
                    }),
                }
            }
        }
    }
    out
}

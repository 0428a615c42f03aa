use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{InstructionKind, Program, IMPLICIT_REGION, MAX_QUBITS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub op_index: Option<usize>,
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    fn error(op_index: Option<usize>, message: impl Into<String>) -> Self {
        Diagnostic {
            op_index,
            severity: Severity::Error,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        match self.op_index {
            Some(op) => write!(f, "{sev} at op {op}: {}", self.message),
            None => write!(f, "{sev}: {}", self.message),
        }
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Checks every program invariant. Empty iff the program is well formed.
pub fn validate(program: &Program) -> Vec<Diagnostic> {
    let mut out = Vec::new();

    if program.num_qubits == 0 || program.num_qubits > MAX_QUBITS {
        out.push(Diagnostic::error(
            None,
            format!("qubit count {} out of range 1..={MAX_QUBITS}", program.num_qubits),
        ));
    }

    let mut seen = BTreeSet::new();
    for c in &program.cregs {
        if !is_identifier(&c.name) {
            out.push(Diagnostic::error(None, format!("invalid creg name `{}`", c.name)));
        }
        if c.width == 0 {
            out.push(Diagnostic::error(None, format!("creg `{}` has zero width", c.name)));
        }
        if !seen.insert(c.name.as_str()) {
            out.push(Diagnostic::error(None, format!("creg `{}` declared twice", c.name)));
        }
    }

    for (i, instr) in program.instructions.iter().enumerate() {
        if instr.op_index != i {
            out.push(Diagnostic::error(
                Some(i),
                format!("op_index {} stored at position {i}", instr.op_index),
            ));
        }
        check_kind(program, i, &instr.kind, false, &mut out);
    }

    check_regions(program, &mut out);
    check_markers(program, &mut out);
    out
}

fn check_kind(program: &Program, op: usize, kind: &InstructionKind, guarded: bool, out: &mut Vec<Diagnostic>) {
    let n = program.num_qubits;
    let check_qubit = |q: usize, out: &mut Vec<Diagnostic>| {
        if q >= n {
            out.push(Diagnostic::error(Some(op), format!("qubit {q} out of range")));
        }
    };
    let check_bit = |creg: &str, index: usize, out: &mut Vec<Diagnostic>| match program.creg_width(creg) {
        None => out.push(Diagnostic::error(Some(op), format!("undeclared creg `{creg}`"))),
        Some(w) if index >= w => out.push(Diagnostic::error(
            Some(op),
            format!("bit {creg}[{index}] out of range (width {w})"),
        )),
        Some(_) => {}
    };

    match kind {
        InstructionKind::Gate { gate, qubits } => {
            if qubits.len() != gate.arity() {
                out.push(Diagnostic::error(
                    Some(op),
                    format!(
                        "gate `{}` takes {} qubit(s), got {}",
                        gate.name(),
                        gate.arity(),
                        qubits.len()
                    ),
                ));
            }
            for &q in qubits {
                check_qubit(q, out);
            }
            let distinct: BTreeSet<_> = qubits.iter().collect();
            if distinct.len() != qubits.len() {
                out.push(Diagnostic::error(
                    Some(op),
                    format!("gate `{}` repeats a qubit", gate.name()),
                ));
            }
            if let Some(theta) = gate.angle() {
                if !theta.is_finite() {
                    out.push(Diagnostic::error(Some(op), "rotation angle is not finite"));
                }
            }
        }
        InstructionKind::Measure { qubit, target } => {
            check_qubit(*qubit, out);
            check_bit(&target.creg, target.index, out);
        }
        InstructionKind::Reset { qubit } => check_qubit(*qubit, out),
        InstructionKind::Guarded { condition, inner } => {
            if guarded {
                out.push(Diagnostic::error(Some(op), "nested guard"));
            }
            check_bit(&condition.bit.creg, condition.bit.index, out);
            if condition.value > 1 {
                out.push(Diagnostic::error(
                    Some(op),
                    format!("guard compares against {}, expected 0 or 1", condition.value),
                ));
            }
            match inner.as_ref() {
                InstructionKind::Guarded { .. } => {
                    out.push(Diagnostic::error(Some(op), "nested guard"));
                }
                k if k.is_marker() => {
                    out.push(Diagnostic::error(
                        Some(op),
                        "guard may not wrap a region or checkpoint marker",
                    ));
                }
                k => check_kind(program, op, k, true, out),
            }
        }
        InstructionKind::RegionStart { name } => {
            if !is_identifier(name) {
                out.push(Diagnostic::error(Some(op), format!("invalid region name `{name}`")));
            }
        }
        InstructionKind::CheckpointMarker { .. } => {}
    }
}

fn check_regions(program: &Program, out: &mut Vec<Diagnostic>) {
    let len = program.instructions.len();
    let regions = &program.regions;
    if len == 0 {
        if !regions.is_empty() {
            out.push(Diagnostic::error(
                None,
                "regions declared for an empty instruction list",
            ));
        }
        return;
    }
    if regions.is_empty() {
        out.push(Diagnostic::error(None, "instructions are not covered by any region"));
        return;
    }

    let mut names = BTreeSet::new();
    for r in regions {
        if !names.insert(r.name.as_str()) {
            out.push(Diagnostic::error(
                Some(r.start_op),
                format!("region `{}` declared twice", r.name),
            ));
        }
        if r.start_op >= r.end_op {
            out.push(Diagnostic::error(
                Some(r.start_op),
                format!(
                    "region `{}` is empty or inverted ({}..{})",
                    r.name, r.start_op, r.end_op
                ),
            ));
        }
    }
    if regions[0].start_op != 0 {
        out.push(Diagnostic::error(Some(0), "first region does not start at op 0"));
    }
    for pair in regions.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if b.start_op < a.end_op {
            out.push(Diagnostic::error(
                Some(b.start_op),
                format!("regions `{}` and `{}` overlap", a.name, b.name),
            ));
        } else if b.start_op > a.end_op {
            out.push(Diagnostic::error(
                Some(a.end_op),
                format!("gap between regions `{}` and `{}`", a.name, b.name),
            ));
        }
    }
    if let Some(last) = regions.last() {
        if last.end_op != len {
            out.push(Diagnostic::error(
                None,
                format!("regions end at op {}, program has {len} ops", last.end_op),
            ));
        }
    }

    // Every region start instruction must open the matching descriptor, and
    // only the implicit leading region may start without one.
    for instr in &program.instructions {
        if let InstructionKind::RegionStart { name } = &instr.kind {
            let opens = regions.iter().any(|r| r.start_op == instr.op_index && &r.name == name);
            if !opens {
                out.push(Diagnostic::error(
                    Some(instr.op_index),
                    format!("region start `{name}` does not open a region descriptor"),
                ));
            }
        }
    }
    for (ri, r) in regions.iter().enumerate() {
        let starts_with_marker = matches!(
            program.instructions.get(r.start_op).map(|i| &i.kind),
            Some(InstructionKind::RegionStart { .. })
        );
        if !starts_with_marker && !(ri == 0 && r.start_op == 0 && r.name == IMPLICIT_REGION) {
            out.push(Diagnostic::error(
                Some(r.start_op),
                format!("region `{}` does not begin with a region start", r.name),
            ));
        }
    }
}

fn check_markers(program: &Program, out: &mut Vec<Diagnostic>) {
    let kinds: Vec<&InstructionKind> = program.instructions.iter().map(|i| &i.kind).collect();
    for (i, kind) in kinds.iter().enumerate() {
        if !matches!(kind, InstructionKind::CheckpointMarker { .. }) {
            continue;
        }
        let is_ckpt = |k: &InstructionKind| matches!(k, InstructionKind::CheckpointMarker { .. });
        let prev = kinds[..i].iter().rev().find(|k| !is_ckpt(k));
        let next = kinds[i + 1..].iter().find(|k| !is_ckpt(k));
        let after_ok = match prev {
            None => true,
            Some(k) => matches!(
                k,
                InstructionKind::RegionStart { .. } | InstructionKind::Measure { .. } | InstructionKind::Reset { .. }
            ),
        };
        let before_ok = matches!(next, None | Some(InstructionKind::RegionStart { .. }));
        if !(after_ok || before_ok) {
            out.push(Diagnostic::error(
                Some(i),
                "checkpoint marker is neither at a region boundary nor immediately after a measurement",
            ));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit_ir::{parse_program, CregDecl, Gate, RegionDescriptor};

    #[test]
    fn bell_is_valid() {
        let p = parse_program("qubits 2\ncreg m 1\nh 0\ncx 0 1\nmeasure 0 -> m[0]\n").unwrap();
        assert!(validate(&p).is_empty());
    }

    #[test]
    fn marker_mid_region_is_rejected() {
        let kinds = vec![
            InstructionKind::region("a"),
            InstructionKind::gate(Gate::H, &[0]),
            InstructionKind::CheckpointMarker { class: None },
            InstructionKind::gate(Gate::X, &[0]),
        ];
        let p = Program::from_parts(1, vec![], kinds);
        let d = validate(&p);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].op_index, Some(2));
        assert_eq!(d[0].severity, Severity::Error);
    }

    #[test]
    fn marker_at_region_end_and_after_reset_are_fine() {
        let kinds = vec![
            InstructionKind::region("a"),
            InstructionKind::gate(Gate::H, &[0]),
            InstructionKind::CheckpointMarker { class: None },
            InstructionKind::region("b"),
            InstructionKind::Reset { qubit: 0 },
            InstructionKind::CheckpointMarker { class: None },
            InstructionKind::gate(Gate::X, &[0]),
        ];
        assert!(validate(&Program::from_parts(1, vec![], kinds)).is_empty());
    }

    #[test]
    fn overlapping_descriptors() {
        let mut p = parse_program("qubits 1\nregion a\nh 0\nregion b\nx 0\n").unwrap();
        p.regions = vec![
            RegionDescriptor {
                name: "a".into(),
                start_op: 0,
                end_op: 3,
                checkpointable: true,
            },
            RegionDescriptor {
                name: "b".into(),
                start_op: 2,
                end_op: 4,
                checkpointable: true,
            },
        ];
        let d = validate(&p);
        assert!(d.iter().any(|d| d.message.contains("overlap")), "{d:?}");
    }

    #[test]
    fn direct_construction_errors() {
        let kinds = vec![
            InstructionKind::gate(Gate::Cx, &[0, 0]),
            InstructionKind::measure(0, "nope", 0),
            InstructionKind::guarded(
                "c",
                0,
                1,
                InstructionKind::guarded("c", 0, 0, InstructionKind::gate(Gate::X, &[0])),
            ),
            InstructionKind::guarded("c", 0, 1, InstructionKind::CheckpointMarker { class: None }),
            InstructionKind::gate(Gate::Rx(f64::NAN), &[0]),
        ];
        let p = Program::from_parts(
            2,
            vec![CregDecl {
                name: "c".into(),
                width: 1,
            }],
            kinds,
        );
        let msgs: Vec<_> = validate(&p).into_iter().map(|d| d.message).collect();
        assert!(msgs.iter().any(|m| m.contains("repeats a qubit")));
        assert!(msgs.iter().any(|m| m.contains("undeclared creg")));
        assert!(msgs.iter().any(|m| m.contains("nested guard")));
        assert!(msgs.iter().any(|m| m.contains("may not wrap")));
        assert!(msgs.iter().any(|m| m.contains("not finite")));
    }
}

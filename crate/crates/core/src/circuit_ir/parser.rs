//! Line-oriented `.qdc` parser.
//!
//! ```text
//! program  := header creg* line*
//! header   := "qubits" INT
//! creg     := "creg" NAME INT
//! line     := region | ckpt | instr | guarded
//! region   := "region" NAME
//! ckpt     := "ckpt" [CLASS]
//! guarded  := "if" NAME "[" INT "]" "==" BIT ":" instr
//! instr    := GATE ["(" ANGLE ")"] INT+ | "measure" INT "->" NAME "[" INT "]" | "reset" INT
//! ```
//!
//! `#` starts a comment. LF and CRLF line endings are both accepted.

use std::fmt;

use super::validate::{is_identifier, validate};
use super::{
    compute_regions, program_digest, BitRef, CheckpointClass, Condition, CregDecl, Gate, GateError, Instruction,
    InstructionKind, Program, Severity,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    SyntaxError,
    SemanticError,
    EmptyProgram,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    /// 1-based.
    pub line: usize,
    /// 1-based, in characters.
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ParseErrorKind::SyntaxError => "syntax error",
            ParseErrorKind::SemanticError => "semantic error",
            ParseErrorKind::EmptyProgram => "empty program",
        };
        write!(f, "{}:{}: {kind}: {}", self.line, self.column, self.message)
    }
}

/// Parses raw bytes; invalid UTF-8 is a syntax error at the offending byte.
pub fn parse_program_bytes(bytes: &[u8]) -> Result<Program, ParseError> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse_program(text),
        Err(e) => {
            let valid = &bytes[..e.valid_up_to()];
            let line = valid.iter().filter(|&&b| b == b'\n').count() + 1;
            let line_start = valid.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
            let column = String::from_utf8_lossy(&valid[line_start..]).chars().count() + 1;
            Err(ParseError {
                kind: ParseErrorKind::SyntaxError,
                line,
                column,
                message: "invalid UTF-8".into(),
            })
        }
    }
}

struct Line<'a> {
    number: usize,
    text: &'a str,
}

impl Line<'_> {
    fn err(&self, kind: ParseErrorKind, byte_offset: usize, message: impl Into<String>) -> ParseError {
        let offset = byte_offset.min(self.text.len());
        let column = self.text.get(..offset).map_or(offset, |s| s.chars().count()) + 1;
        ParseError {
            kind,
            line: self.number,
            column,
            message: message.into(),
        }
    }

    fn syntax(&self, byte_offset: usize, message: impl Into<String>) -> ParseError {
        self.err(ParseErrorKind::SyntaxError, byte_offset, message)
    }
}

/// Byte offset of `sub` within `line`, for slices taken from it.
fn offset_in(line: &str, sub: &str) -> usize {
    (sub.as_ptr() as usize).saturating_sub(line.as_ptr() as usize)
}

pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut num_qubits: Option<(usize, usize)> = None;
    let mut cregs: Vec<CregDecl> = Vec::new();
    let mut kinds: Vec<InstructionKind> = Vec::new();
    // (line, column) of each op, for semantic errors found after assembly.
    let mut spans: Vec<(usize, usize)> = Vec::new();
    let mut last_line = 1;

    for (idx, raw) in text.split('\n').enumerate() {
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        let line = Line {
            number: idx + 1,
            text: raw,
        };
        last_line = line.number;
        let content = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let body = content.trim();
        if body.is_empty() {
            continue;
        }
        let start = offset_in(raw, body);
        let (word, rest) = split_word(body);

        if num_qubits.is_none() {
            if word != "qubits" {
                return Err(line.err(ParseErrorKind::EmptyProgram, start, "missing `qubits` header"));
            }
            let n = parse_index(&line, rest, "qubit count")?;
            num_qubits = Some((n, line.number));
            continue;
        }

        match word {
            "qubits" => return Err(line.syntax(start, "duplicate `qubits` header")),
            "creg" => {
                if !kinds.is_empty() {
                    return Err(line.syntax(start, "creg declarations must precede instructions"));
                }
                let mut parts = rest.split_whitespace();
                let (Some(name), Some(width), None) = (parts.next(), parts.next(), parts.next()) else {
                    return Err(line.syntax(start, "expected `creg <name> <width>`"));
                };
                if !is_identifier(name) {
                    return Err(line.syntax(offset_in(raw, name), format!("invalid creg name `{name}`")));
                }
                let width = parse_index(&line, width, "creg width")?;
                if cregs.iter().any(|c| c.name == name) {
                    return Err(line.err(
                        ParseErrorKind::SemanticError,
                        offset_in(raw, name),
                        format!("creg `{name}` declared twice"),
                    ));
                }
                cregs.push(CregDecl {
                    name: name.to_string(),
                    width,
                });
            }
            _ => {
                let kind = parse_instruction(&line, body)?;
                kinds.push(kind);
                spans.push((line.number, start + 1));
            }
        }
    }

    let Some((num_qubits, header_line)) = num_qubits else {
        return Err(ParseError {
            kind: ParseErrorKind::EmptyProgram,
            line: last_line,
            column: 1,
            message: "no `qubits` header".into(),
        });
    };

    let regions = compute_regions(&kinds);
    let program = Program {
        num_qubits,
        cregs,
        instructions: kinds
            .into_iter()
            .enumerate()
            .map(|(op_index, kind)| Instruction { op_index, kind })
            .collect(),
        regions,
        source_digest: program_digest(text),
    };

    if let Some(diag) = validate(&program).into_iter().find(|d| d.severity == Severity::Error) {
        let (line, column) = diag
            .op_index
            .and_then(|op| spans.get(op).copied())
            .unwrap_or((header_line, 1));
        return Err(ParseError {
            kind: ParseErrorKind::SemanticError,
            line,
            column,
            message: diag.message,
        });
    }
    Ok(program)
}

/// Splits off the leading keyword; a gate name ends at `(` as well as at whitespace.
fn split_word(s: &str) -> (&str, &str) {
    let end = s.find(|c: char| c.is_whitespace() || c == '(').unwrap_or(s.len());
    (&s[..end], &s[end..])
}

fn parse_index(line: &Line<'_>, s: &str, what: &str) -> Result<usize, ParseError> {
    let t = s.trim();
    if t.is_empty() || !t.bytes().all(|b| b.is_ascii_digit()) {
        return Err(line.syntax(offset_in(line.text, s), format!("expected {what}, found `{t}`")));
    }
    t.parse::<usize>()
        .map_err(|_| line.syntax(offset_in(line.text, t), format!("{what} `{t}` is too large")))
}

fn parse_bitref(line: &Line<'_>, s: &str) -> Result<BitRef, ParseError> {
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let at = offset_in(line.text, s.trim_start());
    let bad = || line.syntax(at, format!("expected `<creg>[<index>]`, found `{}`", s.trim()));
    let open = compact.find('[').ok_or_else(bad)?;
    let inner = compact[open + 1..].strip_suffix(']').ok_or_else(bad)?;
    let name = &compact[..open];
    if !is_identifier(name) || inner.is_empty() || !inner.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let index = inner.parse::<usize>().map_err(|_| bad())?;
    Ok(BitRef {
        creg: name.to_string(),
        index,
    })
}

fn parse_instruction(line: &Line<'_>, body: &str) -> Result<InstructionKind, ParseError> {
    let start = offset_in(line.text, body);
    let (word, rest) = split_word(body);
    match word {
        "region" => {
            let mut parts = rest.split_whitespace();
            match (parts.next(), parts.next()) {
                (Some(name), None) if is_identifier(name) => Ok(InstructionKind::region(name)),
                _ => Err(line.syntax(start, "expected `region <name>`")),
            }
        }
        "ckpt" => {
            let mut parts = rest.split_whitespace();
            match (parts.next(), parts.next()) {
                (None, _) => Ok(InstructionKind::CheckpointMarker { class: None }),
                (Some(c), None) => CheckpointClass::parse(c)
                    .map(|class| InstructionKind::CheckpointMarker { class: Some(class) })
                    .ok_or_else(|| line.syntax(offset_in(line.text, c), format!("unknown checkpoint class `{c}`"))),
                _ => Err(line.syntax(start, "expected `ckpt [classicalized|algorithmic|logical]`")),
            }
        }
        "if" => {
            let Some(colon) = rest.find(':') else {
                return Err(line.syntax(start, "expected `:` after guard condition"));
            };
            let cond = &rest[..colon];
            let inner = rest[colon + 1..].trim();
            let Some((bit, value)) = cond.split_once("==") else {
                return Err(line.syntax(offset_in(line.text, cond), "expected `==` in guard"));
            };
            let bit = parse_bitref(line, bit)?;
            let value = match value.trim() {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(line.syntax(
                        offset_in(line.text, value.trim_start()),
                        format!("guard value must be 0 or 1, found `{other}`"),
                    ))
                }
            };
            if inner.is_empty() {
                return Err(line.syntax(start + body.len(), "guard has no instruction"));
            }
            let inner = parse_instruction(line, inner)?;
            Ok(InstructionKind::Guarded {
                condition: Condition { bit, value },
                inner: Box::new(inner),
            })
        }
        "measure" => {
            let Some((q, target)) = rest.split_once("->") else {
                return Err(line.syntax(start, "expected `measure <qubit> -> <creg>[<index>]`"));
            };
            Ok(InstructionKind::Measure {
                qubit: parse_index(line, q, "qubit index")?,
                target: parse_bitref(line, target)?,
            })
        }
        "reset" => Ok(InstructionKind::Reset {
            qubit: parse_index(line, rest, "qubit index")?,
        }),
        name => {
            let (params, qubit_text) = match rest.strip_prefix('(') {
                Some(after) => {
                    let Some(close) = after.find(')') else {
                        return Err(line.syntax(offset_in(line.text, rest), "unclosed `(`"));
                    };
                    let expr = &after[..close];
                    let angle = parse_angle(expr).map_err(|m| line.syntax(offset_in(line.text, expr), m))?;
                    (vec![angle], &after[close + 1..])
                }
                None => (Vec::new(), rest),
            };
            let gate = Gate::from_name(name, &params).map_err(|e| match e {
                GateError::UnknownGate(_) => line.syntax(start, format!("unknown instruction `{name}`")),
                other => line.syntax(start, other.to_string()),
            })?;
            let mut qubits = Vec::new();
            for tok in qubit_text
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
            {
                qubits.push(parse_index(line, tok, "qubit index")?);
            }
            if qubits.is_empty() {
                return Err(line.syntax(start, format!("gate `{name}` has no qubits")));
            }
            Ok(InstructionKind::Gate { gate, qubits })
        }
    }
}

/// `[-] atom (('*' | '/') atom)*` where an atom is a decimal number or `pi`.
fn parse_angle(expr: &str) -> Result<f64, String> {
    let compact: String = expr.chars().filter(|c| !c.is_whitespace()).collect();
    let (negative, body) = match compact.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, compact.as_str()),
    };
    if body.is_empty() {
        return Err("empty angle".into());
    }
    let atom = |s: &str| -> Result<f64, String> {
        if s == "pi" {
            return Ok(std::f64::consts::PI);
        }
        let ok = !s.is_empty()
            && s.bytes()
                .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'e' | b'E' | b'-' | b'+'));
        match s.parse::<f64>() {
            Ok(v) if ok && v.is_finite() => Ok(v),
            _ => Err(format!("bad angle `{s}`")),
        }
    };
    // Split on operators, keeping exponent signs (`1e-3`) inside the atom.
    let mut value: Option<f64> = None;
    let mut op = '*';
    let mut token = String::new();
    let apply = |op: char, token: &str, value: &mut Option<f64>| -> Result<(), String> {
        let a = atom(token)?;
        *value = Some(match (*value, op) {
            (None, _) => a,
            (Some(v), '*') => v * a,
            (Some(v), _) => v / a,
        });
        Ok(())
    };
    for c in body.chars() {
        if (c == '*' || c == '/') && !token.is_empty() {
            apply(op, &token, &mut value)?;
            token.clear();
            op = c;
        } else {
            token.push(c);
        }
    }
    apply(op, &token, &mut value)?;
    let v = value.unwrap_or_default();
    let v = if negative { -v } else { v };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("angle `{expr}` is not finite"))
    }
}

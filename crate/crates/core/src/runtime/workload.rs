//! Workloads the runtime can drive, their generated programs and the
//! `#! qcr-workload` header that lets a program file carry its driver
//! configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::falqon::FalqonConfig;
use super::vqe::VqeConfig;
use super::RuntimeError;
use crate::checkpoint_store::DecoderState;
use crate::circuit_ir::{parse_program, Position, Program};
use crate::sim::{PauliSum, Registers};

pub const HEADER: &str = "#! qcr-workload";

/// What a shot-based program is, beyond its circuit.
#[derive(Clone, Debug, PartialEq)]
pub enum ShotKind {
    Plain,
    /// Measurement-based GHZ preparation on `n` qubits (data on even
    /// indices, ancillas on odd ones).
    Ghz {
        n: usize,
    },
    /// Three-qubit chain on two qubits by measure, reset and reuse, padded
    /// to `qubits` physical qubits.
    Reuse {
        qubits: usize,
    },
    /// Bit-flip repetition code, optional X error at `(round, qubit)`
    /// (rounds count from 1).
    RepetitionCode {
        rounds: usize,
        injected: Option<(usize, usize)>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Workload {
    Shots { kind: ShotKind, program: Program },
    Vqe { config: VqeConfig, program: Program },
    Falqon { config: FalqonConfig, program: Program },
}

fn config_err(msg: impl Into<String>) -> RuntimeError {
    RuntimeError::Config(msg.into())
}

fn parse_generated(text: &str) -> Result<Program, RuntimeError> {
    parse_program(text).map_err(|e| RuntimeError::Config(format!("generated program does not parse: {e}")))
}

/// Program for a generated body, with its digest taken over the canonical
/// file text (header plus printed body).
fn generated(header: &str, body: &str) -> Result<Program, RuntimeError> {
    let canonical = parse_generated(body)?.to_string();
    parse_generated(&with_header(header, &canonical))
}

impl Workload {
    pub fn plain(program: Program) -> Self {
        Workload::Shots {
            kind: ShotKind::Plain,
            program,
        }
    }

    pub fn ghz(n: usize) -> Result<Self, RuntimeError> {
        if !(3..=5).contains(&n) {
            return Err(config_err(format!("GHZ preparation needs 3..=5 qubits, got {n}")));
        }
        let kind = ShotKind::Ghz { n };
        let program = generated(&kind_header(&kind), &ghz_body(n))?;
        Ok(Workload::Shots { kind, program })
    }

    pub fn reuse(qubits: usize) -> Result<Self, RuntimeError> {
        if !(2..=22).contains(&qubits) {
            return Err(config_err(format!("qubit reuse needs 2..=22 qubits, got {qubits}")));
        }
        let kind = ShotKind::Reuse { qubits };
        let program = generated(&kind_header(&kind), &reuse_body(qubits))?;
        Ok(Workload::Shots { kind, program })
    }

    pub fn repetition_code(rounds: usize, injected: Option<(usize, usize)>) -> Result<Self, RuntimeError> {
        if !(1..=64).contains(&rounds) {
            return Err(config_err(format!("rounds must be in 1..=64, got {rounds}")));
        }
        if let Some((r, q)) = injected {
            if r == 0 || r > rounds || q > 2 {
                return Err(config_err(format!(
                    "injected error ({r}, {q}) outside rounds 1..={rounds}, qubits 0..=2"
                )));
            }
        }
        let kind = ShotKind::RepetitionCode { rounds, injected };
        let program = generated(&kind_header(&kind), &repcode_body(rounds, injected))?;
        Ok(Workload::Shots { kind, program })
    }

    pub fn vqe(config: VqeConfig) -> Result<Self, RuntimeError> {
        config.validate()?;
        let program = generated(&config.header(), &config.ansatz_text())?;
        Ok(Workload::Vqe { config, program })
    }

    pub fn falqon(config: FalqonConfig) -> Result<Self, RuntimeError> {
        config.validate()?;
        let program = generated(&config.header(), &config.layer_text(0.0))?;
        Ok(Workload::Falqon { config, program })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Workload::Shots { kind, .. } => match kind {
                ShotKind::Plain => "program",
                ShotKind::Ghz { .. } => "ghz",
                ShotKind::Reuse { .. } => "reuse",
                ShotKind::RepetitionCode { .. } => "repcode",
            },
            Workload::Vqe { .. } => "vqe",
            Workload::Falqon { .. } => "falqon",
        }
    }

    pub fn program(&self) -> &Program {
        match self {
            Workload::Shots { program, .. } | Workload::Vqe { program, .. } | Workload::Falqon { program, .. } => {
                program
            }
        }
    }

    /// Digest every checkpoint of this workload is bound to.
    pub fn digest(&self) -> &str {
        &self.program().source_digest
    }

    pub fn is_iterative(&self) -> bool {
        !matches!(self, Workload::Shots { .. })
    }

    /// Text of the program file, header included for generated workloads.
    pub fn to_text(&self) -> String {
        let body = self.program().to_string();
        match self {
            Workload::Shots {
                kind: ShotKind::Plain, ..
            } => body,
            Workload::Shots { kind, .. } => with_header(&kind_header(kind), &body),
            Workload::Vqe { config, .. } => with_header(&config.header(), &body),
            Workload::Falqon { config, .. } => with_header(&config.header(), &body),
        }
    }

    /// Load a program file. A leading `#! qcr-workload` line selects a
    /// driver; its body must match what that driver generates.
    pub fn from_text(text: &str) -> Result<Self, RuntimeError> {
        let program = parse_program(text).map_err(RuntimeError::Parse)?;
        let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
        let Some(rest) = first.trim().strip_prefix(HEADER) else {
            return Ok(Workload::plain(program));
        };
        let mut words = rest.split_whitespace();
        let kind = words.next().ok_or_else(|| config_err("empty qcr-workload header"))?;
        let mut args = BTreeMap::new();
        for w in words {
            let (k, v) = w
                .split_once('=')
                .ok_or_else(|| config_err(format!("header argument `{w}` is not key=value")))?;
            args.insert(k.to_string(), v.to_string());
        }
        let mut generated = match kind {
            "ghz" => Workload::ghz(arg(&args, "n")?)?,
            "reuse" => Workload::reuse(arg(&args, "qubits")?)?,
            "repcode" => {
                let injected = match args.get("error").map(String::as_str) {
                    None | Some("none") => None,
                    Some(e) => {
                        let (r, q) = e
                            .split_once(':')
                            .ok_or_else(|| config_err(format!("bad error `{e}`, expected ROUND:QUBIT")))?;
                        Some((parse_num(r)?, parse_num(q)?))
                    }
                };
                Workload::repetition_code(arg(&args, "rounds")?, injected)?
            }
            "vqe" => Workload::vqe(VqeConfig::from_header_args(&args)?)?,
            "falqon" => Workload::falqon(FalqonConfig::from_header_args(&args)?)?,
            other => return Err(config_err(format!("unknown workload `{other}`"))),
        };
        if !generated.program().structurally_eq(&program) {
            return Err(RuntimeError::Config(format!(
                "program body does not match its `{HEADER} {kind}` header"
            )));
        }
        let digest = program.source_digest.clone();
        match &mut generated {
            Workload::Shots { program, .. } | Workload::Vqe { program, .. } | Workload::Falqon { program, .. } => {
                program.source_digest = digest
            }
        }
        Ok(generated)
    }
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T, RuntimeError> {
    s.parse().map_err(|_| config_err(format!("bad number `{s}`")))
}

fn arg<T: std::str::FromStr>(args: &BTreeMap<String, String>, key: &str) -> Result<T, RuntimeError> {
    let v = args
        .get(key)
        .ok_or_else(|| config_err(format!("header is missing `{key}=`")))?;
    parse_num(v)
}

pub(crate) fn pauli_arg(args: &BTreeMap<String, String>, key: &str) -> Result<PauliSum, RuntimeError> {
    let v = args
        .get(key)
        .ok_or_else(|| config_err(format!("header is missing `{key}=`")))?;
    v.parse().map_err(|e| config_err(format!("{key}: {e}")))
}

pub(crate) fn header_num<T: std::str::FromStr>(args: &BTreeMap<String, String>, key: &str) -> Result<T, RuntimeError> {
    arg(args, key)
}

fn with_header(header: &str, body: &str) -> String {
    format!("{HEADER} {header}\n{body}")
}

fn kind_header(kind: &ShotKind) -> String {
    match kind {
        ShotKind::Plain => String::new(),
        ShotKind::Ghz { n } => format!("ghz n={n}"),
        ShotKind::Reuse { qubits } => format!("reuse qubits={qubits}"),
        ShotKind::RepetitionCode { rounds, injected } => match injected {
            Some((r, q)) => format!("repcode rounds={rounds} error={r}:{q}"),
            None => format!("repcode rounds={rounds} error=none"),
        },
    }
}

fn ghz_body(n: usize) -> String {
    let anc = (n - 1) / 2;
    let mut s = format!("qubits {n}\ncreg m {anc}\nregion prep\n");
    for d in (0..n).step_by(2) {
        writeln!(s, "h {d}").unwrap();
    }
    for i in 0..anc {
        let a = 2 * i + 1;
        writeln!(s, "cx {} {a}\ncx {} {a}", 2 * i, 2 * i + 2).unwrap();
    }
    s.push_str("region measure\n");
    for i in 0..anc {
        writeln!(s, "measure {} -> m[{i}]", 2 * i + 1).unwrap();
    }
    s.push_str("ckpt classicalized\n");
    for i in 0..anc {
        writeln!(s, "reset {}", 2 * i + 1).unwrap();
    }
    s.push_str("region correct\n");
    for j in 1..=anc {
        for i in 0..j {
            writeln!(s, "if m[{i}] == 1: x {}", 2 * j).unwrap();
        }
    }
    if n.is_multiple_of(2) {
        // Even n: the last qubit joins as a copy of its neighbour.
        writeln!(s, "cx {} {}", n - 2, n - 1).unwrap();
    }
    s
}

/// Qubits carrying the GHZ state: the even ones, plus the last for even `n`.
/// Odd qubits in between are measured ancillas and end in `|0⟩`.
pub fn ghz_data_qubits(n: usize) -> Vec<usize> {
    let mut data: Vec<usize> = (0..n).step_by(2).collect();
    if n.is_multiple_of(2) {
        data.push(n - 1);
    }
    data
}

fn reuse_body(qubits: usize) -> String {
    format!(
        "qubits {qubits}\ncreg c 3\n\
         region stage1\nh 0\ncx 0 1\nmeasure 0 -> c[0]\nckpt classicalized\nreset 0\n\
         region stage2\ncx 1 0\nry(0.9) 1\nmeasure 1 -> c[1]\nckpt classicalized\nreset 1\n\
         region stage3\nmeasure 0 -> c[2]\n"
    )
}

fn repcode_body(rounds: usize, injected: Option<(usize, usize)>) -> String {
    let mut s = String::from("qubits 5\n");
    for r in 1..=rounds {
        writeln!(s, "creg s{r} 2").unwrap();
    }
    s.push_str("creg out 3\nregion encode\ncx 0 1\ncx 0 2\n");
    for r in 1..=rounds {
        writeln!(s, "region round{r}\nckpt logical").unwrap();
        if let Some((er, q)) = injected {
            if er == r {
                writeln!(s, "x {q}").unwrap();
            }
        }
        writeln!(
            s,
            "cx 0 3\ncx 1 3\ncx 1 4\ncx 2 4\nmeasure 3 -> s{r}[0]\nmeasure 4 -> s{r}[1]\nreset 3\nreset 4"
        )
        .unwrap();
    }
    s.push_str("region readout\nckpt logical\nmeasure 0 -> out[0]\nmeasure 1 -> out[1]\nmeasure 2 -> out[2]\n");
    s
}

/// Data qubit flagged by a detection event `(d0, d1)`, where `d0` watches
/// qubits 0,1 and `d1` watches qubits 1,2.
fn flagged_qubit(d0: u8, d1: u8) -> Option<usize> {
    match (d0, d1) {
        (1, 0) => Some(0),
        (1, 1) => Some(1),
        (0, 1) => Some(2),
        _ => None,
    }
}

/// Pauli frame after a sequence of syndrome rounds. Detection events are
/// syndrome changes between consecutive rounds.
pub fn decode_frame(syndromes: &[Vec<u8>]) -> String {
    let mut frame = [false; 3];
    let mut prev = [0u8, 0u8];
    for s in syndromes {
        if let Some(q) = flagged_qubit(s[0] ^ prev[0], s[1] ^ prev[1]) {
            frame[q] = !frame[q];
        }
        prev = [s[0], s[1]];
    }
    frame.iter().map(|&x| if x { 'X' } else { 'I' }).collect()
}

/// Majority vote of the readout after undoing the frame.
pub fn logical_readout(out: &[u8], frame: &str) -> u8 {
    let ones = out
        .iter()
        .zip(frame.chars())
        .filter(|(&b, f)| b ^ u8::from(*f == 'X') == 1)
        .count();
    u8::from(ones >= 2)
}

/// Syndrome rounds whose region ends at or before `position`.
pub fn completed_rounds(program: &Program, position: Position) -> usize {
    program
        .regions
        .iter()
        .filter(|r| r.name.starts_with("round") && r.end_op <= position.op_index)
        .count()
}

pub fn syndrome_history(registers: &Registers, rounds: usize) -> Vec<Vec<u8>> {
    (1..=rounds)
        .map(|r| registers.get(&format!("s{r}")).cloned().unwrap_or_default())
        .collect()
}

/// Decoder state of a repetition-code shot paused at `position`.
pub fn decoder_state_at(program: &Program, position: Position, registers: &Registers) -> DecoderState {
    let history = syndrome_history(registers, completed_rounds(program, position));
    DecoderState {
        pauli_frame: decode_frame(&history),
        syndrome_history: history,
    }
}

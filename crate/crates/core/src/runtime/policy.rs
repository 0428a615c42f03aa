//! Checkpoint trigger policies, failure specs and the failure-response
//! mapping.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::RuntimeError;
use crate::circuit_ir::CheckpointClass;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Trigger {
    IterationBoundary,
    RegionBoundary,
    EveryKShots(u64),
    /// Fires when the tracked energy changes by less than the tolerance.
    ConvergencePoint(f64),
    /// Fires at explicit `ckpt` markers.
    OnEvent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureAction {
    Rollback,
    Restart,
    Reschedule,
}

impl FailureAction {
    pub fn as_str(&self) -> &'static str {
        match self {
            FailureAction::Rollback => "rollback",
            FailureAction::Restart => "restart",
            FailureAction::Reschedule => "reschedule",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub triggers: Vec<Trigger>,
    pub on_failure: FailureAction,
    pub checkpoint_class_default: CheckpointClass,
}

impl Policy {
    pub fn new(
        triggers: Vec<Trigger>,
        on_failure: FailureAction,
        checkpoint_class_default: CheckpointClass,
    ) -> Result<Self, RuntimeError> {
        if triggers.is_empty() {
            return Err(RuntimeError::Config("policy needs at least one trigger".into()));
        }
        for t in &triggers {
            match t {
                Trigger::EveryKShots(0) => {
                    return Err(RuntimeError::Config("shots:K needs K >= 1".into()));
                }
                Trigger::ConvergencePoint(tol) if !(tol.is_finite() && *tol > 0.0) => {
                    return Err(RuntimeError::Config(format!("conv tolerance {tol} must be positive")));
                }
                _ => {}
            }
        }
        Ok(Policy {
            triggers,
            on_failure,
            checkpoint_class_default,
        })
    }

    pub fn with_triggers(triggers: Vec<Trigger>) -> Result<Self, RuntimeError> {
        Policy::new(triggers, FailureAction::Rollback, CheckpointClass::Classicalized)
    }

    pub fn has(&self, want: fn(&Trigger) -> bool) -> bool {
        self.triggers.iter().any(want)
    }

    pub fn every_k_shots(&self) -> Option<u64> {
        self.triggers.iter().find_map(|t| match t {
            Trigger::EveryKShots(k) => Some(*k),
            _ => None,
        })
    }

    pub fn convergence_tolerance(&self) -> Option<f64> {
        self.triggers.iter().find_map(|t| match t {
            Trigger::ConvergencePoint(tol) => Some(*tol),
            _ => None,
        })
    }
}

impl FromStr for Policy {
    type Err = RuntimeError;

    /// Comma-joined tokens: `iter`, `region`, `event`, `shots:K`, `conv:TOL`,
    /// plus optional `fail:rollback|restart|reschedule` and
    /// `class:classicalized|algorithmic|logical`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |tok: &str| RuntimeError::Config(format!("bad policy token `{tok}`"));
        let mut triggers = Vec::new();
        let mut on_failure = FailureAction::Rollback;
        let mut class = CheckpointClass::Classicalized;
        for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (head, arg) = match tok.split_once(':') {
                Some((h, a)) => (h, Some(a)),
                None => (tok, None),
            };
            match (head, arg) {
                ("iter", None) => triggers.push(Trigger::IterationBoundary),
                ("region", None) => triggers.push(Trigger::RegionBoundary),
                ("event", None) => triggers.push(Trigger::OnEvent),
                ("shots", Some(k)) => triggers.push(Trigger::EveryKShots(k.parse().map_err(|_| bad(tok))?)),
                ("conv", Some(t)) => triggers.push(Trigger::ConvergencePoint(t.parse().map_err(|_| bad(tok))?)),
                ("fail", Some("rollback")) => on_failure = FailureAction::Rollback,
                ("fail", Some("restart")) => on_failure = FailureAction::Restart,
                ("fail", Some("reschedule")) => on_failure = FailureAction::Reschedule,
                ("class", Some(c)) => class = CheckpointClass::parse(c).ok_or_else(|| bad(tok))?,
                _ => return Err(bad(tok)),
            }
        }
        Policy::new(triggers, on_failure, class)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self
            .triggers
            .iter()
            .map(|t| match t {
                Trigger::IterationBoundary => "iter".to_string(),
                Trigger::RegionBoundary => "region".to_string(),
                Trigger::OnEvent => "event".to_string(),
                Trigger::EveryKShots(k) => format!("shots:{k}"),
                Trigger::ConvergencePoint(t) => format!("conv:{t:?}"),
            })
            .collect();
        parts.push(format!("fail:{}", self.on_failure.as_str()));
        parts.push(format!("class:{}", self.checkpoint_class_default));
        f.write_str(&parts.join(","))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailureKind {
    /// Crash when shot `shot` reaches op `op` of region `region`, after any
    /// checkpoint due there is committed.
    KillAtOp { region: usize, op: usize, shot: u64 },
    /// Crash just before shot `shot` starts.
    KillAtShot { shot: u64 },
    /// Crash once iteration `iteration` and its checkpoint are done;
    /// `0` crashes before the first iteration.
    KillAtIteration { iteration: u64 },
    /// Backend reported down when an iteration (or shot, for shot
    /// workloads) in `first..=last` is about to start. Handled in-process
    /// through the policy's failure action; fires once.
    BackendUnavailable { first: u64, last: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureSpec {
    pub kind: FailureKind,
    /// Whether the failure point is fixed by these coordinates alone (always true for
    /// the injected kinds).
    pub seed_deterministic: bool,
}

impl FailureSpec {
    pub fn new(kind: FailureKind) -> Self {
        FailureSpec {
            kind,
            seed_deterministic: true,
        }
    }

    pub fn is_crash(&self) -> bool {
        !matches!(self.kind, FailureKind::BackendUnavailable { .. })
    }
}

impl FromStr for FailureSpec {
    type Err = RuntimeError;

    /// `op:R:I[:S]`, `shot:K`, `iter:I` or `down:A-B` (or `down:A`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || RuntimeError::Config(format!("bad failure spec `{s}`"));
        let num = |t: &str| t.trim().parse::<u64>().map_err(|_| bad());
        let parts: Vec<&str> = s.trim().split(':').collect();
        let kind = match parts.as_slice() {
            ["op", r, i] => FailureKind::KillAtOp {
                region: num(r)? as usize,
                op: num(i)? as usize,
                shot: 0,
            },
            ["op", r, i, shot] => FailureKind::KillAtOp {
                region: num(r)? as usize,
                op: num(i)? as usize,
                shot: num(shot)?,
            },
            ["shot", k] => FailureKind::KillAtShot { shot: num(k)? },
            ["iter", i] => FailureKind::KillAtIteration { iteration: num(i)? },
            ["down", range] => {
                let (a, b) = match range.split_once('-') {
                    Some((a, b)) => (num(a)?, num(b)?),
                    None => (num(range)?, num(range)?),
                };
                if a > b {
                    return Err(bad());
                }
                FailureKind::BackendUnavailable { first: a, last: b }
            }
            _ => return Err(bad()),
        };
        Ok(FailureSpec::new(kind))
    }
}

impl fmt::Display for FailureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            FailureKind::KillAtOp { region, op, shot } => write!(f, "op:{region}:{op}:{shot}"),
            FailureKind::KillAtShot { shot } => write!(f, "shot:{shot}"),
            FailureKind::KillAtIteration { iteration } => write!(f, "iter:{iteration}"),
            FailureKind::BackendUnavailable { first, last } => write!(f, "down:{first}-{last}"),
        }
    }
}

/// A detected failure, as seen by the policy engine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureEvent {
    pub spec: FailureSpec,
    /// Human-readable location, e.g. `iteration 4`.
    pub at: String,
}

/// What to do about a failure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Recovery {
    ResumeFrom {
        checkpoint: String,
    },
    /// Run again from scratch with the same seed. `fallback` marks a
    /// rollback or reschedule that found no checkpoint.
    Restart {
        fallback: bool,
    },
    RescheduleFrom {
        checkpoint: String,
        backend: String,
    },
}

pub const DEFAULT_BACKEND: &str = "statevector-sim#0";

/// Next backend tag after `current` (`name#N` → `name#N+1`).
pub fn next_backend(current: &str) -> String {
    match current
        .rsplit_once('#')
        .and_then(|(name, n)| Some((name, n.parse::<u64>().ok()?)))
    {
        Some((name, n)) => format!("{name}#{}", n + 1),
        None => format!("{current}#1"),
    }
}

/// Map a failure to a recovery. `latest` is the newest checkpoint id and
/// `backend` the backend tag it was taken on.
pub fn on_failure(_event: &FailureEvent, policy: &Policy, latest: Option<(&str, &str)>) -> Recovery {
    match (policy.on_failure, latest) {
        (FailureAction::Restart, _) => Recovery::Restart { fallback: false },
        (_, None) => Recovery::Restart { fallback: true },
        (FailureAction::Rollback, Some((id, _))) => Recovery::ResumeFrom {
            checkpoint: id.to_string(),
        },
        (FailureAction::Reschedule, Some((id, backend))) => Recovery::RescheduleFrom {
            checkpoint: id.to_string(),
            backend: next_backend(backend),
        },
    }
}

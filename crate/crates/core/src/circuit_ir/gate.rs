use std::fmt;

use serde::{Deserialize, Serialize};

/// The fixed gate set. Rotation angles are in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "angle", rename_all = "lowercase")]
pub enum Gate {
    H,
    X,
    Y,
    Z,
    S,
    T,
    Cx,
    Cz,
    Rx(f64),
    Ry(f64),
    Rz(f64),
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum GateError {
    #[error("unknown gate `{0}`")]
    UnknownGate(String),
    #[error("gate `{name}` takes {expected} parameter(s), got {got}")]
    ParameterCount {
        name: &'static str,
        expected: usize,
        got: usize,
    },
}

impl Gate {
    pub const NAMES: [&'static str; 11] = ["h", "x", "y", "z", "s", "t", "cx", "cz", "rx", "ry", "rz"];

    pub fn from_name(name: &str, params: &[f64]) -> Result<Self, GateError> {
        let gate = match name {
            "h" => Gate::H,
            "x" => Gate::X,
            "y" => Gate::Y,
            "z" => Gate::Z,
            "s" => Gate::S,
            "t" => Gate::T,
            "cx" => Gate::Cx,
            "cz" => Gate::Cz,
            "rx" => Gate::Rx(0.0),
            "ry" => Gate::Ry(0.0),
            "rz" => Gate::Rz(0.0),
            other => return Err(GateError::UnknownGate(other.to_string())),
        };
        let expected = gate.param_count();
        if params.len() != expected {
            return Err(GateError::ParameterCount {
                name: gate.name(),
                expected,
                got: params.len(),
            });
        }
        Ok(match params.first() {
            Some(&theta) => gate.with_angle(theta),
            None => gate,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Gate::H => "h",
            Gate::X => "x",
            Gate::Y => "y",
            Gate::Z => "z",
            Gate::S => "s",
            Gate::T => "t",
            Gate::Cx => "cx",
            Gate::Cz => "cz",
            Gate::Rx(_) => "rx",
            Gate::Ry(_) => "ry",
            Gate::Rz(_) => "rz",
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            Gate::Cx | Gate::Cz => 2,
            _ => 1,
        }
    }

    pub fn param_count(&self) -> usize {
        usize::from(self.angle().is_some())
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::Rx(t) | Gate::Ry(t) | Gate::Rz(t) => Some(t),
            _ => None,
        }
    }

    /// Same gate with its angle replaced; fixed gates are returned unchanged.
    pub fn with_angle(&self, theta: f64) -> Self {
        match self {
            Gate::Rx(_) => Gate::Rx(theta),
            Gate::Ry(_) => Gate::Ry(theta),
            Gate::Rz(_) => Gate::Rz(theta),
            g => *g,
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.angle() {
            // `{:?}` on f64 is the shortest representation that round-trips.
            Some(theta) => write!(f, "{}({:?})", self.name(), theta),
            None => f.write_str(self.name()),
        }
    }
}

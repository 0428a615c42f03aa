//! Pauli strings and real-weighted Pauli sums.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::state::StateVector;
use super::SimError;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    /// `a·b = i^k · c`, returned as `(k, c)`.
    fn mul(a: Pauli, b: Pauli) -> (u8, Pauli) {
        use Pauli::*;
        match (a, b) {
            (I, p) | (p, I) => (0, p),
            (X, X) | (Y, Y) | (Z, Z) => (0, I),
            (X, Y) => (1, Z),
            (Y, X) => (3, Z),
            (Y, Z) => (1, X),
            (Z, Y) => (3, X),
            (Z, X) => (1, Y),
            (X, Z) => (3, Y),
        }
    }
}

/// Tensor product of single-qubit Paulis; character `i` acts on qubit `i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PauliString(Vec<Pauli>);

impl PauliString {
    pub fn identity(n: usize) -> Self {
        PauliString(vec![Pauli::I; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = Pauli> + '_ {
        self.0.iter().copied()
    }

    pub fn get(&self, qubit: usize) -> Option<Pauli> {
        self.0.get(qubit).copied()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&p| p == Pauli::I)
    }

    /// `self · other = i^k · result`.
    pub fn product(&self, other: &PauliString) -> (u8, PauliString) {
        let mut k = 0u8;
        let ops = self
            .0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| {
                let (phase, p) = Pauli::mul(a, b);
                k = (k + phase) % 4;
                p
            })
            .collect();
        (k, PauliString(ops))
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let anti = self
            .0
            .iter()
            .zip(&other.0)
            .filter(|(&a, &b)| a != Pauli::I && b != Pauli::I && a != b)
            .count();
        anti % 2 == 0
    }
}

impl FromStr for PauliString {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() {
            return Err(SimError::BadPauliString("empty Pauli string".into()));
        }
        s.chars()
            .map(|c| Pauli::from_char(c).ok_or_else(|| SimError::BadPauliString(format!("bad Pauli `{c}` in `{s}`"))))
            .collect::<Result<Vec<_>, _>>()
            .map(PauliString)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coeff: f64,
    pub pauli: PauliString,
}

/// Hermitian operator `Σ wᵢ Pᵢ` with real weights.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct PauliSum {
    pub terms: Vec<PauliTerm>,
}

impl PauliSum {
    pub fn new(terms: Vec<PauliTerm>) -> Result<Self, SimError> {
        let sum = PauliSum { terms };
        sum.num_qubits()?;
        Ok(sum)
    }

    pub fn single(coeff: f64, pauli: &str) -> Result<Self, SimError> {
        PauliSum::new(vec![PauliTerm {
            coeff,
            pauli: pauli.parse()?,
        }])
    }

    /// Common string length of all terms.
    pub fn num_qubits(&self) -> Result<usize, SimError> {
        let n = self
            .terms
            .first()
            .map(|t| t.pauli.len())
            .ok_or_else(|| SimError::BadPauliString("operator has no terms".into()))?;
        if let Some(t) = self.terms.iter().find(|t| t.pauli.len() != n) {
            return Err(SimError::BadPauliString(format!(
                "term `{}` has length {}, expected {n}",
                t.pauli,
                t.pauli.len()
            )));
        }
        if let Some(t) = self.terms.iter().find(|t| !t.coeff.is_finite()) {
            return Err(SimError::BadPauliString(format!(
                "term `{}` has a non-finite weight",
                t.pauli
            )));
        }
        Ok(n)
    }

    pub fn expectation<T: Real>(&self, state: &StateVector<T>) -> Result<f64, SimError> {
        let mut acc = 0.0;
        for t in &self.terms {
            acc += t.coeff * state.expectation(&t.pauli)?.to_f64_lossy();
        }
        Ok(acc)
    }

    /// `i[self, other]`, which is again Hermitian with real weights.
    ///
    /// Only anticommuting pairs contribute: `PQ - QP = 2PQ = 2·i^k·R`, so the
    /// term is `2·i^(k+1)·R` with `k` odd.
    pub fn i_commutator(&self, other: &PauliSum) -> PauliSum {
        let mut acc: BTreeMap<PauliString, f64> = BTreeMap::new();
        for a in &self.terms {
            for b in &other.terms {
                if a.pauli.commutes_with(&b.pauli) {
                    continue;
                }
                let (k, r) = a.pauli.product(&b.pauli);
                let sign = if k == 1 { -1.0 } else { 1.0 };
                *acc.entry(r).or_insert(0.0) += sign * 2.0 * a.coeff * b.coeff;
            }
        }
        PauliSum {
            terms: acc
                .into_iter()
                .filter(|(_, c)| *c != 0.0)
                .map(|(pauli, coeff)| PauliTerm { coeff, pauli })
                .collect(),
        }
    }
}

impl FromStr for PauliSum {
    type Err = SimError;

    /// Comma-separated `weight*PAULI` terms, e.g. `1*ZZ,-0.5*XI`. A bare
    /// `PAULI` has weight 1.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut terms = Vec::new();
        for part in s.split(',').map(str::trim) {
            let (w, p) = match part.split_once('*') {
                Some((w, p)) => (
                    w.trim()
                        .parse::<f64>()
                        .map_err(|_| SimError::BadPauliString(format!("bad weight in `{part}`")))?,
                    p.trim(),
                ),
                None => (1.0, part),
            };
            terms.push(PauliTerm {
                coeff: w,
                pauli: p.parse()?,
            });
        }
        PauliSum::new(terms)
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{:?}*{}", t.coeff, t.pauli)?;
        }
        Ok(())
    }
}

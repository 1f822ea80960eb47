use std::fmt;

use serde::{Deserialize, Serialize};

/// Type of a variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Continuous,
    Integer,
    Categorical,
}

impl fmt::Display for VariableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VariableKind::Continuous => "continuous",
            VariableKind::Integer => "integer",
            VariableKind::Categorical => "categorical",
        })
    }
}

/// A value taken by a variable.
///
/// Categorical values are stored as the index of the label in the variable's
/// declared label list, so a `Value` only has meaning next to its graph.
/// `Exc` marks an excluded variable and is valid for every kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Real(f64),
    Int(i64),
    Cat(u32),
    Exc,
}

impl Value {
    pub fn is_exc(&self) -> bool {
        matches!(self, Value::Exc)
    }

    /// Numeric view used by bound expressions and one-dimensional distances.
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::Real(x) => Some(x),
            Value::Int(i) => Some(i as f64),
            Value::Cat(_) | Value::Exc => None,
        }
    }

    /// Hashable identity; reals compare by bit pattern.
    pub fn key(&self) -> (u8, u64) {
        match *self {
            Value::Real(x) => (0, x.to_bits()),
            Value::Int(i) => (1, i as u64),
            Value::Cat(c) => (2, c as u64),
            Value::Exc => (3, 0),
        }
    }

    pub fn fits_kind(&self, kind: VariableKind) -> bool {
        matches!(
            (self, kind),
            (Value::Exc, _)
                | (Value::Real(_), VariableKind::Continuous)
                | (Value::Int(_), VariableKind::Integer)
                | (Value::Cat(_), VariableKind::Categorical)
        )
    }
}

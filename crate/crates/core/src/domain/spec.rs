//! Serialized form of a domain (the JSON domain-spec file).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::value::VariableKind;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed domain spec: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constants: Vec<ConstantSpec>,
    pub variables: Vec<VariableSpec>,
    #[serde(default)]
    pub arcs: Vec<ArcSpec>,
    #[serde(default)]
    pub rules: Vec<RuleSpec>,
}

impl DomainSpec {
    pub fn from_json(s: &str) -> Result<Self, SpecError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SpecError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| SpecError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }
}

/// Graph-level constant, either given or obtained by maximizing (or
/// minimizing) an expression over every configuration of the variables it reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_of: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_of: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableSpec {
    pub name: String,
    pub kind: VariableKind,
    pub universal: SetDescriptor,
    #[serde(default)]
    pub excludable: bool,
}

/// How a parent influences a child.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArcKind {
    Inclusion,
    Values,
    Both,
}

impl ArcKind {
    pub fn controls_inclusion(self) -> bool {
        matches!(self, ArcKind::Inclusion | ArcKind::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcSpec {
    pub parent: String,
    pub child: String,
    pub kind: ArcKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    pub child: String,
    pub cases: Vec<CaseSpec>,
}

/// One row of a decree rule. Parents absent from `when` are unconstrained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSpec {
    #[serde(default)]
    pub when: BTreeMap<String, SetDescriptor>,
    pub set: SetDescriptor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SetDescriptor {
    Exc(ExcToken),
    Interval {
        interval: [Bound; 2],
        #[serde(default)]
        open: [bool; 2],
    },
    Ints {
        ints: Vec<i64>,
    },
    Range {
        range: [i64; 2],
    },
    Cats {
        cats: Vec<String>,
    },
    IntervalExpr {
        interval_expr: [ExprSource; 2],
    },
}

/// The literal string `"EXC"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ExcToken;

impl TryFrom<String> for ExcToken {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        if s == "EXC" {
            Ok(ExcToken)
        } else {
            Err(format!("expected \"EXC\", found {s:?}"))
        }
    }
}

impl From<ExcToken> for String {
    fn from(_: ExcToken) -> String {
        "EXC".to_string()
    }
}

/// Interval endpoint: a number or `"inf"` / `"-inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Num(f64),
    Text(String),
}

impl Bound {
    pub fn value(&self) -> Option<f64> {
        match self {
            Bound::Num(x) => Some(*x),
            Bound::Text(s) => match s.as_str() {
                "inf" | "+inf" | "Infinity" => Some(f64::INFINITY),
                "-inf" | "-Infinity" => Some(f64::NEG_INFINITY),
                _ => None,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExprSource {
    Num(f64),
    Text(String),
}

impl ExprSource {
    pub fn text(&self) -> String {
        match self {
            ExprSource::Num(x) => format!("{x}"),
            ExprSource::Text(s) => s.clone(),
        }
    }
}

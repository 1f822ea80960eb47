//! Hierarchical mixed-variable domains.
//!
//! A [`RoleGraph`] holds the variables of a domain, the decree arcs between
//! them and one decree rule per child variable. Roles (meta, meta-decreed,
//! decreed, neutral) are derived from each node's position in the graph.

mod build;
mod enumerate;
mod point;
mod sample;
pub mod spec;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::expr::{Env, ExprError};
use crate::interval::Interval;
use crate::set::{RealInterval, UniversalSet, ValueSet};
use crate::value::{Value, VariableKind};

pub use build::{validate_graph, Violation};
pub use enumerate::Signature;
pub use point::{ExtendedPoint, Point};
pub use spec::{ArcKind, DomainSpec, SpecError};

/// Position of a variable in its graph's declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarIndex(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Meta,
    MetaDecreed,
    Decreed,
    Neutral,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Meta => "meta",
            Role::MetaDecreed => "meta-decreed",
            Role::Decreed => "decreed",
            Role::Neutral => "neutral",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VariableKind,
    pub universal: UniversalSet,
    /// Category labels; empty for numeric variables.
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecreeArc {
    pub parent: VarIndex,
    pub child: VarIndex,
    pub kind: ArcKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleCase {
    /// Conjunction of membership tests; parents not listed are unconstrained.
    pub when: Vec<(VarIndex, ValueSet)>,
    pub set: ValueSet,
}

impl RuleCase {
    fn matches(&self, lookup: &dyn Fn(VarIndex) -> Option<Value>) -> Option<bool> {
        for (p, s) in &self.when {
            if !s.contains(&lookup(*p)?) {
                return Some(false);
            }
        }
        Some(true)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecreeRule {
    pub child: VarIndex,
    pub cases: Vec<RuleCase>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable index {0} out of range")]
    UnknownIndex(usize),
    #[error("no value given for parent `{parent}` of `{var}`")]
    MissingParentValue { var: String, parent: String },
    #[error("no rule case of `{0}` matches its parent values")]
    NoMatchingCase(String),
    #[error("several rule cases of `{0}` match its parent values")]
    AmbiguousCase(String),
    #[error("bound expression of `{var}`: {source}")]
    Expr { var: String, source: ExprError },
    #[error("`{var}`: value `{value}` is not in its restricted set")]
    OutsideRestrictedSet { var: String, value: String },
    #[error("`{0}` must be included but has no value")]
    MissingValue(String),
    #[error("`{0}` is excluded but has a value")]
    UnexpectedValue(String),
    #[error("`{var}`: cannot parse `{text}` as a {kind} value")]
    Parse { var: String, text: String, kind: VariableKind },
    #[error("`{var}`: value does not match kind {kind}")]
    KindMismatch { var: String, kind: VariableKind },
    #[error("extended point has {got} values, domain has {expected} variables")]
    WrongLength { expected: usize, got: usize },
    #[error("`{0}` controls inclusion but its domain is not finite")]
    ContinuousController(String),
    #[error("cannot enumerate configurations of `{0}`")]
    NotEnumerable(String),
    #[error("inclusion of `{0}` depends on a parent that is not an inclusion arc")]
    AmbiguousInclusion(String),
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid domain: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Spec(#[from] SpecError),
}

/// A validated role graph. Immutable once built.
#[derive(Debug, Clone)]
pub struct RoleGraph {
    vars: Vec<Variable>,
    by_name: HashMap<String, VarIndex>,
    arcs: Vec<DecreeArc>,
    parents: Vec<Vec<VarIndex>>,
    children: Vec<Vec<VarIndex>>,
    rules: Vec<Option<DecreeRule>>,
    topo: Vec<VarIndex>,
    constants: Vec<(String, f64)>,
}

impl RoleGraph {
    pub fn from_spec(spec: &DomainSpec) -> Result<Self, GraphError> {
        build::build(spec).map_err(GraphError::Invalid)
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        Self::from_spec(&DomainSpec::from_json(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GraphError> {
        Self::from_spec(&DomainSpec::load(path)?)
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn indices(&self) -> impl Iterator<Item = VarIndex> + '_ {
        (0..self.vars.len()).map(VarIndex)
    }

    pub fn variable(&self, v: VarIndex) -> &Variable {
        &self.vars[v.0]
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn var(&self, name: &str) -> Result<VarIndex, DomainError> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| DomainError::UnknownVariable(name.to_string()))
    }

    pub fn name(&self, v: VarIndex) -> &str {
        &self.vars[v.0].name
    }

    pub fn kind(&self, v: VarIndex) -> VariableKind {
        self.vars[v.0].kind
    }

    pub fn arcs(&self) -> &[DecreeArc] {
        &self.arcs
    }

    pub fn parents(&self, v: VarIndex) -> &[VarIndex] {
        &self.parents[v.0]
    }

    pub fn children(&self, v: VarIndex) -> &[VarIndex] {
        &self.children[v.0]
    }

    pub fn rule(&self, v: VarIndex) -> Option<&DecreeRule> {
        self.rules[v.0].as_ref()
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.iter().find(|(n, _)| n == name).map(|c| c.1)
    }

    /// Parents first; ties resolved by declaration order.
    pub fn topological_order(&self) -> &[VarIndex] {
        &self.topo
    }

    /// Every variable reachable backwards along arcs from `v`, excluding `v`.
    pub fn ancestors(&self, v: VarIndex) -> BTreeSet<VarIndex> {
        let mut out = BTreeSet::new();
        for &p in self.parents(v) {
            if out.insert(p) {
                out.extend(self.ancestors(p));
            }
        }
        out
    }

    pub fn role_of(&self, v: VarIndex) -> Role {
        match (self.parents[v.0].is_empty(), self.children[v.0].is_empty()) {
            (true, false) => Role::Meta,
            (false, false) => Role::MetaDecreed,
            (false, true) => Role::Decreed,
            (true, true) => Role::Neutral,
        }
    }

    /// Whether the domain has at least one decree dependency.
    ///
    /// The three equivalent characterizations (some arc, some variable with a
    /// parent, some meta variable) are checked together.
    pub fn is_hierarchical(&self) -> bool {
        let has_arc = !self.arcs.is_empty();
        let has_child = self.indices().any(|v| !self.parents(v).is_empty());
        let has_meta = self.indices().any(|v| self.role_of(v) == Role::Meta);
        debug_assert!(has_arc == has_child && has_child == has_meta);
        has_arc
    }

    pub fn universal_set(&self, v: VarIndex) -> &UniversalSet {
        &self.vars[v.0].universal
    }

    /// Restricted set of `v` given values for all of its parents.
    ///
    /// Bound expressions are evaluated, so the result never contains an
    /// `IntervalExpr`. Parentless variables get their universal set.
    pub fn restricted_set(
        &self,
        v: VarIndex,
        parent_values: &BTreeMap<VarIndex, Value>,
    ) -> Result<ValueSet, DomainError> {
        self.check_index(v)?;
        for &p in self.parents(v) {
            if !parent_values.contains_key(&p) {
                return Err(DomainError::MissingParentValue {
                    var: self.name(v).to_string(),
                    parent: self.name(p).to_string(),
                });
            }
        }
        self.restricted_set_with(v, &|p| parent_values.get(&p).copied())
    }

    pub(crate) fn restricted_set_with(
        &self,
        v: VarIndex,
        lookup: &dyn Fn(VarIndex) -> Option<Value>,
    ) -> Result<ValueSet, DomainError> {
        let case = match self.matching_case(v, lookup)? {
            None => return Ok(self.vars[v.0].universal.values.clone()),
            Some(c) => c,
        };
        let env = |p: VarIndex| -> Result<Interval, ExprError> {
            match lookup(p) {
                Some(Value::Real(x)) => Ok(Interval::point(x)),
                Some(Value::Int(i)) => Ok(Interval::point(i as f64)),
                Some(Value::Exc) => Err(ExprError::ExcludedReference(self.name(p).to_string())),
                Some(Value::Cat(_)) | None => Err(ExprError::NotNumeric(self.name(p).to_string())),
            }
        };
        self.concretize(v, &case.set, &env)
    }

    /// The unique matching case, or `None` for a parentless variable.
    pub(crate) fn matching_case(
        &self,
        v: VarIndex,
        lookup: &dyn Fn(VarIndex) -> Option<Value>,
    ) -> Result<Option<&RuleCase>, DomainError> {
        let Some(rule) = self.rules[v.0].as_ref() else {
            return Ok(None);
        };
        let mut found = None;
        for case in &rule.cases {
            let m = case.matches(lookup).ok_or_else(|| {
                let missing = case.when.iter().find(|(p, _)| lookup(*p).is_none()).map(|x| x.0);
                DomainError::MissingParentValue {
                    var: self.name(v).to_string(),
                    parent: missing.map(|p| self.name(p).to_string()).unwrap_or_default(),
                }
            })?;
            if m {
                if found.is_some() {
                    return Err(DomainError::AmbiguousCase(self.name(v).to_string()));
                }
                found = Some(case);
            }
        }
        found
            .map(Some)
            .ok_or_else(|| DomainError::NoMatchingCase(self.name(v).to_string()))
    }

    /// Evaluates bound expressions; with range-valued environments the result
    /// is the hull `[min lo, max hi]`.
    pub(crate) fn concretize(&self, v: VarIndex, set: &ValueSet, env: &dyn Env) -> Result<ValueSet, DomainError> {
        match set {
            ValueSet::IntervalExpr { lo, hi } => {
                let wrap = |source| DomainError::Expr { var: self.name(v).to_string(), source };
                let lo = lo.eval(env).map_err(wrap)?;
                let hi = hi.eval(env).map_err(wrap)?;
                Ok(ValueSet::Interval(RealInterval::closed(lo.lo, hi.hi)))
            }
            other => Ok(other.clone()),
        }
    }

    fn check_index(&self, v: VarIndex) -> Result<(), DomainError> {
        if v.0 < self.vars.len() {
            Ok(())
        } else {
            Err(DomainError::UnknownIndex(v.0))
        }
    }

    /// Parses a textual value (`EXC`, a label, an integer or a real).
    pub fn parse_value(&self, v: VarIndex, text: &str) -> Result<Value, DomainError> {
        let text = text.trim();
        if text == "EXC" {
            return Ok(Value::Exc);
        }
        let var = &self.vars[v.0];
        let err = || DomainError::Parse { var: var.name.clone(), text: text.to_string(), kind: var.kind };
        match var.kind {
            VariableKind::Continuous => text.parse::<f64>().map(Value::Real).map_err(|_| err()),
            VariableKind::Integer => text.parse::<i64>().map(Value::Int).map_err(|_| err()),
            VariableKind::Categorical => var
                .labels
                .iter()
                .position(|l| l == text)
                .map(|i| Value::Cat(i as u32))
                .ok_or_else(err),
        }
    }

    /// Textual form; reals use 17 significant digits so they parse back exactly.
    pub fn format_value(&self, v: VarIndex, value: Value) -> String {
        match value {
            Value::Exc => "EXC".to_string(),
            Value::Real(x) => format_real(x),
            Value::Int(i) => i.to_string(),
            Value::Cat(c) => self.vars[v.0]
                .labels
                .get(c as usize)
                .cloned()
                .unwrap_or_else(|| format!("#{c}")),
        }
    }

    /// Short human-readable form of a set of `v`.
    pub fn describe_set(&self, v: VarIndex, set: &ValueSet) -> String {
        match set {
            ValueSet::Exc => "{EXC}".into(),
            ValueSet::Interval(iv) => format!(
                "{}{}, {}{}",
                if iv.lo_open { "]" } else { "[" },
                iv.lo,
                iv.hi,
                if iv.hi_open { "[" } else { "]" }
            ),
            ValueSet::IntRange { lo, hi } => format!("{{{lo}..{hi}}}"),
            ValueSet::Ints(s) => format!("{{{}}}", s.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")),
            ValueSet::Cats(s) => format!(
                "{{{}}}",
                s.iter().map(|&c| self.format_value(v, Value::Cat(c))).collect::<Vec<_>>().join(",")
            ),
            ValueSet::IntervalExpr { lo, hi } => format!("[{lo}, {hi}]"),
        }
    }
}

/// 17 significant digits in scientific notation.
pub fn format_real(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:.16e}")
}

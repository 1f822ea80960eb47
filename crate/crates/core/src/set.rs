use std::collections::BTreeSet;

use crate::expr::Expr;
use crate::value::{Value, VariableKind};

/// Real interval with exact open/closed endpoints. `hi` may be `+inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealInterval {
    pub lo: f64,
    pub hi: f64,
    pub lo_open: bool,
    pub hi_open: bool,
}

impl RealInterval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_open: false, hi_open: false }
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_open: true, hi_open: true }
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_open { x > self.lo } else { x >= self.lo };
        let below = if self.hi_open { x < self.hi } else { x <= self.hi };
        above && below && x.is_finite()
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && (self.lo_open || self.hi_open))
    }

    pub fn is_subset_of(&self, other: &RealInterval) -> bool {
        if self.is_empty() {
            return true;
        }
        let lo_ok = self.lo > other.lo || (self.lo == other.lo && (self.lo_open || !other.lo_open));
        let hi_ok = self.hi < other.hi || (self.hi == other.hi && (self.hi_open || !other.hi_open));
        lo_ok && hi_ok
    }
}

/// A set of admissible values.
///
/// Categorical sets hold label indices of the owning variable. `IntervalExpr`
/// only appears in decree rules and becomes a closed `Interval` once its
/// endpoints are evaluated against parent values.
#[derive(Debug, Clone, PartialEq)]
pub enum ValueSet {
    Interval(RealInterval),
    IntRange { lo: i64, hi: i64 },
    Ints(BTreeSet<i64>),
    Cats(BTreeSet<u32>),
    Exc,
    IntervalExpr { lo: Expr, hi: Expr },
}

impl ValueSet {
    pub fn contains(&self, v: &Value) -> bool {
        match (self, v) {
            (ValueSet::Exc, Value::Exc) => true,
            (ValueSet::Interval(iv), Value::Real(x)) => iv.contains(*x),
            (ValueSet::IntRange { lo, hi }, Value::Int(i)) => lo <= i && i <= hi,
            (ValueSet::Ints(s), Value::Int(i)) => s.contains(i),
            (ValueSet::Cats(s), Value::Cat(c)) => s.contains(c),
            _ => false,
        }
    }

    pub fn is_exc(&self) -> bool {
        matches!(self, ValueSet::Exc)
    }

    /// Kind of values in the set; `None` for `{EXC}`.
    pub fn kind(&self) -> Option<VariableKind> {
        match self {
            ValueSet::Interval(_) | ValueSet::IntervalExpr { .. } => Some(VariableKind::Continuous),
            ValueSet::IntRange { .. } | ValueSet::Ints(_) => Some(VariableKind::Integer),
            ValueSet::Cats(_) => Some(VariableKind::Categorical),
            ValueSet::Exc => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            ValueSet::Interval(iv) => iv.is_empty(),
            ValueSet::IntRange { lo, hi } => lo > hi,
            ValueSet::Ints(s) => s.is_empty(),
            ValueSet::Cats(s) => s.is_empty(),
            ValueSet::Exc | ValueSet::IntervalExpr { .. } => false,
        }
    }

    /// Number of values if the set is finite.
    pub fn cardinality(&self) -> Option<u64> {
        match self {
            ValueSet::Interval(iv) => (iv.lo == iv.hi && !iv.is_empty()).then_some(1),
            ValueSet::IntRange { lo, hi } => Some(if lo > hi { 0 } else { (hi - lo) as u64 + 1 }),
            ValueSet::Ints(s) => Some(s.len() as u64),
            ValueSet::Cats(s) => Some(s.len() as u64),
            ValueSet::Exc => Some(1),
            ValueSet::IntervalExpr { .. } => None,
        }
    }

    /// All members, in ascending order, if there are at most `cap` of them.
    pub fn enumerate(&self, cap: u64) -> Option<Vec<Value>> {
        if self.cardinality()? > cap {
            return None;
        }
        Some(match self {
            ValueSet::Interval(iv) => vec![Value::Real(iv.lo)],
            ValueSet::IntRange { lo, hi } => (*lo..=*hi).map(Value::Int).collect(),
            ValueSet::Ints(s) => s.iter().copied().map(Value::Int).collect(),
            ValueSet::Cats(s) => s.iter().copied().map(Value::Cat).collect(),
            ValueSet::Exc => vec![Value::Exc],
            ValueSet::IntervalExpr { .. } => return None,
        })
    }

    /// Numeric hull `(min, max)` of an interval or integer set.
    pub fn numeric_hull(&self) -> Option<(f64, f64)> {
        match self {
            ValueSet::Interval(iv) => Some((iv.lo, iv.hi)),
            ValueSet::IntRange { lo, hi } => Some((*lo as f64, *hi as f64)),
            ValueSet::Ints(s) => Some((*s.first()? as f64, *s.last()? as f64)),
            _ => None,
        }
    }

    /// Subset test between concrete (expression-free) sets.
    pub fn is_subset_of(&self, other: &ValueSet) -> bool {
        match (self, other) {
            (ValueSet::Exc, ValueSet::Exc) => true,
            (ValueSet::Interval(a), ValueSet::Interval(b)) => a.is_subset_of(b),
            (ValueSet::Cats(a), ValueSet::Cats(b)) => a.is_subset(b),
            (a, b) if a.kind() == Some(VariableKind::Integer) && b.kind() == Some(VariableKind::Integer) => {
                let ranges = |s: &ValueSet| {
                    let mut u = SetUnion::default();
                    u.add(s);
                    u.normalized().ints
                };
                let outer = ranges(b);
                ranges(a)
                    .iter()
                    .all(|&(lo, hi)| outer.iter().any(|&(olo, ohi)| olo <= lo && hi <= ohi))
            }
            (a, _) => a.is_empty(),
        }
    }
}

/// Declared universal set of a variable.
#[derive(Debug, Clone, PartialEq)]
pub struct UniversalSet {
    pub values: ValueSet,
    pub excludable: bool,
}

impl UniversalSet {
    pub fn contains(&self, v: &Value) -> bool {
        match v {
            Value::Exc => self.excludable,
            _ => self.values.contains(v),
        }
    }

    /// Whether a concrete rule set fits inside this universal set.
    pub fn admits(&self, set: &ValueSet) -> bool {
        match set {
            ValueSet::Exc => self.excludable,
            s => s.is_subset_of(&self.values),
        }
    }
}

/// Accumulates a union of concrete sets into a canonical form so unions can
/// be compared for equality.
#[derive(Debug, Clone, Default)]
pub struct SetUnion {
    reals: Vec<RealInterval>,
    int_ranges: Vec<(i64, i64)>,
    cats: BTreeSet<u32>,
    exc: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSet {
    pub reals: Vec<RealInterval>,
    pub ints: Vec<(i64, i64)>,
    pub cats: BTreeSet<u32>,
    pub exc: bool,
}

impl SetUnion {
    pub fn add(&mut self, s: &ValueSet) {
        match s {
            ValueSet::Interval(iv) if !iv.is_empty() => self.reals.push(*iv),
            ValueSet::Interval(_) => {}
            ValueSet::IntRange { lo, hi } if lo <= hi => self.int_ranges.push((*lo, *hi)),
            ValueSet::IntRange { .. } => {}
            ValueSet::Ints(xs) => self.int_ranges.extend(xs.iter().map(|&x| (x, x))),
            ValueSet::Cats(c) => self.cats.extend(c.iter().copied()),
            ValueSet::Exc => self.exc = true,
            ValueSet::IntervalExpr { .. } => {}
        }
    }

    pub fn add_universal(&mut self, u: &UniversalSet) {
        self.add(&u.values);
        self.exc |= u.excludable;
    }

    pub fn normalized(&self) -> NormalizedSet {
        let mut ints = self.int_ranges.clone();
        ints.sort();
        let mut merged: Vec<(i64, i64)> = Vec::new();
        for (a, b) in ints {
            match merged.last_mut() {
                Some(last) if a <= last.1.saturating_add(1) => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        let mut reals = self.reals.clone();
        reals.sort_by(|x, y| {
            x.lo.partial_cmp(&y.lo)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(x.lo_open.cmp(&y.lo_open))
        });
        let mut rmerged: Vec<RealInterval> = Vec::new();
        for iv in reals {
            match rmerged.last_mut() {
                Some(last) if iv.lo < last.hi || (iv.lo == last.hi && (!last.hi_open || !iv.lo_open)) => {
                    if iv.hi > last.hi {
                        last.hi = iv.hi;
                        last.hi_open = iv.hi_open;
                    } else if iv.hi == last.hi {
                        last.hi_open &= iv.hi_open;
                    }
                }
                _ => rmerged.push(iv),
            }
        }
        NormalizedSet { reals: rmerged, ints: merged, cats: self.cats.clone(), exc: self.exc }
    }
}

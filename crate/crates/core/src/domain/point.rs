use std::collections::BTreeMap;

use super::{DomainError, RoleGraph, VarIndex};
use crate::value::Value;

/// Assignment over the included variables only.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Point {
    pub values: BTreeMap<VarIndex, Value>,
}

impl Point {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, v: VarIndex) -> Option<Value> {
        self.values.get(&v).copied()
    }

    pub fn set(&mut self, v: VarIndex, x: Value) -> &mut Self {
        self.values.insert(v, x);
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Total assignment over every variable; excluded ones hold [`Value::Exc`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedPoint {
    pub values: Vec<Value>,
}

impl ExtendedPoint {
    pub fn get(&self, v: VarIndex) -> Value {
        self.values[v.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Non-EXC variables in declaration order.
    pub fn included(&self) -> Vec<VarIndex> {
        self.values.iter().enumerate().filter(|(_, x)| !x.is_exc()).map(|(i, _)| VarIndex(i)).collect()
    }

    /// Exact identity, comparing reals bit for bit.
    pub fn same_as(&self, other: &ExtendedPoint) -> bool {
        self.values.len() == other.values.len()
            && self.values.iter().zip(&other.values).all(|(a, b)| a.key() == b.key())
    }
}

impl RoleGraph {
    /// The transfer mapping: fills every excluded variable with EXC.
    pub fn extend(&self, x: &Point) -> Result<ExtendedPoint, DomainError> {
        if let Some((v, _)) = x.values.iter().find(|(v, _)| v.0 >= self.len()) {
            return Err(DomainError::UnknownIndex(v.0));
        }
        let mut values = vec![Value::Exc; self.len()];
        for &v in self.topological_order() {
            let set = self.restricted_set_with(v, &|p| Some(values[p.0]))?;
            let given = x.get(v);
            values[v.0] = match (set.is_exc(), given) {
                (true, None) => Value::Exc,
                (true, Some(_)) => return Err(DomainError::UnexpectedValue(self.name(v).to_string())),
                (false, None) | (false, Some(Value::Exc)) => {
                    return Err(DomainError::MissingValue(self.name(v).to_string()))
                }
                (false, Some(val)) => {
                    self.check_member(v, val, &set)?;
                    val
                }
            };
        }
        Ok(ExtendedPoint { values })
    }

    /// Inverse of [`RoleGraph::extend`]: drops the EXC entries.
    pub fn project(&self, x: &ExtendedPoint) -> Result<Point, DomainError> {
        self.check_extended(x)?;
        Ok(Point {
            values: x
                .values
                .iter()
                .enumerate()
                .filter(|(_, v)| !v.is_exc())
                .map(|(i, v)| (VarIndex(i), *v))
                .collect(),
        })
    }

    /// Membership in the extended domain: every entry lies in its restricted set.
    pub fn check_extended(&self, x: &ExtendedPoint) -> Result<(), DomainError> {
        if x.len() != self.len() {
            return Err(DomainError::WrongLength { expected: self.len(), got: x.len() });
        }
        for &v in self.topological_order() {
            let set = self.restricted_set_with(v, &|p| Some(x.values[p.0]))?;
            let val = x.values[v.0];
            match (set.is_exc(), val.is_exc()) {
                (true, true) => {}
                (true, false) => return Err(DomainError::UnexpectedValue(self.name(v).to_string())),
                (false, true) => return Err(DomainError::MissingValue(self.name(v).to_string())),
                (false, false) => self.check_member(v, val, &set)?,
            }
        }
        Ok(())
    }

    fn check_member(&self, v: VarIndex, val: Value, set: &crate::set::ValueSet) -> Result<(), DomainError> {
        if !val.fits_kind(self.kind(v)) {
            return Err(DomainError::KindMismatch { var: self.name(v).to_string(), kind: self.kind(v) });
        }
        if !set.contains(&val) {
            return Err(DomainError::OutsideRestrictedSet {
                var: self.name(v).to_string(),
                value: self.format_value(v, val),
            });
        }
        Ok(())
    }

    /// Builds a point from `(name, text)` pairs.
    pub fn point_from_text<'a>(&self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Point, DomainError> {
        let mut p = Point::new();
        for (name, text) in pairs {
            let v = self.var(name)?;
            p.set(v, self.parse_value(v, text)?);
        }
        Ok(p)
    }

    /// Builds an extended point from one text cell per variable, in declaration order.
    pub fn extended_from_text<S: AsRef<str>>(&self, cells: &[S]) -> Result<ExtendedPoint, DomainError> {
        if cells.len() != self.len() {
            return Err(DomainError::WrongLength { expected: self.len(), got: cells.len() });
        }
        let values = self
            .indices()
            .zip(cells)
            .map(|(v, c)| self.parse_value(v, c.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ExtendedPoint { values })
    }
}

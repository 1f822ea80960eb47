use rand::Rng;

use super::{DomainError, ExtendedPoint, RoleGraph, Signature};
use crate::set::ValueSet;
use crate::value::Value;

/// Draws one member of a concrete set.
///
/// Bounded intervals and integer ranges are sampled uniformly. A half-line
/// is sampled as its endpoint plus an exponential(1) offset; the whole line
/// falls back to `[-1, 1]`.
pub fn sample_from_set<R: Rng + ?Sized>(set: &ValueSet, rng: &mut R) -> Option<Value> {
    match set {
        ValueSet::Exc => Some(Value::Exc),
        ValueSet::Interval(iv) => {
            if iv.is_empty() {
                return None;
            }
            if iv.lo == iv.hi {
                return Some(Value::Real(iv.lo));
            }
            for _ in 0..1000 {
                let u: f64 = rng.random();
                let x = match (iv.lo.is_finite(), iv.hi.is_finite()) {
                    (true, true) => iv.lo + (iv.hi - iv.lo) * u,
                    (true, false) => iv.lo - (1.0 - u).ln(),
                    (false, true) => iv.hi + (1.0 - u).ln(),
                    (false, false) => 2.0 * u - 1.0,
                };
                if iv.contains(x) {
                    return Some(Value::Real(x));
                }
            }
            None
        }
        ValueSet::IntRange { lo, hi } => (lo <= hi).then(|| Value::Int(rng.random_range(*lo..=*hi))),
        ValueSet::Ints(s) => {
            let i = rng.random_range(0..s.len().max(1));
            s.iter().nth(i).map(|&x| Value::Int(x))
        }
        ValueSet::Cats(s) => {
            let i = rng.random_range(0..s.len().max(1));
            s.iter().nth(i).map(|&x| Value::Cat(x))
        }
        ValueSet::IntervalExpr { .. } => None,
    }
}

impl RoleGraph {
    /// Random member of the extended domain, built parent-first.
    pub fn sample_extended<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ExtendedPoint, DomainError> {
        self.sample_with(rng, &|_| None)
    }

    /// Random extended point with the inclusion pattern of `sig`; one of its
    /// controller configurations is drawn uniformly first.
    pub fn sample_in_signature<R: Rng + ?Sized>(
        &self,
        sig: &Signature,
        rng: &mut R,
    ) -> Result<ExtendedPoint, DomainError> {
        let k = rng.random_range(0..sig.configurations.len());
        let config = &sig.configurations[k];
        self.sample_with(rng, &|v| config.iter().find(|c| c.0 == v).map(|c| c.1))
    }

    fn sample_with<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        preset: &dyn Fn(super::VarIndex) -> Option<Value>,
    ) -> Result<ExtendedPoint, DomainError> {
        let mut values = vec![Value::Exc; self.len()];
        for &v in self.topological_order() {
            if let Some(x) = preset(v) {
                values[v.0] = x;
                continue;
            }
            let set = self.restricted_set_with(v, &|p| Some(values[p.0]))?;
            values[v.0] = sample_from_set(&set, rng).ok_or_else(|| DomainError::OutsideRestrictedSet {
                var: self.name(v).to_string(),
                value: self.describe_set(v, &set),
            })?;
        }
        Ok(ExtendedPoint { values })
    }
}

//! Convergence test and data profiles over tuning traces.

use std::collections::{BTreeMap, BTreeSet};

use crate::BenchError;

/// Improvement history of one approach-model on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRecord {
    pub instance: String,
    pub solver: String,
    /// Number of tuned parameters.
    pub n: usize,
    /// `(k, rmse)` at every improvement, `k` strictly increasing.
    pub trace: Vec<(usize, f64)>,
}

impl ProfileRecord {
    /// Best value at or before evaluation `k`.
    pub fn value_at(&self, k: usize) -> Option<f64> {
        self.trace.iter().take_while(|e| e.0 <= k).map(|e| e.1).fold(None, |m, v| Some(m.map_or(v, |m: f64| m.min(v))))
    }

    pub fn best(&self) -> Option<f64> {
        self.trace.iter().map(|e| e.1).reduce(f64::min)
    }

    /// First evaluation at which the record is within `tau` of `best`.
    pub fn solved_at(&self, best: f64, tau: f64) -> Option<usize> {
        let mut running = f64::INFINITY;
        for &(k, v) in &self.trace {
            running = running.min(v);
            if within(running, best, tau) {
                return Some(k);
            }
        }
        None
    }
}

/// `(v - best) / best <= tau`, written so that decimal inputs such as
/// 1.10 against 1.00 at tau = 0.10 are not lost to rounding.
fn within(v: f64, best: f64, tau: f64) -> bool {
    v <= best * (1.0 + tau)
}

/// Convergence test at evaluation `k`.
pub fn tau_solved_at(record: &ProfileRecord, best: f64, tau: f64, k: usize) -> Result<bool, BenchError> {
    if !(best > 0.0) {
        return Err(BenchError::Profile(format!("best value must be positive, got {best}")));
    }
    Ok(record.value_at(k).is_some_and(|v| within(v, best, tau)))
}

/// Fraction of instances each solver has `tau`-solved within
/// `kappa * (n + 1)` evaluations, for every `kappa` in the grid.
pub fn data_profile(records: &[ProfileRecord], tau: f64, kappas: &[f64]) -> Result<BTreeMap<String, Vec<f64>>, BenchError> {
    let instances: BTreeSet<&str> = records.iter().map(|r| r.instance.as_str()).collect();
    let solvers: BTreeSet<&str> = records.iter().map(|r| r.solver.as_str()).collect();
    let mut by_pair: BTreeMap<(&str, &str), &ProfileRecord> = BTreeMap::new();
    for r in records {
        if by_pair.insert((r.instance.as_str(), r.solver.as_str()), r).is_some() {
            return Err(BenchError::Profile(format!("duplicate record for {} / {}", r.instance, r.solver)));
        }
    }
    let mut solved: BTreeMap<&str, Vec<Option<f64>>> = BTreeMap::new();
    for &p in &instances {
        let mut best = f64::INFINITY;
        for &s in &solvers {
            let r = by_pair.get(&(p, s)).ok_or_else(|| BenchError::Profile(format!("missing record for {p} / {s}")))?;
            best = best.min(r.best().unwrap_or(f64::INFINITY));
        }
        if !(best > 0.0) || !best.is_finite() {
            return Err(BenchError::Profile(format!("instance {p}: best value must be positive and finite, got {best}")));
        }
        for &s in &solvers {
            let r = by_pair[&(p, s)];
            let k = r.solved_at(best, tau).map(|k| k as f64 / (r.n + 1) as f64);
            solved.entry(s).or_default().push(k);
        }
    }
    let total = instances.len().max(1) as f64;
    Ok(solved
        .into_iter()
        .map(|(s, ks)| {
            let curve = kappas.iter().map(|&kappa| ks.iter().filter(|k| k.is_some_and(|k| k <= kappa)).count() as f64 / total).collect();
            (s.to_string(), curve)
        })
        .collect())
}

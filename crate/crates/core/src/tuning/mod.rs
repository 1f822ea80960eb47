//! Derivative-free tuning: Latin hypercube sampling followed by a
//! generalized pattern search, under an exact evaluation budget.

mod problem;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use problem::{ModelKind, Problem, RouteConfig, Tuned, TuneReport};

use crate::domain::DomainError;
use crate::models::ModelError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TuneError {
    #[error("objective is not finite at the start point")]
    NonFiniteStart,
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("start point has {got} coordinates, the space has {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("start point is outside the parameter box")]
    Infeasible,
    #[error("dataset has no {0} rows")]
    MissingSplit(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// What a coordinate of the search vector means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity,
    /// The coordinate is `log10` of a weight.
    Log10,
    /// The coordinate `s` gives a penalty offset `s * weight * diameter`.
    ThetaOffset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub integer: bool,
    #[serde(default = "identity")]
    pub transform: Transform,
}

fn identity() -> Transform {
    Transform::Identity
}

impl Dimension {
    pub fn continuous(name: impl Into<String>, lo: f64, hi: f64, transform: Transform) -> Self {
        Dimension { name: name.into(), lo, hi, integer: false, transform }
    }

    pub fn integer(name: impl Into<String>, lo: i64, hi: i64) -> Self {
        Dimension { name: name.into(), lo: lo as f64, hi: hi as f64, integer: true, transform: Transform::Identity }
    }

    fn clamp(&self, x: f64) -> f64 {
        let x = x.clamp(self.lo, self.hi);
        if self.integer {
            x.round()
        } else {
            x
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParameterSpace {
    pub dims: Vec<Dimension>,
}

impl ParameterSpace {
    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.len()
            && self.dims.iter().zip(x).all(|(d, &v)| v >= d.lo && v <= d.hi && (!d.integer || v.fract() == 0.0))
    }

    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        self.dims.iter().zip(x).map(|(d, &v)| d.clamp(v)).collect()
    }
}

/// One improvement of the incumbent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// 1-based index of the evaluation that found it.
    pub k: usize,
    pub objective: f64,
    /// Held-out metric of the new incumbent, when one is tracked.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: Vec<f64>,
    pub best_objective: f64,
    pub evaluations: usize,
    pub lhs_evaluations: usize,
    pub trace: Vec<TraceEntry>,
}

/// Latin hypercube design: in every dimension the `count` samples fall in
/// distinct equal-width strata. Integer dimensions stratify their values.
pub fn lhs_sample<R: Rng + ?Sized>(space: &ParameterSpace, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::with_capacity(space.len()); count];
    let n = count as f64;
    for d in &space.dims {
        let mut strata: Vec<usize> = (0..count).collect();
        strata.shuffle(rng);
        for (row, &s) in out.iter_mut().zip(&strata) {
            let u = (s as f64 + rng.random::<f64>()) / n;
            let x = if d.integer {
                let card = d.hi - d.lo + 1.0;
                (d.lo + (u * card).floor()).min(d.hi)
            } else {
                d.lo + u * (d.hi - d.lo)
            };
            row.push(x);
        }
    }
    out
}

/// Evaluations given to the Latin hypercube out of `budget`.
pub fn lhs_share(budget: usize) -> usize {
    (33 * budget).div_ceil(100)
}

/// Runs the objective, keeps the incumbent and the improvement trace, and
/// never exceeds the budget.
struct Driver<'a, F> {
    objective: &'a F,
    on_improve: &'a (dyn Fn(&[f64]) -> Option<f64> + Sync),
    parallel: bool,
    budget: usize,
    calls: usize,
    best: Vec<f64>,
    best_f: f64,
    trace: Vec<TraceEntry>,
}

impl<'a, F: Fn(&[f64]) -> f64 + Sync> Driver<'a, F> {
    fn remaining(&self) -> usize {
        self.budget - self.calls
    }

    /// Evaluates as many of `xs` as the budget allows; returns the index of
    /// the best strict improvement, if any.
    fn batch(&mut self, mut xs: Vec<Vec<f64>>) -> Option<usize> {
        xs.truncate(self.remaining());
        let f = self.objective;
        let values: Vec<f64> = if self.parallel {
            xs.par_iter().map(|x| f(x)).collect()
        } else {
            xs.iter().map(|x| f(x)).collect()
        };
        let start = self.calls;
        self.calls += xs.len();
        let mut winner = None;
        for (i, &v) in values.iter().enumerate() {
            let v = if v.is_nan() { f64::INFINITY } else { v };
            if v < self.best_f {
                self.best_f = v;
                self.best = xs[i].clone();
                winner = Some(i);
                let test = (self.on_improve)(&xs[i]);
                self.trace.push(TraceEntry { k: start + i + 1, objective: v, test });
            }
        }
        winner
    }

    /// Pattern search from the incumbent until the mesh collapses or the
    /// budget runs out.
    fn gps(&mut self, space: &ParameterSpace, mut mesh: f64) {
        while self.remaining() > 0 && mesh >= 1e-9 {
            let x0 = self.best.clone();
            let mut polls = Vec::with_capacity(2 * space.len());
            for (i, d) in space.dims.iter().enumerate() {
                let mut step = mesh * (d.hi - d.lo);
                if d.integer {
                    step = step.round().max(1.0);
                }
                for sign in [1.0, -1.0] {
                    let mut y = x0.clone();
                    y[i] = d.clamp(x0[i] + sign * step);
                    if y[i] != x0[i] && !polls.contains(&y) {
                        polls.push(y);
                    }
                }
            }
            if polls.is_empty() {
                mesh /= 2.0;
                continue;
            }
            match self.batch(polls) {
                Some(_) => mesh = (mesh * 2.0).min(1.0),
                None => mesh /= 2.0,
            }
        }
    }

    fn finish(self, lhs: usize) -> TuneResult {
        TuneResult { best: self.best, best_objective: self.best_f, evaluations: self.calls, lhs_evaluations: lhs, trace: self.trace }
    }
}

const INITIAL_MESH: f64 = 0.25;

/// Generalized pattern search from `start`: polls the `2n` coordinate
/// directions, doubles the mesh after an improvement and halves it after a
/// failed poll. Stops when the budget is spent or the mesh drops below 1e-9.
pub fn pattern_search<F>(objective: &F, space: &ParameterSpace, start: &[f64], budget: usize) -> Result<TuneResult, TuneError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if budget == 0 {
        return Err(TuneError::ZeroBudget);
    }
    if start.len() != space.len() {
        return Err(TuneError::Dimension { expected: space.len(), got: start.len() });
    }
    if !space.contains(start) {
        return Err(TuneError::Infeasible);
    }
    let f0 = objective(start);
    if !f0.is_finite() {
        return Err(TuneError::NonFiniteStart);
    }
    let mut d = Driver {
        objective,
        on_improve: &|_| None,
        parallel: true,
        budget,
        calls: 1,
        best: start.to_vec(),
        best_f: f0,
        trace: vec![TraceEntry { k: 1, objective: f0, test: None }],
    };
    d.gps(space, INITIAL_MESH);
    Ok(d.finish(0))
}

/// Options for [`minimize`].
#[derive(Clone, Copy)]
pub struct SearchOptions<'a> {
    pub budget: usize,
    pub seed: u64,
    /// Evaluate candidates of one batch concurrently.
    pub parallel: bool,
    /// Called on every new incumbent; its value is stored in the trace.
    pub on_improve: &'a (dyn Fn(&[f64]) -> Option<f64> + Sync),
}

/// LHS on the first third of the budget, then pattern search from the best
/// sample. When the mesh collapses early the search restarts from the
/// incumbent with a randomly shrunk mesh, so exactly `budget` evaluations
/// are made.
pub fn minimize<F>(objective: &F, space: &ParameterSpace, opts: SearchOptions<'_>) -> Result<TuneResult, TuneError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if opts.budget == 0 {
        return Err(TuneError::ZeroBudget);
    }
    let mut lhs_rng = crate::rng::stream(opts.seed, "lhs");
    let mut restart_rng = crate::rng::stream(opts.seed, "gps");
    let lhs = lhs_share(opts.budget).max(1);
    let mut d = Driver {
        objective,
        on_improve: opts.on_improve,
        parallel: opts.parallel,
        budget: opts.budget,
        calls: 0,
        best: Vec::new(),
        best_f: f64::INFINITY,
        trace: Vec::new(),
    };
    d.batch(lhs_sample(space, lhs, &mut lhs_rng));
    if d.best.is_empty() {
        // Every sample was non-finite; search from the first one anyway.
        d.best = space.clamp(&lhs_sample(space, 1, &mut lhs_rng)[0]);
    }
    let mut mesh = INITIAL_MESH;
    while d.remaining() > 0 {
        let before = d.calls;
        d.gps(space, mesh);
        if d.calls == before {
            let n = d.remaining();
            d.batch(lhs_sample(space, n, &mut restart_rng));
        }
        mesh = INITIAL_MESH * restart_rng.random_range(0.05..1.0);
    }
    Ok(d.finish(lhs))
}

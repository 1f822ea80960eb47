//! Precomputed per-variable coordinates between query and training points.
//!
//! Tuning evaluates thousands of configs on the same points. Only weights,
//! penalties and the order change between evaluations, so the unscaled
//! one-dimensional distances are computed once and rescaled on demand.

use rayon::prelude::*;

use super::{raw_distance, DistanceConfig, Order};
use crate::domain::{ExtendedPoint, RoleGraph};
use crate::scalar::Scalar;

const BOTH_EXC: f64 = -1.0;
const ONE_EXC: f64 = -2.0;

/// Coordinate of one variable between two extended points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coord {
    /// Both included; unscaled distance.
    Raw(f64),
    BothExc,
    OneExc,
}

/// How coordinates are combined into a distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistanceKind {
    /// Included-excluded coordinates under the config's order.
    Meta,
    /// Euclidean; points with different inclusion patterns are infinitely far.
    Sub,
    /// Config's order over variables included in both points.
    Hybrid,
}

#[derive(Debug, Clone)]
pub struct CoordTable {
    nq: usize,
    nt: usize,
    nv: usize,
    cells: Vec<f64>,
    diameters: Vec<f64>,
}

impl CoordTable {
    /// Categorical label metrics are taken from `cfg` and frozen; its weights
    /// and penalties are ignored here.
    pub fn build<T: Scalar>(
        g: &RoleGraph,
        cfg: &DistanceConfig<T>,
        queries: &[&ExtendedPoint],
        train: &[&ExtendedPoint],
    ) -> Self {
        let nv = g.len();
        let cells: Vec<f64> = queries
            .par_iter()
            .flat_map_iter(|q| {
                train.iter().flat_map(move |t| {
                    g.indices().map(move |v| match (q.get(v).is_exc(), t.get(v).is_exc()) {
                        (true, true) => BOTH_EXC,
                        (false, false) => raw_distance(cfg, v, q.get(v), t.get(v)).to_f64_lossy(),
                        _ => ONE_EXC,
                    })
                })
            })
            .collect();
        let diameters = g.indices().map(|v| cfg.unit_diameter(g, v).to_f64_lossy()).collect();
        Self { nq: queries.len(), nt: train.len(), nv, cells, diameters }
    }

    pub fn queries(&self) -> usize {
        self.nq
    }

    pub fn train(&self) -> usize {
        self.nt
    }

    pub fn coord(&self, q: usize, t: usize, v: usize) -> Coord {
        match self.cells[(q * self.nt + t) * self.nv + v] {
            x if x == BOTH_EXC => Coord::BothExc,
            x if x == ONE_EXC => Coord::OneExc,
            x => Coord::Raw(x),
        }
    }

    pub fn distance<T: Scalar>(&self, cfg: &DistanceConfig<T>, kind: DistanceKind, q: usize, t: usize) -> T {
        let row = &self.cells[(q * self.nt + t) * self.nv..][..self.nv];
        let half = T::of(0.5);
        let coord = |v: usize, c: f64| -> Option<T> {
            if c >= 0.0 {
                Some(cfg.weights[v] * T::of(c))
            } else if c == ONE_EXC {
                match kind {
                    DistanceKind::Meta => Some(cfg.weights[v] * T::of(self.diameters[v]) * half + cfg.theta_offsets[v]),
                    DistanceKind::Sub => Some(T::infinity()),
                    DistanceKind::Hybrid => None,
                }
            } else {
                None
            }
        };
        let p = match kind {
            DistanceKind::Sub => Order::euclidean(),
            _ => cfg.p,
        };
        // Two passes instead of collecting, since this runs once per pair per evaluation.
        let mut m = T::zero();
        for (v, &c) in row.iter().enumerate() {
            if let Some(d) = coord(v, c) {
                m = m.max(d);
            }
        }
        if m.is_infinite() || m == T::zero() {
            return m;
        }
        match p {
            Order::Infinity => m,
            Order::Finite(p) => {
                let mut acc = T::zero();
                let two = p == T::of(2.0);
                for (v, &c) in row.iter().enumerate() {
                    if let Some(d) = coord(v, c) {
                        let s = d / m;
                        acc = acc + if two { s * s } else { s.powf(p) };
                    }
                }
                if two {
                    m * acc.sqrt()
                } else {
                    m * acc.powf(T::one() / p)
                }
            }
        }
    }

    /// Row-major `queries x train` distance matrix.
    pub fn matrix<T: Scalar>(&self, cfg: &DistanceConfig<T>, kind: DistanceKind) -> Vec<T> {
        (0..self.nq * self.nt).map(|k| self.distance(cfg, kind, k / self.nt.max(1), k % self.nt.max(1))).collect()
    }
}

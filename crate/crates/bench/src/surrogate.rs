//! Deterministic stand-in for the trained-network test score.
//!
//! score = clip(base + offset + field, 0, 100) where `base` is a smooth
//! function of the continuous and integer variables whose optimum moves with
//! the optimizer and layer count, `offset` depends only on the subproblem,
//! and `field` is a random Fourier feature sample (std 2) over normalized
//! coordinates, fixed by the seed.

use std::f64::consts::PI;

use metadist::{ExtendedPoint, Point, RoleGraph, Value, VarIndex, VariableKind};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::variants::Arch;
use crate::BenchError;

const FEATURES: usize = 48;
const SIGMA: f64 = 2.0;
const LENGTH_SCALE: f64 = 0.5;
/// Normalized coordinate used for an excluded variable.
const EXC_COORD: f64 = -0.5;

#[derive(Debug, Clone)]
struct Constants {
    peak: f64,
    rate_curvature: f64,
    unit_gain: f64,
}

impl Constants {
    fn of(arch: Arch) -> Self {
        match arch {
            Arch::Mlp => Constants { peak: 84.0, rate_curvature: 60.0, unit_gain: 10.0 },
            Arch::Cnn => Constants { peak: 66.0, rate_curvature: 45.0, unit_gain: 16.0 },
        }
    }
}

#[derive(Debug, Clone)]
pub struct Surrogate {
    c: Constants,
    omega: Vec<Vec<f64>>,
    phase: Vec<f64>,
    hull: Vec<(f64, f64)>,
    adam: Option<(VarIndex, Value)>,
    layers: VarIndex,
    rate: VarIndex,
    units: Vec<VarIndex>,
    alphas: Vec<VarIndex>,
    betas: Vec<VarIndex>,
    dropout: Option<VarIndex>,
}

impl Surrogate {
    pub fn new(g: &RoleGraph, variant: u8, arch: Arch, seed: u64) -> Result<Self, BenchError> {
        let bad = |e: metadist::DomainError| BenchError::Variant(variant, e.to_string());
        let family = |prefix: &str| -> Vec<VarIndex> { (1..=3).filter_map(|i| g.var(&format!("{prefix}{i}")).ok()).collect() };
        let adam = match g.var("o") {
            Ok(o) => Some((o, g.parse_value(o, "ADAM").map_err(bad)?)),
            Err(_) => None,
        };
        let hull = g
            .indices()
            .map(|v| match g.kind(v) {
                VariableKind::Categorical => (0.0, (g.variable(v).labels.len().max(2) - 1) as f64),
                _ => g.universal_set(v).values.numeric_hull().unwrap_or((0.0, 1.0)),
            })
            .collect();
        let mut rng = metadist::rng::stream(seed, &format!("surrogate/{variant}/{arch}"));
        let normal = Normal::new(0.0, 1.0 / LENGTH_SCALE).expect("valid normal");
        let omega = (0..FEATURES).map(|_| (0..g.len()).map(|_| normal.sample(&mut rng)).collect()).collect();
        let phase = (0..FEATURES).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        Ok(Surrogate {
            c: Constants::of(arch),
            omega,
            phase,
            hull,
            adam,
            layers: g.var("l").map_err(bad)?,
            rate: g.var("r").map_err(bad)?,
            units: family("u"),
            alphas: family("alpha"),
            betas: family("beta"),
            dropout: g.var("rho").ok(),
        })
    }

    /// Coordinates scaled to `[0, 1]` by the universal hull; EXC maps to -0.5.
    pub fn normalized(&self, x: &ExtendedPoint) -> Vec<f64> {
        x.values
            .iter()
            .zip(&self.hull)
            .map(|(v, &(lo, hi))| match v {
                Value::Exc => EXC_COORD,
                Value::Cat(c) => *c as f64 / (hi - lo).max(1.0),
                v => {
                    let t = v.as_f64().unwrap_or(0.0);
                    if hi > lo {
                        (t - lo) / (hi - lo)
                    } else {
                        0.0
                    }
                }
            })
            .collect()
    }

    pub fn score(&self, x: &ExtendedPoint) -> f64 {
        let z = self.normalized(x);
        let is_adam = self.adam.is_some_and(|(o, a)| x.get(o) == a);
        let l = x.get(self.layers).as_f64().unwrap_or(1.0);
        let r = x.get(self.rate).as_f64().unwrap_or(0.0);
        let r_star = if is_adam { 0.08 } else { 0.35 } - 0.03 * (l - 1.0);

        let mut base = self.c.peak - self.c.rate_curvature * (r - r_star).powi(2);
        let included_units: Vec<f64> = self.units.iter().filter(|u| !x.get(**u).is_exc()).map(|u| z[u.0]).collect();
        if !included_units.is_empty() {
            let mean = included_units.iter().sum::<f64>() / included_units.len() as f64;
            base += self.c.unit_gain * (mean - 0.5);
        }
        for a in &self.alphas {
            if let Some(t) = x.get(*a).as_f64() {
                base -= 8.0 * (t - 0.5).powi(2);
            }
        }
        for b in &self.betas {
            if let Some(t) = x.get(*b).as_f64() {
                base -= 8.0 * (t - 0.7).powi(2);
            }
        }
        if let Some(rho) = self.dropout {
            base -= 12.0 * (z[rho.0] - 0.3).powi(2);
        }

        let offset = if is_adam { 4.0 } else { 0.0 } + [0.0, 3.0, 2.0][(l as usize).clamp(1, 3) - 1];
        (base + offset + self.field(&z)).clamp(0.0, 100.0)
    }

    fn field(&self, z: &[f64]) -> f64 {
        let amp = SIGMA * (2.0 / FEATURES as f64).sqrt();
        self.omega
            .iter()
            .zip(&self.phase)
            .map(|(w, b)| (w.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() + b).cos())
            .sum::<f64>()
            * amp
    }

    /// Upper bound on |f(x) - f(y)| / |z(x) - z(y)| for `x`, `y` in the same
    /// subproblem, with `z` the normalized coordinates and `|.|` Euclidean.
    ///
    /// Per-coordinate bounds of the smooth part are combined in quadrature;
    /// the field adds `amp * sum |omega_m|`. Clipping cannot increase it.
    pub fn lipschitz_bound(&self) -> f64 {
        let mut sq = (2.0 * self.c.rate_curvature).powi(2);
        sq += self.units.len() as f64 * self.c.unit_gain.powi(2);
        sq += self.alphas.len() as f64 * (16.0f64 * 0.5).powi(2);
        sq += self.betas.len() as f64 * (16.0f64 * 0.7).powi(2);
        if self.dropout.is_some() {
            sq += (24.0f64 * 0.7).powi(2);
        }
        let amp = SIGMA * (2.0 / FEATURES as f64).sqrt();
        let field: f64 = self.omega.iter().map(|w| w.iter().map(|a| a * a).sum::<f64>().sqrt()).sum::<f64>() * amp;
        sq.sqrt() + field
    }
}

/// Score of a point for a variant and architecture under a noise seed.
pub fn surrogate_score(g: &RoleGraph, variant: u8, arch: Arch, x: &Point, seed: u64) -> Result<f64, BenchError> {
    let ext = g.extend(x).map_err(|e| BenchError::Variant(variant, e.to_string()))?;
    Ok(Surrogate::new(g, variant, arch, seed)?.score(&ext))
}

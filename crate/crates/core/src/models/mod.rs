//! Distance-based predictors: inverse distance weighting for scores and
//! k-nearest neighbours for binned labels, routed by approach.

mod routing;

use std::collections::BTreeMap;

use thiserror::Error;

pub use routing::{parameter_count, Approach, Routing};

use crate::distance::{self, DistanceConfig, DistanceError};
use crate::domain::{ExtendedPoint, RoleGraph};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("no training points on route `{0}`")]
    EmptyRoute(String),
    #[error("every training point is infinitely far from the query")]
    AllInfinite,
    #[error("k = {k} exceeds the {n} training points on the route")]
    TooFewPoints { k: usize, n: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("score {0} is outside [0, 100]")]
    ScoreOutOfRange(f64),
    #[error("need at least 2 bins, got {0}")]
    TooFewBins(usize),
    #[error("expected {expected} distance configs, got {got}")]
    ConfigCount { expected: usize, got: usize },
    #[error(transparent)]
    Distance(#[from] DistanceError),
}

/// Uniform bins over `[0, 100]`; the last bin is closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelBinning {
    bins: usize,
}

impl Default for LabelBinning {
    fn default() -> Self {
        LabelBinning { bins: 5 }
    }
}

impl LabelBinning {
    pub fn new(bins: usize) -> Result<Self, ModelError> {
        if bins < 2 {
            return Err(ModelError::TooFewBins(bins));
        }
        Ok(LabelBinning { bins })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }
}

pub fn bin_label(b: LabelBinning, score: f64) -> Result<u32, ModelError> {
    if !(0.0..=100.0).contains(&score) {
        return Err(ModelError::ScoreOutOfRange(score));
    }
    let k = (score * b.bins as f64 / 100.0).floor() as usize;
    Ok(k.min(b.bins - 1) as u32)
}

pub fn rmse(predictions: &[f64], targets: &[f64]) -> Result<f64, ModelError> {
    check_lengths(predictions.len(), targets.len())?;
    let sse: f64 = predictions.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sse / predictions.len() as f64).sqrt())
}

pub fn accuracy(predictions: &[u32], labels: &[u32]) -> Result<f64, ModelError> {
    check_lengths(predictions.len(), labels.len())?;
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / predictions.len() as f64)
}

fn check_lengths(a: usize, b: usize) -> Result<(), ModelError> {
    if a != b {
        return Err(ModelError::LengthMismatch(a, b));
    }
    if a == 0 {
        return Err(ModelError::Empty);
    }
    Ok(())
}

/// Shepard interpolation from precomputed distances.
///
/// Zero distances short-circuit to the mean of their targets. Weights are
/// taken relative to the nearest point so tiny distances do not overflow.
pub fn idw_from_distances<T: Scalar>(dists: &[T], targets: &[f64], q: T) -> Result<f64, ModelError> {
    if dists.is_empty() {
        return Err(ModelError::Empty);
    }
    let (mut hits, mut hit_sum) = (0usize, 0.0);
    for (d, y) in dists.iter().zip(targets) {
        if *d == T::zero() {
            hits += 1;
            hit_sum += y;
        }
    }
    if hits > 0 {
        return Ok(hit_sum / hits as f64);
    }
    let dmin = dists.iter().copied().fold(T::infinity(), T::min);
    if dmin.is_infinite() {
        return Err(ModelError::AllInfinite);
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (d, y) in dists.iter().zip(targets) {
        if d.is_finite() {
            let w = (dmin / *d).powf(q).to_f64_lossy();
            num += w * y;
            den += w;
        }
    }
    Ok(num / den)
}

/// Majority vote among the `k` nearest; see [`TrainedKnn`] for tie rules.
pub fn knn_from_distances<T: Scalar>(dists: &[T], labels: &[u32], k: usize) -> Result<u32, ModelError> {
    if k == 0 {
        return Err(ModelError::ZeroK);
    }
    if dists.len() < k {
        return Err(ModelError::TooFewPoints { k, n: dists.len() });
    }
    let mut order: Vec<usize> = (0..dists.len()).collect();
    order.sort_by(|&a, &b| dists[a].partial_cmp(&dists[b]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    let mut votes: BTreeMap<u32, (usize, T)> = BTreeMap::new();
    for &i in &order[..k] {
        let e = votes.entry(labels[i]).or_insert((0, T::zero()));
        e.0 += 1;
        e.1 = e.1 + dists[i];
    }
    let mut best: Option<(u32, usize, T)> = None;
    for (&label, &(count, sum)) in &votes {
        let better = match best {
            None => true,
            Some((_, c, s)) => count > c || (count == c && sum < s),
        };
        if better {
            best = Some((label, count, sum));
        }
    }
    Ok(best.expect("k >= 1").0)
}

/// Training points grouped by route, each route with its own config.
#[derive(Debug, Clone)]
pub struct RoutedData<T> {
    routing: Routing,
    configs: Vec<DistanceConfig<T>>,
    points: Vec<ExtendedPoint>,
    members: Vec<Vec<usize>>,
}

/// A prediction and whether it came from the fallback for an empty route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction<Y> {
    pub value: Y,
    pub fallback: bool,
}

impl<T: Scalar> RoutedData<T> {
    /// `configs` holds one entry per route; a single entry is shared by all.
    pub fn new(
        routing: Routing,
        configs: Vec<DistanceConfig<T>>,
        points: Vec<ExtendedPoint>,
    ) -> Result<Self, ModelError> {
        let configs = if configs.len() == 1 { vec![configs[0].clone(); routing.routes()] } else { configs };
        if configs.len() != routing.routes() {
            return Err(ModelError::ConfigCount { expected: routing.routes(), got: configs.len() });
        }
        let mut members = vec![Vec::new(); routing.routes()];
        for (i, p) in points.iter().enumerate() {
            if let Some(r) = routing.route_of(p) {
                members[r].push(i);
            }
        }
        Ok(RoutedData { routing, configs, points, members })
    }

    pub fn routing(&self) -> &Routing {
        &self.routing
    }

    pub fn members(&self, route: usize) -> &[usize] {
        &self.members[route]
    }

    /// Route of `x` and its distances to that route's training points, or
    /// `None` when the route is unknown or empty.
    fn neighbours(&self, g: &RoleGraph, x: &ExtendedPoint) -> Result<Option<(usize, Vec<T>)>, ModelError> {
        g.check_extended(x).map_err(DistanceError::from)?;
        let Some(r) = self.routing.route_of(x).filter(|&r| !self.members[r].is_empty()) else {
            return Ok(None);
        };
        let cfg = &self.configs[r];
        let d = self.members[r]
            .iter()
            .map(|&i| {
                let y = &self.points[i];
                match self.routing.approach() {
                    Approach::Meta => distance::meta_distance_unchecked(g, cfg, x, y),
                    Approach::Sub => distance::sub_distance(g, cfg, x, y),
                    Approach::Hybrid => distance::hybrid_distance_within(g, cfg, x, y, self.routing.key()),
                }
            })
            .collect::<Result<Vec<T>, _>>()?;
        Ok(Some((r, d)))
    }
}

#[derive(Debug, Clone)]
pub struct TrainedIdw<T> {
    data: RoutedData<T>,
    targets: Vec<f64>,
    q: T,
    mean: f64,
}

impl<T: Scalar> TrainedIdw<T> {
    pub fn fit(data: RoutedData<T>, targets: Vec<f64>, q: T) -> Result<Self, ModelError> {
        check_lengths(data.points.len(), targets.len())?;
        let mean = targets.iter().sum::<f64>() / targets.len() as f64;
        Ok(TrainedIdw { data, targets, q, mean })
    }

    /// Unknown or empty routes fall back to the global training mean.
    pub fn predict(&self, g: &RoleGraph, x: &ExtendedPoint) -> Result<Prediction<f64>, ModelError> {
        match self.data.neighbours(g, x)? {
            None => Ok(Prediction { value: self.mean, fallback: true }),
            Some((r, d)) => {
                let y: Vec<f64> = self.data.members[r].iter().map(|&i| self.targets[i]).collect();
                Ok(Prediction { value: idw_from_distances(&d, &y, self.q)?, fallback: false })
            }
        }
    }
}

/// K nearest neighbours. Distance ties at the K-th rank go to the lower
/// training index; label ties to the smaller summed distance, then the
/// smaller label.
#[derive(Debug, Clone)]
pub struct TrainedKnn<T> {
    data: RoutedData<T>,
    labels: Vec<u32>,
    k: usize,
    majority: u32,
}

impl<T: Scalar> TrainedKnn<T> {
    pub fn fit(data: RoutedData<T>, labels: Vec<u32>, k: usize) -> Result<Self, ModelError> {
        check_lengths(data.points.len(), labels.len())?;
        if k == 0 {
            return Err(ModelError::ZeroK);
        }
        let majority = most_frequent(&labels);
        Ok(TrainedKnn { data, labels, k, majority })
    }

    /// Unknown or empty routes fall back to the most frequent training label.
    pub fn predict(&self, g: &RoleGraph, x: &ExtendedPoint) -> Result<Prediction<u32>, ModelError> {
        match self.data.neighbours(g, x)? {
            None => Ok(Prediction { value: self.majority, fallback: true }),
            Some((r, d)) => {
                let y: Vec<u32> = self.data.members[r].iter().map(|&i| self.labels[i]).collect();
                Ok(Prediction { value: knn_from_distances(&d, &y, self.k)?, fallback: false })
            }
        }
    }
}

/// Most frequent label; ties go to the smaller label.
pub fn most_frequent(labels: &[u32]) -> u32 {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    counts.iter().fold((0u32, 0usize), |best, (&l, &c)| if c > best.1 { (l, c) } else { best }).0
}

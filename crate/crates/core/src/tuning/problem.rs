use crate::dataset::{Dataset, Split};
use serde::{Deserialize, Serialize};

use crate::distance::{ConfigFile, CoordTable, DistanceConfig, DistanceError};
use crate::domain::{RoleGraph, VarIndex};
use crate::models::{
    accuracy, bin_label, idw_from_distances, knn_from_distances, most_frequent, rmse, Approach, LabelBinning, Routing,
};

use super::{minimize, Dimension, ParameterSpace, SearchOptions, Transform, TuneError, TuneResult};

/// Weight box in `log10` units.
const LOG_WEIGHT: (f64, f64) = (-3.0, 3.0);
const MAX_K: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    /// Regression on the raw scores.
    Idw { q: f64 },
    /// Classification of binned scores; `K` is tuned.
    Knn { binning: LabelBinning },
}

impl ModelKind {
    pub fn is_classification(&self) -> bool {
        matches!(self, ModelKind::Knn { .. })
    }
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Weight { route: usize, var: VarIndex },
    Theta { var: VarIndex },
    K,
}

/// Decoded parameters: one distance config per route, and `K` for KNN.
#[derive(Debug, Clone, PartialEq)]
pub struct Tuned {
    pub configs: Vec<DistanceConfig<f64>>,
    pub k: Option<usize>,
}

struct RouteEval {
    table: Option<CoordTable>,
    /// Positions of this route's queries within the split.
    queries: Vec<usize>,
    /// Dataset rows of this route's training points.
    train: Vec<usize>,
}

struct SplitEval {
    routes: Vec<RouteEval>,
    /// Positions whose route has no training data.
    fallback: Vec<usize>,
    targets: Vec<f64>,
    labels: Vec<u32>,
}

/// Tuning instance: one approach and model on a dataset with a
/// train/validation(/test) split. The objective is validation RMSE, or
/// negative validation accuracy for KNN.
pub struct Problem {
    routing: Routing,
    base: DistanceConfig<f64>,
    model: ModelKind,
    space: ParameterSpace,
    slots: Vec<Slot>,
    diameters: Vec<f64>,
    targets: Vec<f64>,
    labels: Vec<u32>,
    mean: f64,
    majority: u32,
    validation: SplitEval,
    test: Option<SplitEval>,
}

impl Problem {
    pub fn new(
        g: &RoleGraph,
        data: &Dataset,
        routing: Routing,
        model: ModelKind,
        base: DistanceConfig<f64>,
    ) -> Result<Problem, TuneError> {
        let train = data.indices(Split::Train);
        let val = data.indices(Split::Validation);
        if train.is_empty() {
            return Err(TuneError::MissingSplit("train"));
        }
        if val.is_empty() {
            return Err(TuneError::MissingSplit("validation"));
        }
        let test = data.indices(Split::Test);
        let labels = match model {
            ModelKind::Knn { binning } => {
                data.targets.iter().map(|&y| bin_label(binning, y)).collect::<Result<Vec<_>, _>>()?
            }
            ModelKind::Idw { .. } => Vec::new(),
        };

        let mut members = vec![Vec::new(); routing.routes()];
        for &i in &train {
            if let Some(r) = routing.route_of(&data.points[i]) {
                members[r].push(i);
            }
        }

        let mut space = ParameterSpace::default();
        let mut slots = Vec::new();
        for (route, train_rows) in members.iter().enumerate() {
            if train_rows.is_empty() {
                continue;
            }
            for &var in routing.route_variables(route) {
                let name = match routing.approach() {
                    Approach::Meta => format!("w.{}", g.name(var)),
                    _ => format!("w[{}].{}", routing.route_label(g, route), g.name(var)),
                };
                space.dims.push(Dimension::continuous(name, LOG_WEIGHT.0, LOG_WEIGHT.1, Transform::Log10));
                slots.push(Slot::Weight { route, var });
            }
        }
        for &var in routing.theta_variables() {
            space.dims.push(Dimension::continuous(format!("theta.{}", g.name(var)), 0.0, 1.0, Transform::ThetaOffset));
            slots.push(Slot::Theta { var });
        }
        if let ModelKind::Knn { .. } = model {
            let smallest = members.iter().map(Vec::len).filter(|&n| n > 0).min().unwrap_or(1);
            space.dims.push(Dimension::integer("k", 1, MAX_K.min(smallest) as i64));
            slots.push(Slot::K);
        }

        let split_eval = |rows: &[usize]| -> SplitEval {
            let mut routes: Vec<RouteEval> =
                members.iter().map(|m| RouteEval { table: None, queries: Vec::new(), train: m.clone() }).collect();
            let mut fallback = Vec::new();
            for (pos, &i) in rows.iter().enumerate() {
                match routing.route_of(&data.points[i]).filter(|&r| !members[r].is_empty()) {
                    Some(r) => routes[r].queries.push(pos),
                    None => fallback.push(pos),
                }
            }
            for route in routes.iter_mut().filter(|r| !r.queries.is_empty()) {
                let q: Vec<_> = route.queries.iter().map(|&p| &data.points[rows[p]]).collect();
                let t: Vec<_> = route.train.iter().map(|&i| &data.points[i]).collect();
                route.table = Some(CoordTable::build(g, &base, &q, &t));
            }
            SplitEval {
                routes,
                fallback,
                targets: rows.iter().map(|&i| data.targets[i]).collect(),
                labels: if labels.is_empty() { Vec::new() } else { rows.iter().map(|&i| labels[i]).collect() },
            }
        };
        let validation = split_eval(&val);
        let test = (!test.is_empty()).then(|| split_eval(&test));

        let train_targets: Vec<f64> = data.targets.clone();
        let mean = train.iter().map(|&i| data.targets[i]).sum::<f64>() / train.len() as f64;
        let majority = if labels.is_empty() { 0 } else { most_frequent(&train.iter().map(|&i| labels[i]).collect::<Vec<_>>()) };
        let diameters = g.indices().map(|v| base.unit_diameter(g, v)).collect();
        Ok(Problem {
            routing,
            base,
            model,
            space,
            slots,
            diameters,
            targets: train_targets,
            labels,
            mean,
            majority,
            validation,
            test,
        })
    }

    pub fn routing(&self) -> &Routing {
        &self.routing
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    /// Number of tuned parameters: distance parameters plus `K` for KNN.
    pub fn parameter_count(&self) -> usize {
        self.space.len()
    }

    pub fn decode(&self, x: &[f64]) -> Tuned {
        let mut configs = vec![self.base.clone(); self.routing.routes()];
        let mut k = None;
        for (slot, &value) in self.slots.iter().zip(x) {
            match *slot {
                Slot::Weight { route, var } => configs[route].weights[var.0] = 10f64.powf(value),
                Slot::Theta { var } => {
                    let w = configs[0].weights[var.0];
                    let diam = self.diameters[var.0];
                    // A single-valued universal set has a zero bound; keep the penalty positive.
                    configs[0].theta_offsets[var.0] = if diam > 0.0 { value * w * diam } else { w * (1.0 + value) };
                }
                Slot::K => k = Some(value as usize),
            }
        }
        Tuned { configs, k }
    }

    /// Validation objective; lower is better.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let m = self.score(&self.validation, x);
        if self.model.is_classification() {
            -m
        } else {
            m
        }
    }

    /// Test RMSE, or test accuracy for KNN.
    pub fn test_metric(&self, x: &[f64]) -> Option<f64> {
        self.test.as_ref().map(|t| self.score(t, x))
    }

    /// Validation RMSE, or validation accuracy for KNN.
    pub fn validation_metric(&self, x: &[f64]) -> f64 {
        self.score(&self.validation, x)
    }

    fn score(&self, split: &SplitEval, x: &[f64]) -> f64 {
        let tuned = self.decode(x);
        let kind = self.routing.approach().distance_kind();
        let n = split.targets.len();
        let mut values = vec![self.mean; n];
        let mut classes = vec![self.majority; n];
        for (r, route) in split.routes.iter().enumerate() {
            let Some(table) = &route.table else { continue };
            let cfg = &tuned.configs[r];
            let mut d = vec![0.0; route.train.len()];
            let y: Vec<f64> = route.train.iter().map(|&i| self.targets[i]).collect();
            let ys: Vec<u32> = match self.model {
                ModelKind::Knn { .. } => route.train.iter().map(|&i| self.labels[i]).collect(),
                ModelKind::Idw { .. } => Vec::new(),
            };
            for (qi, &pos) in route.queries.iter().enumerate() {
                for (t, slot) in d.iter_mut().enumerate() {
                    *slot = table.distance(cfg, kind, qi, t);
                }
                let result = match self.model {
                    ModelKind::Idw { q } => idw_from_distances(&d, &y, q).map(|v| values[pos] = v),
                    ModelKind::Knn { .. } => knn_from_distances(&d, &ys, tuned.k.unwrap_or(1)).map(|c| classes[pos] = c),
                };
                if result.is_err() {
                    return if self.model.is_classification() { f64::NEG_INFINITY } else { f64::INFINITY };
                }
            }
        }
        let metric = match self.model {
            ModelKind::Idw { .. } => rmse(&values, &split.targets),
            ModelKind::Knn { .. } => accuracy(&classes, &split.labels),
        };
        metric.unwrap_or(f64::NAN)
    }

    /// Rows of the split served by the fallback prediction.
    pub fn fallback_rows(&self) -> (usize, usize) {
        (self.validation.fallback.len(), self.test.as_ref().map_or(0, |t| t.fallback.len()))
    }

    /// LHS then pattern search with `multiplier * parameter_count` evaluations.
    pub fn tune(&self, multiplier: usize, seed: u64, parallel: bool) -> Result<TuneResult, TuneError> {
        let budget = multiplier * self.parameter_count();
        let on_improve = |x: &[f64]| self.test_metric(x);
        let objective = |x: &[f64]| self.objective(x);
        minimize(&objective, &self.space, SearchOptions { budget, seed, parallel, on_improve: &on_improve })
    }
}

/// Tuned distance config of one route, in the config-file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteConfig {
    pub route: String,
    pub config: ConfigFile,
}

/// Everything a tuning run produced, as written by `tune --out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub approach: String,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<String>,
    pub parameters: usize,
    pub budget: usize,
    pub space: ParameterSpace,
    pub result: TuneResult,
    pub routes: Vec<RouteConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
}

impl TuneReport {
    /// Distance configs of every route, validated against `g`.
    pub fn configs(&self, g: &RoleGraph) -> Result<Vec<DistanceConfig<f64>>, DistanceError> {
        self.routes.iter().map(|r| DistanceConfig::from_file(g, &r.config)).collect()
    }
}

impl Problem {
    pub fn report(&self, g: &RoleGraph, result: &TuneResult) -> TuneReport {
        let tuned = self.decode(&result.best);
        let routes = tuned
            .configs
            .iter()
            .enumerate()
            .map(|(r, c)| RouteConfig { route: self.routing.route_label(g, r), config: c.to_file(g) })
            .collect();
        let (model, q) = match self.model {
            ModelKind::Idw { q } => ("idw", Some(q)),
            ModelKind::Knn { .. } => ("knn", None),
        };
        TuneReport {
            approach: self.routing.approach().to_string(),
            model: model.into(),
            partition: self.routing.key().map(|k| g.name(k).to_string()),
            parameters: self.parameter_count(),
            budget: result.evaluations,
            space: self.space.clone(),
            result: result.clone(),
            routes,
            k: tuned.k,
            q,
        }
    }
}

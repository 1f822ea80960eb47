//! Test RMSE as training data grows, starting from one point per
//! subproblem. Distances use the unit config; IDW sums are accumulated as
//! points arrive, so each step costs one pass over the test set.

use metadist::distance::CoordTable;
use metadist::rng::derive_seed;
use metadist::{Approach, DistanceConfig, RoleGraph, Routing, Split};
use rand::seq::SliceRandom;

use crate::instance::sample_dataset;
use crate::variants::{build_variant, Arch, Size, VariantSpec};
use crate::BenchError;

#[derive(Debug, Clone, PartialEq)]
pub struct CurveConfig {
    pub variant: u8,
    pub size: Size,
    pub arch: Arch,
    pub approaches: Vec<Approach>,
    pub seeds: usize,
    pub seed: u64,
    pub q: f64,
}

impl Default for CurveConfig {
    fn default() -> Self {
        CurveConfig {
            variant: 3,
            size: Size::L,
            arch: Arch::Mlp,
            approaches: Approach::ALL.to_vec(),
            seeds: 20,
            seed: 0,
            q: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub approach: Approach,
    pub n_train: usize,
    pub mean: f64,
    pub std: f64,
}

/// Running IDW sums for one query.
#[derive(Debug, Clone, Copy, Default)]
struct Acc {
    weight: f64,
    weighted: f64,
    hits: usize,
    hit_sum: f64,
}

impl Acc {
    fn add(&mut self, d: f64, y: f64, q: f64) {
        if d == 0.0 {
            self.hits += 1;
            self.hit_sum += y;
        } else if d.is_finite() {
            let w = d.powf(-q);
            self.weight += w;
            self.weighted += w * y;
        }
    }

    fn value(&self) -> Option<f64> {
        if self.hits > 0 {
            Some(self.hit_sum / self.hits as f64)
        } else if self.weight > 0.0 {
            Some(self.weighted / self.weight)
        } else {
            None
        }
    }
}

/// Mean and standard deviation of test RMSE over `seeds` replicates, for
/// every approach and every training-set size.
pub fn aggregate_curve(cfg: &CurveConfig) -> Result<Vec<CurvePoint>, BenchError> {
    if cfg.seeds == 0 || cfg.approaches.is_empty() {
        return Err(BenchError::Parse("need at least one seed and one approach".into()));
    }
    let g = build_variant(cfg.variant)?;
    let sigs = g.enumerate_signatures()?;
    let spec = VariantSpec { variant: cfg.variant, size: cfg.size, arch: cfg.arch };
    let unit = DistanceConfig::unit(&g);
    // runs[approach][replicate][n - start]
    let mut runs = vec![Vec::new(); cfg.approaches.len()];
    let mut start = 0;
    for r in 0..cfg.seeds {
        let seed = derive_seed(cfg.seed, &format!("curve/{spec}/{r}"));
        let inst = sample_dataset(&g, &sigs, spec, seed)?;
        let data = &inst.data;
        let mut train = data.indices(Split::Train);
        let test = data.indices(Split::Test);
        train.shuffle(&mut metadist::rng::stream(seed, "curve-order"));
        // One point of every subproblem goes first, in subproblem order.
        let mut seeds_first = Vec::new();
        for s in 0..sigs.len() {
            if let Some(pos) = train.iter().position(|&i| inst.signatures[i] == s) {
                seeds_first.push(train.remove(pos));
            }
        }
        start = seeds_first.len();
        seeds_first.extend(train);
        let train = seeds_first;

        let queries: Vec<_> = test.iter().map(|&i| &data.points[i]).collect();
        let points: Vec<_> = train.iter().map(|&i| &data.points[i]).collect();
        let table = CoordTable::build(&g, &unit, &queries, &points);
        for (a, &approach) in cfg.approaches.iter().enumerate() {
            runs[a].push(curve_run(&g, &unit, &table, approach, data, &train, &test, start, cfg.q)?);
        }
    }
    let mut out = Vec::new();
    for (a, &approach) in cfg.approaches.iter().enumerate() {
        let len = runs[a].iter().map(Vec::len).min().unwrap_or(0);
        for step in 0..len {
            let xs: Vec<f64> = runs[a].iter().map(|run| run[step]).collect();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            out.push(CurvePoint { approach, n_train: start + step, mean, std: var.sqrt() });
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn curve_run(
    g: &RoleGraph,
    unit: &DistanceConfig,
    table: &CoordTable,
    approach: Approach,
    data: &metadist::Dataset,
    train: &[usize],
    test: &[usize],
    start: usize,
    q: f64,
) -> Result<Vec<f64>, BenchError> {
    let key = if approach == Approach::Hybrid { Routing::default_key(g) } else { None };
    let routing = Routing::new(g, approach, key)?;
    let kind = approach.distance_kind();
    let route = |i: usize| routing.route_of(&data.points[i]);
    let test_routes: Vec<_> = test.iter().map(|&i| route(i)).collect();
    let mut acc = vec![Acc::default(); test.len()];
    let mut sum = 0.0;
    let mut rmse = Vec::new();
    for (t, &i) in train.iter().enumerate() {
        let y = data.targets[i];
        sum += y;
        let r = route(i);
        for (qi, a) in acc.iter_mut().enumerate() {
            if r.is_some() && test_routes[qi] == r {
                a.add(table.distance(unit, kind, qi, t), y, q);
            }
        }
        if t + 1 >= start {
            let mean = sum / (t + 1) as f64;
            let pred: Vec<f64> = acc.iter().map(|a| a.value().unwrap_or(mean)).collect();
            let targets: Vec<f64> = test.iter().map(|&j| data.targets[j]).collect();
            rmse.push(metadist::models::rmse(&pred, &targets)?);
        }
    }
    Ok(rmse)
}

/// `variant,size,arch,approach,n_train,mean,std` rows.
pub fn curve_csv(cfg: &CurveConfig, points: &[CurvePoint]) -> Result<String, BenchError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["variant", "size", "arch", "approach", "n_train", "mean_test_rmse", "std_test_rmse"])?;
    for p in points {
        w.write_record([
            cfg.variant.to_string(),
            cfg.size.to_string(),
            cfg.arch.to_string(),
            p.approach.to_string(),
            p.n_train.to_string(),
            metadist::domain::format_real(p.mean),
            metadist::domain::format_real(p.std),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| BenchError::Parse(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

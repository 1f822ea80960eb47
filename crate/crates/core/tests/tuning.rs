use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use metadist::models::{Approach, LabelBinning, Routing};
use metadist::tuning::{
    lhs_sample, lhs_share, minimize, pattern_search, Dimension, ModelKind, ParameterSpace, Problem, SearchOptions,
    Transform, TuneError, TuneReport,
};
use metadist::{Dataset, DistanceConfig, RoleGraph, Split};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn load(name: &str) -> RoleGraph {
    RoleGraph::load(format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn box_space(n: usize, lo: f64, hi: f64) -> ParameterSpace {
    ParameterSpace { dims: (0..n).map(|i| Dimension::continuous(format!("x{i}"), lo, hi, Transform::Identity)).collect() }
}

fn quadratic(x: &[f64]) -> f64 {
    x.iter().enumerate().map(|(i, v)| (v - 0.1 * (i as f64 + 1.0)).powi(2)).sum()
}

fn no_test(_: &[f64]) -> Option<f64> {
    None
}

#[test]
fn pattern_search_solves_a_quadratic() {
    let space = box_space(3, -2.0, 2.0);
    let r = pattern_search(&quadratic, &space, &[1.5, -1.5, 1.0], 500).unwrap();
    assert!(r.best_objective < 1e-4, "{}", r.best_objective);
    assert!(r.evaluations <= 500);
}

#[test]
fn minimize_solves_a_quadratic() {
    let space = box_space(3, -2.0, 2.0);
    let r = minimize(&quadratic, &space, SearchOptions { budget: 500, seed: 4, parallel: false, on_improve: &no_test })
        .unwrap();
    assert!(r.best_objective < 1e-4, "{}", r.best_objective);
    assert_eq!(r.evaluations, 500);
    assert_eq!(r.lhs_evaluations, lhs_share(500));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn budget_is_spent_exactly(budget in 1usize..400, dims in 1usize..6, seed in any::<u64>()) {
        let space = box_space(dims, 0.0, 1.0);
        let calls = AtomicUsize::new(0);
        let f = |x: &[f64]| {
            calls.fetch_add(1, Ordering::Relaxed);
            // Flat regions make the mesh collapse early.
            (x[0] * 4.0).floor()
        };
        let r = minimize(&f, &space, SearchOptions { budget, seed, parallel: false, on_improve: &no_test }).unwrap();
        prop_assert_eq!(calls.load(Ordering::Relaxed), budget);
        prop_assert_eq!(r.evaluations, budget);
    }

    #[test]
    fn lhs_fills_every_stratum(count in 1usize..60, dims in 1usize..5, seed in any::<u64>()) {
        let space = box_space(dims, -3.0, 5.0);
        let xs = lhs_sample(&space, count, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(xs.len(), count);
        for d in 0..dims {
            let mut strata: Vec<usize> =
                xs.iter().map(|x| (((x[d] + 3.0) / 8.0 * count as f64).floor() as usize).min(count - 1)).collect();
            strata.sort();
            prop_assert_eq!(strata, (0..count).collect::<Vec<_>>());
        }
    }

    #[test]
    fn integer_lhs_stays_on_the_grid(count in 1usize..40, seed in any::<u64>()) {
        let space = ParameterSpace { dims: vec![Dimension::integer("k", 1, 7)] };
        for x in lhs_sample(&space, count, &mut ChaCha8Rng::seed_from_u64(seed)) {
            prop_assert!(x[0].fract() == 0.0 && (1.0..=7.0).contains(&x[0]));
        }
    }
}

#[test]
fn evaluated_points_are_feasible_and_trace_improves() {
    let space = ParameterSpace {
        dims: vec![
            Dimension::continuous("a", -1.0, 1.0, Transform::Identity),
            Dimension::integer("k", 1, 9),
            Dimension::continuous("b", 0.0, 1.0, Transform::ThetaOffset),
        ],
    };
    let seen = Mutex::new(Vec::new());
    let f = |x: &[f64]| {
        seen.lock().unwrap().push(x.to_vec());
        (x[0] - 0.3).abs() + (x[1] - 4.0).abs() + x[2]
    };
    let r = minimize(&f, &space, SearchOptions { budget: 300, seed: 9, parallel: true, on_improve: &no_test }).unwrap();
    let seen = seen.into_inner().unwrap();
    assert_eq!(seen.len(), 300);
    assert!(seen.iter().all(|x| space.contains(x)));
    assert!(seen.iter().all(|x| x[1].fract() == 0.0));
    for w in r.trace.windows(2) {
        assert!(w[1].objective < w[0].objective);
        assert!(w[1].k > w[0].k);
    }
    assert_eq!(r.trace.last().unwrap().objective, r.best_objective);
    assert_eq!(r.best[1], 4.0);
}

#[test]
fn same_seed_same_result() {
    let space = box_space(4, -1.0, 1.0);
    let run = |seed, parallel| {
        minimize(&quadratic, &space, SearchOptions { budget: 200, seed, parallel, on_improve: &no_test }).unwrap()
    };
    assert_eq!(run(3, false), run(3, true));
    assert_ne!(run(3, false).best, run(4, false).best);
}

#[test]
fn bad_inputs_are_rejected() {
    let space = box_space(2, 0.0, 1.0);
    assert_eq!(pattern_search(&quadratic, &space, &[0.5], 10), Err(TuneError::Dimension { expected: 2, got: 1 }));
    assert_eq!(pattern_search(&quadratic, &space, &[0.5, 2.0], 10), Err(TuneError::Infeasible));
    assert_eq!(
        minimize(&quadratic, &space, SearchOptions { budget: 0, seed: 0, parallel: false, on_improve: &no_test }),
        Err(TuneError::ZeroBudget)
    );
}

/// Random points with a target that depends mostly on `alpha`/`beta`.
fn dataset(g: &RoleGraph, n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::new();
    let mut targets = Vec::new();
    let mut splits = Vec::new();
    for i in 0..n {
        let x = g.sample_extended(&mut rng).unwrap();
        let rate = ["alpha", "beta"]
            .iter()
            .filter_map(|v| x.get(g.var(v).unwrap()).as_f64())
            .sum::<f64>();
        targets.push(10.0 * rate + rng.random_range(0.0..0.5));
        points.push(x);
        splits.push(match i % 4 {
            0 | 1 => Split::Train,
            2 => Split::Validation,
            _ => Split::Test,
        });
    }
    Dataset { points, targets, splits: Some(splits) }
}

#[test]
fn problem_tunes_with_the_exact_budget() {
    let g = load("mlp.json");
    let data = dataset(&g, 120, 1);
    for approach in Approach::ALL {
        let key = if approach == Approach::Hybrid { Routing::default_key(&g) } else { None };
        let routing = Routing::new(&g, approach, key).unwrap();
        let p = Problem::new(&g, &data, routing, ModelKind::Idw { q: 2.0 }, DistanceConfig::unit(&g)).unwrap();
        let r = p.tune(10, 5, false).unwrap();
        assert_eq!(r.evaluations, 10 * p.parameter_count());
        assert!(r.best_objective.is_finite());
        assert!(r.trace.iter().all(|t| t.test.is_some()));
        assert_eq!(p.validation_metric(&r.best), r.best_objective);

        let report = p.report(&g, &r);
        assert_eq!(report.parameters, p.parameter_count());
        assert_eq!(report.budget, r.evaluations);
        let json = serde_json::to_string(&report).unwrap();
        let back: TuneReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
        assert_eq!(back.configs(&g).unwrap(), p.decode(&r.best).configs);
    }
}

#[test]
fn tuning_beats_the_unit_config_on_validation() {
    let g = load("mlp.json");
    let data = dataset(&g, 160, 2);
    let routing = Routing::new(&g, Approach::Meta, None).unwrap();
    let p = Problem::new(&g, &data, routing, ModelKind::Idw { q: 2.0 }, DistanceConfig::unit(&g)).unwrap();
    let r = p.tune(20, 0, false).unwrap();
    // log10 weight 0 and theta offset 0 are the unit config.
    let unit: Vec<f64> = p.space().dims.iter().map(|d| if d.name.starts_with("theta") { 0.0 } else { 0.0f64.clamp(d.lo, d.hi) }).collect();
    assert!(r.best_objective <= p.objective(&unit));
}

#[test]
fn single_validation_row_still_tunes() {
    let g = load("mlp.json");
    let mut data = dataset(&g, 40, 3);
    let splits = data.splits.as_mut().unwrap();
    for s in splits.iter_mut() {
        if *s == Split::Validation {
            *s = Split::Test;
        }
    }
    splits[0] = Split::Validation;
    let routing = Routing::new(&g, Approach::Meta, None).unwrap();
    let p = Problem::new(&g, &data, routing, ModelKind::Idw { q: 2.0 }, DistanceConfig::unit(&g)).unwrap();
    let r = p.tune(5, 1, false).unwrap();
    assert_eq!(r.evaluations, 5 * p.parameter_count());
    assert!(r.best_objective >= 0.0);
}

#[test]
fn knn_problem_maximizes_accuracy() {
    let g = load("mlp.json");
    let data = dataset(&g, 120, 4);
    let routing = Routing::new(&g, Approach::Sub, None).unwrap();
    let binning = LabelBinning::new(5).unwrap();
    let p = Problem::new(&g, &data, routing, ModelKind::Knn { binning }, DistanceConfig::unit(&g)).unwrap();
    let k = p.space().dims.last().unwrap();
    assert!(k.integer && k.lo == 1.0);
    let r = p.tune(5, 2, false).unwrap();
    assert_eq!(r.best_objective, -p.validation_metric(&r.best));
    assert!((0.0..=1.0).contains(&p.validation_metric(&r.best)));
    assert!(p.report(&g, &r).k.is_some());
}

#[test]
fn missing_splits_are_reported() {
    let g = load("mlp.json");
    let mut data = dataset(&g, 20, 5);
    data.splits = Some(vec![Split::Train; 20]);
    let routing = Routing::new(&g, Approach::Meta, None).unwrap();
    let err = Problem::new(&g, &data, routing, ModelKind::Idw { q: 2.0 }, DistanceConfig::unit(&g)).err().unwrap();
    assert_eq!(err, TuneError::MissingSplit("validation"));
}

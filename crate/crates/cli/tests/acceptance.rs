//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//! Runs without the libtest harness so the lines always reach the output.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use metadist::distance::{hybrid_distance_within, inc_exc_distance, meta_distance, theta, theta_lower_bound, Order};
use metadist::models::parameter_count;
use metadist::tuning::{lhs_sample, lhs_share, minimize, pattern_search, Dimension, ParameterSpace, SearchOptions, Transform};
use metadist::{Approach, DistanceConfig, RoleGraph, Routing, Value, ValueSet};
use metadist_bench::{
    build_variant, run_benchmark, sample_dataset, sign_test, subproblem_sizes, Arch, BenchConfig, Size, VariantSpec,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Check = Box<dyn Fn() -> Outcome>;
/// (optimizer, layers, points at VS, S, M, L)
type Row = (Option<&'static str>, i64, [usize; 4]);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture(name: &str) -> RoleGraph {
    RoleGraph::load(root().join("crates/core/tests/fixtures").join(name)).unwrap()
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn metric_axioms() -> Outcome {
    let start = Instant::now();
    let orders = [Order::Finite(1.0), Order::euclidean(), Order::Infinity];
    let mut checked = 0usize;
    for v in 1..=5u8 {
        let g = build_variant(v).map_err(err)?;
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + v as u64);
        let triples: Vec<_> = (0..10_000)
            .map(|_| (0..3).map(|_| g.sample_extended(&mut rng).unwrap()).collect::<Vec<_>>())
            .collect();
        for p in orders {
            let cfg = DistanceConfig::unit(&g).with_p(p).map_err(err)?;
            for var in g.indices().filter(|&x| g.universal_set(x).excludable) {
                ensure!(theta(&g, &cfg, var).map_err(err)? == theta_lower_bound(&g, &cfg, var).map_err(err)?, "theta above bound");
            }
            let d = |a, b| meta_distance(&g, &cfg, a, b).unwrap();
            for t in &triples {
                let (x, y, z) = (&t[0], &t[1], &t[2]);
                let (xy, yz, xz) = (d(x, y), d(y, z), d(x, z));
                ensure!(xy == d(y, x), "variant {v} p={p:?}: asymmetric");
                ensure!(d(x, x) == 0.0, "variant {v}: d(x, x) != 0");
                ensure!(x == y || xy > 0.0, "variant {v}: distinct points at distance 0");
                ensure!(xz <= xy + yz + 1e-12, "variant {v} p={p:?}: triangle violated by {}", xz - xy - yz);
                checked += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 30.0, "took {secs:.1} s");
    Ok(format!("{checked} triples over 5 variants and p in {{1, 2, inf}}, 0 violations, {secs:.1} s"))
}

fn bijection() -> Outcome {
    let mut n = 0;
    for v in 1..=5u8 {
        let g = build_variant(v).map_err(err)?;
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + v as u64);
        for _ in 0..10_000 {
            // A random point of the original domain, and a random extended point.
            let x = g.project(&g.sample_extended(&mut rng).unwrap()).map_err(err)?;
            ensure!(g.project(&g.extend(&x).map_err(err)?).map_err(err)? == x, "variant {v}: project(extend(x)) != x");
            let xe = g.sample_extended(&mut rng).unwrap();
            ensure!(g.extend(&g.project(&xe).map_err(err)?).map_err(err)? == xe, "variant {v}: extend(project(x)) != x");
            n += 2;
        }
    }
    Ok(format!("{n} round trips, 0 failures"))
}

fn counts_and_sizes() -> Outcome {
    let meta = [7, 10, 18, 20, 21];
    let sub = [9, 18, 22, 29, 34];
    let asgd = Some("ASGD");
    let adam = Some("ADAM");
    let rows: [&[Row]; 5] = [
        &[(None, 1, [20, 30, 40, 50]), (None, 2, [30, 45, 60, 75]), (None, 3, [40, 60, 80, 100])],
        &[(None, 1, [50, 75, 100, 125]), (None, 2, [60, 90, 120, 150]), (None, 3, [70, 105, 140, 175])],
        &[(asgd, 1, [50, 75, 100, 125]), (asgd, 2, [60, 90, 120, 150]), (adam, 1, [50, 75, 100, 125]), (adam, 2, [60, 90, 120, 150])],
        &[
            (asgd, 1, [50, 75, 100, 125]),
            (asgd, 2, [60, 90, 120, 150]),
            (adam, 1, [50, 75, 100, 125]),
            (adam, 2, [60, 90, 120, 150]),
            (adam, 3, [70, 105, 140, 175]),
        ],
        &[
            (asgd, 1, [60, 90, 120, 150]),
            (asgd, 2, [70, 105, 140, 175]),
            (adam, 1, [60, 90, 120, 150]),
            (adam, 2, [70, 105, 140, 175]),
            (adam, 3, [80, 120, 160, 200]),
        ],
    ];
    let totals = [[90, 135, 180, 225], [180, 270, 360, 450], [220, 330, 440, 550], [290, 435, 580, 725], [340, 510, 680, 850]];
    let mut entries = 0;
    for v in 1..=5u8 {
        let i = v as usize - 1;
        let g = build_variant(v).map_err(err)?;
        let sigs = g.enumerate_signatures().map_err(err)?;
        let pm = parameter_count(&g, Approach::Meta, None).map_err(err)?;
        let ps = parameter_count(&g, Approach::Sub, None).map_err(err)?;
        ensure!(pm == meta[i] && ps == sub[i], "variant {v}: parameters meta {pm} sub {ps}");
        entries += 2;
        for (s, size) in Size::ALL.into_iter().enumerate() {
            let got = subproblem_sizes(v, size).map_err(err)?;
            let want: Vec<_> = rows[i].iter().map(|&(o, l, n)| (o, l, n[s])).collect();
            ensure!(got == want, "variant {v} {size}: subproblems {got:?}");
            let inst = sample_dataset(&g, &sigs, VariantSpec { variant: v, size, arch: Arch::Mlp }, 7).map_err(err)?;
            let sum: usize = want.iter().map(|r| r.2).sum();
            ensure!(inst.data.len() == totals[i][s] && sum == totals[i][s], "variant {v} {size}: total {}", inst.data.len());
            // Each subproblem gets exactly its row count.
            let o = g.var("o").ok();
            let l = g.var("l").map_err(err)?;
            for &(opt, layers, n) in rows[i] {
                let count = inst
                    .data
                    .points
                    .iter()
                    .filter(|x| {
                        o.is_none_or(|o| Some(g.format_value(o, x.get(o)).as_str()) == opt)
                            && x.get(l).as_f64() == Some(layers as f64)
                    })
                    .count();
                ensure!(count == n[s], "variant {v} {size} ({opt:?}, {layers}): {count} points");
                entries += 1;
            }
            entries += 1;
        }
    }
    Ok(format!("{entries} entries match (parameter counts, subproblem sizes, totals = sum of subproblems)"))
}

fn worked_example() -> Outcome {
    let g = fixture("mlp.json");
    let name = |n: &str| g.var(n).unwrap();
    // The two extended points.
    let x = g.point_from_text([("r", "0.1"), ("o", "ADAM"), ("l", "1"), ("u1", "100"), ("beta", "0.5")]).map_err(err)?;
    let xe = g.extend(&x).map_err(err)?;
    let want = [("o", "ADAM"), ("l", "1"), ("alpha", "EXC"), ("u1", "100"), ("u2", "EXC"), ("beta", "0.5"), ("r", "0.1")];
    for (n, s) in want {
        ensure!(xe.get(name(n)) == g.parse_value(name(n), s).map_err(err)?, "first point, {n}");
    }
    let y = g.point_from_text([("r", "0.01"), ("o", "ASGD"), ("l", "0"), ("alpha", "0.3")]).map_err(err)?;
    let ye = g.extend(&y).map_err(err)?;
    let want = [("o", "ASGD"), ("l", "0"), ("alpha", "0.3"), ("u1", "EXC"), ("u2", "EXC"), ("beta", "EXC"), ("r", "0.01")];
    for (n, s) in want {
        ensure!(ye.get(name(n)) == g.parse_value(name(n), s).map_err(err)?, "second point, {n}");
    }

    // Restricted sets of the units: U_o when i <= l, EXC otherwise.
    let units = |o: &str| if o == "ASGD" { ValueSet::IntRange { lo: 10, hi: 200 } } else { ValueSet::IntRange { lo: 25, hi: 300 } };
    let mut cells = 0;
    for (o, max_l) in [("ASGD", 1), ("ADAM", 2)] {
        for l in 0..=max_l {
            for i in 1..=2 {
                let mut parents = BTreeMap::new();
                parents.insert(name("o"), g.parse_value(name("o"), o).map_err(err)?);
                parents.insert(name("l"), Value::Int(l));
                let got = g.restricted_set(name(&format!("u{i}")), &parents).map_err(err)?;
                let want = if i <= l { units(o) } else { ValueSet::Exc };
                ensure!(got == want, "restricted set of u{i} at o={o}, l={l}: {got:?}");
                cells += 1;
            }
        }
    }

    let cfg = DistanceConfig::unit(&g);
    let a = name("alpha");
    let d = |p, q| inc_exc_distance(&g, &cfg, a, p, q).unwrap();
    ensure!((d(Value::Real(0.9), Value::Real(0.1)) - 0.8).abs() < 1e-15, "both included");
    ensure!(d(Value::Exc, Value::Exc) == 0.0, "both excluded");
    ensure!(theta_lower_bound(&g, &cfg, a).map_err(err)? == 0.5, "theta bound");
    ensure!(d(Value::Real(0.9), Value::Exc) == 0.5 && d(Value::Exc, Value::Real(0.2)) == 0.5, "one excluded");

    let dropout = fixture("mlp_dropout.json");
    let rho = dropout.universal_set(dropout.var("rho").map_err(err)?);
    ensure!(rho.values.numeric_hull() == Some((0.0, 0.5)) && !rho.excludable, "universal set of rho: {rho:?}");
    let v5 = build_variant(5).map_err(err)?;
    ensure!(v5.universal_set(v5.var("rho").map_err(err)?).values.numeric_hull() == Some((0.0, 0.5)), "variant 5 rho");
    Ok(format!("2 extended points, {cells} restricted sets, distances 0.8 / 0 / 0.5, rho in [0, 0.5]"))
}

fn witness() -> Outcome {
    let g = build_variant(3).map_err(err)?;
    let cells = |o: &str, rate: &str| {
        let fam = if o == "ASGD" { "alpha" } else { "beta" };
        let mut c = vec![("r", "0.05".to_string()), ("o", o.to_string()), ("l", "1".to_string()), ("u1", "64".to_string())];
        for i in 1..=3 {
            c.push((["alpha1", "alpha2", "alpha3", "beta1", "beta2", "beta3"][(fam == "beta") as usize * 3 + i - 1], rate.into()));
        }
        c
    };
    let point = |o: &str, rate: &str| {
        let c = cells(o, rate);
        g.extend(&g.point_from_text(c.iter().map(|(k, v)| (*k, v.as_str()))).unwrap()).unwrap()
    };
    let x = point("ASGD", "0.2");
    let y = point("ADAM", "0.7");
    ensure!(x != y, "points coincide");
    let cfg = DistanceConfig::unit(&g);
    let key = Routing::default_key(&g);
    ensure!(key == g.var("o").ok(), "partition key is not the optimizer");
    let h = hybrid_distance_within(&g, &cfg, &x, &y, key).map_err(err)?;
    let m = meta_distance(&g, &cfg, &x, &y).map_err(err)?;
    ensure!(h == 0.0 && m > 0.0, "hybrid {h}, meta {m}");
    Ok(format!("ASGD/alpha vs ADAM/beta, same r, l, u1: hybrid 0, meta {m:.4}"))
}

fn aggregation_benefit() -> Outcome {
    let start = Instant::now();
    let cfg = BenchConfig {
        variants: vec![3, 4, 5],
        sizes: vec![Size::VS],
        archs: vec![Arch::Mlp],
        seeds: 20,
        budget_mult: 50,
        approaches: vec![Approach::Sub, Approach::Meta],
        ..BenchConfig::default()
    };
    let out = run_benchmark(&cfg).map_err(err)?;
    let mut detail = Vec::new();
    let (mut meta_all, mut sub_all) = (Vec::new(), Vec::new());
    for v in [3u8, 4, 5] {
        let pick = |a: Approach| -> Vec<f64> {
            out.results.iter().filter(|r| r.spec.variant == v && r.approach == a).map(|r| r.test.unwrap()).collect()
        };
        let (meta, sub) = (pick(Approach::Meta), pick(Approach::Sub));
        ensure!(meta.len() == 20 && sub.len() == 20, "variant {v}: missing runs");
        let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
        let (mm, ms) = (mean(&meta), mean(&sub));
        ensure!(mm <= ms, "variant {v}: mean test RMSE meta {mm:.3} > sub {ms:.3}");
        let t = sign_test(&meta, &sub);
        detail.push(format!("v{v} {mm:.2}<={ms:.2} ({}/{})", t.wins, t.wins + t.losses));
        meta_all.extend(meta);
        sub_all.extend(sub);
    }
    let t = sign_test(&meta_all, &sub_all);
    ensure!(t.p_value < 0.05, "pooled sign test p = {:.4}", t.p_value);
    Ok(format!(
        "{}; pooled sign test {}/{} p={:.2e}; {:.0} s",
        detail.join(", "),
        t.wins,
        t.wins + t.losses,
        t.p_value,
        start.elapsed().as_secs_f64()
    ))
}

fn metadist(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_metadist")).args(args).output().map_err(err)?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("metadist {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()))
    }
}

const SMALL_RUN: [&str; 14] = [
    "bench", "run", "--variants", "1,3", "--sizes", "VS,S", "--arch", "MLP", "--seeds", "3", "--budget-mult", "10", "--seed", "11",
];

fn profiles(dir: &Path) -> Outcome {
    let start = Instant::now();
    let run = dir.join("run");
    let mut args = SMALL_RUN.to_vec();
    args.extend(["--out", run.to_str().unwrap()]);
    metadist(&args)?;
    let mut lines = Vec::new();
    for metric in ["validation", "test"] {
        let path = dir.join(format!("profile_{metric}.csv"));
        metadist(&["bench", "profile", "--in", run.to_str().unwrap(), "--out", path.to_str().unwrap(), "--metric", metric])?;
        let text = std::fs::read_to_string(&path).map_err(err)?;
        let mut curves: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
        for row in text.lines().skip(1) {
            let c: Vec<&str> = row.split(',').collect();
            curves.entry(c[1].to_string()).or_default().push((c[0].parse().map_err(err)?, c[2].parse().map_err(err)?));
        }
        let names: Vec<_> = curves.keys().cloned().collect();
        ensure!(names == ["hybrid", "meta", "sub"], "{metric}: approaches {names:?}");
        for (a, pts) in &curves {
            ensure!(pts.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 >= w[0].1), "{metric}/{a}: not monotone");
            ensure!(pts.iter().all(|p| (0.0..=1.0).contains(&p.1)), "{metric}/{a}: fraction outside [0, 1]");
        }
        lines.push(format!("{metric}: {} points x 3 approaches", curves["meta"].len()));
    }
    Ok(format!("{}, {:.0} s", lines.join(", "), start.elapsed().as_secs_f64()))
}

fn tuner_contract() -> Outcome {
    let space = ParameterSpace {
        dims: (0..4).map(|i| Dimension::continuous(format!("x{i}"), -5.0, 5.0, Transform::Identity)).collect(),
    };
    let opt = [1.3, -2.1, 0.4, 3.7];
    let calls = std::sync::atomic::AtomicUsize::new(0);
    let f = |x: &[f64]| {
        calls.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        x.iter().zip(&opt).enumerate().map(|(i, (a, b))| (i as f64 + 1.0) * (a - b).powi(2)).sum::<f64>()
    };
    let gps = pattern_search(&f, &space, &[-4.0, 4.0, -4.0, -4.0], 500).map_err(err)?;
    ensure!(gps.best_objective <= 1e-4, "pattern search reached {}", gps.best_objective);
    let gps_calls = calls.swap(0, std::sync::atomic::Ordering::Relaxed);
    ensure!(gps_calls == gps.evaluations && gps.evaluations <= 500, "pattern search calls {gps_calls}");

    let none = |_: &[f64]| None;
    let full = minimize(&f, &space, SearchOptions { budget: 500, seed: 1, parallel: false, on_improve: &none }).map_err(err)?;
    ensure!(full.best_objective <= 1e-4, "LHS + search reached {}", full.best_objective);
    ensure!(calls.load(std::sync::atomic::Ordering::Relaxed) == 500 && full.evaluations == 500, "budget not exact");
    for budget in [1, 7, 33, 100, 257] {
        calls.store(0, std::sync::atomic::Ordering::Relaxed);
        let flat = |x: &[f64]| {
            calls.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            (x[0] > 0.0) as u8 as f64
        };
        minimize(&flat, &space, SearchOptions { budget, seed: 3, parallel: false, on_improve: &none }).map_err(err)?;
        ensure!(calls.load(std::sync::atomic::Ordering::Relaxed) == budget, "budget {budget} not exact");
    }
    ensure!(lhs_share(700) == 231, "LHS share");

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for count in [1usize, 10, 231] {
        let xs = lhs_sample(&space, count, &mut rng);
        for d in 0..space.len() {
            let mut strata: Vec<usize> =
                xs.iter().map(|x| (((x[d] + 5.0) / 10.0 * count as f64).floor() as usize).min(count - 1)).collect();
            strata.sort_unstable();
            ensure!(strata == (0..count).collect::<Vec<_>>(), "LHS strata in dimension {d} for {count} samples");
        }
    }
    Ok(format!(
        "GPS {:.1e} after {} evals, LHS+GPS {:.1e} in 500; budgets exact; strata filled",
        gps.best_objective, gps.evaluations, full.best_objective
    ))
}

fn files_under(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism(dir: &Path) -> Outcome {
    let mut trees = Vec::new();
    for (name, jobs) in [("a", "1"), ("b", "1"), ("c", "2")] {
        let out = dir.join(name);
        let mut args = SMALL_RUN.to_vec();
        args.extend(["--jobs", jobs, "--out", out.to_str().unwrap()]);
        metadist(&args)?;
        trees.push(files_under(&out));
    }
    ensure!(trees[0].len() > 10, "only {} files written", trees[0].len());
    for (i, t) in trees.iter().enumerate().skip(1) {
        ensure!(t.keys().eq(trees[0].keys()), "run {i}: different file set");
        for (path, bytes) in t {
            ensure!(*bytes == trees[0][path], "run {i}: {} differs", path.display());
        }
    }
    Ok(format!("{} files byte-identical across two runs (and a third with --jobs 2)", trees[0].len()))
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let d = dir.path().to_path_buf();
    let criteria: Vec<(&str, Check)> = vec![
        ("1 metric axioms", Box::new(metric_axioms)),
        ("2 extend/project bijection", Box::new(bijection)),
        ("3 parameter counts and dataset sizes", Box::new(counts_and_sizes)),
        ("4 worked example", Box::new(worked_example)),
        ("5 pseudo-metric witness", Box::new(witness)),
        ("6a aggregation benefit on the surrogate", Box::new(aggregation_benefit)),
        ("6b data profiles", Box::new({
            let d = d.clone();
            move || profiles(&d.join("profiles"))
        })),
        ("7 tuner contract", Box::new(tuner_contract)),
        ("8 determinism of bench run", Box::new({
            let d = d.clone();
            move || determinism(&d.join("determinism"))
        })),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (name, check) in &criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(msg) => println!("criterion {name}: PASS ({msg})"),
            Err(msg) => {
                failed += 1;
                println!("criterion {name}: FAIL ({msg})");
            }
        }
    }
    println!("acceptance: {} of {} passed in {:.0} s", criteria.len() - failed, criteria.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}

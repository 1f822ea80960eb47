//! Benchmark runner: tunes every approach on every instance and writes the
//! result tables, traces, tuned configs and data profiles.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use metadist::domain::format_real;
use metadist::models::LabelBinning;
use metadist::rng::derive_seed;
use metadist::tuning::{ModelKind, Problem, TuneReport};
use metadist::{Approach, DistanceConfig, RoleGraph, Routing, Signature};
use rayon::prelude::*;

use crate::instance::{sample_dataset, Instance};
use crate::profile::{data_profile, ProfileRecord};
use crate::variants::{build_variant, Arch, Size, VariantSpec, VARIANTS};
use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    /// IDW on the raw scores, tuned on validation RMSE.
    Regression,
    /// KNN on binned scores, tuned on validation accuracy.
    Classification,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Regression => "regression",
            Task::Classification => "classification",
        })
    }
}

impl FromStr for Task {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s.to_ascii_lowercase().as_str() {
            "regression" | "idw" => Ok(Task::Regression),
            "classification" | "knn" => Ok(Task::Classification),
            _ => Err(BenchError::Parse(format!("unknown task `{s}` (expected regression or classification)"))),
        }
    }
}

/// Which split a profile is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Validation,
    Test,
}

impl FromStr for Metric {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s {
            "validation" => Ok(Metric::Validation),
            "test" => Ok(Metric::Test),
            _ => Err(BenchError::Parse(format!("unknown metric `{s}` (expected validation or test)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub variants: Vec<u8>,
    pub sizes: Vec<Size>,
    pub archs: Vec<Arch>,
    /// Replicates per dataset family.
    pub seeds: usize,
    /// Master seed; every instance and tuner stream derives from it.
    pub seed: u64,
    pub budget_mult: usize,
    pub task: Task,
    pub approaches: Vec<Approach>,
    /// IDW power.
    pub q: f64,
    /// Label bins for classification.
    pub bins: usize,
    /// Worker threads.
    pub jobs: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            variants: VARIANTS.to_vec(),
            sizes: Size::ALL.to_vec(),
            archs: Arch::ALL.to_vec(),
            seeds: 5,
            seed: 0,
            budget_mult: 200,
            task: Task::Regression,
            approaches: Approach::ALL.to_vec(),
            q: 2.0,
            bins: 5,
            jobs: 1,
        }
    }
}

impl BenchConfig {
    fn model(&self) -> Result<ModelKind, BenchError> {
        Ok(match self.task {
            Task::Regression => ModelKind::Idw { q: self.q },
            Task::Classification => ModelKind::Knn { binning: LabelBinning::new(self.bins)? },
        })
    }

    fn check(&self) -> Result<(), BenchError> {
        let empty = |what: &str| Err(BenchError::Parse(format!("no {what} selected")));
        if self.variants.is_empty() {
            return empty("variants");
        }
        if self.sizes.is_empty() {
            return empty("sizes");
        }
        if self.archs.is_empty() {
            return empty("architectures");
        }
        if self.approaches.is_empty() {
            return empty("approaches");
        }
        if self.seeds == 0 {
            return Err(BenchError::Parse("--seeds must be at least 1".into()));
        }
        if self.budget_mult == 0 {
            return Err(BenchError::Parse("--budget-mult must be at least 1".into()));
        }
        if !(self.q > 0.0 && self.q.is_finite()) {
            return Err(BenchError::Parse(format!("IDW power must be positive, got {}", self.q)));
        }
        self.model().map(|_| ())
    }

    /// Instance families in output order.
    pub fn specs(&self) -> Vec<VariantSpec> {
        let mut out = Vec::new();
        for &variant in &self.variants {
            for &size in &self.sizes {
                for &arch in &self.archs {
                    out.push(VariantSpec { variant, size, arch });
                }
            }
        }
        out
    }
}

/// Outcome of tuning one approach on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceResult {
    pub instance: String,
    pub spec: VariantSpec,
    pub approach: Approach,
    pub parameters: usize,
    pub budget: usize,
    /// Validation RMSE (or accuracy) of the best parameters.
    pub validation: f64,
    pub test: Option<f64>,
    /// Validation and test rows predicted by the fallback.
    pub fallback: (usize, usize),
    pub report: TuneReport,
}

pub struct BenchOutput {
    pub config: BenchConfig,
    pub graphs: BTreeMap<u8, RoleGraph>,
    pub instances: Vec<Instance>,
    /// Grouped by instance, approaches in configured order.
    pub results: Vec<InstanceResult>,
}

/// Seed of replicate `r` of a dataset family.
pub fn instance_seed(master: u64, spec: VariantSpec, replicate: usize) -> u64 {
    derive_seed(master, &format!("instance/{spec}/{replicate}"))
}

/// Tunes the configured approaches on every instance. Instances run on a
/// pool of `jobs` threads; results come back in a fixed order.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchOutput, BenchError> {
    cfg.check()?;
    let mut graphs = BTreeMap::new();
    let mut sigs = BTreeMap::new();
    for &v in &cfg.variants {
        let g = build_variant(v)?;
        sigs.insert(v, g.enumerate_signatures()?);
        graphs.insert(v, g);
    }
    let work: Vec<(VariantSpec, usize)> =
        cfg.specs().into_iter().flat_map(|s| (0..cfg.seeds).map(move |r| (s, r))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| BenchError::Parse(format!("thread pool: {e}")))?;
    let done: Vec<Result<(Instance, Vec<InstanceResult>), BenchError>> = pool.install(|| {
        work.par_iter()
            .map(|&(spec, r)| run_instance(&graphs[&spec.variant], &sigs[&spec.variant], spec, r, cfg))
            .collect()
    });
    let mut instances = Vec::with_capacity(done.len());
    let mut results = Vec::new();
    for d in done {
        let (inst, res) = d?;
        instances.push(inst);
        results.extend(res);
    }
    Ok(BenchOutput { config: cfg.clone(), graphs, instances, results })
}

fn run_instance(
    g: &RoleGraph,
    sigs: &[Signature],
    spec: VariantSpec,
    replicate: usize,
    cfg: &BenchConfig,
) -> Result<(Instance, Vec<InstanceResult>), BenchError> {
    let seed = instance_seed(cfg.seed, spec, replicate);
    let mut inst = sample_dataset(g, sigs, spec, seed)?;
    inst.replicate = replicate;
    let id = inst.id();
    let fail = |message: String| BenchError::Instance { instance: id.clone(), message };
    let mut out = Vec::new();
    for &approach in &cfg.approaches {
        let key = if approach == Approach::Hybrid { Routing::default_key(g) } else { None };
        let routing = Routing::new(g, approach, key)?;
        let problem = Problem::new(g, &inst.data, routing, cfg.model()?, DistanceConfig::unit(g))?;
        let result = problem.tune(cfg.budget_mult, derive_seed(seed, &format!("tuner/{approach}")), true)?;
        let budget = cfg.budget_mult * problem.parameter_count();
        if result.evaluations != budget {
            return Err(fail(format!("{approach}: {} evaluations for a budget of {budget}", result.evaluations)));
        }
        out.push(InstanceResult {
            instance: id.clone(),
            spec,
            approach,
            parameters: problem.parameter_count(),
            budget,
            validation: problem.validation_metric(&result.best),
            test: problem.test_metric(&result.best),
            fallback: problem.fallback_rows(),
            report: problem.report(g, &result),
        });
    }
    Ok((inst, out))
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String, BenchError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| BenchError::Parse(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn opt_real(x: Option<f64>) -> String {
    x.map(format_real).unwrap_or_default()
}

/// `points` evenly spaced values from 0 to `max`.
pub fn kappa_grid(max: f64, points: usize) -> Vec<f64> {
    let steps = points.max(2) - 1;
    (0..=steps).map(|i| max * i as f64 / steps as f64).collect()
}

/// Profile records of regression results on `metric`; the solver id is the
/// approach name.
pub fn profile_records(results: &[InstanceResult], metric: Metric) -> Vec<ProfileRecord> {
    results
        .iter()
        .map(|r| ProfileRecord {
            instance: r.instance.clone(),
            solver: r.approach.to_string(),
            n: r.parameters,
            trace: r
                .report
                .result
                .trace
                .iter()
                .filter_map(|e| match metric {
                    Metric::Validation => Some((e.k, e.objective)),
                    Metric::Test => e.test.map(|t| (e.k, t)),
                })
                .collect(),
        })
        .collect()
}

/// `kappa,approach,fraction` rows.
pub fn profile_csv(records: &[ProfileRecord], tau: f64, kappas: &[f64]) -> Result<String, BenchError> {
    let curves = data_profile(records, tau, kappas)?;
    let mut rows = Vec::new();
    for (i, &kappa) in kappas.iter().enumerate() {
        for (solver, curve) in &curves {
            rows.push(vec![kappa.to_string(), solver.clone(), curve[i].to_string()]);
        }
    }
    csv_text(&["kappa", "approach", "fraction"], rows)
}

/// Reads `results.csv` and `traces.csv` written by [`BenchOutput::write`].
pub fn load_records(dir: &Path, metric: Metric) -> Result<(Vec<ProfileRecord>, usize), BenchError> {
    let open = |name: &str| {
        let path = dir.join(name);
        csv::Reader::from_path(&path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => BenchError::Io { path: path.display().to_string(), source },
            other => BenchError::Parse(format!("{}: {other:?}", path.display())),
        })
    };
    let mut records: BTreeMap<(String, String), ProfileRecord> = BTreeMap::new();
    let mut mult = 1;
    let mut results = open("results.csv")?;
    let headers = results.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| BenchError::Parse(format!("results.csv: no `{name}` column")))
    };
    let (ci, ca, cn, cb, cm) = (col("instance")?, col("approach")?, col("parameters")?, col("budget")?, col("model")?);
    let num = |s: &str| s.parse::<usize>().map_err(|_| BenchError::Parse(format!("results.csv: bad count `{s}`")));
    for row in results.records() {
        let row = row?;
        if &row[cm] != "idw" {
            return Err(BenchError::Profile("profiles need regression results".into()));
        }
        let (n, budget) = (num(&row[cn])?, num(&row[cb])?);
        mult = mult.max(budget / n.max(1));
        let key = (row[ci].to_string(), row[ca].to_string());
        records.insert(key.clone(), ProfileRecord { instance: key.0, solver: key.1, n, trace: Vec::new() });
    }
    let mut traces = open("traces.csv")?;
    for row in traces.records() {
        let row = row?;
        let key = (row[0].to_string(), row[1].to_string());
        let rec = records
            .get_mut(&key)
            .ok_or_else(|| BenchError::Profile(format!("trace for unknown run {} / {}", key.0, key.1)))?;
        let k = num(&row[2])?;
        let cell = match metric {
            Metric::Validation => &row[3],
            Metric::Test => &row[4],
        };
        if cell.is_empty() {
            continue;
        }
        let v = cell.parse::<f64>().map_err(|_| BenchError::Parse(format!("traces.csv: bad value `{cell}`")))?;
        rec.trace.push((k, v));
    }
    Ok((records.into_values().collect(), mult))
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// Kappa points in emitted profiles.
pub const PROFILE_POINTS: usize = 101;

impl BenchOutput {
    pub fn model_name(&self) -> &'static str {
        match self.config.task {
            Task::Regression => "idw",
            Task::Classification => "knn",
        }
    }

    /// Test metrics of `approach`, in instance order.
    pub fn test_metrics(&self, approach: Approach) -> Vec<f64> {
        self.results.iter().filter(|r| r.approach == approach).filter_map(|r| r.test).collect()
    }

    /// Every output file as `(relative path, contents)`, in a fixed order.
    pub fn files(&self) -> Result<Vec<(String, String)>, BenchError> {
        let mut files = Vec::new();
        let mut manifest = Vec::new();
        for inst in &self.instances {
            let g = &self.graphs[&inst.spec.variant];
            let path = format!("datasets/{}.csv", inst.id());
            let mut buf = Vec::new();
            inst.data.write(g, &mut buf)?;
            manifest.push(vec![
                inst.id(),
                inst.spec.variant.to_string(),
                inst.spec.size.to_string(),
                inst.spec.arch.to_string(),
                inst.replicate.to_string(),
                inst.seed.to_string(),
                inst.data.len().to_string(),
                path.clone(),
            ]);
            files.push((path, String::from_utf8(buf).expect("csv output is UTF-8")));
        }
        let manifest =
            csv_text(&["instance", "variant", "size", "arch", "replicate", "seed", "rows", "dataset"], manifest)?;
        files.insert(0, ("manifest.csv".into(), manifest));

        let model = self.model_name();
        let results = self.results.iter().map(|r| {
            vec![
                r.instance.clone(),
                r.spec.variant.to_string(),
                r.spec.size.to_string(),
                r.spec.arch.to_string(),
                r.approach.to_string(),
                model.into(),
                r.parameters.to_string(),
                r.budget.to_string(),
                r.report.result.evaluations.to_string(),
                format_real(r.validation),
                opt_real(r.test),
                r.fallback.0.to_string(),
                r.fallback.1.to_string(),
            ]
        });
        let header = [
            "instance",
            "variant",
            "size",
            "arch",
            "approach",
            "model",
            "parameters",
            "budget",
            "evaluations",
            "validation",
            "test",
            "fallback_validation",
            "fallback_test",
        ];
        files.push(("results.csv".into(), csv_text(&header, results)?));

        let traces = self.results.iter().flat_map(|r| {
            r.report.result.trace.iter().map(move |e| {
                vec![r.instance.clone(), r.approach.to_string(), e.k.to_string(), format_real(e.objective), opt_real(e.test)]
            })
        });
        files.push(("traces.csv".into(), csv_text(&["instance", "approach", "k", "objective", "test"], traces)?));

        for r in &self.results {
            let text = serde_json::to_string_pretty(&r.report)? + "\n";
            files.push((format!("configs/{}-{}.json", r.instance, r.approach), text));
        }

        // Mean and spread of the test metric per size, variant and approach.
        let mut groups: BTreeMap<(Size, u8, usize), Vec<f64>> = BTreeMap::new();
        let order = |a: Approach| self.config.approaches.iter().position(|&b| b == a).unwrap_or(0);
        for r in &self.results {
            if let Some(t) = r.test {
                groups.entry((r.spec.size, r.spec.variant, order(r.approach))).or_default().push(t);
            }
        }
        let summary = groups.iter().map(|(&(size, variant, a), xs)| {
            let (m, s) = mean_std(xs);
            vec![
                size.to_string(),
                variant.to_string(),
                self.config.approaches[a].to_string(),
                xs.len().to_string(),
                format_real(m),
                format_real(s),
            ]
        });
        let metric = if self.config.task == Task::Regression { "rmse" } else { "accuracy" };
        let header = ["size", "variant", "approach", "runs", &format!("mean_test_{metric}"), &format!("std_test_{metric}")];
        files.push(("summary.csv".into(), csv_text(&header, summary)?));

        match self.config.task {
            Task::Regression => {
                let kappas = kappa_grid(self.config.budget_mult as f64, PROFILE_POINTS);
                let tau = 0.005;
                for (name, metric) in [("validation", Metric::Validation), ("test", Metric::Test)] {
                    let records = profile_records(&self.results, metric);
                    files.push((format!("profiles_{name}.csv"), profile_csv(&records, tau, &kappas)?));
                }
            }
            Task::Classification => {
                for &size in &self.config.sizes {
                    let mut header = vec!["variant".to_string()];
                    header.extend(self.config.approaches.iter().map(|a| a.to_string()));
                    let rows = self.config.variants.iter().map(|&v| {
                        let mut row = vec![v.to_string()];
                        for a in 0..self.config.approaches.len() {
                            row.push(groups.get(&(size, v, a)).map(|xs| format_real(mean_std(xs).0)).unwrap_or_default());
                        }
                        row
                    });
                    let header: Vec<&str> = header.iter().map(String::as_str).collect();
                    files.push((format!("accuracy_{size}.csv"), csv_text(&header, rows)?));
                }
            }
        }
        Ok(files)
    }

    /// Writes [`files`](Self::files) under `dir`. Without `force`, an existing
    /// output file aborts the write before anything is touched.
    pub fn write(&self, dir: &Path, force: bool) -> Result<Vec<String>, BenchError> {
        let files = self.files()?;
        if !force {
            if let Some((p, _)) = files.iter().find(|(p, _)| dir.join(p).exists()) {
                return Err(BenchError::Exists(dir.join(p).display().to_string()));
            }
        }
        for (rel, text) in &files {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|source| BenchError::Io { path: parent.display().to_string(), source })?;
            }
            fs::write(&path, text).map_err(|source| BenchError::Io { path: path.display().to_string(), source })?;
        }
        Ok(files.into_iter().map(|f| f.0).collect())
    }
}

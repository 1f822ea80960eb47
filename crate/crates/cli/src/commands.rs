use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use metadist::dataset::stratified_split;
use metadist::distance::{hybrid_distance, meta_distance, sub_distance, ConfigFile, DistanceConfig};
use metadist::domain::format_real;
use metadist::models::{bin_label, LabelBinning, RoutedData, TrainedIdw, TrainedKnn};
use metadist::rng::{derive_seed, stream};
use metadist::tuning::{ModelKind, Problem, TuneReport};
use metadist::{Approach, Dataset, DistanceError, DomainSpec, RoleGraph, Routing};
use metadist_bench::Task;

use crate::exit::{BadInput, Usage, INVALID};
use crate::{FitPredict, ModelArgs, Tune};

pub fn load_graph(path: &Path) -> Result<RoleGraph> {
    Ok(RoleGraph::load(path)?)
}

/// A plain config, or the per-route configs of a `tune` result.
pub enum ConfigInput {
    Plain(ConfigFile),
    Report(Box<TuneReport>),
}

pub fn read_config(path: &Path) -> Result<ConfigInput> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("{}: malformed JSON", path.display()))?;
    if value.get("routes").is_some() {
        let r = serde_json::from_value(value).with_context(|| format!("{}: malformed tune result", path.display()))?;
        return Ok(ConfigInput::Report(Box::new(r)));
    }
    let c = serde_json::from_value(value).with_context(|| format!("{}: malformed distance config", path.display()))?;
    Ok(ConfigInput::Plain(c))
}

impl ConfigInput {
    fn configs(&self, g: &RoleGraph) -> Result<Vec<DistanceConfig<f64>>> {
        Ok(match self {
            ConfigInput::Plain(c) => vec![DistanceConfig::from_file(g, c)?],
            ConfigInput::Report(r) => r.configs(g)?,
        })
    }
}

/// Writes `text` to `path`, or stdout when there is no path.
pub fn emit(path: Option<&Path>, text: &str, force: bool) -> Result<()> {
    match path {
        None => {
            std::io::stdout().lock().write_all(text.as_bytes())?;
            Ok(())
        }
        Some(p) => {
            if p.exists() && !force {
                bail!("{} already exists (use --force to overwrite)", p.display());
            }
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            }
            fs::write(p, text).with_context(|| format!("cannot write {}", p.display()))
        }
    }
}

pub fn validate(path: &Path) -> Result<u8> {
    let spec = DomainSpec::load(path)?;
    let violations = metadist::validate_graph(&spec);
    if violations.is_empty() {
        RoleGraph::from_spec(&spec)?;
        return Ok(0);
    }
    let mut out = std::io::stdout().lock();
    for v in violations {
        writeln!(out, "{v}")?;
    }
    Ok(INVALID)
}

pub fn distance(spec: &Path, config: &Path, points: &Path, approach: Approach) -> Result<u8> {
    let g = load_graph(spec)?;
    let configs = read_config(config)?.configs(&g)?;
    let [cfg] = configs.as_slice() else {
        bail!(Usage(format!("{} holds {} route configs; `distance` needs exactly one", config.display(), configs.len())));
    };
    let pts = Dataset::load_points(&g, points)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for x in &pts {
        let row = pts
            .iter()
            .map(|y| {
                let d = match approach {
                    Approach::Meta => meta_distance(&g, cfg, x, y),
                    Approach::Sub => sub_distance(&g, cfg, x, y),
                    Approach::Hybrid => hybrid_distance(&g, cfg, x, y),
                };
                match d {
                    Err(DistanceError::SignatureMismatch) => Ok(f64::INFINITY),
                    other => other,
                }
                .map(format_real)
            })
            .collect::<Result<Vec<_>, _>>()?;
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
    emit(None, std::str::from_utf8(&bytes)?, false)?;
    Ok(0)
}

fn routing(g: &RoleGraph, m: &ModelArgs) -> Result<Routing> {
    let key = match (&m.key, m.approach) {
        (Some(name), Approach::Hybrid) => Some(g.var(name).map_err(|e| Usage(format!("--key: {e}")))?),
        (Some(_), _) => bail!(Usage("--key only applies to the hybrid approach".into())),
        (None, Approach::Hybrid) => Routing::default_key(g),
        (None, _) => None,
    };
    Ok(Routing::new(g, m.approach, key)?)
}

fn model_kind(m: &ModelArgs) -> Result<ModelKind> {
    Ok(match m.model {
        Task::Regression => {
            if !(m.q > 0.0 && m.q.is_finite()) {
                bail!(Usage(format!("--q must be positive, got {}", m.q)));
            }
            ModelKind::Idw { q: m.q }
        }
        Task::Classification => ModelKind::Knn { binning: LabelBinning::new(m.bins).map_err(|e| Usage(e.to_string()))? },
    })
}

pub fn fit_predict(a: FitPredict) -> Result<u8> {
    let g = load_graph(&a.spec)?;
    let input = read_config(&a.config)?;
    let configs = input.configs(&g)?;
    let kind = model_kind(&a.model)?;
    let routing = routing(&g, &a.model)?;
    let train = Dataset::load(&g, &a.train)?;
    if train.is_empty() {
        bail!(BadInput(format!("{}: no training rows", a.train.display())));
    }
    let query = Dataset::load_points(&g, &a.query)?;
    let data = RoutedData::new(routing, configs, train.points.clone())?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["row", "prediction", "fallback"])?;
    match kind {
        ModelKind::Idw { q } => {
            let model = TrainedIdw::fit(data, train.targets.clone(), q)?;
            for (i, x) in query.iter().enumerate() {
                let p = model.predict(&g, x)?;
                w.write_record([i.to_string(), format_real(p.value), p.fallback.to_string()])?;
            }
        }
        ModelKind::Knn { binning } => {
            let recorded = match &input {
                ConfigInput::Report(r) => r.k,
                ConfigInput::Plain(_) => None,
            };
            let Some(k) = a.k.or(recorded) else {
                bail!(Usage("knn needs --k (or a tune result that records k)".into()));
            };
            let labels = train
                .targets
                .iter()
                .map(|&y| bin_label(binning, y))
                .collect::<Result<Vec<_>, _>>()
                .with_context(|| format!("{}: knn targets must lie in [0, 100]", a.train.display()))?;
            let model = TrainedKnn::fit(data, labels, k)?;
            for (i, x) in query.iter().enumerate() {
                let p = model.predict(&g, x)?;
                w.write_record([i.to_string(), p.value.to_string(), p.fallback.to_string()])?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
    emit(a.out.as_deref(), std::str::from_utf8(&bytes)?, a.force)?;
    Ok(0)
}

pub fn tune(a: Tune) -> Result<u8> {
    if a.out.exists() && !a.force {
        bail!("{} already exists (use --force to overwrite)", a.out.display());
    }
    if a.budget_mult == 0 {
        bail!(Usage("--budget-mult must be at least 1".into()));
    }
    let g = load_graph(&a.spec)?;
    let mut data = Dataset::load(&g, &a.dataset)?;
    if data.splits.is_none() {
        let sigs = g.enumerate_signatures()?;
        let groups: Vec<usize> = data
            .points
            .iter()
            .map(|x| RoleGraph::signature_index(&sigs, &x.included()).unwrap_or(usize::MAX))
            .collect();
        data.splits = Some(stratified_split(&groups, &mut stream(a.seed, "split")));
    }
    let base = match &a.base {
        Some(p) => {
            let configs = read_config(p)?.configs(&g)?;
            let [cfg] = <[DistanceConfig<f64>; 1]>::try_from(configs).map_err(|v| {
                Usage(format!("--base {} holds {} route configs; expected one", p.display(), v.len()))
            })?;
            cfg
        }
        None => DistanceConfig::unit(&g),
    };
    let routing = routing(&g, &a.model)?;
    let approach = routing.approach();
    let problem = Problem::new(&g, &data, routing, model_kind(&a.model)?, base)?;
    let result = problem.tune(a.budget_mult, derive_seed(a.seed, &format!("tuner/{approach}")), true)?;
    let expected = a.budget_mult * problem.parameter_count();
    if result.evaluations != expected {
        bail!("tuner made {} evaluations, budget was {expected}", result.evaluations);
    }
    let report = problem.report(&g, &result);
    let text = serde_json::to_string_pretty(&report)? + "\n";
    emit(Some(&a.out), &text, a.force)?;
    Ok(0)
}

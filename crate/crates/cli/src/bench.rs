use anyhow::{bail, Result};
use metadist_bench::run::{kappa_grid, load_records, profile_csv};
use metadist_bench::{aggregate_curve, curve_csv, run_benchmark, BenchConfig, CurveConfig, VARIANTS};

use crate::commands::emit;
use crate::exit::Usage;
use crate::{BenchCurve, BenchProfile, BenchRun};

/// `1..5`, `3,5`, `1..2,5`.
pub fn parse_variants(text: &str) -> Result<Vec<u8>> {
    let bad = || Usage(format!("bad --variants `{text}` (expected e.g. 1..5 or 3,5)"));
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim) {
        let (lo, hi) = match part.split_once("..") {
            Some((a, b)) => (a.trim().parse::<u8>().map_err(|_| bad())?, b.trim().parse::<u8>().map_err(|_| bad())?),
            None => {
                let v = part.parse::<u8>().map_err(|_| bad())?;
                (v, v)
            }
        };
        if lo > hi {
            bail!(bad());
        }
        for v in lo..=hi {
            if !VARIANTS.contains(&v) {
                bail!(Usage(format!("unknown variant {v} (expected 1 to 5)")));
            }
            if !out.contains(&v) {
                out.push(v);
            }
        }
    }
    Ok(out)
}

pub fn run(a: BenchRun) -> Result<u8> {
    if a.jobs == 0 {
        bail!(Usage("--jobs must be at least 1".into()));
    }
    let cfg = BenchConfig {
        variants: parse_variants(&a.variants)?,
        sizes: a.sizes,
        archs: a.arch,
        seeds: a.seeds,
        seed: a.seed,
        budget_mult: a.budget_mult,
        task: a.task,
        approaches: a.approaches,
        q: a.q,
        bins: a.bins,
        jobs: a.jobs,
    };
    let files = cfg.specs().len();
    if files == 0 {
        bail!(Usage("nothing to run".into()));
    }
    // Refuse early instead of after hours of tuning.
    if !a.force && a.out.join("manifest.csv").exists() {
        bail!("{} already holds results (use --force to overwrite)", a.out.display());
    }
    let output = run_benchmark(&cfg)?;
    output.write(&a.out, a.force)?;
    Ok(0)
}

pub fn profile(a: BenchProfile) -> Result<u8> {
    if !(a.tau > 0.0 && a.tau < 1.0) {
        bail!(Usage(format!("--tau must lie in (0, 1), got {}", a.tau)));
    }
    let (records, mult) = load_records(&a.input, a.metric)?;
    let text = profile_csv(&records, a.tau, &kappa_grid(mult as f64, a.points))?;
    emit(Some(&a.out), &text, a.force)?;
    Ok(0)
}

pub fn curve(a: BenchCurve) -> Result<u8> {
    if a.out.exists() && !a.force {
        bail!("{} already exists (use --force to overwrite)", a.out.display());
    }
    let cfg = CurveConfig {
        variant: a.variant,
        size: a.size,
        arch: a.arch,
        approaches: a.approaches,
        seeds: a.seeds,
        seed: a.seed,
        q: a.q,
    };
    let points = aggregate_curve(&cfg)?;
    emit(Some(&a.out), &curve_csv(&cfg, &points)?, a.force)?;
    Ok(0)
}

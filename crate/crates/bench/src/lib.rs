//! HPD benchmark: the five variant domains, surrogate datasets, the
//! Sub/Hybrid/Meta comparison and data profiles.
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curve;
pub mod instance;
pub mod profile;
pub mod run;
pub mod surrogate;
pub mod variants;

use statrs::distribution::{Binomial, DiscreteCDF};
use thiserror::Error;

pub use curve::{aggregate_curve, curve_csv, CurveConfig, CurvePoint};
pub use instance::{sample_dataset, Instance};
pub use profile::{data_profile, tau_solved_at, ProfileRecord};
pub use run::{run_benchmark, BenchConfig, BenchOutput, InstanceResult, Metric, Task};
pub use surrogate::{surrogate_score, Surrogate};
pub use variants::{build_variant, signature_sizes, subproblem_sizes, variant_spec_json, Subproblem, Arch, Size, VariantSpec, VARIANTS};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown variant {0} (expected 1 to 5)")]
    UnknownVariant(u8),
    #[error("variant {0}: {1}")]
    Variant(u8, String),
    #[error("{0}")]
    Parse(String),
    #[error("profile: {0}")]
    Profile(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0} already exists (use --force to overwrite)")]
    Exists(String),
    #[error("{instance}: {message}")]
    Instance { instance: String, message: String },
    #[error(transparent)]
    Dataset(#[from] metadist::dataset::DatasetError),
    #[error(transparent)]
    Tune(#[from] metadist::tuning::TuneError),
    #[error(transparent)]
    Domain(#[from] metadist::DomainError),
    #[error(transparent)]
    Model(#[from] metadist::ModelError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Paired comparison of two samples, counting strict wins of `a` over `b`
/// (smaller is better). Ties are dropped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignTest {
    pub wins: u64,
    pub losses: u64,
    /// One-sided `P(X >= wins)` for `X ~ Binomial(wins + losses, 1/2)`.
    pub p_value: f64,
}

pub fn sign_test(a: &[f64], b: &[f64]) -> SignTest {
    let wins = a.iter().zip(b).filter(|(x, y)| x < y).count() as u64;
    let losses = a.iter().zip(b).filter(|(x, y)| x > y).count() as u64;
    let n = wins + losses;
    let p_value = if wins == 0 {
        1.0
    } else {
        let bin = Binomial::new(0.5, n).expect("valid binomial");
        bin.sf(wins - 1)
    };
    SignTest { wins, losses, p_value }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_test_tail() {
        // 15 of 20: sum_{k>=15} C(20,k) / 2^20 = 21700 / 1048576
        let a: Vec<f64> = (0..20).map(|i| if i < 15 { 0.0 } else { 2.0 }).collect();
        let t = sign_test(&a, &[1.0; 20]);
        assert_eq!((t.wins, t.losses), (15, 5));
        assert!((t.p_value - 21700.0 / 1048576.0).abs() < 1e-12);
        assert_eq!(sign_test(&[1.0], &[1.0]).p_value, 1.0);
    }
}

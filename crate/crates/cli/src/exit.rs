//! Exit codes. 2 is a usage error, 3 an unreadable or malformed input file,
//! 4 a domain or config that parses but is not valid. Data rows outside
//! their domain count as a bad input file.

use metadist::dataset::DatasetError;
use metadist::domain::{GraphError, SpecError};
use metadist::tuning::TuneError;
use metadist::{DistanceError, DomainError, ModelError};
use metadist_bench::BenchError;

pub const FAILURE: u8 = 1;
pub const USAGE: u8 = 2;
pub const INPUT: u8 = 3;
pub const INVALID: u8 = 4;

/// Marks an error as a bad command-line value.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// Marks an error as a problem with an input file.
#[derive(Debug)]
pub struct BadInput(pub String);

impl std::fmt::Display for BadInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for BadInput {}

pub fn code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return USAGE;
        }
        if cause.is::<BadInput>()
            || cause.is::<SpecError>()
            || cause.is::<std::io::Error>()
            || cause.is::<csv::Error>()
            || cause.is::<serde_json::Error>()
            || cause.is::<DatasetError>()
        {
            return INPUT;
        }
        if let Some(e) = cause.downcast_ref::<GraphError>() {
            return match e {
                GraphError::Invalid(_) => INVALID,
                GraphError::Spec(_) => INPUT,
            };
        }
        if let Some(e) = cause.downcast_ref::<BenchError>() {
            return match e {
                BenchError::Exists(_) | BenchError::Variant(..) | BenchError::Instance { .. } => FAILURE,
                BenchError::Parse(_) | BenchError::UnknownVariant(_) => USAGE,
                BenchError::Io { .. }
                | BenchError::Profile(_)
                | BenchError::Csv(_)
                | BenchError::Json(_)
                | BenchError::Dataset(_) => INPUT,
                BenchError::Tune(_) | BenchError::Domain(_) | BenchError::Model(_) => INVALID,
            };
        }
        if cause.is::<DistanceError>() || cause.is::<DomainError>() || cause.is::<ModelError>() || cause.is::<TuneError>() {
            return INVALID;
        }
    }
    FAILURE
}

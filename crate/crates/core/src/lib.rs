//! Hierarchical mixed-variable domains and the meta distance.
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod distance;
pub mod domain;
pub mod expr;
pub mod interval;
pub mod models;
pub mod rng;
pub mod scalar;
pub mod set;
pub mod tuning;
pub mod value;

pub use domain::{
    validate_graph, DomainError, DomainSpec, ExtendedPoint, GraphError, Point, Role, RoleGraph, Signature, VarIndex,
    Violation,
};
pub use dataset::{Dataset, Split};
pub use distance::{DistanceError, DistanceKind};
pub use models::{Approach, ModelError, Routing};
pub use scalar::Scalar;
pub use set::{RealInterval, UniversalSet, ValueSet};
pub use value::{Value, VariableKind};

/// Distance config over `f64`.
pub type DistanceConfig = distance::DistanceConfig<f64>;
/// Distance config over `f32`.
pub type DistanceConfigF32 = distance::DistanceConfig<f32>;

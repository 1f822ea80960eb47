//! Included-excluded distances, the meta distance and the Sub and Hybrid
//! baselines.
//!
//! All distances are extended reals: `+inf` is absorbing under the norms.

mod config;
mod table;

use thiserror::Error;

pub use config::{Categorical, CategoricalFile, ConfigFile, DistanceConfig, Order, PValue};
pub use table::{Coord, CoordTable, DistanceKind};

use crate::domain::{DomainError, ExtendedPoint, Point, RoleGraph, VarIndex};
use crate::scalar::Scalar;
use crate::value::Value;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistanceError {
    #[error("invalid distance config: {0}")]
    Config(String),
    #[error("`{0}` is not excludable")]
    NotExcludable(String),
    #[error("`{var}`: theta {theta} is below its lower bound {bound}")]
    ThetaBelowBound { var: String, theta: f64, bound: f64 },
    #[error("`{0}` is EXC; the one-dimensional distance needs included values")]
    ExcArgument(String),
    #[error("`{var}`: value {value} is outside the universal set")]
    OutsideUniversal { var: String, value: String },
    #[error("points belong to different subproblems")]
    SignatureMismatch,
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Unscaled distance between two included values of one variable.
pub(crate) fn raw_distance<T: Scalar>(cfg: &DistanceConfig<T>, v: VarIndex, u: Value, w: Value) -> T {
    match (u, w) {
        (Value::Cat(a), Value::Cat(b)) => match cfg.categorical(v) {
            Categorical::Indicator => {
                if a == b {
                    T::zero()
                } else {
                    T::one()
                }
            }
            Categorical::Matrix(m) => m[a as usize][b as usize],
        },
        (a, b) => match (a.as_f64(), b.as_f64()) {
            (Some(x), Some(y)) => T::of((x - y).abs()),
            _ => T::nan(),
        },
    }
}

/// Weighted distance between two included values.
pub fn one_dim_distance<T: Scalar>(
    g: &RoleGraph,
    cfg: &DistanceConfig<T>,
    v: VarIndex,
    u: Value,
    w: Value,
) -> Result<T, DistanceError> {
    for x in [u, w] {
        if x.is_exc() {
            return Err(DistanceError::ExcArgument(g.name(v).to_string()));
        }
        if !g.universal_set(v).values.contains(&x) {
            return Err(DistanceError::OutsideUniversal { var: g.name(v).to_string(), value: g.format_value(v, x) });
        }
    }
    Ok(cfg.weight(v) * raw_distance(cfg, v, u, w))
}

/// Half the weighted diameter of the universal set; `+inf` when unbounded.
pub fn theta_lower_bound<T: Scalar>(g: &RoleGraph, cfg: &DistanceConfig<T>, v: VarIndex) -> Result<T, DistanceError> {
    if !g.universal_set(v).excludable {
        return Err(DistanceError::NotExcludable(g.name(v).to_string()));
    }
    Ok(cfg.weight(v) * cfg.unit_diameter(g, v) / T::of(2.0))
}

/// Penalty for comparing an included value with EXC.
pub fn theta<T: Scalar>(g: &RoleGraph, cfg: &DistanceConfig<T>, v: VarIndex) -> Result<T, DistanceError> {
    Ok(theta_lower_bound(g, cfg, v)? + cfg.theta_offset(v))
}

pub fn inc_exc_distance<T: Scalar>(
    g: &RoleGraph,
    cfg: &DistanceConfig<T>,
    v: VarIndex,
    u: Value,
    w: Value,
) -> Result<T, DistanceError> {
    match (u.is_exc(), w.is_exc()) {
        (true, true) => Ok(T::zero()),
        (false, false) => one_dim_distance(g, cfg, v, u, w),
        _ => theta(g, cfg, v),
    }
}

/// p-norm of non-negative coordinates; `+inf` if any coordinate is.
pub fn aggregate<T: Scalar>(coords: impl IntoIterator<Item = T>, p: Order<T>) -> T {
    let coords: Vec<T> = coords.into_iter().collect();
    let m = coords.iter().copied().fold(T::zero(), T::max);
    if m.is_infinite() || m == T::zero() {
        return m;
    }
    match p {
        Order::Infinity => m,
        Order::Finite(p) if p == T::one() => coords.iter().copied().sum(),
        Order::Finite(p) if p == T::of(2.0) => m * coords.iter().map(|&d| (d / m) * (d / m)).sum::<T>().sqrt(),
        Order::Finite(p) => m * coords.iter().map(|&d| (d / m).powf(p)).sum::<T>().powf(T::one() / p),
    }
}

/// Meta distance between extended points; both must lie in the extended domain.
pub fn meta_distance<T: Scalar>(
    g: &RoleGraph,
    cfg: &DistanceConfig<T>,
    x: &ExtendedPoint,
    y: &ExtendedPoint,
) -> Result<T, DistanceError> {
    g.check_extended(x)?;
    g.check_extended(y)?;
    meta_distance_unchecked(g, cfg, x, y)
}

pub(crate) fn meta_distance_unchecked<T: Scalar>(
    g: &RoleGraph,
    cfg: &DistanceConfig<T>,
    x: &ExtendedPoint,
    y: &ExtendedPoint,
) -> Result<T, DistanceError> {
    let coords = g
        .indices()
        .map(|v| inc_exc_distance(g, cfg, v, x.get(v), y.get(v)))
        .collect::<Result<Vec<T>, _>>()?;
    Ok(aggregate(coords, cfg.p()))
}

/// Meta distance of the extended images of two points.
pub fn induced_distance<T: Scalar>(
    g: &RoleGraph,
    cfg: &DistanceConfig<T>,
    x: &Point,
    y: &Point,
) -> Result<T, DistanceError> {
    meta_distance_unchecked(g, cfg, &g.extend(x)?, &g.extend(y)?)
}

/// Euclidean distance within one subproblem; both points must include
/// exactly the same variables.
pub fn sub_distance<T: Scalar>(
    g: &RoleGraph,
    cfg: &DistanceConfig<T>,
    x: &ExtendedPoint,
    y: &ExtendedPoint,
) -> Result<T, DistanceError> {
    g.check_extended(x)?;
    g.check_extended(y)?;
    if x.included() != y.included() {
        return Err(DistanceError::SignatureMismatch);
    }
    let coords = x
        .included()
        .into_iter()
        .map(|v| one_dim_distance(g, cfg, v, x.get(v), y.get(v)))
        .collect::<Result<Vec<T>, _>>()?;
    Ok(aggregate(coords, Order::euclidean()))
}

/// p-norm over the variables included in both points. Only a pseudo-metric:
/// points that differ only where one of them is EXC are at distance zero.
pub fn hybrid_distance<T: Scalar>(
    g: &RoleGraph,
    cfg: &DistanceConfig<T>,
    x: &ExtendedPoint,
    y: &ExtendedPoint,
) -> Result<T, DistanceError> {
    hybrid_distance_within(g, cfg, x, y, None)
}

/// Hybrid distance inside one partition: the partition `key` is skipped,
/// as every point of a partition shares its value.
pub fn hybrid_distance_within<T: Scalar>(
    g: &RoleGraph,
    cfg: &DistanceConfig<T>,
    x: &ExtendedPoint,
    y: &ExtendedPoint,
    key: Option<VarIndex>,
) -> Result<T, DistanceError> {
    g.check_extended(x)?;
    g.check_extended(y)?;
    let coords = g
        .indices()
        .filter(|&v| Some(v) != key && !x.get(v).is_exc() && !y.get(v).is_exc())
        .map(|v| one_dim_distance(g, cfg, v, x.get(v), y.get(v)))
        .collect::<Result<Vec<T>, _>>()?;
    Ok(aggregate(coords, cfg.p()))
}

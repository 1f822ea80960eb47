use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DistanceError;
use crate::domain::{RoleGraph, VarIndex};
use crate::scalar::Scalar;
use crate::value::VariableKind;

/// Order of the aggregating norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Order<T> {
    Finite(T),
    Infinity,
}

impl<T: Scalar> Order<T> {
    pub fn euclidean() -> Self {
        Order::Finite(T::of(2.0))
    }

    fn to_json(self) -> PValue {
        match self {
            Order::Finite(p) => PValue::Num(p.to_f64_lossy()),
            Order::Infinity => PValue::Text("inf".into()),
        }
    }
}

/// Distance between labels of one categorical variable.
#[derive(Debug, Clone, PartialEq)]
pub enum Categorical<T> {
    /// `1[a != b]`, scaled by the variable's weight.
    Indicator,
    /// Symmetric label-by-label metric, scaled by the variable's weight.
    Matrix(Vec<Vec<T>>),
}

/// Weights, exclusion penalties and order of the meta distance.
///
/// The penalty of an excludable variable is stored as an offset above its
/// lower bound, so every constructible config satisfies the bound.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceConfig<T> {
    pub(crate) p: Order<T>,
    pub(crate) weights: Vec<T>,
    pub(crate) theta_offsets: Vec<T>,
    pub(crate) categorical: Vec<Categorical<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PValue {
    Num(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub enum CategoricalFile {
    #[serde(rename = "scale")]
    Scale(f64),
    #[serde(rename = "matrix")]
    Matrix(Vec<Vec<f64>>),
}

/// On-disk form. Absolute `thetas` may be given instead of offsets; written
/// configs carry both.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<PValue>,
    #[serde(default)]
    pub weights: BTreeMap<String, f64>,
    #[serde(default)]
    pub theta_offsets: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub thetas: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub categorical: BTreeMap<String, CategoricalFile>,
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self, DistanceError> {
        serde_json::from_str(text).map_err(|e| DistanceError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DistanceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| DistanceError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

impl<T: Scalar> DistanceConfig<T> {
    /// Unit weights, penalties at their bounds, p = 2, indicator categoricals.
    ///
    /// Variables whose universal set is a single value would get a zero
    /// penalty; their offset is set to the weight instead.
    pub fn unit(g: &RoleGraph) -> Self {
        let mut cfg = Self {
            p: Order::euclidean(),
            weights: vec![T::one(); g.len()],
            theta_offsets: vec![T::zero(); g.len()],
            categorical: vec![Categorical::Indicator; g.len()],
        };
        for v in g.indices() {
            cfg.fix_zero_theta(g, v);
        }
        cfg
    }

    fn fix_zero_theta(&mut self, g: &RoleGraph, v: VarIndex) {
        if g.universal_set(v).excludable && self.unit_diameter(g, v) == T::zero() && self.theta_offsets[v.0] == T::zero() {
            self.theta_offsets[v.0] = self.weights[v.0];
        }
    }

    pub fn p(&self) -> Order<T> {
        self.p
    }

    pub fn weight(&self, v: VarIndex) -> T {
        self.weights[v.0]
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn theta_offset(&self, v: VarIndex) -> T {
        self.theta_offsets[v.0]
    }

    pub fn categorical(&self, v: VarIndex) -> &Categorical<T> {
        &self.categorical[v.0]
    }

    pub fn with_p(mut self, p: Order<T>) -> Result<Self, DistanceError> {
        if let Order::Finite(x) = p {
            if !(x >= T::one()) || !x.is_finite() {
                return Err(DistanceError::Config(format!("order p must be >= 1, got {x}")));
            }
        }
        self.p = p;
        Ok(self)
    }

    pub fn set_weight(&mut self, v: VarIndex, w: T) -> Result<(), DistanceError> {
        if !(w > T::zero()) || !w.is_finite() {
            return Err(DistanceError::Config(format!("weight must be positive and finite, got {w}")));
        }
        self.weights[v.0] = w;
        Ok(())
    }

    pub fn set_theta_offset(&mut self, v: VarIndex, t: T) -> Result<(), DistanceError> {
        if !(t >= T::zero()) || !t.is_finite() {
            return Err(DistanceError::Config(format!("theta offset must be finite and >= 0, got {t}")));
        }
        self.theta_offsets[v.0] = t;
        Ok(())
    }

    /// Installs a label metric after checking it is one.
    pub fn set_matrix(&mut self, g: &RoleGraph, v: VarIndex, m: Vec<Vec<T>>) -> Result<(), DistanceError> {
        let name = g.name(v);
        if g.kind(v) != VariableKind::Categorical {
            return Err(DistanceError::Config(format!("`{name}` is not categorical")));
        }
        let n = g.variable(v).labels.len();
        let bad = |msg: &str| Err(DistanceError::Config(format!("matrix of `{name}`: {msg}")));
        if m.len() != n || m.iter().any(|r| r.len() != n) {
            return bad(&format!("expected {n}x{n}"));
        }
        let tol = T::of(1e-12);
        for i in 0..n {
            if m[i][i] != T::zero() {
                return bad("diagonal must be zero");
            }
            for j in 0..n {
                if i != j && (!(m[i][j] > T::zero()) || !m[i][j].is_finite()) {
                    return bad("off-diagonal entries must be positive and finite");
                }
                if m[i][j] != m[j][i] {
                    return bad("not symmetric");
                }
                for k in 0..n {
                    if m[i][j] > m[i][k] + m[k][j] + tol {
                        return bad("violates the triangle inequality");
                    }
                }
            }
        }
        self.categorical[v.0] = Categorical::Matrix(m);
        Ok(())
    }

    /// Diameter of the universal set (without EXC) under the unscaled
    /// one-dimensional distance.
    pub fn unit_diameter(&self, g: &RoleGraph, v: VarIndex) -> T {
        let u = &g.universal_set(v).values;
        match &self.categorical[v.0] {
            Categorical::Matrix(m) => m.iter().flatten().copied().fold(T::zero(), T::max),
            Categorical::Indicator if g.kind(v) == VariableKind::Categorical => {
                if u.cardinality().unwrap_or(0) > 1 {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Categorical::Indicator => match u.numeric_hull() {
                Some((lo, hi)) => T::of(hi - lo),
                None => T::zero(),
            },
        }
    }

    pub fn from_file(g: &RoleGraph, file: &ConfigFile) -> Result<Self, DistanceError> {
        let mut cfg = Self::unit(g);
        cfg.theta_offsets.iter_mut().for_each(|t| *t = T::zero());
        if let Some(p) = &file.p {
            let order = match p {
                PValue::Num(x) => Order::Finite(T::of(*x)),
                PValue::Text(s) if s == "inf" || s == "infinity" => Order::Infinity,
                PValue::Text(s) => return Err(DistanceError::Config(format!("bad order `{s}`"))),
            };
            cfg = cfg.with_p(order)?;
        }
        let lookup = |name: &str| g.var(name).map_err(|_| DistanceError::Config(format!("unknown variable `{name}`")));
        for (name, &w) in &file.weights {
            cfg.set_weight(lookup(name)?, T::of(w))?;
        }
        for (name, c) in &file.categorical {
            let v = lookup(name)?;
            match c {
                CategoricalFile::Scale(s) => {
                    if g.kind(v) != VariableKind::Categorical {
                        return Err(DistanceError::Config(format!("`{name}` is not categorical")));
                    }
                    if file.weights.get(name).is_some_and(|w| w != s) {
                        return Err(DistanceError::Config(format!("`{name}` has both a weight and a different scale")));
                    }
                    cfg.set_weight(v, T::of(*s))?;
                }
                CategoricalFile::Matrix(m) => {
                    cfg.set_matrix(g, v, m.iter().map(|r| r.iter().map(|&x| T::of(x)).collect()).collect())?
                }
            }
        }
        for (name, &t) in &file.theta_offsets {
            let v = lookup(name)?;
            if !g.universal_set(v).excludable {
                return Err(DistanceError::NotExcludable(name.clone()));
            }
            cfg.set_theta_offset(v, T::of(t))?;
        }
        for (name, &t) in &file.thetas {
            let v = lookup(name)?;
            if !g.universal_set(v).excludable {
                return Err(DistanceError::NotExcludable(name.clone()));
            }
            let lb = super::theta_lower_bound(g, &cfg, v)?;
            let t = T::of(t);
            if lb.is_infinite() && t.is_infinite() {
                continue;
            }
            if t < lb {
                return Err(DistanceError::ThetaBelowBound { var: name.clone(), theta: t.to_f64_lossy(), bound: lb.to_f64_lossy() });
            }
            let offset = t - lb;
            // An explicit offset wins so written configs read back exactly.
            if let Some(&o) = file.theta_offsets.get(name) {
                if (T::of(o) - offset).abs() > T::of(1e-9) * T::one().max(t) {
                    return Err(DistanceError::Config(format!("`{name}`: theta and theta offset disagree")));
                }
                continue;
            }
            cfg.set_theta_offset(v, offset)?;
        }
        for v in g.indices() {
            if g.universal_set(v).excludable && super::theta(g, &cfg, v)? == T::zero() {
                return Err(DistanceError::Config(format!("`{}`: theta must be positive", g.name(v))));
            }
        }
        Ok(cfg)
    }

    pub fn to_file(&self, g: &RoleGraph) -> ConfigFile {
        let mut f = ConfigFile { p: Some(self.p.to_json()), ..ConfigFile::default() };
        for v in g.indices() {
            let name = g.name(v).to_string();
            f.weights.insert(name.clone(), self.weights[v.0].to_f64_lossy());
            if let Categorical::Matrix(m) = &self.categorical[v.0] {
                f.categorical.insert(
                    name.clone(),
                    CategoricalFile::Matrix(m.iter().map(|r| r.iter().map(|x| x.to_f64_lossy()).collect()).collect()),
                );
            }
            if g.universal_set(v).excludable {
                f.theta_offsets.insert(name.clone(), self.theta_offsets[v.0].to_f64_lossy());
                if let Ok(t) = super::theta(g, self, v) {
                    if t.is_finite() {
                        f.thetas.insert(name, t.to_f64_lossy());
                    }
                }
            }
        }
        f
    }
}

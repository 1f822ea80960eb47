use std::fmt;
use std::str::FromStr;

use crate::distance::DistanceKind;
use crate::domain::{DomainError, ExtendedPoint, Role, RoleGraph, Signature, VarIndex};
use crate::value::{Value, VariableKind};

/// How training data is split into independently modelled groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Approach {
    /// One model over every point, meta distance.
    Meta,
    /// One model per inclusion signature, Euclidean distance on its variables.
    Sub,
    /// One model per value of a partition key, shared-variable distance.
    Hybrid,
}

impl Approach {
    pub const ALL: [Approach; 3] = [Approach::Sub, Approach::Hybrid, Approach::Meta];

    pub fn distance_kind(self) -> DistanceKind {
        match self {
            Approach::Meta => DistanceKind::Meta,
            Approach::Sub => DistanceKind::Sub,
            Approach::Hybrid => DistanceKind::Hybrid,
        }
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Approach::Meta => "meta",
            Approach::Sub => "sub",
            Approach::Hybrid => "hybrid",
        })
    }
}

impl FromStr for Approach {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "meta" => Ok(Approach::Meta),
            "sub" => Ok(Approach::Sub),
            "hybrid" => Ok(Approach::Hybrid),
            _ => Err(format!("unknown approach `{s}` (expected meta, sub or hybrid)")),
        }
    }
}

/// Assignment of extended points to routes, plus the variables that carry
/// tunable weights on each route.
#[derive(Debug, Clone)]
pub struct Routing {
    approach: Approach,
    key: Option<VarIndex>,
    key_values: Vec<Value>,
    signatures: Vec<Signature>,
    variables: Vec<Vec<VarIndex>>,
    thetas: Vec<VarIndex>,
}

impl Routing {
    /// `key` only matters for Hybrid; `None` there means a single partition.
    pub fn new(g: &RoleGraph, approach: Approach, key: Option<VarIndex>) -> Result<Self, DomainError> {
        let signatures = g.enumerate_signatures()?;
        let mut r = Routing { approach, key: None, key_values: Vec::new(), signatures, variables: Vec::new(), thetas: Vec::new() };
        match approach {
            Approach::Meta => {
                r.variables = vec![g.indices().collect()];
                r.thetas = g.indices().filter(|&v| g.universal_set(v).excludable).collect();
            }
            Approach::Sub => r.variables = r.signatures.iter().map(Signature::free).collect(),
            Approach::Hybrid => match key {
                None => r.variables = vec![includable(g, &r.signatures, |_| true)],
                Some(k) => {
                    let u = g.universal_set(k);
                    let mut values = u.values.enumerate(1024).ok_or(DomainError::NotEnumerable(g.name(k).to_string()))?;
                    if u.excludable {
                        values.push(Value::Exc);
                    }
                    for &x in &values {
                        let compatible = |s: &Signature| {
                            s.configurations.iter().any(|c| c.iter().find(|e| e.0 == k).is_none_or(|e| e.1 == x))
                        };
                        let vars = includable(g, &r.signatures, compatible).into_iter().filter(|&v| v != k).collect();
                        r.variables.push(vars);
                    }
                    r.key = Some(k);
                    r.key_values = values;
                }
            },
        }
        Ok(r)
    }

    /// Default Hybrid key: the first categorical meta variable that controls
    /// an inclusion. Numeric controllers such as a layer count are left to
    /// the shared-variable distance.
    pub fn default_key(g: &RoleGraph) -> Option<VarIndex> {
        let controllers = g.inclusion_controllers();
        g.indices().find(|&v| {
            g.role_of(v) == Role::Meta && g.kind(v) == VariableKind::Categorical && controllers.contains(&v)
        })
    }

    pub fn approach(&self) -> Approach {
        self.approach
    }

    pub fn key(&self) -> Option<VarIndex> {
        self.key
    }

    pub fn signatures(&self) -> &[Signature] {
        &self.signatures
    }

    pub fn routes(&self) -> usize {
        self.variables.len()
    }

    /// Variables whose weights are tuned on `route`.
    pub fn route_variables(&self, route: usize) -> &[VarIndex] {
        &self.variables[route]
    }

    /// Excludable variables whose penalties are tuned (Meta only).
    pub fn theta_variables(&self) -> &[VarIndex] {
        &self.thetas
    }

    /// Number of distance parameters over all routes.
    pub fn parameter_count(&self) -> usize {
        self.variables.iter().map(Vec::len).sum::<usize>() + self.thetas.len()
    }

    pub fn route_of(&self, x: &ExtendedPoint) -> Option<usize> {
        match self.approach {
            Approach::Meta => Some(0),
            Approach::Sub => RoleGraph::signature_index(&self.signatures, &x.included()),
            Approach::Hybrid => match self.key {
                None => Some(0),
                Some(k) => self.key_values.iter().position(|&v| v == x.get(k)),
            },
        }
    }

    /// Short label for reports, e.g. `o=ADAM` or `o=ASGD,l=2`.
    pub fn route_label(&self, g: &RoleGraph, route: usize) -> String {
        match self.approach {
            Approach::Meta => "all".into(),
            Approach::Sub => {
                let s = &self.signatures[route];
                if s.fixed.is_empty() {
                    return format!("signature {route}");
                }
                s.fixed.iter().map(|&(v, x)| format!("{}={}", g.name(v), g.format_value(v, x))).collect::<Vec<_>>().join(",")
            }
            Approach::Hybrid => match self.key {
                None => "all".into(),
                Some(k) => format!("{}={}", g.name(k), g.format_value(k, self.key_values[route])),
            },
        }
    }
}

fn includable(g: &RoleGraph, sigs: &[Signature], keep: impl Fn(&Signature) -> bool) -> Vec<VarIndex> {
    g.indices().filter(|&v| sigs.iter().any(|s| keep(s) && s.includes(v))).collect()
}

/// Meta: `|V|` weights plus one penalty per excludable variable. Sub: the
/// free included variables of every signature. Hybrid: the variables
/// includable within each partition, minus the key.
pub fn parameter_count(g: &RoleGraph, approach: Approach, key: Option<VarIndex>) -> Result<usize, DomainError> {
    Ok(Routing::new(g, approach, key)?.parameter_count())
}

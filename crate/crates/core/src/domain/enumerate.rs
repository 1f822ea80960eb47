use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::build::{family_members, Violation};
use super::spec::ConstantSpec;
use super::{DomainError, RoleGraph, VarIndex};
use crate::expr::{Env, Expr, ExprError, Resolver};
use crate::interval::Interval;
use crate::set::{SetUnion, UniversalSet, ValueSet};
use crate::value::{Value, VariableKind};

const PER_VARIABLE_CAP: u64 = 10_000;
const CONFIGURATION_CAP: u64 = 1_000_000;

/// One inclusion pattern of the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Signature {
    /// Included variables in declaration order.
    pub included: Vec<VarIndex>,
    /// Every assignment of the inclusion controllers leading to this pattern.
    pub configurations: Vec<Vec<(VarIndex, Value)>>,
    /// Included controllers holding the same value in every configuration.
    pub fixed: Vec<(VarIndex, Value)>,
}

impl Signature {
    pub fn includes(&self, v: VarIndex) -> bool {
        self.included.binary_search(&v).is_ok()
    }

    pub fn is_fixed(&self, v: VarIndex) -> bool {
        self.fixed.iter().any(|f| f.0 == v)
    }

    /// Included variables that vary within the signature.
    pub fn free(&self) -> Vec<VarIndex> {
        self.included.iter().copied().filter(|&v| !self.is_fixed(v)).collect()
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Slot {
    Exact(Value),
    /// Restricted set of a variable whose value is not enumerated.
    Range(ValueSet),
}

#[derive(Debug)]
pub(crate) enum EnumError {
    TooLarge,
    NotEnumerable(VarIndex),
    Domain(DomainError),
}

struct SlotEnv<'a> {
    g: &'a RoleGraph,
    slots: &'a [Option<Slot>],
}

impl Env for SlotEnv<'_> {
    fn lookup(&self, v: VarIndex) -> Result<Interval, ExprError> {
        let name = || self.g.name(v).to_string();
        match &self.slots[v.0] {
            Some(Slot::Exact(Value::Exc)) | Some(Slot::Range(ValueSet::Exc)) => Err(ExprError::ExcludedReference(name())),
            Some(Slot::Exact(x)) => x.as_f64().map(Interval::point).ok_or_else(|| ExprError::NotNumeric(name())),
            Some(Slot::Range(s)) => s
                .numeric_hull()
                .map(|(a, b)| Interval::new(a, b))
                .ok_or_else(|| ExprError::NotNumeric(name())),
            None => Err(ExprError::Unresolved),
        }
    }
}

impl RoleGraph {
    /// Visits every assignment of `exact` (topologically ordered) reachable
    /// through the decree rules; variables in `free` get their restricted set.
    pub(crate) fn for_each_configuration(
        &self,
        exact: &[VarIndex],
        free: &[VarIndex],
        f: &mut dyn FnMut(&[Option<Slot>]),
    ) -> Result<u64, EnumError> {
        let mut slots = vec![None; self.len()];
        let mut count = 0u64;
        self.visit(exact, free, 0, &mut slots, &mut count, f)?;
        Ok(count)
    }

    fn visit(
        &self,
        exact: &[VarIndex],
        free: &[VarIndex],
        depth: usize,
        slots: &mut Vec<Option<Slot>>,
        count: &mut u64,
        f: &mut dyn FnMut(&[Option<Slot>]),
    ) -> Result<(), EnumError> {
        let exact_value = |slots: &[Option<Slot>], p: VarIndex| match &slots[p.0] {
            Some(Slot::Exact(x)) => Some(*x),
            _ => None,
        };
        if depth == exact.len() {
            for &x in free {
                let set = self.restricted_set_with(x, &|p| exact_value(slots, p)).map_err(EnumError::Domain)?;
                slots[x.0] = Some(Slot::Range(set));
            }
            *count += 1;
            if *count > CONFIGURATION_CAP {
                return Err(EnumError::TooLarge);
            }
            f(slots);
            return Ok(());
        }
        let v = exact[depth];
        let set = self.restricted_set_with(v, &|p| exact_value(slots, p)).map_err(EnumError::Domain)?;
        let values = set.enumerate(PER_VARIABLE_CAP).ok_or(EnumError::NotEnumerable(v))?;
        for x in values {
            slots[v.0] = Some(Slot::Exact(x));
            self.visit(exact, free, depth + 1, slots, count, f)?;
        }
        slots[v.0] = None;
        Ok(())
    }

    fn in_topological_order(&self, set: &BTreeSet<VarIndex>) -> Vec<VarIndex> {
        self.topo.iter().copied().filter(|v| set.contains(v)).collect()
    }

    /// Splits an ancestor-closed set into variables that must be enumerated
    /// and leaves (no child inside the set) that can be carried as ranges.
    fn split_closure(&self, closure: &BTreeSet<VarIndex>, keep_exact: &BTreeSet<VarIndex>) -> (Vec<VarIndex>, Vec<VarIndex>) {
        let is_free = |v: &VarIndex| !keep_exact.contains(v) && !self.children(*v).iter().any(|c| closure.contains(c));
        let free: BTreeSet<VarIndex> = closure.iter().copied().filter(is_free).collect();
        let exact: BTreeSet<VarIndex> = closure.difference(&free).copied().collect();
        (self.in_topological_order(&exact), self.in_topological_order(&free))
    }

    pub(super) fn evaluate_constant(&self, c: &ConstantSpec) -> Result<f64, String> {
        if let Some(x) = c.value {
            return if x.is_finite() { Ok(x) } else { Err("value must be finite".into()) };
        }
        let (text, maximize) = match (&c.max_of, &c.min_of) {
            (Some(t), _) => (t, true),
            (_, Some(t)) => (t, false),
            _ => return Err("no definition".into()),
        };
        let expr = Expr::parse(text).and_then(|e| e.resolve(self)).map_err(|e| e.to_string())?;
        let refs: BTreeSet<VarIndex> = expr.references().into_iter().collect();
        let mut closure = refs.clone();
        for &r in &refs {
            closure.extend(self.ancestors(r));
        }
        let (exact, free) = self.split_closure(&closure, &BTreeSet::new());
        let mut best: Option<f64> = None;
        self.for_each_configuration(&exact, &free, &mut |slots| {
            if let Ok(iv) = expr.eval(&SlotEnv { g: self, slots }) {
                let x = if maximize { iv.hi } else { iv.lo };
                best = Some(match best {
                    None => x,
                    Some(b) if maximize => b.max(x),
                    Some(b) => b.min(x),
                });
            }
        })
        .map_err(|e| match e {
            EnumError::TooLarge => "too many configurations to enumerate".to_string(),
            EnumError::NotEnumerable(v) => format!("`{}` does not have a finite domain", self.name(v)),
            EnumError::Domain(d) => d.to_string(),
        })?;
        match best {
            Some(x) if x.is_finite() => Ok(x),
            Some(_) => Err("expression is unbounded".into()),
            None => Err("expression cannot be evaluated in any configuration".into()),
        }
    }

    /// Checks every rule case against the declared universal set and, when
    /// ancestors are enumerable, that the union of restricted sets equals it.
    pub(super) fn audit_universal(&self, v: VarIndex) -> Vec<Violation> {
        let Some(rule) = self.rule(v) else {
            return Vec::new();
        };
        let var = self.variable(v);
        let mut out = Vec::new();
        let tested: BTreeSet<VarIndex> = rule.cases.iter().flat_map(|c| c.when.iter().map(|w| w.0)).collect();
        let closure = self.ancestors(v);
        let (exact, free) = self.split_closure(&closure, &tested);

        let mut union = SetUnion::default();
        let mut reported: BTreeSet<usize> = BTreeSet::new();
        let result = self.for_each_configuration(&exact, &free, &mut |slots| {
            let lookup = |p: VarIndex| match &slots[p.0] {
                Some(Slot::Exact(x)) => Some(*x),
                _ => None,
            };
            let Ok(Some(case)) = self.matching_case(v, &lookup) else {
                return;
            };
            let idx = rule.cases.iter().position(|c| std::ptr::eq(c, case)).unwrap_or(0);
            match self.concretize(v, &case.set, &SlotEnv { g: self, slots }) {
                Ok(set) => {
                    if !var.universal.admits(&set) && reported.insert(idx) {
                        out.push(Violation::CaseOutsideUniversal {
                            var: var.name.clone(),
                            case: idx,
                            detail: self.describe_set(v, &set),
                        });
                    }
                    union.add(&set);
                }
                Err(e) => {
                    if reported.insert(idx) {
                        out.push(Violation::ExpressionError { var: var.name.clone(), case: idx, error: e.to_string() });
                    }
                }
            }
        });
        match result {
            Ok(_) => {
                let mut declared = SetUnion::default();
                declared.add_universal(&var.universal);
                if out.is_empty() && union.normalized() != declared.normalized() {
                    out.push(Violation::UniversalMismatch {
                        var: var.name.clone(),
                        declared: self.describe_universal(v, &var.universal),
                        derived: self.describe_normalized(v, &union),
                    });
                }
            }
            Err(EnumError::Domain(e)) => out.push(Violation::ExpressionError {
                var: var.name.clone(),
                case: 0,
                error: e.to_string(),
            }),
            Err(_) => out.extend(self.coarse_case_check(v)),
        }
        out
    }

    /// Fallback when ancestors cannot be enumerated: bound expressions are
    /// evaluated over the parents' whole universal ranges.
    fn coarse_case_check(&self, v: VarIndex) -> Vec<Violation> {
        let var = self.variable(v);
        let mut out = Vec::new();
        let env = |p: VarIndex| -> Result<Interval, ExprError> {
            self.universal_set(p)
                .values
                .numeric_hull()
                .map(|(a, b)| Interval::new(a, b))
                .ok_or_else(|| ExprError::NotNumeric(self.name(p).to_string()))
        };
        for (i, case) in self.rule(v).map(|r| r.cases.as_slice()).unwrap_or(&[]).iter().enumerate() {
            if !matches!(case.set, ValueSet::IntervalExpr { .. }) {
                continue;
            }
            match self.concretize(v, &case.set, &env) {
                Ok(set) if !var.universal.admits(&set) => out.push(Violation::CaseOutsideUniversal {
                    var: var.name.clone(),
                    case: i,
                    detail: self.describe_set(v, &set),
                }),
                Ok(_) => {}
                Err(e) => out.push(Violation::ExpressionError { var: var.name.clone(), case: i, error: e.to_string() }),
            }
        }
        out
    }

    fn describe_universal(&self, v: VarIndex, u: &UniversalSet) -> String {
        let base = self.describe_set(v, &u.values);
        if u.excludable {
            format!("{base} + EXC")
        } else {
            base
        }
    }

    fn describe_normalized(&self, v: VarIndex, u: &SetUnion) -> String {
        let n = u.normalized();
        let mut parts: Vec<String> = Vec::new();
        for r in &n.reals {
            parts.push(self.describe_set(v, &ValueSet::Interval(*r)));
        }
        for &(lo, hi) in &n.ints {
            parts.push(self.describe_set(v, &ValueSet::IntRange { lo, hi }));
        }
        if !n.cats.is_empty() {
            parts.push(self.describe_set(v, &ValueSet::Cats(n.cats.clone())));
        }
        if n.exc {
            parts.push("EXC".into());
        }
        if parts.is_empty() {
            "{}".into()
        } else {
            parts.join(" + ")
        }
    }

    /// Variables at the tail of an inclusion arc, plus their ancestors.
    pub fn inclusion_controllers(&self) -> BTreeSet<VarIndex> {
        let direct: BTreeSet<VarIndex> =
            self.arcs.iter().filter(|a| a.kind.controls_inclusion()).map(|a| a.parent).collect();
        let mut all = direct.clone();
        for &c in &direct {
            all.extend(self.ancestors(c));
        }
        all
    }

    /// Inclusion patterns in enumeration order (controllers in topological
    /// order, values ascending).
    pub fn enumerate_signatures(&self) -> Result<Vec<Signature>, DomainError> {
        let controllers = self.inclusion_controllers();
        for &c in &controllers {
            if self.kind(c) == VariableKind::Continuous {
                return Err(DomainError::ContinuousController(self.name(c).to_string()));
            }
        }
        let order = self.in_topological_order(&controllers);
        let mut sigs: Vec<Signature> = Vec::new();
        let mut index: HashMap<Vec<VarIndex>, usize> = HashMap::new();
        let mut failure = None;
        self.for_each_configuration(&order, &[], &mut |slots| {
            let value = |p: VarIndex| match &slots[p.0] {
                Some(Slot::Exact(x)) => Some(*x),
                _ => None,
            };
            let mut included = Vec::new();
            for v in self.indices() {
                let inc = if let Some(x) = value(v) {
                    !x.is_exc()
                } else {
                    match self.excluded_given_controllers(v, &value) {
                        Some(exc) => !exc,
                        None => {
                            failure.get_or_insert(v);
                            return;
                        }
                    }
                };
                if inc {
                    included.push(v);
                }
            }
            let config: Vec<(VarIndex, Value)> = order.iter().map(|&c| (c, value(c).unwrap_or(Value::Exc))).collect();
            let i = *index.entry(included.clone()).or_insert_with(|| {
                sigs.push(Signature { included, configurations: Vec::new(), fixed: Vec::new() });
                sigs.len() - 1
            });
            sigs[i].configurations.push(config);
        })
        .map_err(|e| match e {
            EnumError::Domain(d) => d,
            EnumError::NotEnumerable(v) => DomainError::NotEnumerable(self.name(v).to_string()),
            EnumError::TooLarge => DomainError::NotEnumerable(String::new()),
        })?;
        if let Some(v) = failure {
            return Err(DomainError::NoMatchingCase(self.name(v).to_string()));
        }
        for s in &mut sigs {
            let first = &s.configurations[0];
            s.fixed = first
                .iter()
                .enumerate()
                .filter(|(i, (c, x))| {
                    !x.is_exc() && s.includes(*c) && s.configurations.iter().all(|cfg| cfg[*i].1.key() == x.key())
                })
                .map(|(_, cx)| *cx)
                .collect();
        }
        Ok(sigs)
    }

    /// Whether `v` is excluded, judged from the rule cases whose conditions
    /// on known (controller) parents hold. `None` if no case applies.
    fn excluded_given_controllers(&self, v: VarIndex, value: &dyn Fn(VarIndex) -> Option<Value>) -> Option<bool> {
        let Some(rule) = self.rule(v) else {
            return Some(false);
        };
        rule.cases
            .iter()
            .find(|c| c.when.iter().all(|(p, s)| value(*p).is_none_or(|x| s.contains(&x))))
            .map(|c| c.set.is_exc())
    }

    /// Index of the signature whose included set matches `included`.
    pub fn signature_index(sigs: &[Signature], included: &[VarIndex]) -> Option<usize> {
        sigs.iter().position(|s| s.included == included)
    }
}

impl Resolver for RoleGraph {
    fn variable(&self, name: &str) -> Option<VarIndex> {
        self.by_name.get(name).copied()
    }

    fn constant(&self, name: &str) -> Option<f64> {
        RoleGraph::constant(self, name)
    }

    fn family(&self, prefix: &str) -> Option<BTreeMap<i64, VarIndex>> {
        family_members(&self.vars, prefix)
    }
}

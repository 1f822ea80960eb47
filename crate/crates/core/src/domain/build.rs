use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, HashSet};
use std::cmp::Reverse;
use std::fmt;

use super::spec::{CaseSpec, DomainSpec, SetDescriptor};
use super::{DecreeArc, DecreeRule, RoleGraph, RuleCase, VarIndex, Variable};
use crate::expr::{Expr, ExprError, Resolver};
use crate::set::{RealInterval, UniversalSet, ValueSet};
use crate::value::{Value, VariableKind};

const RESERVED: [&str; 3] = ["EXC", "target", "split"];
const MAX_RULE_COMBINATIONS: u64 = 200_000;

/// One problem found while validating a domain spec.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyName,
    ReservedName(String),
    DuplicateVariable(String),
    InvalidUniversal { var: String, reason: String },
    UnknownArcEndpoint { parent: String, child: String },
    /// An arc from a variable to itself; it would be both root and leaf.
    SelfLoop(String),
    DuplicateArc { parent: String, child: String },
    Cycle(Vec<String>),
    MissingRule(String),
    DuplicateRule(String),
    UnknownRuleChild(String),
    RuleWithoutParents(String),
    ConditionOnNonParent { var: String, case: usize, parent: String },
    InvalidCaseSet { var: String, case: usize, reason: String },
    CaseOutsideUniversal { var: String, case: usize, detail: String },
    ExpressionReferencesNonParent { var: String, case: usize, name: String },
    ExpressionError { var: String, case: usize, error: String },
    NonExhaustiveRule { var: String, assignment: String },
    OverlappingRule { var: String, cases: Vec<usize>, assignment: String },
    ExclusionNotDeclared { var: String, case: usize },
    ExcludableWithoutInclusionArc(String),
    /// Exclusion depends on a parent that is not upstream of any inclusion arc.
    UncontrolledInclusion(String),
    UniversalMismatch { var: String, declared: String, derived: String },
    Constant { name: String, reason: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            EmptyName => write!(f, "variable with an empty name"),
            ReservedName(n) => write!(f, "`{n}` is a reserved name"),
            DuplicateVariable(n) => write!(f, "variable `{n}` declared more than once"),
            InvalidUniversal { var, reason } => write!(f, "variable `{var}`: invalid universal set: {reason}"),
            UnknownArcEndpoint { parent, child } => write!(f, "arc {parent} -> {child}: unknown variable"),
            SelfLoop(n) => write!(f, "arc {n} -> {n}: a variable cannot decree itself"),
            DuplicateArc { parent, child } => write!(f, "arc {parent} -> {child} declared more than once"),
            Cycle(names) => write!(f, "cycle: {}", names.join(" -> ")),
            MissingRule(n) => write!(f, "variable `{n}` has parents but no decree rule"),
            DuplicateRule(n) => write!(f, "variable `{n}` has more than one decree rule"),
            UnknownRuleChild(n) => write!(f, "decree rule for unknown variable `{n}`"),
            RuleWithoutParents(n) => write!(f, "decree rule for `{n}`, which has no parents"),
            ConditionOnNonParent { var, case, parent } => {
                write!(f, "rule `{var}` case {case}: condition on `{parent}`, which is not a parent")
            }
            InvalidCaseSet { var, case, reason } => write!(f, "rule `{var}` case {case}: {reason}"),
            CaseOutsideUniversal { var, case, detail } => {
                write!(f, "rule `{var}` case {case}: set {detail} escapes the universal set")
            }
            ExpressionReferencesNonParent { var, case, name } => {
                write!(f, "rule `{var}` case {case}: bound expression reads `{name}`, which is not a parent")
            }
            ExpressionError { var, case, error } => write!(f, "rule `{var}` case {case}: {error}"),
            NonExhaustiveRule { var, assignment } => write!(f, "rule `{var}`: no case matches {assignment}"),
            OverlappingRule { var, cases, assignment } => write!(
                f,
                "rule `{var}`: cases {} all match {assignment}",
                cases.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ")
            ),
            ExclusionNotDeclared { var, case } => {
                write!(f, "rule `{var}` case {case}: yields EXC but `{var}` is not excludable")
            }
            ExcludableWithoutInclusionArc(n) => {
                write!(f, "variable `{n}` is excludable but has no incoming inclusion arc")
            }
            UncontrolledInclusion(n) => {
                write!(f, "rule `{n}`: inclusion depends on a parent that controls no inclusion arc")
            }
            UniversalMismatch { var, declared, derived } => write!(
                f,
                "variable `{var}`: declared universal set {declared} differs from the union of its restricted sets {derived}"
            ),
            Constant { name, reason } => write!(f, "constant `{name}`: {reason}"),
        }
    }
}

/// Checks every graph invariant; an empty list means the spec is valid.
pub fn validate_graph(spec: &DomainSpec) -> Vec<Violation> {
    match build(spec) {
        Ok(_) => Vec::new(),
        Err(v) => v,
    }
}

pub(super) fn build(spec: &DomainSpec) -> Result<RoleGraph, Vec<Violation>> {
    let mut out = Vec::new();

    let mut vars = Vec::new();
    let mut by_name = HashMap::new();
    for vs in &spec.variables {
        if vs.name.is_empty() {
            out.push(Violation::EmptyName);
            continue;
        }
        if RESERVED.contains(&vs.name.as_str()) {
            out.push(Violation::ReservedName(vs.name.clone()));
        }
        if by_name.contains_key(&vs.name) {
            out.push(Violation::DuplicateVariable(vs.name.clone()));
            continue;
        }
        let (values, labels) = match universal_of(&vs.universal, vs.kind) {
            Ok(x) => x,
            Err(reason) => {
                out.push(Violation::InvalidUniversal { var: vs.name.clone(), reason });
                continue;
            }
        };
        by_name.insert(vs.name.clone(), VarIndex(vars.len()));
        vars.push(Variable {
            name: vs.name.clone(),
            kind: vs.kind,
            universal: UniversalSet { values, excludable: vs.excludable },
            labels,
        });
    }

    let n = vars.len();
    let mut arcs: Vec<DecreeArc> = Vec::new();
    let mut parents = vec![Vec::new(); n];
    let mut children = vec![Vec::new(); n];
    for a in &spec.arcs {
        let (Some(&p), Some(&c)) = (by_name.get(&a.parent), by_name.get(&a.child)) else {
            out.push(Violation::UnknownArcEndpoint { parent: a.parent.clone(), child: a.child.clone() });
            continue;
        };
        if p == c {
            out.push(Violation::SelfLoop(a.parent.clone()));
            continue;
        }
        if arcs.iter().any(|x| x.parent == p && x.child == c) {
            out.push(Violation::DuplicateArc { parent: a.parent.clone(), child: a.child.clone() });
            continue;
        }
        arcs.push(DecreeArc { parent: p, child: c, kind: a.kind });
        parents[c.0].push(p);
        children[p.0].push(c);
    }
    parents.iter_mut().for_each(|x| x.sort());
    children.iter_mut().for_each(|x| x.sort());

    let topo = match topological_sort(n, &parents, &children) {
        Ok(t) => t,
        Err(cycle) => {
            out.push(Violation::Cycle(cycle.iter().map(|v| vars[v.0].name.clone()).collect()));
            Vec::new()
        }
    };

    let mut constant_names = HashSet::new();
    for c in &spec.constants {
        let given = [c.value.is_some(), c.max_of.is_some(), c.min_of.is_some()];
        let reason = if by_name.contains_key(&c.name) {
            Some("name clashes with a variable")
        } else if !constant_names.insert(c.name.clone()) {
            Some("declared more than once")
        } else if given.iter().filter(|&&g| g).count() != 1 {
            Some("exactly one of `value`, `max_of` and `min_of` is required")
        } else {
            None
        };
        if let Some(r) = reason {
            out.push(Violation::Constant { name: c.name.clone(), reason: r.into() });
        }
    }

    let controllers = controller_closure(&arcs, &parents);
    let mut rules: Vec<Option<DecreeRule>> = vec![None; n];
    for rs in &spec.rules {
        let Some(&child) = by_name.get(&rs.child) else {
            out.push(Violation::UnknownRuleChild(rs.child.clone()));
            continue;
        };
        if rules[child.0].is_some() {
            out.push(Violation::DuplicateRule(rs.child.clone()));
            continue;
        }
        if parents[child.0].is_empty() {
            out.push(Violation::RuleWithoutParents(rs.child.clone()));
            continue;
        }
        let ctx = Ctx { vars: &vars, by_name: &by_name, parents: &parents[child.0], constant_names: &constant_names };
        let cases = rs
            .cases
            .iter()
            .enumerate()
            .filter_map(|(i, cs)| ctx.case(child, i, cs, &mut out))
            .collect::<Vec<_>>();
        if cases.len() == rs.cases.len() {
            check_cases(&vars, &controllers, child, &cases, &mut out);
        }
        rules[child.0] = Some(DecreeRule { child, cases });
    }
    for v in 0..n {
        if !parents[v].is_empty() && rules[v].is_none() && !spec.rules.iter().any(|r| r.child == vars[v].name) {
            out.push(Violation::MissingRule(vars[v].name.clone()));
        }
        if vars[v].universal.excludable
            && !arcs.iter().any(|a| a.child == VarIndex(v) && a.kind.controls_inclusion())
        {
            out.push(Violation::ExcludableWithoutInclusionArc(vars[v].name.clone()));
        }
    }

    if !out.is_empty() {
        return Err(out);
    }

    let mut graph = RoleGraph { vars, by_name, arcs, parents, children, rules, topo, constants: Vec::new() };
    for c in &spec.constants {
        match graph.evaluate_constant(c) {
            Ok(x) => graph.constants.push((c.name.clone(), x)),
            Err(reason) => out.push(Violation::Constant { name: c.name.clone(), reason }),
        }
    }
    if !out.is_empty() {
        return Err(out);
    }
    graph.bind_constants(&mut out);
    if !out.is_empty() {
        return Err(out);
    }
    for v in graph.indices().collect::<Vec<_>>() {
        out.extend(graph.audit_universal(v));
    }
    if out.is_empty() {
        Ok(graph)
    } else {
        Err(out)
    }
}

fn universal_of(desc: &SetDescriptor, kind: VariableKind) -> Result<(ValueSet, Vec<String>), String> {
    match desc {
        SetDescriptor::Exc(_) => Err("EXC cannot be a universal set; use `excludable`".into()),
        SetDescriptor::IntervalExpr { .. } => Err("bound expressions are only allowed in rules".into()),
        SetDescriptor::Cats { cats } => {
            if kind != VariableKind::Categorical {
                return Err(format!("labels given for a {kind} variable"));
            }
            let mut seen = HashSet::new();
            for c in cats {
                if c == "EXC" {
                    return Err("`EXC` cannot be a label".into());
                }
                if !seen.insert(c) {
                    return Err(format!("label `{c}` repeated"));
                }
            }
            if cats.is_empty() {
                return Err("empty label set".into());
            }
            Ok((ValueSet::Cats((0..cats.len() as u32).collect()), cats.clone()))
        }
        d => Ok((convert(d, kind, &[])?, Vec::new())),
    }
}

/// Converts a concrete descriptor; bound expressions are parsed but not resolved.
fn convert(desc: &SetDescriptor, kind: VariableKind, labels: &[String]) -> Result<ValueSet, String> {
    let need = |k: VariableKind, what: &str| {
        if kind == k {
            Ok(())
        } else {
            Err(format!("{what} given for a {kind} variable"))
        }
    };
    match desc {
        SetDescriptor::Exc(_) => Ok(ValueSet::Exc),
        SetDescriptor::Interval { interval, open } => {
            need(VariableKind::Continuous, "an interval")?;
            let (Some(lo), Some(hi)) = (interval[0].value(), interval[1].value()) else {
                return Err("interval bounds must be numbers, `inf` or `-inf`".into());
            };
            let iv = RealInterval {
                lo,
                hi,
                lo_open: open[0] || lo.is_infinite(),
                hi_open: open[1] || hi.is_infinite(),
            };
            if iv.is_empty() || lo.is_nan() || hi.is_nan() {
                return Err(format!("empty interval [{lo}, {hi}]"));
            }
            Ok(ValueSet::Interval(iv))
        }
        SetDescriptor::Ints { ints } => {
            need(VariableKind::Integer, "integers")?;
            if ints.is_empty() {
                return Err("empty integer set".into());
            }
            Ok(ValueSet::Ints(ints.iter().copied().collect()))
        }
        SetDescriptor::Range { range } => {
            need(VariableKind::Integer, "an integer range")?;
            if range[0] > range[1] {
                return Err(format!("empty range {}..{}", range[0], range[1]));
            }
            Ok(ValueSet::IntRange { lo: range[0], hi: range[1] })
        }
        SetDescriptor::Cats { cats } => {
            need(VariableKind::Categorical, "labels")?;
            if cats.is_empty() {
                return Err("empty label set".into());
            }
            let mut out = BTreeSet::new();
            for c in cats {
                let i = labels.iter().position(|l| l == c).ok_or_else(|| format!("unknown label `{c}`"))?;
                out.insert(i as u32);
            }
            Ok(ValueSet::Cats(out))
        }
        SetDescriptor::IntervalExpr { interval_expr } => {
            need(VariableKind::Continuous, "a bound expression")?;
            let parse = |i: usize| Expr::parse(&interval_expr[i].text()).map_err(|e| e.to_string());
            Ok(ValueSet::IntervalExpr { lo: parse(0)?, hi: parse(1)? })
        }
    }
}

/// Kahn's algorithm, smallest declaration index first. On failure returns
/// one cycle, closed (first name repeated at the end).
fn topological_sort(
    n: usize,
    parents: &[Vec<VarIndex>],
    children: &[Vec<VarIndex>],
) -> Result<Vec<VarIndex>, Vec<VarIndex>> {
    let mut indeg: Vec<usize> = parents.iter().map(|p| p.len()).collect();
    let mut heap: BinaryHeap<Reverse<usize>> = (0..n).filter(|&v| indeg[v] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(v)) = heap.pop() {
        order.push(VarIndex(v));
        for c in &children[v] {
            indeg[c.0] -= 1;
            if indeg[c.0] == 0 {
                heap.push(Reverse(c.0));
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }
    // Every remaining node has a remaining parent; walk parents until a repeat.
    let start = (0..n).find(|&v| indeg[v] > 0).unwrap_or(0);
    let mut path = vec![start];
    let mut pos = HashMap::from([(start, 0usize)]);
    let mut cur = start;
    loop {
        let next = parents[cur].iter().find(|p| indeg[p.0] > 0).map(|p| p.0).unwrap_or(start);
        if let Some(&i) = pos.get(&next) {
            let mut cycle: Vec<VarIndex> = path[i..].iter().rev().map(|&v| VarIndex(v)).collect();
            cycle.push(cycle[0]);
            return Err(cycle);
        }
        pos.insert(next, path.len());
        path.push(next);
        cur = next;
    }
}

struct Ctx<'a> {
    vars: &'a [Variable],
    by_name: &'a HashMap<String, VarIndex>,
    parents: &'a [VarIndex],
    constant_names: &'a HashSet<String>,
}

impl Resolver for Ctx<'_> {
    fn variable(&self, name: &str) -> Option<VarIndex> {
        self.by_name.get(name).copied()
    }

    fn constant(&self, _name: &str) -> Option<f64> {
        None
    }

    fn family(&self, prefix: &str) -> Option<BTreeMap<i64, VarIndex>> {
        family_members(self.vars, prefix)
    }

    fn defer(&self, name: &str) -> bool {
        self.constant_names.contains(name)
    }
}

pub(super) fn family_members(vars: &[Variable], prefix: &str) -> Option<BTreeMap<i64, VarIndex>> {
    let m: BTreeMap<i64, VarIndex> = vars
        .iter()
        .enumerate()
        .filter_map(|(i, v)| {
            let rest = v.name.strip_prefix(prefix)?;
            if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            Some((rest.parse().ok()?, VarIndex(i)))
        })
        .collect();
    (!m.is_empty()).then_some(m)
}

impl Ctx<'_> {
    fn case(&self, child: VarIndex, i: usize, cs: &CaseSpec, out: &mut Vec<Violation>) -> Option<RuleCase> {
        let var = &self.vars[child.0];
        let before = out.len();
        let mut when = Vec::new();
        for (pname, desc) in &cs.when {
            let Some(&p) = self.by_name.get(pname).filter(|p| self.parents.contains(p)) else {
                out.push(Violation::ConditionOnNonParent { var: var.name.clone(), case: i, parent: pname.clone() });
                continue;
            };
            let pv = &self.vars[p.0];
            match convert(desc, pv.kind, &pv.labels) {
                Ok(ValueSet::IntervalExpr { .. }) => out.push(Violation::InvalidCaseSet {
                    var: var.name.clone(),
                    case: i,
                    reason: format!("condition on `{pname}` cannot use a bound expression"),
                }),
                Ok(s) => when.push((p, s)),
                Err(e) => out.push(Violation::InvalidCaseSet {
                    var: var.name.clone(),
                    case: i,
                    reason: format!("condition on `{pname}`: {e}"),
                }),
            }
        }
        when.sort_by_key(|x| x.0);

        let set = match convert(&cs.set, var.kind, &var.labels) {
            Ok(ValueSet::IntervalExpr { lo, hi }) => {
                let mut resolve = |e: &Expr| -> Option<Expr> {
                    let mut bad = false;
                    e.walk(&mut |x| {
                        if let Expr::Name(n) = x {
                            if let Some(v) = self.by_name.get(n) {
                                if !self.parents.contains(v) {
                                    out.push(Violation::ExpressionReferencesNonParent {
                                        var: var.name.clone(),
                                        case: i,
                                        name: n.clone(),
                                    });
                                    bad = true;
                                }
                            }
                        }
                    });
                    if bad {
                        return None;
                    }
                    let r = e.resolve(self).map_err(|err| err.to_string());
                    match r {
                        Ok(r) => {
                            for v in r.references() {
                                if !self.parents.contains(&v) {
                                    out.push(Violation::ExpressionReferencesNonParent {
                                        var: var.name.clone(),
                                        case: i,
                                        name: self.vars[v.0].name.clone(),
                                    });
                                    return None;
                                }
                            }
                            Some(r)
                        }
                        Err(error) => {
                            out.push(Violation::ExpressionError { var: var.name.clone(), case: i, error });
                            None
                        }
                    }
                };
                match (resolve(&lo), resolve(&hi)) {
                    (Some(lo), Some(hi)) => Some(ValueSet::IntervalExpr { lo, hi }),
                    _ => None,
                }
            }
            Ok(s) => {
                if s.is_exc() && !var.universal.excludable {
                    out.push(Violation::ExclusionNotDeclared { var: var.name.clone(), case: i });
                } else if !var.universal.admits(&s) {
                    out.push(Violation::CaseOutsideUniversal {
                        var: var.name.clone(),
                        case: i,
                        detail: describe(var, &s),
                    });
                }
                Some(s)
            }
            Err(reason) => {
                out.push(Violation::InvalidCaseSet { var: var.name.clone(), case: i, reason });
                None
            }
        };
        if out.len() > before {
            return None;
        }
        Some(RuleCase { when, set: set? })
    }
}

fn describe(var: &Variable, s: &ValueSet) -> String {
    match s {
        ValueSet::Cats(c) => format!(
            "{{{}}}",
            c.iter().map(|&i| var.labels[i as usize].as_str()).collect::<Vec<_>>().join(",")
        ),
        ValueSet::Exc => "{EXC}".into(),
        ValueSet::Interval(iv) => format!(
            "{}{}, {}{}",
            if iv.lo_open { "]" } else { "[" },
            iv.lo,
            iv.hi,
            if iv.hi_open { "[" } else { "]" }
        ),
        ValueSet::IntRange { lo, hi } => format!("{{{lo}..{hi}}}"),
        ValueSet::Ints(xs) => format!("{{{}}}", xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")),
        ValueSet::IntervalExpr { lo, hi } => format!("[{lo}, {hi}]"),
    }
}

/// Representative values of a universal set: one per region on which every
/// test set's membership is constant.
pub(super) fn atoms(universal: &UniversalSet, tests: &[&ValueSet]) -> Vec<Value> {
    let mut cands: Vec<Value> = match &universal.values {
        ValueSet::Cats(c) => c.iter().map(|&x| Value::Cat(x)).collect(),
        ValueSet::Ints(s) => s.iter().map(|&x| Value::Int(x)).collect(),
        ValueSet::IntRange { lo, hi } if hi - lo < 4096 => (*lo..=*hi).map(Value::Int).collect(),
        ValueSet::IntRange { lo, hi } => {
            let mut b = vec![*lo, *hi];
            for t in tests {
                match t {
                    ValueSet::IntRange { lo: a, hi: z } => b.extend([a - 1, *a, *z, z + 1]),
                    ValueSet::Ints(xs) => xs.iter().for_each(|&x| b.extend([x - 1, x, x + 1])),
                    _ => {}
                }
            }
            b.retain(|x| x >= lo && x <= hi);
            b.sort();
            b.dedup();
            let mids: Vec<i64> = b.windows(2).filter(|w| w[1] - w[0] > 1).map(|w| w[0] + (w[1] - w[0]) / 2).collect();
            b.extend(mids);
            b.into_iter().map(Value::Int).collect()
        }
        ValueSet::Interval(iv) => {
            let mut b: Vec<f64> = [iv.lo, iv.hi].into_iter().filter(|x| x.is_finite()).collect();
            for t in tests {
                if let ValueSet::Interval(ti) = t {
                    b.extend([ti.lo, ti.hi].into_iter().filter(|x| x.is_finite()));
                }
            }
            b.sort_by(f64::total_cmp);
            b.dedup();
            let mut c = b.clone();
            c.extend(b.windows(2).map(|w| 0.5 * (w[0] + w[1])));
            match (b.first(), b.last()) {
                (Some(&first), Some(&last)) => c.extend([first - 1.0, last + 1.0]),
                _ => c.push(0.0),
            }
            c.into_iter().filter(|&x| iv.contains(x)).map(Value::Real).collect()
        }
        ValueSet::Exc | ValueSet::IntervalExpr { .. } => Vec::new(),
    };
    if universal.excludable {
        cands.push(Value::Exc);
    }
    let mut seen = HashSet::new();
    cands.retain(|v| seen.insert(tests.iter().map(|t| t.contains(v)).collect::<Vec<_>>()));
    cands
}

/// Tails of inclusion arcs and everything upstream of them.
fn controller_closure(arcs: &[DecreeArc], parents: &[Vec<VarIndex>]) -> BTreeSet<VarIndex> {
    let mut seen = BTreeSet::new();
    let mut stack: Vec<VarIndex> = arcs.iter().filter(|a| a.kind.controls_inclusion()).map(|a| a.parent).collect();
    while let Some(v) = stack.pop() {
        if seen.insert(v) {
            stack.extend(parents[v.0].iter().copied());
        }
    }
    seen
}

fn check_cases(
    vars: &[Variable],
    controllers: &BTreeSet<VarIndex>,
    child: VarIndex,
    cases: &[RuleCase],
    out: &mut Vec<Violation>,
) {
    let name = &vars[child.0].name;
    let tested: BTreeSet<VarIndex> = cases.iter().flat_map(|c| c.when.iter().map(|w| w.0)).collect();
    let tested: Vec<VarIndex> = tested.into_iter().collect();
    let per_parent: Vec<Vec<Value>> = tested
        .iter()
        .map(|&p| {
            let tests: Vec<&ValueSet> =
                cases.iter().flat_map(|c| c.when.iter().filter(|w| w.0 == p).map(|w| &w.1)).collect();
            atoms(&vars[p.0].universal, &tests)
        })
        .collect();
    let total = per_parent.iter().fold(1u64, |acc, a| acc.saturating_mul(a.len() as u64));
    if total > MAX_RULE_COMBINATIONS {
        return;
    }
    let inclusion_parents: Vec<bool> = tested.iter().map(|p| controllers.contains(p)).collect();
    let fmt_assignment = |combo: &[Value]| {
        tested
            .iter()
            .zip(combo)
            .map(|(p, v)| format!("{}={}", vars[p.0].name, show(&vars[p.0], *v)))
            .collect::<Vec<_>>()
            .join(", ")
    };

    let mut exc_by_key: HashMap<Vec<Option<(u8, u64)>>, bool> = HashMap::new();
    let (mut gap, mut overlap, mut values_inclusion) = (false, false, false);
    for combo in cartesian(&per_parent) {
        let lookup = |p: VarIndex| tested.iter().position(|&t| t == p).map(|i| combo[i]);
        let matching: Vec<usize> =
            (0..cases.len()).filter(|&i| cases[i].matches(&lookup) == Some(true)).collect();
        match matching.len() {
            0 if !gap => {
                gap = true;
                out.push(Violation::NonExhaustiveRule { var: name.clone(), assignment: fmt_assignment(&combo) });
            }
            1 => {
                let key: Vec<Option<(u8, u64)>> =
                    combo.iter().zip(&inclusion_parents).map(|(v, &inc)| inc.then_some(v.key())).collect();
                let exc = cases[matching[0]].set.is_exc();
                if *exc_by_key.entry(key).or_insert(exc) != exc && !values_inclusion {
                    values_inclusion = true;
                    out.push(Violation::UncontrolledInclusion(name.clone()));
                }
            }
            m if m > 1 && !overlap => {
                overlap = true;
                out.push(Violation::OverlappingRule {
                    var: name.clone(),
                    cases: matching,
                    assignment: fmt_assignment(&combo),
                });
            }
            _ => {}
        }
    }
}

fn show(var: &Variable, v: Value) -> String {
    match v {
        Value::Exc => "EXC".into(),
        Value::Real(x) => x.to_string(),
        Value::Int(i) => i.to_string(),
        Value::Cat(c) => var.labels.get(c as usize).cloned().unwrap_or_default(),
    }
}

pub(super) fn cartesian(sets: &[Vec<Value>]) -> impl Iterator<Item = Vec<Value>> + '_ {
    let total: usize = sets.iter().map(|s| s.len()).product();
    (0..total).map(move |mut k| {
        let mut combo = vec![Value::Exc; sets.len()];
        for i in (0..sets.len()).rev() {
            combo[i] = sets[i][k % sets[i].len()];
            k /= sets[i].len();
        }
        combo
    })
}

impl RoleGraph {
    /// Replaces constant names in bound expressions by their values.
    fn bind_constants(&mut self, out: &mut Vec<Violation>) {
        struct Consts<'a>(&'a [(String, f64)]);
        impl Resolver for Consts<'_> {
            fn variable(&self, _: &str) -> Option<VarIndex> {
                None
            }
            fn constant(&self, name: &str) -> Option<f64> {
                self.0.iter().find(|c| c.0 == name).map(|c| c.1)
            }
            fn family(&self, _: &str) -> Option<BTreeMap<i64, VarIndex>> {
                None
            }
        }
        let consts = Consts(&self.constants);
        let names: Vec<String> = self.vars.iter().map(|v| v.name.clone()).collect();
        for rule in self.rules.iter_mut().flatten() {
            for (i, case) in rule.cases.iter_mut().enumerate() {
                if let ValueSet::IntervalExpr { lo, hi } = &mut case.set {
                    for e in [lo, hi] {
                        match bind(e, &consts) {
                            Ok(b) => *e = b,
                            Err(err) => out.push(Violation::ExpressionError {
                                var: names[rule.child.0].clone(),
                                case: i,
                                error: err.to_string(),
                            }),
                        }
                    }
                }
            }
        }
    }
}

/// Resolves only `Name` nodes, keeping already-resolved variables and families.
fn bind(e: &Expr, r: &dyn Resolver) -> Result<Expr, ExprError> {
    Ok(match e {
        Expr::Name(n) => Expr::Num(r.constant(n).ok_or_else(|| ExprError::UnknownName(n.clone()))?),
        Expr::Num(_) | Expr::Var(_) => e.clone(),
        Expr::Neg(a) => Expr::Neg(Box::new(bind(a, r)?)),
        Expr::Bin(op, a, b) => Expr::Bin(*op, Box::new(bind(a, r)?), Box::new(bind(b, r)?)),
        Expr::Min(xs) => Expr::Min(xs.iter().map(|x| bind(x, r)).collect::<Result<_, _>>()?),
        Expr::Max(xs) => Expr::Max(xs.iter().map(|x| bind(x, r)).collect::<Result<_, _>>()?),
        Expr::Sum { family, members, lo, hi } => Expr::Sum {
            family: family.clone(),
            members: members.clone(),
            lo: Box::new(bind(lo, r)?),
            hi: Box::new(bind(hi, r)?),
        },
    })
}

use std::collections::{BTreeMap, BTreeSet};

use metadist::domain::spec::{Bound, DomainSpec, SetDescriptor};
use metadist::{validate_graph, Role, RoleGraph, Value, ValueSet, Violation};

fn load(name: &str) -> RoleGraph {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    RoleGraph::load(&path).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn names(g: &RoleGraph, vs: impl IntoIterator<Item = metadist::VarIndex>) -> Vec<String> {
    vs.into_iter().map(|v| g.name(v).to_string()).collect()
}

fn assign(g: &RoleGraph, pairs: &[(&str, &str)]) -> BTreeMap<metadist::VarIndex, Value> {
    pairs.iter().map(|(n, t)| (g.var(n).unwrap(), g.parse_value(g.var(n).unwrap(), t).unwrap())).collect()
}

#[test]
fn mlp_graph_is_valid() {
    let text = std::fs::read_to_string(format!("{}/tests/fixtures/mlp.json", env!("CARGO_MANIFEST_DIR"))).unwrap();
    assert_eq!(validate_graph(&DomainSpec::from_json(&text).unwrap()), Vec::<Violation>::new());
}

#[test]
fn roles_follow_graph_position() {
    let g = load("mlp.json");
    let role = |n: &str| g.role_of(g.var(n).unwrap());
    assert_eq!(role("o"), Role::Meta);
    assert_eq!(role("l"), Role::MetaDecreed);
    assert_eq!(role("r"), Role::Neutral);
    assert_eq!(role("u1"), Role::Decreed);
    assert_eq!(role("alpha"), Role::Decreed);
    assert!(g.is_hierarchical());
    assert!(!load("arcless.json").is_hierarchical());
}

#[test]
fn parents_and_ancestors() {
    let g = load("mlp.json");
    let u1 = g.var("u1").unwrap();
    assert_eq!(names(&g, g.parents(u1).iter().copied()), ["o", "l"]);
    assert!(g.parents(g.var("r").unwrap()).is_empty());
    assert_eq!(names(&g, g.ancestors(u1)), ["o", "l"]);
    assert!(g.ancestors(g.var("o").unwrap()).is_empty());

    let d = load("mlp_dropout.json");
    let rho = d.var("rho").unwrap();
    assert_eq!(names(&d, d.parents(rho).iter().copied()), ["l", "u1", "u2"]);
    assert!(d.ancestors(rho).contains(&d.var("o").unwrap()));
}

#[test]
fn topological_orders() {
    let g = load("mlp.json");
    let order = names(&g, g.topological_order().iter().copied());
    let pos = |n: &str| order.iter().position(|x| x == n).unwrap();
    assert!(pos("o") < pos("l") && pos("l") < pos("u1") && pos("l") < pos("u2"));

    let a = load("arcless.json");
    assert_eq!(names(&a, a.topological_order().iter().copied()), ["a", "b", "c"]);

    let chain = RoleGraph::from_json(
        r#"{"variables": [
            {"name": "c", "kind": "integer", "universal": {"ints": [0, 1]}},
            {"name": "b", "kind": "integer", "universal": {"ints": [0, 1]}},
            {"name": "a", "kind": "integer", "universal": {"ints": [0, 1]}}],
          "arcs": [{"parent": "a", "child": "b", "kind": "values"}, {"parent": "b", "child": "c", "kind": "values"}],
          "rules": [{"child": "b", "cases": [{"set": {"ints": [0, 1]}}]},
                    {"child": "c", "cases": [{"set": {"ints": [0, 1]}}]}]}"#,
    )
    .unwrap();
    assert_eq!(names(&chain, chain.topological_order().iter().copied()), ["a", "b", "c"]);
}

#[test]
fn cycle_is_reported_once() {
    let text = std::fs::read_to_string(format!("{}/tests/fixtures/cycle.json", env!("CARGO_MANIFEST_DIR"))).unwrap();
    let report = validate_graph(&DomainSpec::from_json(&text).unwrap());
    assert_eq!(report.len(), 1, "{report:?}");
    assert!(matches!(&report[0], Violation::Cycle(c) if c.len() == 3));
    assert!(report[0].to_string().contains("x1") && report[0].to_string().contains("x2"));
}

#[test]
fn restricted_sets_of_units() {
    let g = load("mlp.json");
    let u1 = g.var("u1").unwrap();
    let u2 = g.var("u2").unwrap();
    let s = g.restricted_set(u2, &assign(&g, &[("o", "ASGD"), ("l", "1")])).unwrap();
    assert_eq!(s, ValueSet::Exc);
    let s = g.restricted_set(u1, &assign(&g, &[("o", "ADAM"), ("l", "2")])).unwrap();
    assert_eq!(s, ValueSet::IntRange { lo: 25, hi: 300 });
    let s = g.restricted_set(u1, &assign(&g, &[("o", "ASGD"), ("l", "1")])).unwrap();
    assert_eq!(s, ValueSet::IntRange { lo: 10, hi: 200 });
    let r = g.var("r").unwrap();
    assert_eq!(g.restricted_set(r, &BTreeMap::new()).unwrap(), g.universal_set(r).values);
    assert!(g.restricted_set(u1, &assign(&g, &[("o", "ADAM")])).is_err());
}

#[test]
fn dropout_bound_and_universal() {
    let g = load("mlp_dropout.json");
    assert_eq!(g.constant("tau_max"), Some(600.0));
    let rho = g.var("rho").unwrap();
    let s = g.restricted_set(rho, &assign(&g, &[("l", "2"), ("u1", "100"), ("u2", "200"), ("o", "ADAM")])).unwrap();
    assert_eq!(s, ValueSet::Interval(metadist::RealInterval::closed(0.0, 300.0 / 1200.0)));
    let u = g.universal_set(rho);
    assert_eq!(u.values, ValueSet::Interval(metadist::RealInterval::closed(0.0, 0.5)));
    assert!(!u.excludable);
}

#[test]
fn audit_catches_wrong_universal() {
    let text = std::fs::read_to_string(format!("{}/tests/fixtures/mlp_dropout.json", env!("CARGO_MANIFEST_DIR"))).unwrap();
    let mut spec = DomainSpec::from_json(&text).unwrap();
    let rho = spec.variables.iter_mut().find(|v| v.name == "rho").unwrap();
    rho.universal = SetDescriptor::Interval { interval: [Bound::Num(0.0), Bound::Num(0.6)], open: [false, false] };
    let report = validate_graph(&spec);
    assert!(report.iter().any(|v| matches!(v, Violation::UniversalMismatch { var, .. } if var == "rho")), "{report:?}");

    let text = std::fs::read_to_string(format!("{}/tests/fixtures/mlp.json", env!("CARGO_MANIFEST_DIR"))).unwrap();
    let bad = text.replace(r#"{"name": "u2", "kind": "integer", "universal": {"range": [25, 300]}"#, r#"{"name": "u2", "kind": "integer", "universal": {"range": [10, 300]}"#);
    let report = validate_graph(&DomainSpec::from_json(&bad).unwrap());
    assert!(report.iter().any(|v| matches!(v, Violation::UniversalMismatch { var, .. } if var == "u2")), "{report:?}");
}

#[test]
fn rule_defects_are_reported() {
    let base = r#"{"variables": [
        {"name": "o", "kind": "categorical", "universal": {"cats": ["A", "B", "C"]}},
        {"name": "x", "kind": "continuous", "universal": {"interval": [0, 1]}, "excludable": true}],
      "arcs": [{"parent": "o", "child": "x", "kind": "inclusion"}],
      "rules": [{"child": "x", "cases": CASES}]}"#;
    let report = |cases: &str| validate_graph(&DomainSpec::from_json(&base.replace("CASES", cases)).unwrap());

    let gap = report(r#"[{"when": {"o": {"cats": ["A"]}}, "set": "EXC"}, {"when": {"o": {"cats": ["B"]}}, "set": {"interval": [0, 1]}}]"#);
    assert!(gap.iter().any(|v| matches!(v, Violation::NonExhaustiveRule { assignment, .. } if assignment == "o=C")), "{gap:?}");

    let overlap = report(r#"[{"when": {"o": {"cats": ["A", "B"]}}, "set": "EXC"}, {"when": {"o": {"cats": ["B", "C"]}}, "set": {"interval": [0, 1]}}]"#);
    assert!(overlap.iter().any(|v| matches!(v, Violation::OverlappingRule { cases, .. } if cases == &vec![0, 1])), "{overlap:?}");

    let escape = report(r#"[{"when": {"o": {"cats": ["A"]}}, "set": "EXC"}, {"when": {"o": {"cats": ["B", "C"]}}, "set": {"interval": [0, 2]}}]"#);
    assert!(escape.iter().any(|v| matches!(v, Violation::CaseOutsideUniversal { case: 1, .. })), "{escape:?}");

    let missing = validate_graph(
        &DomainSpec::from_json(&base.replace(r#""rules": [{"child": "x", "cases": CASES}]"#, r#""rules": []"#)).unwrap(),
    );
    assert!(missing.contains(&Violation::MissingRule("x".into())), "{missing:?}");

    let not_exc = validate_graph(
        &DomainSpec::from_json(&base.replace(r#", "excludable": true"#, "").replace(
            "CASES",
            r#"[{"when": {"o": {"cats": ["A"]}}, "set": "EXC"}, {"when": {"o": {"cats": ["B", "C"]}}, "set": {"interval": [0, 1]}}]"#,
        ))
        .unwrap(),
    );
    assert!(not_exc.iter().any(|v| matches!(v, Violation::ExclusionNotDeclared { .. })), "{not_exc:?}");
}

#[test]
fn continuous_conditions_are_checked_by_breakpoints() {
    let spec = |cases: &str| {
        format!(
            r#"{{"variables": [
            {{"name": "a", "kind": "continuous", "universal": {{"interval": [0, 1]}}}},
            {{"name": "x", "kind": "integer", "universal": {{"range": [0, 1]}}}}],
          "arcs": [{{"parent": "a", "child": "x", "kind": "values"}}],
          "rules": [{{"child": "x", "cases": {cases}}}]}}"#
        )
    };
    let ok = spec(
        r#"[{"when": {"a": {"interval": [0, 0.5], "open": [false, true]}}, "set": {"ints": [0]}},
            {"when": {"a": {"interval": [0.5, 1]}}, "set": {"ints": [1]}}]"#,
    );
    assert!(validate_graph(&DomainSpec::from_json(&ok).unwrap()).is_empty());
    let overlap = spec(
        r#"[{"when": {"a": {"interval": [0, 0.5]}}, "set": {"ints": [0]}},
            {"when": {"a": {"interval": [0.5, 1]}}, "set": {"ints": [1]}}]"#,
    );
    let r = validate_graph(&DomainSpec::from_json(&overlap).unwrap());
    assert!(r.iter().any(|v| matches!(v, Violation::OverlappingRule { assignment, .. } if assignment == "a=0.5")), "{r:?}");
}

#[test]
fn transfer_mapping_on_worked_points() {
    let g = load("mlp.json");
    let x = g
        .point_from_text([("r", "0.1"), ("o", "ADAM"), ("l", "1"), ("u1", "100"), ("beta", "0.5")])
        .unwrap();
    let e = g.extend(&x).unwrap();
    assert_eq!(e.get(g.var("alpha").unwrap()), Value::Exc);
    assert_eq!(e.get(g.var("u2").unwrap()), Value::Exc);
    assert_eq!(e.get(g.var("u1").unwrap()), Value::Int(100));
    assert_eq!(g.project(&e).unwrap(), x);

    let y = g.point_from_text([("r", "0.01"), ("o", "ASGD"), ("l", "0"), ("alpha", "0.3")]).unwrap();
    let f = g.extend(&y).unwrap();
    for n in ["u1", "u2", "beta"] {
        assert_eq!(f.get(g.var(n).unwrap()), Value::Exc, "{n}");
    }
    assert_eq!(g.project(&f).unwrap(), y);

    let mut bad = y.clone();
    bad.set(g.var("beta").unwrap(), Value::Real(0.2));
    assert!(g.extend(&bad).is_err());
    let mut missing = x.clone();
    missing.values.remove(&g.var("u1").unwrap());
    assert!(g.extend(&missing).is_err());
    let mut outside = x.clone();
    outside.set(g.var("u1").unwrap(), Value::Int(5));
    assert!(g.extend(&outside).is_err());

    let a = load("arcless.json");
    let p = a.point_from_text([("a", "0.5"), ("b", "3"), ("c", "blue")]).unwrap();
    let pe = a.extend(&p).unwrap();
    assert_eq!(pe.values, p.values.values().copied().collect::<Vec<_>>());
}

#[test]
fn signatures() {
    let g = load("mlp.json");
    let sigs = g.enumerate_signatures().unwrap();
    // (ASGD,0) (ASGD,1) (ADAM,0) (ADAM,1) (ADAM,2)
    assert_eq!(sigs.len(), 5);
    let a = load("arcless.json");
    let s = a.enumerate_signatures().unwrap();
    assert_eq!(s.len(), 1);
    assert_eq!(s[0].included.len(), 3);
    let included: BTreeSet<Vec<_>> = sigs.iter().map(|s| s.included.clone()).collect();
    assert_eq!(included.len(), sigs.len());
}

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use metadist::Dataset;
use metadist_bench::{build_variant, sample_dataset, Arch, Size, VariantSpec};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_metadist"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture(name: &str) -> String {
    root().join("crates/core/tests/fixtures").join(name).display().to_string()
}

fn hpd(v: u8) -> String {
    root().join(format!("crates/bench/specs/hpd{v}.json")).display().to_string()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

/// A variant-3 dataset with splits, written to `dir`.
fn dataset(dir: &Path) -> String {
    let g = build_variant(3).unwrap();
    let sigs = g.enumerate_signatures().unwrap();
    let inst = sample_dataset(&g, &sigs, VariantSpec { variant: 3, size: Size::VS, arch: Arch::Mlp }, 5).unwrap();
    let path = dir.join("data.csv");
    inst.data.save(&g, &path).unwrap();
    path.display().to_string()
}

#[test]
fn validate_exit_codes() {
    let ok = run(&["validate", &fixture("mlp.json")]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(ok.stdout.is_empty() && ok.stderr.is_empty());

    let cyc = run(&["validate", &fixture("cycle.json")]);
    assert_eq!(cyc.status.code(), Some(4));
    let out = text(&cyc.stdout);
    assert_eq!(out.lines().count(), 1, "{out}");
    assert!(out.contains("x1") && out.contains("x2") && out.contains("cycle"));

    for v in 1..=5 {
        assert_eq!(run(&["validate", &hpd(v)]).status.code(), Some(0));
    }
}

#[test]
fn unreadable_inputs_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = run(&["validate", "/definitely/not/here.json"]);
    assert_eq!(missing.status.code(), Some(3));
    assert_eq!(text(&missing.stderr).lines().count(), 1);

    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, "{ not json").unwrap();
    assert_eq!(run(&["validate", junk.to_str().unwrap()]).status.code(), Some(3));

    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, "{}").unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "nope,target\n1,2\n").unwrap();
    let out = run(&["distance", &hpd(3), cfg.to_str().unwrap(), bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", text(&out.stderr));
}

#[test]
fn usage_errors_exit_2() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(text(&out.stderr).lines().count(), 1);
    assert_eq!(run(&["bench", "run", "--variants", "9", "--out", "x"]).status.code(), Some(2));
    assert_eq!(run(&["bench", "run", "--variants", "1..3", "--sizes", "XL", "--out", "x"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn invalid_config_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"p": 0.5}"#).unwrap();
    assert_eq!(run(&["distance", &hpd(3), cfg.to_str().unwrap(), &data]).status.code(), Some(4));
    std::fs::write(&cfg, r#"{"weights": {"nope": 1.0}}"#).unwrap();
    assert_eq!(run(&["distance", &hpd(3), cfg.to_str().unwrap(), &data]).status.code(), Some(4));
}

#[test]
fn distance_matrix_is_symmetric_with_zero_diagonal() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"p": "inf", "weights": {"r": 2.0}}"#).unwrap();
    for approach in ["meta", "sub", "hybrid"] {
        let out = run(&["distance", &hpd(3), cfg.to_str().unwrap(), &data, "--approach", approach]);
        assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
        let m: Vec<Vec<f64>> =
            text(&out.stdout).lines().map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
        assert_eq!(m.len(), 220);
        for (i, row) in m.iter().enumerate() {
            assert_eq!(row.len(), m.len());
            assert_eq!(row[i], 0.0);
            for (j, other) in m.iter().enumerate().take(i) {
                assert_eq!(row[j], other[i]);
            }
        }
        // 17 significant digits.
        let first = text(&out.stdout).lines().next().unwrap().split(',').nth(1).unwrap().to_string();
        assert_eq!(first.split('e').next().unwrap().replace(['.', '-'], "").len(), 17, "{first}");
    }
}

#[test]
fn written_datasets_round_trip_byte_for_byte() {
    for v in 1..=5u8 {
        let g = build_variant(v).unwrap();
        let sigs = g.enumerate_signatures().unwrap();
        let inst = sample_dataset(&g, &sigs, VariantSpec { variant: v, size: Size::VS, arch: Arch::Cnn }, 9).unwrap();
        let mut first = Vec::new();
        inst.data.write(&g, &mut first).unwrap();
        let back = Dataset::read(&g, first.as_slice()).unwrap();
        assert_eq!(back, inst.data);
        let mut second = Vec::new();
        back.write(&g, &mut second).unwrap();
        assert_eq!(first, second);
    }
}

#[test]
fn tune_then_fit_predict() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let out = dir.path().join("tuned.json");
    let o = out.to_str().unwrap();
    let args = ["tune", &hpd(3), &data, "--approach", "sub", "--budget-mult", "4", "--seed", "3", "--out", o];
    let r = run(&args);
    assert_eq!(r.status.code(), Some(0), "{}", text(&r.stderr));
    let first = std::fs::read(&out).unwrap();
    let report: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(report["parameters"], 22);
    assert_eq!(report["budget"], 88);
    assert_eq!(report["result"]["evaluations"], 88);
    assert_eq!(report["routes"].as_array().unwrap().len(), 4);

    // No overwrite without --force; same bytes with it.
    assert_eq!(run(&args).status.code(), Some(1));
    let mut forced = args.to_vec();
    forced.push("--force");
    assert_eq!(run(&forced).status.code(), Some(0));
    assert_eq!(std::fs::read(&out).unwrap(), first);

    let p = run(&["fit-predict", &hpd(3), o, &data, &data, "--approach", "sub"]);
    assert_eq!(p.status.code(), Some(0), "{}", text(&p.stderr));
    let lines: Vec<String> = text(&p.stdout).lines().map(String::from).collect();
    assert_eq!(lines[0], "row,prediction,fallback");
    assert_eq!(lines.len(), 221);
    // Predicting the training set reproduces its targets.
    let g = build_variant(3).unwrap();
    let ds = Dataset::load(&g, &data).unwrap();
    for (line, y) in lines[1..].iter().zip(&ds.targets) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[1].parse::<f64>().unwrap(), *y);
        assert_eq!(cells[2], "false");
    }
}

#[test]
fn sub_fallback_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let g = build_variant(3).unwrap();
    let data = dataset(dir.path());
    let ds = Dataset::load(&g, &data).unwrap();
    // Train on ASGD points only; ADAM queries have no subproblem data.
    let o = g.var("o").unwrap();
    let asgd: Vec<usize> = (0..ds.len()).filter(|&i| g.format_value(o, ds.points[i].get(o)) == "ASGD").collect();
    let train = dir.path().join("train.csv");
    ds.subset(&asgd).save(&g, &train).unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, "{}").unwrap();
    let out = run(&["fit-predict", &hpd(3), cfg.to_str().unwrap(), train.to_str().unwrap(), &data, "--approach", "sub"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let mean = asgd.iter().map(|&i| ds.targets[i]).sum::<f64>() / asgd.len() as f64;
    for (i, line) in text(&out.stdout).lines().skip(1).enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        let adam = !asgd.contains(&i);
        assert_eq!(cells[2], adam.to_string());
        if adam {
            assert!((cells[1].parse::<f64>().unwrap() - mean).abs() < 1e-9);
        }
    }
}

#[test]
fn knn_needs_k() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, "{}").unwrap();
    let c = cfg.to_str().unwrap();
    assert_eq!(run(&["fit-predict", &hpd(3), c, &data, &data, "--model", "knn"]).status.code(), Some(2));
    let out = run(&["fit-predict", &hpd(3), c, &data, &data, "--model", "knn", "--k", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let g = build_variant(3).unwrap();
    let ds = Dataset::load(&g, &data).unwrap();
    for (line, y) in text(&out.stdout).lines().skip(1).zip(&ds.targets) {
        let label: u32 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(label, ((y / 20.0).floor() as u32).min(4));
    }
}

#[test]
fn external_search_spends_the_budget() {
    let dir = tempfile::tempdir().unwrap();
    let space = dir.path().join("space.json");
    std::fs::write(&space, r#"{"dims":[{"name":"a","lo":-1,"hi":1},{"name":"b","lo":0,"hi":2}]}"#).unwrap();
    let mut child = bin()
        .args(["search", space.to_str().unwrap(), "--budget", "120", "--seed", "2"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stdin = child.stdin.take().unwrap();
    let reader = BufReader::new(child.stdout.take().unwrap());
    let mut evals = 0;
    let mut best = None;
    for line in reader.lines() {
        let line = line.unwrap();
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("eval") => {
                let x: Vec<f64> = parts.map(|v| v.parse().unwrap()).collect();
                assert!((-1.0..=1.0).contains(&x[0]) && (0.0..=2.0).contains(&x[1]));
                evals += 1;
                writeln!(stdin, "{}", (x[0] - 0.25).powi(2) + (x[1] - 1.5).powi(2)).unwrap();
            }
            Some("best") => best = Some(parts.next().unwrap().parse::<f64>().unwrap()),
            other => panic!("unexpected line {other:?}"),
        }
    }
    assert!(child.wait().unwrap().success());
    assert_eq!(evals, 120);
    assert!(best.unwrap() < 1e-3);
}

#[test]
fn external_search_fails_on_closed_stdin() {
    let dir = tempfile::tempdir().unwrap();
    let space = dir.path().join("space.json");
    std::fs::write(&space, r#"{"dims":[{"name":"a","lo":0,"hi":1}]}"#).unwrap();
    let out = bin()
        .args(["search", space.to_str().unwrap(), "--budget", "10"])
        .stdin(Stdio::null())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

//! End-to-end runs of the `truncvar` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_truncvar"))
        .args(args)
        .env_remove("TRUNCVAR_SEED")
        .output()
        .expect("run truncvar")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("bad json ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn write_path(dir: &Path, name: &str, values: &[f64]) -> String {
    let mut text = String::from("time,value\n");
    for (i, v) in values.iter().enumerate() {
        text.push_str(&format!("{i},{v}\n"));
    }
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn simulate_is_reproducible_from_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = run(&[
            "simulate",
            "--mu",
            "-0.5",
            "--steps",
            "50",
            "--paths",
            "3",
            "--seed",
            "11",
            "--out",
            d.to_str().unwrap(),
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for name in ["path_0000.csv", "path_0002.csv", "simulate.json"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let other = dir.path().join("c");
    run(&[
        "simulate",
        "--steps",
        "50",
        "--paths",
        "1",
        "--seed",
        "12",
        "--mu",
        "-0.5",
        "--out",
        other.to_str().unwrap(),
    ]);
    assert_ne!(
        fs::read(a.join("path_0000.csv")).unwrap(),
        fs::read(other.join("path_0000.csv")).unwrap()
    );
}

#[test]
fn simulate_reads_the_seed_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run(&[
        "simulate",
        "--steps",
        "20",
        "--seed",
        "5",
        "--out",
        a.to_str().unwrap(),
    ]);
    let out = Command::new(env!("CARGO_BIN_EXE_truncvar"))
        .args(["simulate", "--steps", "20", "--out", b.to_str().unwrap()])
        .env("TRUNCVAR_SEED", "5")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(
        fs::read(a.join("path_0000.csv")).unwrap(),
        fs::read(b.join("path_0000.csv")).unwrap()
    );
}

#[test]
fn simulate_into_an_unusable_directory_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    fs::write(&file, "x").unwrap();
    let target = file.join("inside");
    let out = run(&[
        "simulate",
        "--steps",
        "10",
        "--out",
        target.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn compute_reports_all_three_variations_and_the_partition() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_path(dir.path(), "p.csv", &[0.0, 3.0, 1.0, 4.0]);
    let v = json(&run(&[
        "compute",
        "--input",
        &input,
        "--c",
        "1",
        "--kind",
        "utv",
        "--partition",
    ]));
    assert_eq!(v["utv"], 4.0);
    let all = json(&run(&["compute", "--input", &input, "--c", "1"]));
    assert_eq!(all["tv"], 5.0);
    assert_eq!(all["utv"], 4.0);
    assert_eq!(all["dtv"], 1.0);
    assert!(v.to_string().contains("partition"));
}

#[test]
fn compute_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_path(dir.path(), "p.csv", &[0.0, 1.0]);
    assert_eq!(run(&["compute", "--input", &input]).status.code(), Some(2));
    assert_eq!(
        run(&["compute", "--input", &input, "--c", "-1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["compute", "--input", "/nonexistent/p.csv", "--c", "1"])
            .status
            .code(),
        Some(2)
    );
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "time,value\n1,1\n0,2\n").unwrap();
    assert_eq!(
        run(&["compute", "--input", bad.to_str().unwrap(), "--c", "1"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn closed_form_values() {
    let v = json(&run(&[
        "closed-form",
        "expected-tc",
        "--mu",
        "0",
        "--c",
        "1",
    ]));
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let v = json(&run(&[
        "closed-form",
        "moment-ratio",
        "--mu",
        "1",
        "--c",
        "1",
    ]));
    assert!(v["value"].as_f64().unwrap() >= 0.5);
    let v = json(&run(&[
        "closed-form",
        "eigen-theta",
        "--mu",
        "1",
        "--y",
        "1",
        "--n",
        "2",
    ]));
    assert!((v["value"][0].as_f64().unwrap() - 2.028757838).abs() < 1e-8);
    let v = json(&run(&[
        "closed-form",
        "gdbar",
        "--mu",
        "-0.5",
        "--T",
        "1",
        "--y",
        "1",
    ]));
    let g = v["value"].as_f64().unwrap();
    assert!(g > 0.0 && g < 1.0);
    assert!(v["terms"].as_u64().unwrap() >= 1);
    let v = json(&run(&[
        "closed-form",
        "exp-bound",
        "--alpha",
        "0.5",
        "--mu",
        "0",
        "--c",
        "1",
        "--T",
        "1",
    ]));
    assert!(v["value"]["value"].as_f64().unwrap().is_finite());
    assert_eq!(v["value"]["delta"], 0.5);
    assert_eq!(
        run(&[
            "closed-form",
            "hv-tail",
            "--mu",
            "0",
            "--c",
            "1",
            "--y",
            "0.5"
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn trade_fixture_and_flat_prices() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_path(dir.path(), "p.csv", &[1.0, 2.0]);
    let v = json(&run(&["trade", "--input", &input, "--gamma", "0.01"]));
    assert!((v["realized_return"].as_f64().unwrap() - 0.9603960396).abs() < 1e-9);
    assert_eq!(v["trades"].as_array().unwrap().len(), 1);

    let flat = write_path(dir.path(), "flat.csv", &[1.0, 1.01, 0.99, 1.0]);
    let v = json(&run(&["trade", "--input", &flat, "--gamma", "0.9"]));
    assert!(v["trades"].as_array().unwrap().is_empty());
    assert_eq!(v["realized_return"], 0.0);
    assert_eq!(
        run(&["trade", "--input", &flat, "--gamma", "1.0"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn trade_reads_simulated_prices() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    run(&[
        "simulate",
        "--kind",
        "gbm",
        "--sigma",
        "0.3",
        "--steps",
        "200",
        "--out",
        out.to_str().unwrap(),
    ]);
    let v = json(&run(&[
        "trade",
        "--input",
        out.join("path_0000.csv").to_str().unwrap(),
        "--gamma",
        "0.01",
    ]));
    assert!(
        (v["realized_return"].as_f64().unwrap() - v["max_return"].as_f64().unwrap()).abs() < 1e-9
    );
}

#[test]
fn low_power_verify_warns_without_failing() {
    let out = run(&[
        "verify", "--paths", "10", "--steps", "50", "--claim", "LONG_", "--mus", "0", "--cs", "1",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&out);
    let reports = v.as_array().unwrap();
    assert_eq!(reports.len(), 4);
    assert!(reports.iter().all(|r| r["low_power"] == true));
}

#[test]
fn verify_table_and_csv_formats() {
    let args = [
        "verify", "--paths", "200", "--steps", "100", "--claim", "REL_", "--mus", "0", "--cs", "1",
    ];
    let table = run(&[&["--format", "table"], &args[..]].concat());
    let text = String::from_utf8(table.stdout).unwrap();
    assert!(text.starts_with("claim_id"));
    assert!(text.contains("REL_DUALITY"));
    let csv = run(&[&["--format", "csv"], &args[..]].concat());
    let text = String::from_utf8(csv.stdout).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "claim_id,mu,c,T,lhs,rhs,margin,slack,status"
    );
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn verify_writes_to_the_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("report.json");
    let out = run(&[
        "--out",
        file.to_str().unwrap(),
        "verify",
        "--paths",
        "100",
        "--steps",
        "50",
        "--claim",
        "EARLY",
        "--mus",
        "0",
        "--cs",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&fs::read(&file).unwrap()).unwrap();
    assert_eq!(v[0]["claim_id"], "EARLY_DRAWDOWN");
    assert_eq!(v[0]["config"]["sim"]["seed"], 0);
}

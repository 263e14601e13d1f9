use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nonlocal"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_grid(dir: &Path, name: &str, f: impl Fn(f64) -> f64) {
    let n = 64;
    let mut s = String::from("x,value\n");
    for i in 0..=n {
        let x = -2.0 + 4.0 * i as f64 / n as f64;
        s.push_str(&format!("{x},{}\n", f(x)));
    }
    fs::write(dir.join(name), s).unwrap();
}

const FLAT_PROBLEM: &str = r#"{
  "operator": {"kind": "linear", "kernel": {"sigma": 1.0}, "coefficient": {"kind": "constant", "value": 1.0}},
  "exterior": {"pieces": [
    {"from": null, "to": -1.0, "formula": {"kind": "zero"}},
    {"from": 1.0, "to": null, "formula": {"kind": "zero"}}
  ]},
  "cells": 32
}"#;

#[test]
fn integer_beta_is_a_config_error() {
    let d = TempDir::new().unwrap();
    write_grid(d.path(), "u.csv", |x| x.abs().sqrt());
    let o = run(
        d.path(),
        &["seminorm", "--u", "u.csv", "--beta", "2.0", "--out", "r.json"],
    );
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!d.path().join("r.json").exists());
}

#[test]
fn seminorm_writes_report() {
    let d = TempDir::new().unwrap();
    write_grid(d.path(), "u.csv", |x| x.abs().sqrt());
    let o = run(
        d.path(),
        &[
            "seminorm", "--u", "u.csv", "--beta", "0.5", "--region", "-1,1", "--out", "r.json",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("r.json")).unwrap()).unwrap();
    let v = rep["value"].as_f64().unwrap();
    assert!((v - 1.0).abs() < 0.05, "[|x|^1/2]_(1/2) = {v}");
}

#[test]
fn counterexample_smoke_run_writes_one_row() {
    let d = TempDir::new().unwrap();
    let args = [
        "counterexample",
        "--m",
        "2",
        "--sigma",
        "1.0",
        "--alpha",
        "0.1",
        "--cells",
        "64",
        "--csv",
        "b.csv",
        "--out",
        "b.json",
    ];
    let o = run(d.path(), &args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(d.path().join("b.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(
        lines[0],
        "m,sup_norm,calpha_seminorm,csigma_alpha_seminorm,id_at_zero,id_at_half_over_m"
    );
    assert!(lines[1].starts_with("2,"));

    // Same configuration, same bytes.
    let first = fs::read(d.path().join("b.json")).unwrap();
    assert_eq!(code(&run(d.path(), &args)), 0);
    assert_eq!(fs::read(d.path().join("b.json")).unwrap(), first);
    assert_eq!(fs::read_to_string(d.path().join("b.csv")).unwrap(), csv);
}

#[test]
fn sigma_out_of_range_is_a_config_error() {
    let d = TempDir::new().unwrap();
    fs::write(
        d.path().join("p.json"),
        FLAT_PROBLEM.replace("\"sigma\": 1.0", "\"sigma\": 2.5"),
    )
    .unwrap();
    let o = run(d.path(), &["solve", "--problem", "p.json", "--out", "u.csv"]);
    assert_eq!(code(&o), 1);
    assert!(!d.path().join("u.csv").exists());
}

#[test]
fn solve_is_deterministic() {
    let d = TempDir::new().unwrap();
    fs::write(d.path().join("p.json"), FLAT_PROBLEM).unwrap();
    let args = [
        "--threads",
        "1",
        "solve",
        "--problem",
        "p.json",
        "--out",
        "u.csv",
        "--report",
        "r.json",
    ];
    let o = run(d.path(), &args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let first = fs::read(d.path().join("u.csv")).unwrap();
    let csv = String::from_utf8(first.clone()).unwrap();
    assert_eq!(csv.lines().count(), 34);
    // L u + 1 = 0 with zero data: u > 0 inside.
    let mid: f64 = csv.lines().nth(17).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(mid > 0.0);

    assert_eq!(code(&run(d.path(), &args)), 0);
    assert_eq!(fs::read(d.path().join("u.csv")).unwrap(), first);
}

#[test]
fn iteration_cap_exits_with_two() {
    let d = TempDir::new().unwrap();
    let problem = r#"{
      "operator": {"kind": "bellman", "family": {
        "params": {"lambda": 1.0, "Lambda": 3.0},
        "members": [
          {"kernel": {"sigma": 1.0}, "coefficient": {"kind": "constant", "value": 1.0}},
          {"kernel": {"sigma": 1.0, "modulation": {"kind": "sign_cos", "m": 1}},
           "coefficient": {"kind": "cos", "amplitude": 2.0, "frequency": 3.0}}
        ]}},
      "exterior": {"pieces": [
        {"from": null, "to": -1.0, "formula": {"kind": "zero"}},
        {"from": 1.0, "to": null, "formula": {"kind": "zero"}}
      ]},
      "cells": 32,
      "solver": {"max_iterations": 1}
    }"#;
    fs::write(d.path().join("p.json"), problem).unwrap();
    let o = run(d.path(), &["solve", "--problem", "p.json", "--out", "u.csv"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn strong_member_on_a_wide_ball_exits_with_three() {
    let d = TempDir::new().unwrap();
    // A member three times the flat kernel: the flat splitting cannot contract.
    let problem = r#"{
      "operator": {"kind": "bellman", "family": {
        "params": {"lambda": 1.0, "Lambda": 3.0},
        "members": [{"kernel": {"sigma": 1.0, "modulation": {"kind": "piecewise", "pieces": [
          {"from": 0.0, "to": null, "profile": {"kind": "constant", "value": 3.0}}]}},
          "coefficient": {"kind": "constant", "value": 1.0}}]}},
      "exterior": {"pieces": [
        {"from": null, "to": -1.0, "formula": {"kind": "zero"}},
        {"from": 1.0, "to": null, "formula": {"kind": "zero"}}
      ]},
      "cells": 32,
      "small_ball": {"center": 0.0, "delta": 0.5, "mollifier": {"epsilon": 0.1}}
    }"#;
    fs::write(d.path().join("p.json"), problem).unwrap();
    let o = run(d.path(), &["solve", "--problem", "p.json", "--out", "u.csv"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn growing_tail_exits_with_four() {
    let d = TempDir::new().unwrap();
    write_grid(d.path(), "u.csv", |x| x.abs().powf(1.5));
    fs::write(
        d.path().join("t.json"),
        r#"{"pieces": [
          {"from": null, "to": -2.0, "formula": {"kind": "power", "coefficient": 1.0, "exponent": 1.5}},
          {"from": 2.0, "to": null, "formula": {"kind": "power", "coefficient": 1.0, "exponent": 1.5}}
        ]}"#,
    )
    .unwrap();
    fs::write(d.path().join("k.json"), r#"{"sigma": 1.0}"#).unwrap();
    let o = run(
        d.path(),
        &[
            "eval", "--u", "u.csv", "--tail", "t.json", "--kernel", "k.json", "--points", "0", "--out", "v.csv",
        ],
    );
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn eval_family_reports_argmin() {
    let d = TempDir::new().unwrap();
    write_grid(d.path(), "u.csv", |x| (1.0 - x * x).max(0.0).powi(2));
    fs::write(
        d.path().join("f.json"),
        r#"{"params": {"lambda": 1.0, "Lambda": 3.0}, "members": [
          {"kernel": {"sigma": 1.0}, "coefficient": {"kind": "constant", "value": 5.0}},
          {"kernel": {"sigma": 1.0}, "coefficient": {"kind": "constant", "value": -5.0}}
        ]}"#,
    )
    .unwrap();
    let o = run(
        d.path(),
        &[
            "eval",
            "--u",
            "u.csv",
            "--family",
            "f.json",
            "--points",
            "-0.5,0,0.5",
            "--out",
            "v.csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(d.path().join("v.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "x,value,argmin");
    assert_eq!(lines.len(), 4);
    assert!(lines[1..].iter().all(|l| l.ends_with(",1")));
}

#[test]
fn liouville_check_on_a_quadratic() {
    let d = TempDir::new().unwrap();
    write_grid(d.path(), "u.csv", |x| x * x);
    fs::write(
        d.path().join("t.json"),
        r#"{"pieces": [
          {"from": null, "to": -2.0, "formula": {"kind": "polynomial", "coeffs": [0.0, 0.0, 1.0]}},
          {"from": 2.0, "to": null, "formula": {"kind": "polynomial", "coeffs": [0.0, 0.0, 1.0]}}
        ]}"#,
    )
    .unwrap();
    let o = run(
        d.path(),
        &[
            "liouville-check",
            "--u",
            "u.csv",
            "--tail",
            "t.json",
            "--sigma",
            "1.5",
            "--alpha",
            "0.6",
            "--c1",
            "10",
            "--shifts",
            "-0.5,0.25",
            "--radii",
            "1",
            "--out",
            "l.json",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("l.json")).unwrap()).unwrap();
    assert!(rep["polynomial_residual"].as_f64().unwrap() < 1e-8);
    assert_eq!(rep["comparability"]["pass"], true);
}

#[test]
fn bad_flags_exit_with_one() {
    let d = TempDir::new().unwrap();
    assert_eq!(code(&run(d.path(), &["solve"])), 1);
    assert_eq!(code(&run(d.path(), &["frobnicate"])), 1);
    assert_eq!(code(&run(d.path(), &["--help"])), 0);
}

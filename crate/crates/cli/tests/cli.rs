use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lattice-spectra")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn thresholds_csv() {
    let out = run(&["thresholds", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().unwrap().clone();
    let row = rdr.records().next().unwrap().unwrap();
    let col = |name: &str| row[header.iter().position(|h| h == name).unwrap()].parse::<f64>().unwrap();
    assert!((col("gamma_es") - 0.5).abs() < 1e-8);
    assert!((col("gamma_os") - std::f64::consts::PI / (2.0 * std::f64::consts::PI - 4.0)).abs() < 1e-8);
    // metadata goes to stderr when the table is on stdout
    assert!(String::from_utf8_lossy(&out.stderr).contains("\"command\":\"thresholds\""));
}

#[test]
fn solve_counts() {
    let v = json(&["solve", "-a", "1", "-b", "3", "--mu", "1"]);
    assert_eq!(v["result"]["total_count"], 4);
    assert_eq!(v["result"]["records"].as_array().unwrap().len(), 4);
    let none = json(&["solve", "-a", "-1", "-b", "-1", "--mu", "2"]);
    assert_eq!(none["result"]["total_count"], 0);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["solve", "-a", "0", "-b", "1", "--mu", "1"]).status.code(), Some(1));
    assert_eq!(run(&["--model", "bogus", "validate"]).status.code(), Some(3));
    assert_eq!(run(&["--model", "stepped_phi_a", "validate"]).status.code(), Some(3));
    assert_eq!(run(&["solve", "-a", "1"]).status.code(), Some(3));
}

#[test]
fn output_is_deterministic() {
    let args = ["curve", "--sector", "ea", "-a", "1", "-b", "1", "--mu-min", "2", "--mu-max", "3", "--points", "8"];
    let first = run(&args);
    let second = run(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn tolerance_overrides_are_recorded() {
    let v = json(&["--tol-root", "1e-10", "--tol-floor", "1e-12", "solve", "-a", "1", "-b", "1", "--mu", "2"]);
    assert_eq!(v["metadata"]["tolerances"]["root"], 1e-10);
    assert_eq!(v["metadata"]["tolerances"]["floor"], 1e-12);
    assert_eq!(v["metadata"]["command"], "solve");
}

#[test]
fn csv_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("solve.csv");
    let out = run(&["solve", "-a", "1", "-b", "3", "--mu", "1", "--format", "csv", "-o", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("sector,energy,offset"));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("# metadata:"));
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let sectors: Vec<String> = rdr.records().map(|r| r.unwrap()[0].to_string()).collect();
    assert_eq!(sectors, ["os", "oa", "ea", "es"]);
}

#[test]
fn validate_reports_failures() {
    let ok = json(&["validate"]);
    assert_eq!(ok["result"]["report"]["passed"], true);
    let bad = run(&["--model", "stepped_phi_a", "--amplitude", "1", "validate"]);
    let text = String::from_utf8_lossy(&bad.stdout);
    assert!(text.contains("\"passed\": false") || bad.status.code() == Some(1), "{text}");
}

#[test]
fn triple_emergence_and_multiplicity() {
    let t = json(&["triple-emergence"]);
    assert_eq!(t["result"]["jump"], 3);
    let m = json(&["multiplicity", "--z0", "1.5"]);
    assert_eq!(m["result"]["multiplicity_two"], true);
    assert!(m["result"]["A0"].as_f64().unwrap() > 0.0);
}

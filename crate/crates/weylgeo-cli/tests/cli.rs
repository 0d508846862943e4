use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_weylgeo"))
}

fn chart(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../charts")
        .join(name)
}

fn parse_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("report on stdout should be JSON")
}

fn parse_file(path: &Path) -> Value {
    let text = std::fs::read_to_string(path).expect("report file should exist");
    serde_json::from_str(&text).expect("report file should be JSON")
}

#[test]
fn identities_pass_on_a_bilinear_chart() {
    let out = bin()
        .args(["identities", "--chart"])
        .arg(chart("bilinear_2x2.json"))
        .args(["--samples", "25", "--no-meta"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report = parse_stdout(&out);
    assert_eq!(report["pass"], Value::Bool(true));
    assert!(report["max_residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn reports_are_deterministic_without_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let out = bin()
            .args(["identities", "--chart"])
            .arg(chart("mixed_2x3.json"))
            .args(["--samples", "10", "--seed", "7", "--no-meta", "--out"])
            .arg(path)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn malformed_chart_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"n1\": 2}").unwrap();
    let out = bin()
        .args(["identities", "--chart"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn einstein_accepts_the_bilinear_solution() {
    let out = bin()
        .args(["einstein", "--chart"])
        .arg(chart("bilinear_2x2.json"))
        .args(["--samples", "30", "--no-meta"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report = parse_stdout(&out);
    assert_eq!(report["einstein_weyl"], Value::Bool(true));
    assert_eq!(report["closed"], Value::Bool(false));
}

#[test]
fn einstein_flags_the_quadratic_warp() {
    let out = bin()
        .args(["einstein", "--chart"])
        .arg(chart("quadratic_2x2.json"))
        .args(["--samples", "30", "--lo", "0.2", "--hi", "1.0", "--no-meta"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let report = parse_stdout(&out);
    assert_eq!(report["einstein_weyl"], Value::Bool(false));
    assert!(report["scan"]["residual_max"].as_f64().unwrap() > 0.1);
}

#[test]
fn einstein_reports_the_obstruction_on_equal_splits() {
    let out = bin()
        .args(["einstein", "--chart"])
        .arg(chart("nogo_3x3.json"))
        .args(["--samples", "40", "--no-meta"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let report = parse_stdout(&out);
    let no_go = &report["no_go"];
    assert!(no_go.is_object(), "equal split should add the no_go section");
    assert!(no_go["residual_min"].as_f64().unwrap() > 1e-3);
}

#[test]
fn holonomy_finds_the_generic_reducible_class() {
    let out = bin()
        .args(["holonomy", "--chart"])
        .arg(chart("bilinear_2x2.json"))
        .args(["--no-meta"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report = parse_stdout(&out);
    assert_eq!(report["dim"], Value::from(3));
    assert_eq!(report["class"], Value::from("ReducibleGeneric"));
    assert!(report["id_projection"].as_f64().unwrap() > 0.999);
    assert_eq!(report["stable"], Value::Bool(true));
}

#[test]
fn holonomy_labels_the_flat_chart_closed() {
    let out = bin()
        .args(["holonomy", "--chart"])
        .arg(chart("flat_2x2.json"))
        .args(["--no-meta"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report = parse_stdout(&out);
    assert_eq!(report["dim"], Value::from(0));
    assert_eq!(report["class"], Value::from("ClosedReducible"));
}

#[test]
fn holonomy_dimension_tracks_the_split() {
    let out = bin()
        .args(["holonomy", "--chart"])
        .arg(chart("flat_2x3.json"))
        .args(["--transported", "3", "--no-meta"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report = parse_stdout(&out);
    assert_eq!(report["dim"], Value::from(5));
    assert_eq!(report["class"], Value::from("ReducibleGeneric"));
}

#[test]
fn holonomy_sees_the_balanced_diagonal_class() {
    let out = bin()
        .args(["holonomy", "--chart"])
        .arg(chart("balanced_2x2.json"))
        .args(["--no-meta"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report = parse_stdout(&out);
    assert_eq!(report["dim"], Value::from(2));
    assert_eq!(report["class"], Value::from("ComplexDiagonal"));
}

#[test]
fn toda_reproduces_a_product_solution() {
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("report.json");
    let out = bin()
        .args(["toda", "--boundary", "x1*x3", "--exact", "x1*x3", "--no-meta", "--out"])
        .arg(&report_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report = parse_file(&report_path);
    assert_eq!(report["converged"], Value::Bool(true));
    assert!(report["exact_interior_error"].as_f64().unwrap() < 1e-7);
    let order = &report["order"];
    let floored = order["at_error_floor"] == Value::Bool(true);
    let steep = order["observed_order"].as_f64().map_or(false, |p| p >= 1.9);
    assert!(floored || steep, "order block should witness second-order accuracy: {order}");
    for key in ["grid_csv", "grid_sidecar", "residual_history_csv"] {
        let path = PathBuf::from(report[key].as_str().unwrap());
        assert!(path.exists(), "{key} should be written");
    }
}

#[test]
fn toda_accepts_comma_delimited_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("r.json");
    let out = bin()
        .args(["toda", "--shape", "5,5,5,5", "--boundary", "0", "--no-meta", "--out"])
        .arg(&report_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(parse_file(&report_path)["shape"], serde_json::json!([5, 5, 5, 5]));

    let out = bin()
        .args(["toda", "--shape", "5,5,5", "--boundary", "0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn toda_rejects_an_out_of_range_relaxation_factor() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["toda", "--boundary", "x1*x3", "--omega", "2.5", "--out"])
        .arg(dir.path().join("r.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn toda_resumes_from_a_saved_grid() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.json");
    let out = bin()
        .args(["toda", "--boundary", "x1*x3", "--no-meta", "--out"])
        .arg(&first)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let sidecar = parse_file(&first)["grid_sidecar"].as_str().unwrap().to_owned();

    let second = dir.path().join("second.json");
    let out = bin()
        .args(["toda", "--boundary", &format!("@{sidecar}"), "--no-meta", "--out"])
        .arg(&second)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report = parse_file(&second);
    assert_eq!(report["converged"], Value::Bool(true));
    assert!(report["iterations"].as_u64().unwrap() <= 2, "solved grid should need no work");
}

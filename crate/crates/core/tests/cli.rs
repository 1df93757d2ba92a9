use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_fibrelin");

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/isidori.fl")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("FIBRELIN_TOL").output().unwrap()
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(bytes)))
}

fn assert_schema(value: &Value) {
    let text =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/report.schema.json")).unwrap();
    let schema = jsonschema::JSONSchema::compile(&serde_json::from_str(&text).unwrap()).unwrap();
    if let Err(errors) = schema.validate(value) {
        let msgs: Vec<String> = errors.map(|e| format!("{} at {}", e, e.instance_path)).collect();
        panic!("schema violations: {msgs:#?}");
    };
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines().skip(1).map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect()
}

#[test]
fn analyze_reports_the_normal_form() {
    let out = run(&["analyze", fixture().to_str().unwrap(), "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out.stdout);
    assert_schema(&v);
    assert_eq!(v["relative_degree"], 2);
    assert_eq!(v["phi"], serde_json::json!(["x3", "x2"]));
    assert_eq!(v["psi"], "u + x1*x2");
    assert_eq!(v["zero_dynamics"], serde_json::json!(["-x1*(1 + x2*exp(x2))", "0", "0"]));
    assert_eq!(v["fibre_restriction"]["state_field"], serde_json::json!(["-x1"]));
    assert_eq!(v["det_at_point"], -1.0);
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}

#[test]
fn analyze_text_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let out = run(&["analyze", fixture().to_str().unwrap(), "--out", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("relative degree r = 2"), "{text}");
    assert!(text.contains("dx1/dt = -x1"), "{text}");
    assert_schema(&json(&std::fs::read(report).unwrap()));
}

#[test]
fn heuristic_completion_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let text: String = std::fs::read_to_string(fixture())
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with("complement"))
        .map(|l| format!("{l}\n"))
        .collect();
    let path = write(dir.path(), "bare.fl", &text);
    let out = run(&["analyze", path.to_str().unwrap(), "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out.stdout);
    assert_schema(&v);
    assert_eq!(v["complement_source"], "completed");
    assert_eq!(v["complement"], serde_json::json!(["x1"]));
    assert_eq!(v["fibre_restriction"]["state_field"], serde_json::json!(["-x1"]));
}

#[test]
fn full_relative_degree_skips_zero_dynamics() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "pendulum.fl", "states x1 x2\ninput u\nf = [x2, -sin(x1)]\ng = [0, 1]\nh = x1\n");
    let out = run(&["analyze", path.to_str().unwrap(), "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out.stdout);
    assert_schema(&v);
    assert!(v["zero_dynamics"].is_null());
    let notes: Vec<&str> = v["diagnostics"].as_array().unwrap().iter().map(|d| d.as_str().unwrap()).collect();
    assert!(notes.iter().any(|d| d.contains("zero-dynamics pipeline skipped")), "{notes:?}");

    let out = run(&["verify", path.to_str().unwrap(), "--trials", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out.stdout);
    assert!(v["suites"].as_array().unwrap().iter().all(|s| s["name"] != "zero_dynamics"));
}

#[test]
fn verify_output_is_valid_and_reproducible() {
    let file = fixture();
    let args = ["verify", file.to_str().unwrap(), "--trials", "20", "--seed", "7"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stdout));
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a.stdout);
    assert_schema(&v);
    assert_eq!(v["passed"], true);
    assert_eq!(v["seed"], 7);
    let names: Vec<&str> = v["suites"].as_array().unwrap().iter().map(|s| s["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["calculus", "connection", "zero_dynamics", "trajectories"]);

    let other = run(&["verify", file.to_str().unwrap(), "--trials", "20", "--seed", "8"]);
    assert_ne!(other.stdout, a.stdout);
}

#[test]
fn verify_with_zero_trials_is_empty() {
    let out = run(&["verify", fixture().to_str().unwrap(), "--trials", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out.stdout);
    assert_schema(&v);
    assert_eq!(v["suites"], serde_json::json!([]));
}

#[test]
fn tolerance_override_can_fail_verification() {
    let file = fixture();
    let out = Command::new(BIN)
        .args(["verify", file.to_str().unwrap(), "--trials", "10"])
        .env("FIBRELIN_TOL", "1e-300")
        .output()
        .unwrap();
    // Rounding alone exceeds this bound, so some check must fail.
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out.stdout);
    assert_schema(&v);
    assert_eq!(v["passed"], false);
    assert_eq!(v["tolerances"]["zero"].as_f64(), Some(1e-300));

    let out = run(&["verify", file.to_str().unwrap(), "--trials", "10", "--tol", "1e-3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out.stdout)["tolerances"]["zero"].as_f64(), Some(1e-3));

    let out = Command::new(BIN).args(["verify", file.to_str().unwrap()]).env("FIBRELIN_TOL", "abc").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["verify", file.to_str().unwrap(), "--tol", "-1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn lifted_mode_projects_onto_linear_mode() {
    let dir = tempfile::tempdir().unwrap();
    let file = fixture();
    let lifted = dir.path().join("lifted.csv");
    let linear = dir.path().join("linear.csv");
    let out = run(&[
        "simulate",
        file.to_str().unwrap(),
        "--mode",
        "lifted",
        "--x0",
        "0.5,-0.7,0.3",
        "--input",
        "sin(t)",
        "--out",
        lifted.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&[
        "simulate",
        file.to_str().unwrap(),
        "--mode",
        "linear",
        "--x0",
        "0.3,-0.7",
        "--input",
        "sin(t)",
        "--out",
        linear.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let a = csv_rows(&std::fs::read_to_string(lifted).unwrap());
    let b = csv_rows(&std::fs::read_to_string(linear).unwrap());
    assert_eq!(a.len(), 1001);
    assert_eq!(a.len(), b.len());
    for (x, z) in a.iter().zip(&b) {
        // Φ = (x3, x2); columns are t, x1, x2, x3, u and t, z1, z2, v.
        assert!((x[3] - z[1]).abs() <= 1e-6 && (x[2] - z[2]).abs() <= 1e-6, "{x:?} vs {z:?}");
    }
}

#[test]
fn zero_mode_decays_on_the_zero_fibre() {
    let out = run(&["simulate", fixture().to_str().unwrap(), "--mode", "zero", "--x0", "1,0,0"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("t,x1,x2,x3,u\n"));
    let last = csv_rows(&text).pop().unwrap();
    assert!((last[1] - (-1f64).exp()).abs() <= 1e-6, "{last:?}");
}

#[test]
fn lift_command_follows_a_base_curve() {
    let dir = tempfile::tempdir().unwrap();
    let file = fixture();
    let base = dir.path().join("base.csv");
    let out = run(&[
        "simulate",
        file.to_str().unwrap(),
        "--mode",
        "linear",
        "--x0",
        "0,0",
        "--input",
        "cos(t)",
        "--out",
        base.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let out = run(&["lift", file.to_str().unwrap(), "--curve", base.to_str().unwrap(), "--x0", "1,0,0"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let lifted = csv_rows(&String::from_utf8(out.stdout).unwrap());
    let base = csv_rows(&std::fs::read_to_string(base).unwrap());
    for (x, z) in lifted.iter().zip(&base) {
        assert!((x[3] - z[1]).abs() <= 1e-6 && (x[2] - z[2]).abs() <= 1e-6);
    }

    let out = run(&["lift", file.to_str().unwrap(), "--curve", "/nonexistent/curve.csv", "--x0", "1,0,0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.fl", "states x1 x2\ninput u\nf = [x1 +, 0]\ng = [0, 1]\nh = x1\n");
    let out = run(&["analyze", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out.stderr);
    assert_schema(&v);
    assert_eq!(v["error"]["kind"], "syntax");
    assert_eq!(v["error"]["line"], 3);

    let undeclared = write(dir.path(), "undeclared.fl", "states x1 x2\ninput u\nf = [y, 0]\ng = [0, 1]\nh = x1\n");
    let out = run(&["analyze", undeclared.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out.stderr)["error"]["kind"], "undeclared");

    let out = run(&["simulate", fixture().to_str().unwrap(), "--x0", "1,2"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out.stderr)["error"]["kind"], "dimension");

    let out = run(&["analyze", "/nonexistent/system.fl"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["analyze", fixture().to_str().unwrap(), "--point", "0,0"]);
    assert_eq!(out.status.code(), Some(2));

    // Lg h vanishes identically: no relative degree.
    let none = write(dir.path(), "none.fl", "states x1 x2\ninput u\nf = [0, 0]\ng = [0, 1]\nh = x1\n");
    let out = run(&["analyze", none.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out.stderr);
    assert_schema(&v);
    assert_eq!(v["error"]["kind"], "no_relative_degree");

    let blow =
        write(dir.path(), "blow.fl", "states x1 x2\ninput u\nf = [x1^2, 0]\ng = [0, 1]\nh = x2\ncomplement = [x1]\n");
    let out = run(&["simulate", blow.to_str().unwrap(), "--x0", "2,0", "--t-end", "1"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out.stderr)["error"]["kind"], "non_finite");
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_genfrac"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    let mut cmd = bin();
    cmd.args(args).arg("--out-dir").arg(out);
    cmd.output().expect("binary runs")
}

fn ok(output: &Output) -> String {
    assert!(
        output.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout.clone()).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn error_of(output: &Output) -> (i32, Value) {
    let stderr = String::from_utf8(output.stderr.clone()).unwrap();
    (output.status.code().unwrap(), serde_json::from_str(stderr.trim()).expect("stderr is one JSON object"))
}

#[test]
fn tracking_golden_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("tracking_exponential.toml");
    let line = ok(&run(&["solve", "--config", cfg.to_str().unwrap()], dir.path()));
    assert!(line.starts_with("solve: n=64"), "{line}");
    let (header, rows) = read_csv(&dir.path().join("y.csv"));
    assert_eq!(header, ["t", "y"]);
    assert_eq!(rows.len(), 65);
    for r in &rows {
        assert!((r[1] - (-1.0 - r[0])).abs() <= 1e-3);
    }
    let report = read_json(&dir.path().join("el_residual.json"));
    assert!(report["max_abs"].as_f64().unwrap() <= 5e-4);

    let check = config("tracking_exponential_check.toml");
    ok(&run(&["el_check", "--config", check.to_str().unwrap()], dir.path()));
    let report = read_json(&dir.path().join("el_residual.json"));
    assert!(report["max_abs"].as_f64().unwrap() <= 5e-4);
    assert_eq!(report["nodes"], 511);
}

#[test]
fn isoperimetric_configs_recover_multiplier_and_extremal() {
    let (alpha, xi) = (0.3, 2.0);
    let cases: [(&str, Box<dyn Fn(f64) -> f64>); 2] = [
        ("isoperimetric_exponential.toml", Box::new(move |t| (xi - 1.0) * (1.0 - alpha * t))),
        ("isoperimetric_cosine.toml", Box::new(move |t| (xi - 1.0) * (1.0 + alpha * alpha * t * t / 2.0))),
    ];
    for (name, exact) in cases {
        let dir = tempfile::tempdir().unwrap();
        ok(&run(&["iso_solve", "--config", config(name).to_str().unwrap()], dir.path()));
        let summary = read_json(&dir.path().join("summary.json"));
        let lambda = summary["multipliers"][0].as_f64().unwrap();
        assert!((lambda - 2.0 * xi).abs() <= 5e-2, "{name}: {lambda}");
        let (_, rows) = read_csv(&dir.path().join("y.csv"));
        let err = rows.iter().map(|r| (r[1] - exact(r[0])).abs()).fold(0.0, f64::max);
        assert!(err <= 5e-3, "{name}: {err}");
    }
}

#[test]
fn free_left_end_reports_natural_boundary() {
    let dir = tempfile::tempdir().unwrap();
    ok(&run(&["run", "--config", config("caputo_free_left.toml").to_str().unwrap()], dir.path()));
    let report = read_json(&dir.path().join("el_residual.json"));
    assert!(report["natural_boundary"].as_f64().unwrap().abs() <= 1e-3);
}

#[test]
fn noether_config_reports_invariance_and_constant_q() {
    let dir = tempfile::tempdir().unwrap();
    ok(&run(&["noether", "--config", config("noether_caputo.toml").to_str().unwrap()], dir.path()));
    let inv = read_json(&dir.path().join("invariance.json"));
    assert_eq!(inv["exact"], true);
    let summary = read_json(&dir.path().join("summary.json"));
    assert!(summary["conserved_quantity"]["relative_stdev"].as_f64().unwrap() <= 1e-3);
    assert!(summary["noether_residual"]["max_abs"].as_f64().unwrap() <= 1e-3);
}

#[test]
fn operator_eval_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    ok(&run(&["operator_eval", "--config", config("caputo_monomial.toml").to_str().unwrap()], dir.path()));
    let (header, rows) = read_csv(&dir.path().join("points.csv"));
    assert_eq!(header, ["t", "K", "A", "B", "one_sided"]);
    // K of t^2 is the order-1/2 integral 2 t^2.5 / Gamma(3.5); B is 2 t^1.5 / Gamma(2.5)
    let gamma_35 = 15.0 * std::f64::consts::PI.sqrt() / 8.0;
    let gamma_25 = 3.0 * std::f64::consts::PI.sqrt() / 4.0;
    for r in &rows {
        assert!((r[1] - 2.0 * r[0].powf(2.5) / gamma_35).abs() <= 1e-4, "{r:?}");
        assert!((r[3] - 2.0 * r[0].powf(1.5) / gamma_25).abs() <= 1e-4, "{r:?}");
    }
    let summary = read_json(&dir.path().join("summary.json"));
    assert!(summary["properties"]["linearity"].as_f64().unwrap() <= 1e-10);
    assert_eq!(summary["properties"]["dual_involution"], true);
}

#[test]
fn multidim_configs() {
    let dir = tempfile::tempdir().unwrap();
    ok(&run(&["multidim_check", "--config", config("plane_wave.toml").to_str().unwrap()], dir.path()));
    let summary = read_json(&dir.path().join("residual_summary.json"));
    assert!(summary["max_abs_within_margin"].as_f64().unwrap() <= 1e-2);
    let (header, rows) = read_csv(&dir.path().join("residual.csv"));
    assert_eq!(header, ["i0", "i1", "t0", "t1", "residual"]);
    assert_eq!(rows.len(), 129 * 129);

    ok(&run(&["run", "--config", config("harmonic.toml").to_str().unwrap(), "--grid-n", "16"], dir.path()));
    let summary = read_json(&dir.path().join("residual_summary.json"));
    assert_eq!(summary["axes"][1]["n"], 16);
}

#[test]
fn every_shipped_config_runs() {
    let mut names: Vec<_> = fs::read_dir(config("")).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    assert!(names.len() >= 8);
    for path in names {
        let dir = tempfile::tempdir().unwrap();
        let line = ok(&run(&["run", "--config", path.to_str().unwrap()], dir.path()));
        assert_eq!(line.lines().count(), 1, "{line}");
        assert!(dir.path().join("summary.json").exists());
    }
}

#[test]
fn outputs_are_deterministic() {
    let cfg = config("noether_caputo.toml");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    ok(&run(&["run", "--config", cfg.to_str().unwrap()], a.path()));
    ok(&run(&["run", "--config", cfg.to_str().unwrap()], b.path()));
    for file in ["noether_residual.csv", "conserved_quantity.csv", "invariance.json", "summary.json"] {
        assert_eq!(fs::read(a.path().join(file)).unwrap(), fs::read(b.path().join(file)).unwrap(), "{file}");
    }
    let cfg = config("caputo_monomial.toml");
    for seed in ["3", "3"] {
        ok(&run(&["run", "--config", cfg.to_str().unwrap(), "--seed", seed], a.path()));
    }
}

#[test]
fn csv_values_use_seventeen_digits() {
    let dir = tempfile::tempdir().unwrap();
    ok(&run(&["run", "--config", config("tracking_exponential.toml").to_str().unwrap()], dir.path()));
    let text = fs::read_to_string(dir.path().join("y.csv")).unwrap();
    let row = text.lines().nth(2).unwrap();
    assert_eq!(row, "1.5625000000000000e-2,-1.0156250000000000e0");
}

#[test]
fn json_format_and_grid_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("tracking_exponential.toml");
    ok(&run(&["solve", "--config", cfg.to_str().unwrap(), "--format", "json", "--grid-n", "32"], dir.path()));
    let y = read_json(&dir.path().join("y.json"));
    assert_eq!(y["columns"], serde_json::json!(["t", "y"]));
    assert_eq!(y["data"].as_array().unwrap().len(), 33);
    assert!(!dir.path().join("y.csv").exists());
}

#[test]
fn empty_config_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "");
    let (code, err) = error_of(&run(&["solve", "--config", path.to_str().unwrap()], dir.path()));
    assert_eq!(code, 2);
    assert_eq!(err["error"], "validation");
    assert!(err["message"].as_str().unwrap().contains("missing [grid]"));
    let (code, _) = error_of(&run(&["run", "--config", path.to_str().unwrap()], dir.path()));
    assert_eq!(code, 2);
}

#[test]
fn schema_violations_exit_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let base = fs::read_to_string(config("tracking_exponential.toml")).unwrap();
    let cases = [
        base.replace("n = 64", "n = 64\nspacing = 2"),
        base.replace("rate = -1.0", "rate = -1.0, beta = 2.0"),
        base.replace("builtin = \"tracking\"", "builtin = \"no_such_lagrangian\""),
        base.replace("kind = \"solve\"", "kind = \"iso_solve\""),
        base.replace("n = 64", "n = 0"),
        base.replace("[lagrangian]", "[noether]\ngenerator = 1.0\n\n[lagrangian]"),
        format!("{base}\n[trajectory]\nsolve = true\n"),
        "kind = \"solve\"\n[grid\n".to_string(),
    ];
    for text in cases {
        let path = write_config(dir.path(), &text);
        let (code, err) = error_of(&run(&["solve", "--config", path.to_str().unwrap()], dir.path()));
        assert_eq!(code, 2, "{err}");
        assert_eq!(err["error"], "validation");
    }
    let (code, _) = error_of(&run(&["solve", "--config", "/nonexistent/config.toml"], dir.path()));
    assert_eq!(code, 2);
}

#[test]
fn numerical_failure_exits_with_status_three() {
    let dir = tempfile::tempdir().unwrap();
    let base = fs::read_to_string(config("caputo_free_left.toml")).unwrap();
    let path = write_config(dir.path(), &base.replace("[output]", "[solver]\nmax_iterations = 2\n\n[output]"));
    let (code, err) = error_of(&run(&["solve", "--config", path.to_str().unwrap()], dir.path()));
    assert_eq!(code, 3);
    assert_eq!(err["error"], "numerical");
    assert_eq!(err["kind"], "non_convergence");
}

#[test]
fn polynomial_lagrangian_matches_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let base = fs::read_to_string(config("tracking_exponential_check.toml")).unwrap();
    ok(&run(&["el_check", "--config", config("tracking_exponential_check.toml").to_str().unwrap()], dir.path()));
    let builtin = fs::read_to_string(dir.path().join("el_residual.csv")).unwrap();
    // (x2 + t)^2 = x2^2 + 2 x2 t + t^2
    let poly = base.replace(
        "builtin = \"tracking\"",
        "polynomial = [\n  { coefficient = 1.0, powers = [0, 2, 0, 0, 0] },\n  { coefficient = 2.0, powers = [0, 1, 0, 0, 1] },\n  { coefficient = 1.0, powers = [0, 0, 0, 0, 2] },\n]",
    );
    let path = write_config(dir.path(), &poly);
    ok(&run(&["el_check", "--config", path.to_str().unwrap()], dir.path()));
    let (_, a) = read_csv(&dir.path().join("el_residual.csv"));
    let b: Vec<Vec<f64>> = builtin.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    for (x, y) in a.iter().zip(&b) {
        assert!((x[1] - y[1]).abs() <= 1e-12);
    }
}

#[test]
fn builtin_registry_listing() {
    let out = bin().arg("list-builtins").arg("--json").output().unwrap();
    let list: Value = serde_json::from_slice(&out.stdout).unwrap();
    let list = list.as_array().unwrap();
    assert!(list.len() >= 8);
    assert!(list.iter().all(|e| !e["description"].as_str().unwrap().is_empty()));
    let text = ok(&bin().args(["list-builtins", "--name", "tracking"]).output().unwrap());
    assert!(text.contains("(x2 + t)^2"));
    let out = bin().args(["list-builtins", "--name", "nope"]).output().unwrap();
    let (code, err) = error_of(&out);
    assert_eq!(code, 2);
    assert!(err["message"].as_str().unwrap().contains("nope"));
}

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn config(name: &str) -> String {
    root().join("configs").join(name).display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_teleport"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Vec<u8> {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn json(args: &[&str]) -> Value {
    serde_json::from_slice(&run_ok(args)).expect("stdout is JSON")
}

fn assert_schema(value: &Value, schema: &str) {
    let path = root().join("schemas").join(schema);
    let schema: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(value).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

fn f(v: &Value) -> f64 {
    v.as_f64().expect("number")
}

fn mod180_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(180.0);
    d.min(180.0 - d)
}

#[test]
fn linear_sweep_maxima() {
    let v = json(&["teleport", "--config", &config("linear-22.5.json")]);
    assert_schema(&v, "teleport-summary.schema.json");
    let want = [("c+", 67.5), ("c-", 112.5), ("d+", 22.5), ("d-", -22.5)];
    for o in v["outcomes"].as_array().unwrap() {
        let label = o["outcome"].as_str().unwrap();
        let (_, w) = want.iter().find(|(l, _)| *l == label).unwrap();
        assert!(mod180_distance(f(&o["theta_max_deg"]), *w) <= 2.0, "{label}: {o}");
        assert_eq!(f(&o["fidelity"]), 1.0);
    }
}

#[test]
fn elliptical_extinction_at_dark_level() {
    let v = json(&["teleport", "--config", &config("elliptical-gamma20.json")]);
    assert_schema(&v, "teleport-summary.schema.json");
    let dark = f(&v["noise"]["dark_rate"]);
    for o in v["outcomes"].as_array().unwrap() {
        // Poisson(2) exceeds 12 with probability below 1e-6
        assert!((o["i_perp"].as_u64().unwrap() as f64) <= dark + 10.0, "{o}");
        assert!(o["i_par"].as_u64().unwrap() > 800);
        let gamma_b = f(&o["verifier"]["gamma_b_deg"]);
        let expect = match o["outcome"].as_str().unwrap() {
            "d+" => 110.0,
            "d-" => 70.0,
            "c+" => 20.0,
            _ => -20.0,
        };
        assert_eq!(gamma_b, expect);
    }
}

#[test]
fn noisy_sweep_runs() {
    let v = json(&["teleport", "--config", &config("linear-22.5-noisy.json")]);
    assert_schema(&v, "teleport-summary.schema.json");
    for o in v["outcomes"].as_array().unwrap() {
        assert!(f(&o["visibility"]) < 0.8);
    }
}

#[test]
fn teleport_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let cfg = config("linear-22.5-noisy.json");
    let first = run_ok(&["teleport", "--config", &cfg, "--seed", "17", "--out", a.to_str().unwrap()]);
    let second = run_ok(&["teleport", "--config", &cfg, "--seed", "17", "--out", b.to_str().unwrap()]);
    assert_eq!(first, second);
    for name in ["teleport_summary.json", "teleport_fringes.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let other = run_ok(&["teleport", "--config", &cfg, "--seed", "18"]);
    assert_ne!(first, other);
}

#[test]
fn seed_flag_overrides_config() {
    let cfg = config("verify-s-v0662.json");
    let v = json(&["verify-s", "--config", &cfg, "--seed", "99"]);
    assert_eq!(v["seed"].as_u64(), Some(99));
    let v = json(&["verify-s", "--config", &cfg]);
    assert_eq!(v["seed"].as_u64(), Some(7));
}

#[test]
fn teleport_csv_output() {
    let out = run_ok(&["teleport", "--config", &config("linear-22.5.json"), "--format", "csv"]);
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("state_deg,gamma_deg,outcome,theta_b_deg,count,window_s"));
    assert_eq!(lines.count(), 4 * 91);
    assert!(!text.contains('\r'));
    assert!(text.ends_with('\n'));
}

#[test]
fn out_dir_receives_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested/run");
    let stdout = run_ok(&["verify-s", "--out", out.to_str().unwrap()]);
    assert_eq!(fs::read(out.join("verify_s_summary.json")).unwrap(), stdout);
    let csv = fs::read_to_string(out.join("verify_s_counts.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 24);
}

#[test]
fn trine_bound() {
    let v = json(&["bound", "--config", &config("trine-bound.json")]);
    assert_schema(&v, "bound-summary.schema.json");
    assert!((f(&v["s_best"]) - 0.75).abs() < 1e-3);
    assert!(f(&v["s_best"]) <= 0.75 + 1e-6);
    assert!((f(&v["t_max"]) - 1.125).abs() < 2e-3);
    assert_eq!(v["bound_ok"], Value::Bool(true));
    assert_eq!(v["povm"]["valid"], Value::Bool(true));
}

#[test]
fn trine_bound_three_outcomes() {
    let v = json(&["bound", "--config", &config("trine-bound-l3.json")]);
    assert_schema(&v, "bound-summary.schema.json");
    assert!((f(&v["s_best"]) - 0.75).abs() < 1e-3);
    assert_eq!(v["strategy"]["resend"].as_array().unwrap().len(), 3);
}

#[test]
fn single_state_bound() {
    let v = json(&["bound", "--config", &config("single-state-bound.json")]);
    assert_schema(&v, "bound-summary.schema.json");
    assert!((f(&v["s_best"]) - 1.0).abs() < 1e-9);
    assert!((f(&v["t_max"]) - 1.0).abs() < 1e-12);
}

#[test]
fn bound_is_deterministic() {
    let cfg = config("trine-bound-l3.json");
    assert_eq!(run_ok(&["bound", "--config", &cfg]), run_ok(&["bound", "--config", &cfg]));
}

#[test]
fn verify_s_headline() {
    let v = json(&["verify-s", "--config", &config("verify-s-v0662.json")]);
    assert_schema(&v, "verify-s-summary.schema.json");
    assert!((f(&v["s"]) - 0.831).abs() <= 0.01, "{}", v["s"]);
    assert!((f(&v["expected_s"]) - 0.831).abs() < 1e-12);
    assert!(f(&v["sigma_violation"]) > 5.0);
}

#[test]
fn verify_s_ideal() {
    let v = json(&["verify-s", "--config", &config("verify-s-ideal.json")]);
    assert_schema(&v, "verify-s-summary.schema.json");
    assert_eq!(f(&v["s"]), 1.0);
    assert!(f(&v["sigma_violation"]) > 100.0);
}

#[test]
fn verify_s_classical_boundary() {
    let v = json(&["verify-s", "--config", &config("verify-s-v05.json")]);
    assert!((f(&v["s"]) - 0.75).abs() < 0.015);
    assert!(f(&v["sigma_violation"]).abs() < 4.0);
}

#[test]
fn decompose_branches() {
    let v = json(&["decompose", "--config", &config("decompose-22.5.json")]);
    assert_schema(&v, "decompose-summary.schema.json");
    for b in v["branches"].as_array().unwrap() {
        assert!((f(&b["coefficient"][0]) - 0.5).abs() < 1e-12);
        assert_eq!(f(&b["coefficient"][1]), 0.0);
    }
    assert_eq!(v["joint"].as_array().unwrap().len(), 4);
    let csv = String::from_utf8(run_ok(&["decompose", "--format", "csv"])).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("outcome,coefficient_re,coefficient_im,"));
}

#[test]
fn default_configs_validate() {
    for (cmd, schema) in [
        ("teleport", "teleport-summary.schema.json"),
        ("bound", "bound-summary.schema.json"),
        ("verify-s", "verify-s-summary.schema.json"),
        ("decompose", "decompose-summary.schema.json"),
    ] {
        assert_schema(&json(&[cmd]), schema);
    }
}

#[test]
fn unknown_field_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{\n  \"preparation\": {\"theta_deg\": 0},\n  \"colour\": 1\n}\n").unwrap();
    let out = run(&["teleport", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains(&format!("{}:3:10", path.display())), "{err}");
    assert!(err.contains("colour"));
    assert!(out.stdout.is_empty());
}

#[test]
fn malformed_json_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{\"noise\": {\"visibility\": 0.5,}}").unwrap();
    let out = run(&["verify-s", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains(":1:"));
}

#[test]
fn missing_config_file() {
    let out = run(&["bound", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn out_of_range_values_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.json");
    fs::write(&path, r#"{"noise": {"visibility": 1.5, "alice_efficiency": 1, "bob_efficiency": 1}}"#).unwrap();
    assert_eq!(run(&["verify-s", "--config", path.to_str().unwrap()]).status.code(), Some(2));
    fs::write(&path, r#"{"preparation": {"theta_deg": 10, "gamma_deg": 20}}"#).unwrap();
    assert_eq!(run(&["teleport", "--config", path.to_str().unwrap()]).status.code(), Some(2));
    fs::write(&path, r#"{"outcomes": 9}"#).unwrap();
    assert_eq!(run(&["bound", "--config", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn bound_has_no_csv() {
    assert_eq!(run(&["bound", "--format", "csv"]).status.code(), Some(2));
}

#[test]
fn bad_flag_is_a_usage_error() {
    assert_eq!(run(&["teleport", "--seed", "minus-one"]).status.code(), Some(2));
}

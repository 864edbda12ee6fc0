use std::io::Write;
use std::process::{Command, Output};

use serde_json::Value;

fn steinforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_steinforge"))
        .args(args)
        .env_remove("STEINFORGE_TOL")
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn temp_file(suffix: &str, contents: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::Builder::new().suffix(suffix).tempfile().unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    f
}

#[test]
fn verify_target_is_characterized() {
    let out = steinforge(&["verify", "--family", "gaussian_loc", "--deterministic"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json_of(&out);
    assert_eq!(doc["result"]["verdict"], "characterized");
    assert!(doc.get("generated_unix").is_none());
}

#[test]
fn shifted_alternative_is_detected() {
    let out = steinforge(&["verify", "--family", "gaussian_loc", "--alt", "gaussian_loc@0.5", "--set", "le:0"]);
    assert_eq!(out.status.code(), Some(1));
    let doc = json_of(&out);
    let d = doc["result"]["sufficiency"][0]["discrimination"].as_f64().unwrap();
    assert!((d + 0.1914625).abs() < 1e-6, "{d}");
    assert!(doc["generated_unix"].is_u64());
}

#[test]
fn gof_rejects_exponential_samples() {
    // deterministic Exp(1) quantiles
    let xs: Vec<String> = (0..400).map(|i| format!("{}", -(1.0 - (i as f64 + 0.5) / 400.0f64).ln())).collect();
    let file = temp_file(".csv", &xs.join("\n"));
    let out = steinforge(&["gof", "--family", "gaussian_loc", "--samples", file.path().to_str().unwrap(), "--n-sim", "50"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json_of(&out)["result"]["decision"], "reject");
}

#[test]
fn config_errors_are_usage_errors() {
    let unknown = temp_file(".json", r#"{"family": "gaussian_loc", "colour": "red"}"#);
    let out = steinforge(&["verify", "--config", unknown.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
    let missing = temp_file(".json", r#"{"theta0": [0.0]}"#);
    let out = steinforge(&["verify", "--config", missing.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(steinforge(&["verify", "--nonsense"]).status.code(), Some(2));
    assert_eq!(steinforge(&["--help"]).status.code(), Some(0));
}

#[test]
fn unknown_family_is_a_module_error() {
    let out = steinforge(&["verify", "--family", "no_such_family"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn flags_override_the_config() {
    let cfg = temp_file(".json", r#"{"command": "verify", "family": "gaussian_loc", "theta0": [0.5]}"#);
    let out = steinforge(&["--config", cfg.path().to_str().unwrap(), "--theta0", "-0.25", "--deterministic"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_of(&out)["result"]["theta0"][0].as_f64(), Some(-0.25));
    // a config for another command conflicts with the subcommand
    let out = steinforge(&["solve", "--config", cfg.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn deterministic_runs_are_identical() {
    let args = ["verify", "--family", "poisson_lambda", "--alt", "@1.2", "--set", "int:{0,1}", "--deterministic"];
    let (a, b) = (steinforge(&args), steinforge(&args));
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn out_directory_receives_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = steinforge(&["solve", "--family", "gaussian_loc", "--set", "le:0", "--set", "interval:-1,1", "--out", d]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("solution_1.csv")).unwrap();
    assert!(csv.starts_with("x,f_A,residual"));
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("solve.json")).unwrap()).unwrap();
    assert!(summary["result"]["max_residual"].as_f64().unwrap() <= 1e-6);

    let out = steinforge(&["score", "--family", "gaussian_loc", "--compare", "laplace_loc", "--out", d]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("score_r.csv")).unwrap();
    assert_eq!(table.lines().count(), 101);

    let out = steinforge(&["verify", "--family", "exponential_scale", "--out", d]);
    assert_eq!(out.status.code(), Some(0));
    assert!(std::fs::read_to_string(dir.path().join("report.md")).unwrap().contains("characterized"));

    assert_eq!(steinforge(&["list-families", "--out", d]).status.code(), Some(0));
    let fams: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("families.json")).unwrap()).unwrap();
    assert!(fams.as_array().unwrap().iter().any(|f| f["name"] == "laplace_loc"));
}

#[test]
fn custom_family_from_config() {
    let cfg = temp_file(
        ".json",
        r#"{
            "family": "my_gauss",
            "custom_families": [{
                "name": "my_gauss",
                "kind": "continuous",
                "structure": "location",
                "support": {},
                "density_expression": "exp(-(x - theta)^2 / 2) / sqrt(2 * pi)",
                "theta0": [0.0]
            }]
        }"#,
    );
    let out = steinforge(&["verify", "--config", cfg.path().to_str().unwrap(), "--deterministic"]);
    assert_eq!(out.status.code(), Some(0), "{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
}

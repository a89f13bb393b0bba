//! End-to-end tests driving the compiled binary.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_lambda-dyn")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).expect("csv exists");
    text.lines()
        .map(|l| l.split(',').map(|s| s.to_string()).collect())
        .collect()
}

fn column(rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let idx = rows[0].iter().position(|h| h == name).expect("column");
    rows[1..]
        .iter()
        .map(|r| r[idx].parse::<f64>().unwrap())
        .collect()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

const SIGMA0_GIBBS: &str = r#"{
  "schema": 1,
  "system": { "e0": 1.0, "e": 0.0, "sigma": 0.0, "beta": 1.0, "lambda": 0.05 },
  "reservoir": { "amplitude": 0.3, "n": 0, "m": 1, "kappa0": 1.0 },
  "run": {
    "initial_state": "gibbs0",
    "time_grid": { "kind": "geometric", "t_min": 1.0, "t_max": 100000.0, "points": 25 }
  }
}"#;

#[test]
fn resonances_standard_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = run(&["resonances", "--out", out.to_str().unwrap()]);
    assert!(status.status.success());
    let rows = read_csv(&out.join("resonances.csv"));
    assert_eq!(rows.len(), 10); // header + 9 resonances
    assert_eq!(rows[0], vec!["sector", "index", "re_eps", "im_eps"]);
    // exactly one exactly-zero imaginary part at σ > 0
    let zeros = rows[1..]
        .iter()
        .filter(|r| r[3].parse::<f64>().unwrap() == 0.0)
        .count();
    assert_eq!(zeros, 1);
    // report echoes a config that re-parses and re-validates
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("run_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["command"], "resonances");
    assert_eq!(report["parameters"]["schema"], 1);
    assert_eq!(report["regime_ok"], true);
    let outputs = report["outputs"].as_array().unwrap();
    assert!(outputs.iter().any(|f| {
        f["path"].as_str().unwrap().ends_with("resonances.csv") && f["rows"] == 9
    }));
}

#[test]
fn resonances_sigma_zero_has_two_stationary_directions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", SIGMA0_GIBBS);
    let out = dir.path().join("out");
    let status = run(&["resonances", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(status.status.success());
    let rows = read_csv(&out.join("resonances.csv"));
    let zeros = rows[1..]
        .iter()
        .filter(|r| r[3].parse::<f64>().unwrap() == 0.0)
        .count();
    assert_eq!(zeros, 2);
}

#[test]
fn resonances_comparison_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "cfg.json",
        r#"{
  "schema": 1,
  "system": { "e0": 1.0, "e": 0.0, "sigma": 1e-6, "beta": 1.0, "lambda": 0.05 },
  "reservoir": { "amplitude": 0.3, "n": 0, "m": 1, "kappa0": 1.0 }
}"#,
    );
    let out = dir.path().join("out");
    let status = run(&[
        "resonances",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(status.status.success());
    let rows = read_csv(&out.join("resonances_compare.csv"));
    let slow = rows[1..]
        .iter()
        .find(|r| r[0] == "0" && r[1] == "2")
        .expect("(0, 2) row");
    let rel: f64 = slow[7].parse().unwrap();
    assert!(rel < 0.01, "relative error {rel}");
    // the JSON variant embeds eigenvectors
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("resonances.json")).unwrap())
            .unwrap();
    assert_eq!(json.as_array().unwrap().len(), 9);
    assert_eq!(json[0]["right"].as_array().unwrap().len(), 5);
}

#[test]
fn evolve_gibbs_preset_is_stationary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", SIGMA0_GIBBS);
    let out = dir.path().join("out");
    let status = run(&["evolve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(status.status.success());
    let rows = read_csv(&out.join("trajectory.csv"));
    assert_eq!(rows.len(), 26);
    for v in column(&rows, "dist_gibbs") {
        assert!(v <= 1e-9);
    }
}

#[test]
fn evolve_dark_preset_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "cfg.json",
        &SIGMA0_GIBBS.replace("\"gibbs0\"", "\"dark\""),
    );
    let out = dir.path().join("out");
    let status = run(&["evolve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(status.status.success());
    let rows = read_csv(&out.join("trajectory.csv"));
    // the dark state is its own quasi-stationary state; the trajectory
    // stays on it
    for v in column(&rows, "dist_qstat") {
        assert!(v <= 1e-9);
    }
    let p11 = column(&rows, "rho11_re");
    assert!(p11.iter().all(|&p| p.abs() <= 1e-9));
}

#[test]
fn evolve_level1_reaches_gibbs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    // default config: level1 preset, auto grid up to 50·t2
    let status = run(&["evolve", "--out", out.to_str().unwrap()]);
    assert!(status.status.success());
    let rows = read_csv(&out.join("trajectory.csv"));
    let dist = column(&rows, "dist_gibbs");
    assert!(dist[dist.len() - 1] <= 1e-3);
    // two-timescale signature: some intermediate point is close to the
    // quasi-stationary state while still far from Gibbs
    let qstat = column(&rows, "dist_qstat");
    let plateau = qstat
        .iter()
        .zip(dist.iter())
        .any(|(&q, &g)| q < 2e-3 && g > 0.5);
    assert!(plateau);
}

#[test]
fn evolve_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    assert!(run(&["evolve", "--out", out1.to_str().unwrap()]).status.success());
    assert!(run(&["evolve", "--out", out2.to_str().unwrap()]).status.success());
    let a = std::fs::read(out1.join("trajectory.csv")).unwrap();
    let b = std::fs::read(out2.join("trajectory.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn evolve_term_channel() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = run(&[
        "evolve",
        "--out",
        out.to_str().unwrap(),
        "--term",
        "0,1",
    ]);
    assert!(status.status.success());
    let rows = read_csv(&out.join("term_0_1.csv"));
    assert!(rows.len() > 2);
    assert_eq!(rows[0][0], "t");
    // the (0,1) term is the Gibbs part: c11 equals the Gibbs population
    let c11 = column(&rows, "c11_re");
    let expected = 1.0 / (1.0 + 2.0 * 1.0f64.exp());
    assert!(c11.iter().all(|&v| (v - expected).abs() < 1e-6));
    // bad term strings are config errors
    let bad = run(&["evolve", "--out", out.to_str().unwrap(), "--term", "7"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn reservoir_tables_and_constants() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = run(&["reservoir", "--out", out.to_str().unwrap()]);
    assert!(status.status.success());
    let rows = read_csv(&out.join("spectral_density.csv"));
    let omegas = column(&rows, "omega");
    let js = column(&rows, "j_value");
    for (&omega, &j) in omegas.iter().zip(js.iter()) {
        let closed = 2.0 * std::f64::consts::PI.powi(2) * 0.09 * omega * (-omega).exp();
        assert!((j - closed).abs() <= 1e-12 * closed.max(1e-300));
    }
    let constants: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("constants.json")).unwrap())
            .unwrap();
    // δ = 2 J(Δ)/(e^{βΔ}-1) bit-consistently
    let j_delta = constants["j_delta"].as_f64().unwrap();
    let delta = constants["delta"].as_f64().unwrap();
    assert_eq!(delta, 2.0 * j_delta / 1.0f64.exp_m1());
    let tau = constants["tau_c"].as_f64().unwrap();
    assert!((tau - 1.0).abs() <= 0.15);
}

#[test]
fn corrupt_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", "{ \"schema\": 1, \"system\": { ");
    let out = run(&["resonances", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line"), "diagnostics: {stderr}");

    // semantic errors carry the field path
    let cfg = write_config(
        dir.path(),
        "bad2.json",
        r#"{"schema":1,"system":{"e0":1.0,"e":0.0,"sigma":-1.0,"beta":1.0,"lambda":0.05},
            "reservoir":{"amplitude":0.3,"n":0,"m":1,"kappa0":1.0}}"#,
    );
    let out = run(&["resonances", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("system.sigma"));
}

#[test]
fn validate_reports_the_known_plateau_clause() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let run_out = run(&["validate", "--out", out.to_str().unwrap()]);
    // exit 0 iff all criteria pass: criterion 7's plateau clause measures
    // the O(σ) offset (≈1.5e-3) against the pinned 1e-3, so the suite
    // reports exactly that one failure
    assert_eq!(run_out.status.code(), Some(1));
    let table: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("validation.json")).unwrap())
            .unwrap();
    let rows = table.as_array().unwrap();
    assert_eq!(rows.len(), 10);
    for row in rows {
        let id = row["id"].as_u64().unwrap();
        let status = row["status"].as_str().unwrap();
        if id == 7 {
            assert_eq!(status, "FAIL");
        } else {
            assert_eq!(status, "PASS", "criterion {id}");
        }
    }
}

#[test]
fn validate_skips_sigma_criteria_outside_regime() {
    let dir = tempfile::tempdir().unwrap();
    // λ² < σ violates the regime: σ-dependent criteria are skipped and the
    // rest pass, so the run exits 0
    let cfg = write_config(
        dir.path(),
        "cfg.json",
        r#"{
  "schema": 1,
  "system": { "e0": 1.0, "e": 0.0, "sigma": 0.01, "beta": 1.0, "lambda": 0.05 },
  "reservoir": { "amplitude": 0.3, "n": 0, "m": 1, "kappa0": 1.0 }
}"#,
    );
    let out = dir.path().join("out");
    let run_out = run(&["validate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&run_out.stdout);
    assert_eq!(run_out.status.code(), Some(0), "stdout: {stdout}");
    let table: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("validation.json")).unwrap())
            .unwrap();
    let skipped: Vec<u64> = table
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["status"] == "SKIP")
        .map(|r| r["id"].as_u64().unwrap())
        .collect();
    assert_eq!(skipped, vec![6, 7, 8, 9]);
    // warnings are surfaced on stderr
    let stderr = String::from_utf8_lossy(&run_out.stderr);
    assert!(stderr.contains("regime"), "stderr: {stderr}");
}

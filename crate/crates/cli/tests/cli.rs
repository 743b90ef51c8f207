//! End-to-end tests of the `lamb` binary: exit codes, report shapes,
//! determinism and the grid-refinement hook.

use std::path::{Path, PathBuf};
use std::process::Command;

fn lamb() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lamb"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lamb-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_linear_config(dir: &Path, h: f64, t_max: f64) -> PathBuf {
    let path = dir.join("linear.json");
    std::fs::write(
        &path,
        format!(
            r#"{{
  "model": {{"name": "linear", "params": [1.0], "n": 1}},
  "s_plus": [0.0],
  "psi": {{
    "psi0": [{{"component": 0, "kind": "const", "amplitude": 1.0}}],
    "psi1": [{{"component": 0, "kind": "box", "center": 0.0, "width": 2.0, "amplitude": -1.0}}]
  }},
  "grid": {{"h": {h}, "t_max": {t_max}, "l0": 2.0}}
}}"#
        ),
    )
    .unwrap();
    path
}

fn summary(dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("summary.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn roundtrip_reports_the_linear_scenario() {
    let dir = temp_dir("roundtrip");
    let cfg = write_linear_config(&dir, 5e-3, 20.0);
    let out = dir.join("out");
    let status = lamb()
        .args(["roundtrip", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());

    let s = summary(&out);
    assert_eq!(s["pass"], serde_json::Value::Bool(true));
    let y0 = s["metrics"]["incoming"]["y_at_zero"][0].as_f64().unwrap();
    assert!((y0 - 0.78694).abs() <= 1e-4, "y(0) = {y0}");
    let psi_err = s["metrics"]["psi_energy_error"].as_f64().unwrap();
    assert!(psi_err <= 1e-3, "psi error {psi_err}");
    for file in
        ["incoming.csv", "forward.csv", "profiles.csv", "scattering.json", "u0.csv", "v0.csv"]
    {
        assert!(out.join(file).exists(), "{file} missing");
    }
    // full double precision in the CSVs
    let first = std::fs::read_to_string(out.join("incoming.csv")).unwrap();
    let line = first.lines().nth(1).unwrap();
    assert!(line.split(',').next().unwrap().contains('e'));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = temp_dir("determinism");
    let cfg = write_linear_config(&dir, 5e-3, 10.0);
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    for out in [&out_a, &out_b] {
        let status = lamb()
            .args(["roundtrip", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()])
            .status()
            .unwrap();
        assert!(status.success());
    }
    for entry in std::fs::read_dir(&out_a).unwrap() {
        let name = entry.unwrap().file_name();
        let a = std::fs::read(out_a.join(&name)).unwrap();
        let b = std::fs::read(out_b.join(&name)).unwrap();
        assert_eq!(a, b, "{name:?} differs between runs");
    }
}

#[test]
fn halving_the_step_improves_the_residual() {
    let dir = temp_dir("order");
    let cfg = write_linear_config(&dir, 2e-3, 10.0);
    let coarse = dir.join("coarse");
    let fine = dir.join("fine");
    for (out, step) in [(&coarse, "2e-3"), (&fine, "1e-3")] {
        let status = lamb()
            .args([
                "construct",
                cfg.to_str().unwrap(),
                "--grid-step",
                step,
                "--out-dir",
                out.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
    }
    let r_coarse = summary(&coarse)["metrics"]["residual_l2"].as_f64().unwrap();
    let r_fine = summary(&fine)["metrics"]["residual_l2"].as_f64().unwrap();
    assert!(
        r_coarse >= 2.0 * r_fine,
        "halving the step must at least halve the residual: {r_coarse} vs {r_fine}"
    );
}

#[test]
fn nonhyperbolic_construct_exits_with_code_one() {
    let dir = temp_dir("nonhyp");
    let path = dir.join("flat.json");
    std::fs::write(
        &path,
        r#"{
  "model": {"name": "flat-core", "n": 1},
  "s_plus": [0.0],
  "psi": {
    "psi1": [{"component": 0, "kind": "box", "center": 0.0, "width": 1.0, "amplitude": 0.1}]
  },
  "grid": {"h": 0.01, "t_max": 10.0, "l0": 2.0}
}"#,
    )
    .unwrap();
    let out = dir.join("out");
    let status = lamb()
        .args(["construct", path.to_str().unwrap(), "--out-dir", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    let s = summary(&out);
    assert_eq!(s["error"]["code"], "NotHyperbolic");
}

#[test]
fn malformed_config_exits_with_code_two() {
    let dir = temp_dir("badcfg");
    let path = dir.join("bad.json");
    std::fs::write(&path, "{ not json").unwrap();
    let status = lamb().args(["construct", path.to_str().unwrap()]).status().unwrap();
    assert_eq!(status.code(), Some(2));

    // structurally valid JSON, invalid content
    let path = dir.join("bad2.json");
    std::fs::write(
        &path,
        r#"{
  "model": {"name": "linear", "params": [1.0], "n": 1},
  "s_plus": [0.0, 0.0],
  "grid": {"h": 0.01, "t_max": 10.0, "l0": 2.0}
}"#,
    )
    .unwrap();
    let status = lamb().args(["construct", path.to_str().unwrap()]).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn counterexample_flat_reports_the_exact_logarithm() {
    let dir = temp_dir("counter");
    let out = dir.join("out");
    let status = lamb()
        .args([
            "counterexample",
            "--kind",
            "flat",
            "--y0",
            "-0.4",
            "--t-max",
            "10",
            "--out-dir",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let s = summary(&out);
    let fit = s["metrics"]["log_fit_constant"].as_f64().unwrap();
    assert!((fit + 0.4).abs() <= 1e-9, "log fit {fit}");
    let exit_time = s["metrics"]["exit_time"].as_f64().unwrap();
    assert!((exit_time - (1.4_f64.exp() - 1.0)).abs() <= 1e-6, "exit {exit_time}");
}

#[test]
fn jobs_flag_runs_batches_concurrently_and_deterministically() {
    let dir = temp_dir("jobs");
    let a = write_linear_config(&dir, 5e-3, 10.0);
    let b = dir.join("second.json");
    std::fs::copy(&a, &b).unwrap();
    let out = dir.join("out");
    let status = lamb()
        .args([
            "construct",
            a.to_str().unwrap(),
            b.to_str().unwrap(),
            "--jobs",
            "2",
            "--out-dir",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let ra = std::fs::read(out.join("linear").join("report.json")).unwrap();
    let rb = std::fs::read(out.join("second").join("report.json")).unwrap();
    assert_eq!(ra, rb, "identical configs must produce identical reports");
}

#[test]
fn forward_consumes_initial_data_from_csv() {
    let dir = temp_dir("csvdata");
    let cfg = write_linear_config(&dir, 5e-3, 10.0);
    let construct_out = dir.join("construct");
    let status = lamb()
        .args(["construct", cfg.to_str().unwrap(), "--out-dir", construct_out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());

    // point a forward run at the data the construct step wrote
    let fwd_cfg = dir.join("forward.json");
    std::fs::write(
        &fwd_cfg,
        format!(
            r#"{{
  "model": {{"name": "linear", "params": [1.0], "n": 1}},
  "s_plus": [0.0],
  "grid": {{"h": 5e-3, "t_max": 10.0, "l0": 2.0}},
  "initial_data": {:?}
}}"#,
            construct_out.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = dir.join("out");
    let status = lamb()
        .args(["forward", fwd_cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let s = summary(&out);
    assert_eq!(s["metrics"]["s_plus"][0].as_f64().unwrap(), 0.0);
    // central differences on load smear the kinks of u0, so the identity
    // holds only at the reduced-accuracy level
    let resid = s["metrics"]["identity_residual_norm"].as_f64().unwrap();
    assert!(resid <= 5e-2, "identity residual {resid}");
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use phaselift::io::MeasurementFile;
use phaselift::{sample_ensemble, Model};

fn phaselift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phaselift"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn assert_one_line_error(o: &Output, needle: &str) {
    assert!(!o.status.success());
    let err = stderr(o);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.starts_with("error: "), "{err}");
    assert!(err.contains(needle), "expected `{needle}` in {err}");
}

#[test]
fn constants_at_three() {
    let o = phaselift(&["constants", "--t", "3"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "alpha=0.9707 beta=2.6728 delta=4.0663");
}

#[test]
fn version_names_schema() {
    let o = phaselift(&["--version"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("schema 1"), "{}", stdout(&o));
}

#[test]
fn simulate_then_solve_converges() {
    let dir = tempfile::tempdir().unwrap();
    let (data, sol) = (path(dir.path(), "data.json"), path(dir.path(), "sol.json"));
    let o = phaselift(&[
        "simulate",
        "--model",
        "real_gaussian",
        "--n",
        "2",
        "--m",
        "4",
        "--seed",
        "1",
        "--x0",
        "unit-random",
        "--out",
        &data,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = phaselift(&["solve", "--in", &data, "--out", &sol]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("converged=true"), "{}", stdout(&o));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&sol).unwrap()).unwrap();
    assert_eq!(report["converged"], true);
    assert_eq!(report["x_hat"].as_array().unwrap().len(), 2);
    assert!(report["frob_error_vs_truth"].as_f64().is_some());
}

#[test]
fn file_round_trip_matches_in_memory_b() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "data.json");
    let o = phaselift(&[
        "simulate",
        "--model",
        "complex_gaussian",
        "--n",
        "5",
        "--m",
        "30",
        "--seed",
        "8",
        "--x0",
        "[0.6, 0, 0.8, 0, 0]",
        "--out",
        &data,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let file: MeasurementFile = serde_json::from_str(&fs::read_to_string(&data).unwrap()).unwrap();
    let ens = sample_ensemble::<phaselift::Complex64>(Model::ComplexGaussian, 5, 30, 8).unwrap();
    let x0: Vec<phaselift::Complex64> = [0.6, 0.0, 0.8, 0.0, 0.0].iter().map(|&v| v.into()).collect();
    let obs = ens.measure(&x0).unwrap();
    assert_eq!(file.b, obs.b);
}

#[test]
fn outputs_are_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let (data, sol) = (path(dir.path(), "data.json"), path(dir.path(), "sol.json"));
    let sim = [
        "simulate",
        "--model",
        "real_sphere",
        "--n",
        "4",
        "--m",
        "40",
        "--seed",
        "3",
        "--noise",
        "gaussian:0.01",
        "--include-vectors",
        "--out",
        &data,
    ];
    assert!(phaselift(&sim).status.success());
    let first = fs::read(&data).unwrap();
    assert!(phaselift(&sim).status.success());
    assert_eq!(first, fs::read(&data).unwrap());

    assert!(phaselift(&["solve", "--in", &data, "--out", &sol]).status.success());
    let first = fs::read(&sol).unwrap();
    assert!(phaselift(&["solve", "--in", &data, "--out", &sol]).status.success());
    assert_eq!(first, fs::read(&sol).unwrap());
}

#[test]
fn dimension_mismatch_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "data.json");
    let o = phaselift(&[
        "simulate",
        "--model",
        "real_gaussian",
        "--n",
        "3",
        "--m",
        "6",
        "--seed",
        "2",
        "--include-vectors",
        "--out",
        &data,
    ]);
    assert!(o.status.success());
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&data).unwrap()).unwrap();
    v["m"] = 7.into();
    fs::write(&data, v.to_string()).unwrap();
    let o = phaselift(&["solve", "--in", &data, "--out", &path(dir.path(), "sol.json")]);
    assert_one_line_error(&o, "error: dimension:");
    assert!(stderr(&o).contains("m = 7"), "{}", stderr(&o));
    assert!(!dir.path().join("sol.json").exists());
}

#[test]
fn usage_and_input_errors_are_single_lines() {
    assert_one_line_error(&phaselift(&["constants", "--bogus"]), "error: usage:");
    assert_one_line_error(
        &phaselift(&["solve", "--in", "/nonexistent/x.json", "--out", "y.json"]),
        "error: io:",
    );
    assert_one_line_error(&phaselift(&["constants", "--t", "0"]), "error: argument:");

    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "cfg.json");
    fs::write(&cfg, "{\"experiment\": \"transition\",").unwrap();
    let o = phaselift(&["experiment", "--config", &cfg, "--out-dir", &path(dir.path(), "out")]);
    assert_one_line_error(&o, "error: parse:");
}

#[test]
fn certify_reports_conditions() {
    let dir = tempfile::tempdir().unwrap();
    let (data, cert) = (path(dir.path(), "data.json"), path(dir.path(), "cert.json"));
    let o = phaselift(&[
        "simulate",
        "--model",
        "real_gaussian",
        "--n",
        "4",
        "--m",
        "256",
        "--seed",
        "5",
        "--out",
        &data,
    ]);
    assert!(o.status.success());
    let o = phaselift(&["certify", "--in", &data, "--out", &cert]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&cert).unwrap()).unwrap();
    assert!(v["lambda_inf_m"].as_f64().unwrap() <= 7.0);
    assert!(v["inexact_ok"].is_boolean());

    let o = phaselift(&[
        "simulate",
        "--model",
        "complex_gaussian",
        "--n",
        "2",
        "--m",
        "8",
        "--seed",
        "5",
        "--out",
        &data,
    ]);
    assert!(o.status.success());
    assert_one_line_error(
        &phaselift(&["certify", "--in", &data, "--out", &cert]),
        "error: unsupported:",
    );
}

#[test]
fn experiment_writes_csv_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "cfg.json");
    let out = dir.path().join("out");
    fs::write(
        &cfg,
        r#"{"experiment": "transition", "n_values": [3], "ratio_values": [1, 6], "trials": 20, "base_seed": 4}"#,
    )
    .unwrap();
    let out_s = out.to_string_lossy().into_owned();
    let o = phaselift(&[
        "experiment",
        "--config",
        &cfg,
        "--out-dir",
        &out_s,
        "--trials",
        "3",
        "--jobs",
        "1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stderr(&o).lines().count(), 2, "one line per cell");
    let csv = fs::read_to_string(out.join("transition.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("n,m,trial,seed,"));
    assert_eq!(lines.iter().filter(|l| !l.starts_with("#agg,")).count(), 1 + 6);
    assert_eq!(lines.iter().filter(|l| l.starts_with("#agg,")).count(), 1 + 2);
    let plot = fs::read_to_string(out.join("transition_n3.dat")).unwrap();
    assert_eq!(plot.lines().count(), 3);
    assert!(plot.starts_with("# ratio success_rate"));

    let o = phaselift(&[
        "experiment",
        "--config",
        &cfg,
        "--out-dir",
        &out_s,
        "--trials",
        "3",
        "--jobs",
        "2",
    ]);
    assert!(o.status.success());
    assert_eq!(csv, fs::read_to_string(out.join("transition.csv")).unwrap());
}

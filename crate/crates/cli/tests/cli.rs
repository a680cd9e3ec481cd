use std::path::Path;
use std::process::{Command, Output};

fn dntest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dntest")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn generate(dir: &Path, name: &str, extra: &[&str]) -> String {
    let path = dir.join(name).to_string_lossy().into_owned();
    let mut args = vec!["generate", "--family", "clayton", "--rho", "2", "--len", "600", "--seed", "4", "--out", &path];
    args.extend_from_slice(extra);
    let out = dntest(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn generate_then_test_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let csv = generate(dir.path(), "x.csv", &[]);
    let bin = generate(dir.path(), "x.bin", &[]);
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("x1,x2\n"));
    assert_eq!(&std::fs::read(&bin).unwrap()[..4], b"DNTS");

    let a = json(&dntest(&["test", "--in", &csv, "--kind", "iid", "--json"]));
    let b = json(&dntest(&["test", "--in", &bin, "--kind", "iid", "--json"]));
    assert_eq!(a, b);
    for key in ["statistic", "z", "p_value", "reject", "null_mean", "null_var", "null_source"] {
        assert!(a.get(key).is_some(), "missing {key}");
    }
    assert_eq!(a["null_source"], "iid_closed_form");
    assert_eq!(a["reject"], a["p_value"].as_f64().unwrap() < 0.05);
}

#[test]
fn colored_tests_and_calibration() {
    let dir = tempfile::tempdir().unwrap();
    let x = generate(dir.path(), "x.csv", &["--no-color"]);
    let args = ["test", "--in", &x, "--kind", "colored2", "--calib-reps", "200", "--max-lag", "10", "--json"];
    let r = json(&dntest(&args));
    assert_eq!(r["null_source"], "monte_carlo_calibrated");
    assert_eq!(r, json(&dntest(&args)));

    let c = json(&dntest(&["calibrate", "--in", &x, "--calib-reps", "200", "--max-lag", "10"]));
    for key in ["mean", "variance", "se_mean", "se_variance", "replicates", "clipping_norm"] {
        assert!(c.get(key).is_some(), "missing {key}");
    }
    assert_eq!(c["replicates"], 200);
    assert_eq!(c["mean"], r["null_mean"]);

    let scalar = generate(dir.path(), "s.csv", &["--dim", "1"]);
    let s = json(&dntest(&["test", "--in", &scalar, "--kind", "colored1", "--max-lag", "100", "--json"]));
    assert_eq!(s["null_source"], "colored_scalar_closed_form");
}

#[test]
fn experiment_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"family": "gumbel", "rho": 5, "n": 300, "m": 20, "realizations": 2}"#).unwrap();
    let out_path = dir.path().join("report.json");
    let out = dntest(&["experiment", "--config", cfg.to_str().unwrap(), "--out", out_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&out_path).unwrap()).unwrap();
    assert_eq!(report["seed"], 0);
    assert_eq!(report["rates"].as_array().unwrap().len(), 4);
}

#[test]
fn reproduce_tables_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dntest(&[
        "reproduce-tables", "--out", dir.path().to_str().unwrap(), "--m", "4", "--realizations", "1",
        "--calib-reps", "100",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for k in 1..=4 {
        assert!(dir.path().join(format!("table{k}.csv")).exists());
        assert!(dir.path().join(format!("table{k}_clayton.json")).exists());
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(dntest(&["test", "--bogus"]).status.code(), Some(1));
    assert_eq!(dntest(&["--help"]).status.code(), Some(0));
    assert_eq!(dntest(&["test", "--in", "/nonexistent.csv", "--kind", "iid"]).status.code(), Some(1));
    assert_eq!(dntest(&["generate", "--family", "gumbel", "--rho", "0.5", "--out", "/tmp/never.csv"]).status.code(), Some(1));

    // Collinear channels: degenerate sample.
    let path = dir.path().join("flat.csv");
    let rows: String = (0..50).map(|i| format!("{v},{w}\n", v = i as f64, w = 2.0 * i as f64)).collect();
    std::fs::write(&path, format!("x1,x2\n{rows}")).unwrap();
    assert_eq!(dntest(&["test", "--in", path.to_str().unwrap(), "--kind", "iid"]).status.code(), Some(2));

    // An alternating series has an invalid long-lag covariance model.
    let alt = dir.path().join("alt.csv");
    let rows: String = (0..200).map(|i| format!("{}\n", if i % 2 == 0 { 1.0 } else { -1.0 } + 0.01 * (i as f64).sin())).collect();
    std::fs::write(&alt, format!("x1\n{rows}")).unwrap();
    let out = dntest(&["calibrate", "--in", alt.to_str().unwrap(), "--calib-reps", "100", "--max-lag", "1"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

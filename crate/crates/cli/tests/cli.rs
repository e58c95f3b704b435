use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn szt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_szt"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn szt")
}

fn write_dense(dir: &Path, name: &str, dims: &[usize], values: &[f32]) {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(dir.join(name), bytes).unwrap();
    fs::write(dir.join(format!("{name}.json")), serde_json::json!({ "dims": dims }).to_string()).unwrap();
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn quantize_writes_documented_layout() {
    let dir = tempfile::tempdir().unwrap();
    write_dense(dir.path(), "w.f32", &[4], &[2.0, 0.1, -0.1, -2.0]);
    let out = szt(dir.path(), &["quantize", "--input", "w.f32", "--out", "w.szt"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bytes = fs::read(dir.path().join("w.szt")).unwrap();
    assert_eq!(&bytes[..4], b"SZT1");
    assert_eq!(bytes[4], 1);
    assert_eq!(bytes[5], 0);
    assert_eq!(bytes[6], 1);
    assert_eq!(u64::from_le_bytes(bytes[7..15].try_into().unwrap()), 4);
    assert_eq!(*bytes.last().unwrap(), 0xE1);

    let out = szt(dir.path(), &["inspect", "--input", "w.szt", "--codes"]);
    assert!(out.status.success());
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["codes"], serde_json::json!(["+1", "0+", "0-", "-1"]));
    assert_eq!(report["histogram"]["0-"], 1);
    assert!(dir.path().join("inspect.manifest.json").exists());
}

#[test]
fn calibrate_reports_one_object_per_channel() {
    let dir = tempfile::tempdir().unwrap();
    let values: Vec<f32> = (0..12).map(|i| (i as f32 - 5.5) * 0.3).collect();
    write_dense(dir.path(), "w.f32", &[3, 4], &values);
    let out = szt(dir.path(), &["calibrate", "--input", "w.f32"]);
    assert!(out.status.success());
    let layer = json(&dir.path().join("calibration.json"));
    assert_eq!(layer["rule"], "sigma");
    assert_eq!(layer["k"], 1.0);

    let out = szt(dir.path(), &["calibrate", "--input", "w.f32", "--granularity", "per-channel", "--rule", "fixed-k", "--k", "0.5"]);
    assert!(out.status.success());
    let channels = json(&dir.path().join("calibration.json"));
    assert_eq!(channels.as_array().unwrap().len(), 3);

    let out = szt(dir.path(), &["calibrate", "--input", "w.f32", "--rule", "prior-optimal", "--prior-scale", "1"]);
    assert!(out.status.success());
    let opt = json(&dir.path().join("calibration.json"));
    assert!((opt["delta"].as_f64().unwrap() - std::f64::consts::SQRT_2).abs() < 1e-6);

    let manifest = json(&dir.path().join("calibrate.manifest.json"));
    assert_eq!(manifest["command"], "calibrate");
    assert_eq!(manifest["input_digests"].as_object().unwrap().len(), 1);
}

#[test]
fn missing_input_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = szt(dir.path(), &["quantize", "--input", "absent.f32"]);
    assert_eq!(out.status.code(), Some(2));
    let out = szt(dir.path(), &["verify", "--suite", "nothing"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_entropy_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = szt(dir.path(), &["verify", "--suite", "entropy"]);
    assert!(out.status.success());
    let rows = csv_rows(&dir.path().join("verify.csv"));
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| &r[6] == "PASS"));
    let grid = rows.iter().find(|r| &r[1] == "entropy-gap").unwrap();
    assert!(grid[3].contains('e'), "17-digit scientific formatting");
}

#[test]
fn verify_all_is_healthy() {
    let dir = tempfile::tempdir().unwrap();
    let out = szt(dir.path(), &["verify", "--suite", "all"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let rows = csv_rows(&dir.path().join("verify.csv"));
    let mfpt: Vec<_> = rows.iter().filter(|r| &r[0] == "mfpt").collect();
    assert_eq!(mfpt.iter().filter(|r| r[2].starts_with("MC vs BVP") && &r[6] == "PASS").count(), 9);
    assert!(mfpt.iter().any(|r| r[2].contains("1/kappa") && &r[6] == "FLAG"));
    assert!(rows.iter().all(|r| &r[6] != "FAIL"));
}

#[test]
fn config_file_mirrors_flags_and_explicit_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), r#"{"suite": "pacbayes", "seed": 9}"#).unwrap();
    let out = szt(dir.path(), &["--config", "c.json", "verify", "--seed", "4"]);
    assert!(out.status.success());
    let manifest = json(&dir.path().join("verify.manifest.json"));
    assert_eq!(manifest["flags"]["suite"], "pacbayes");
    assert_eq!(manifest["seed"], 4);
}

#[test]
fn train_is_byte_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    for ste in ["bt", "szt"] {
        let mut reports = Vec::new();
        for threads in ["1", "4", "1"] {
            let sub = dir.path().join(format!("{ste}-{threads}-{}", reports.len()));
            let sub_s = sub.to_str().unwrap();
            let out = szt(dir.path(), &["train", "--ste", ste, "--epochs", "3", "--seed", "5", "--threads", threads, "--out-dir", sub_s]);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
            let files: Vec<Vec<u8>> =
                ["report.json", "layer1.szt", "layer2.szt", "latent.json"].iter().map(|f| fs::read(sub.join(f)).unwrap()).collect();
            reports.push(files);
        }
        assert_eq!(reports[0], reports[1]);
        assert_eq!(reports[0], reports[2]);
        let report: Value = serde_json::from_slice(&reports[0][0]).unwrap();
        let rep = report["representational_transitions"].as_u64().unwrap();
        if ste == "bt" {
            assert_eq!(rep, 0);
        } else {
            assert!(rep > 0);
        }
        assert_eq!(report["checkpoint_digest"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn simulate_writes_estimate_and_oracle_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = szt(dir.path(), &["simulate", "--mode", "renewal", "--trials", "20000"]);
    assert!(out.status.success());
    let rows = csv_rows(&dir.path().join("simulate_renewal.csv"));
    assert_eq!(rows.len(), 3);
    for r in &rows {
        let (est, ci, oracle): (f64, f64, f64) = (r[1].parse().unwrap(), r[2].parse().unwrap(), r[3].parse().unwrap());
        assert!((est - oracle).abs() <= 2.0 * ci, "{r:?}");
    }
    let out = szt(dir.path(), &["simulate", "--mode", "ou", "--trials", "50", "--delta", "0.5"]);
    assert!(out.status.success());
    assert_eq!(csv_rows(&dir.path().join("simulate_ou.csv")).len(), 2);
    let out = szt(dir.path(), &["simulate", "--mode", "ou", "--dt", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn analyze_tables_agree_with_oracles() {
    let dir = tempfile::tempdir().unwrap();
    let out = szt(dir.path(), &["analyze"]);
    assert!(out.status.success());
    for (name, tol) in [("sensitivity", 1e-8), ("entropy", 1e-15), ("mse", 1e-8), ("dead_zone", 1e-6), ("kl", 1e-12)] {
        let rows = csv_rows(&dir.path().join(format!("analyze_{name}.csv")));
        assert!(!rows.is_empty());
        for r in rows {
            let abs: f64 = r[4].parse().unwrap();
            assert!(abs <= tol, "{name}: {r:?}");
        }
    }
    assert!(dir.path().join("analyze_mfpt.csv").exists());
}

#[test]
fn report_merges_tables_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let runs = dir.path().join("runs");
    let runs_s = runs.to_str().unwrap();
    assert!(szt(dir.path(), &["verify", "--suite", "entropy", "--out-dir", runs_s]).status.success());
    assert!(szt(dir.path(), &["analyze", "--quantity", "kl", "--out-dir", runs_s]).status.success());
    let expected = csv_rows(&runs.join("verify.csv")).len() + csv_rows(&runs.join("analyze_kl.csv")).len();

    let mut bytes = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let out = szt(dir.path(), &["report", "--inputs", runs_s, "--out-dir", out_dir.to_str().unwrap()]);
        assert!(out.status.success());
        let summary = json(&out_dir.join("summary.json"));
        assert_eq!(summary["rows"].as_u64().unwrap() as usize, expected);
        assert_eq!(summary["manifests"].as_array().unwrap().len(), 2);
        bytes.push((fs::read(out_dir.join("summary.json")).unwrap(), fs::read(out_dir.join("summary.csv")).unwrap()));
    }
    assert_eq!(bytes[0], bytes[1]);
    assert_eq!(csv_rows(&dir.path().join("a/summary.csv")).len(), expected);
}

#[test]
fn report_of_nothing_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let out = szt(dir.path(), &["report"]);
    assert!(out.status.success());
    let summary = json(&dir.path().join("summary.json"));
    assert_eq!(summary["rows"], 0);
    assert!(summary["claims"].as_object().unwrap().is_empty());
}

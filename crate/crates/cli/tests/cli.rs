use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = r#"{"D": 6, "N": 80, "L": 8, "M": 6, "delta_theta": 0.4,
    "methods": ["EsrEnergy", "NestedKv", "Bic", "Gap"]}"#;

fn modescope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modescope"))
        .args(args)
        .env_remove("MODESCOPE_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, json: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, json).unwrap();
    p.to_string_lossy().into_owned()
}

fn sweep_into(cfg: &str, out: &Path, threads: &str) {
    let res = modescope(&[
        "sweep",
        "--config",
        cfg,
        "--param",
        "snr",
        "--grid=-5:20:4",
        "--trials",
        "4",
        "--threads",
        threads,
        "--out",
        out.to_str().unwrap(),
        "--svg",
        "--scores",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn sweep_writes_csv_svg_and_scores() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("run");
    sweep_into(&cfg, &out, "2");

    let sweep = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = sweep.lines();
    assert_eq!(lines.next(), Some("param_value,method,hits,trials,hit_prob,failed"));
    assert_eq!(lines.count(), 4 * 4);
    let auc = fs::read_to_string(out.join("auc.csv")).unwrap();
    assert!(auc.starts_with("method,auc\n"));
    assert_eq!(auc.lines().count(), 5);
    assert!(fs::read_to_string(out.join("sweep.svg")).unwrap().starts_with("<svg"));
    let scores = fs::read_to_string(out.join("scores.csv")).unwrap();
    assert!(scores.starts_with("trial_id,method,mode_index,score,label,eigval_re,eigval_im\n"));
    // two scoring methods, 16 trials, 6 modes each
    assert_eq!(scores.lines().count(), 1 + 2 * 16 * 6);
}

#[test]
fn auc_subcommand_matches_sweep_output() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("run");
    sweep_into(&cfg, &out, "1");
    let res = modescope(&["auc", "--in", out.join("sweep.csv").to_str().unwrap()]);
    assert!(res.status.success());
    assert_eq!(
        String::from_utf8(res.stdout).unwrap(),
        fs::read_to_string(out.join("auc.csv")).unwrap()
    );
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    sweep_into(&cfg, &a, "1");
    sweep_into(&cfg, &b, "3");
    for f in ["sweep.csv", "auc.csv", "scores.csv", "sweep.svg"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn cdf_spur_writes_one_curve_per_delay() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), r#"{"D": 6, "N": 80, "M": 7, "delta_theta": 0.3}"#);
    let out = dir.path().join("cdf");
    let res = modescope(&[
        "cdf-spur",
        "--config",
        &cfg,
        "--L-grid",
        "2,4,10",
        "--trials",
        "3",
        "--out",
        out.to_str().unwrap(),
        "--svg",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = fs::read_to_string(out.join("cdf.csv")).unwrap();
    assert!(csv.starts_with("L,magnitude,cdf\n"));
    assert_eq!(csv.lines().count(), 1 + 3 * 512);
    assert!(out.join("cdf.svg").exists());
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert_eq!(stdout.lines().filter(|l| l.contains("median")).count(), 3);
}

#[test]
fn verify_passes_and_reports_wide_regime_check() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), r#"{"D": 4, "L": 2, "N": 200, "M": 6, "delta_theta": 0.3}"#);
    let report = dir.path().join("report.json");
    let res = modescope(&[
        "verify",
        "--config",
        &cfg,
        "--seeds",
        "2",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(json["passed"], true);
    let names: Vec<&str> = json["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(names.iter().filter(|&&n| n == "moore_penrose_companion").count(), 2);
}

#[test]
fn invalid_input_exits_with_code_2() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("x");
    let res = modescope(&[
        "sweep",
        "--param",
        "gain",
        "--grid",
        "1,2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8(res.stderr).unwrap();
    assert!(err.contains("snr") && err.contains("dtheta"), "{err}");

    let bad = write_config(dir.path(), r#"{"bogus": 1}"#);
    assert_eq!(modescope(&["verify", "--config", &bad]).status.code(), Some(2));
    assert_eq!(modescope(&["verify", "--seeds", "0"]).status.code(), Some(2));
}

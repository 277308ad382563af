//! End-to-end tests of the installed binary: argument handling, exit
//! codes, artifact files, and output formats.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hfloer"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("hfloer_cli_tests").join(name);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const GOOD_CFG: &str = "model = henon\na = 3.0\ndelta = 0.03\ndepth = 8\nbox = -6 -6 6 6\n";

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn run_writes_artifacts_and_reports_homology() {
    let dir = tmp("run_good");
    let cfg = write(&dir, "t.cfg", GOOD_CFG);
    let out_dir = dir.join("out");
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .arg("--dump-curves")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));

    let text = stdout(&out);
    assert!(text.contains("cubic_henon"), "{text}");
    assert!(text.contains("H_1 = Z^1"), "{text}");
    assert!(text.contains("H_2 = Z^2"), "{text}");
    assert!(text.contains("H_3 = Z^1"), "{text}");
    assert!(text.contains("torsion-free"), "{text}");

    for name in
        ["points.csv", "classes.csv", "complex.json", "homology.json", "report.json", "tangle.svg", "curves.csv"]
    {
        let p = out_dir.join(name);
        assert!(p.is_file(), "missing artifact {name}");
        assert!(std::fs::metadata(&p).unwrap().len() > 0, "empty artifact {name}");
    }

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["primary_classes"], 12);
    assert_eq!(report["homology_ranks"]["2"], 2);
    assert_eq!(report["morse"]["weak_ok"], true);
}

#[test]
fn validate_reports_readiness_without_writing() {
    let dir = tmp("validate");
    let cfg = write(&dir, "t.cfg", GOOD_CFG);
    let out = bin().args(["validate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("first intersection found"), "{text}");
    assert!(text.trim_end().ends_with("ok"), "{text}");
    // nothing but the config may appear in the directory
    assert_eq!(std::fs::read_dir(&dir).unwrap().count(), 1);
}

#[test]
fn config_trouble_exits_two() {
    let dir = tmp("bad_cfg");
    let cfg = write(&dir, "t.cfg", "model = henon\na = 3.0\nbanana = 7\n");
    let out = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("banana"), "{}", stderr(&out));

    let out = bin().args(["run", "--config", "/nonexistent/x.cfg"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn insufficient_window_exits_three_with_the_step() {
    let dir = tmp("shallow");
    let cfg = write(&dir, "t.cfg", "model = henon\na = 3.0\ndelta = 0.03\ndepth = 5\nbox = -6 -6 6 6\n");
    let out = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let err = stderr(&out);
    assert!(err.contains("step 2"), "{err}");
    assert!(err.contains("window insufficient"), "{err}");
}

#[test]
fn snf_prints_verified_normal_form() {
    let dir = tmp("snf");
    let m = write(&dir, "m.json", "[[2, 4, 4], [-6, 6, 12], [10, 4, 16]]");
    let out = bin().arg("snf").arg(&m).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["rank"], 3);
    assert_eq!(v["divisors"], serde_json::json!(["2", "2", "156"]));

    let bad = write(&dir, "bad.json", "[[1, 2], [3]]");
    let out = bin().arg("snf").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn wide_scan_flag_reaches_the_report() {
    let dir = tmp("wide");
    let cfg = write(&dir, "t.cfg", GOOD_CFG);
    let out_dir = dir.join("out");
    let out = bin()
        .args(["run", "--wide-scan", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("wide scan to offset 5"), "{}", stdout(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["wide_scan"]["bigons_found"], 0);
    assert!(report["wide_scan"]["probes"].as_u64().unwrap() > 0);
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL_CONFIG: &str = r#"{
  "space": {
    "dimensions": [
      {"name": "radius", "values": [0.0, 0.5, 1.0, 1.5]},
      {"name": "samples", "values": [8, 16]},
      {"name": "resolution", "labels": ["half", "full"]}
    ],
    "best_quality": [2, 1, 1]
  },
  "lods": [
    {"name": "near", "threshold": 1.0},
    {"name": "far", "threshold": 0.4}
  ],
  "hardware_grid": {
    "cpu_bins": [2000, 3000],
    "gpu_bins": {"from": 1000, "to": 2000, "count": 5}
  },
  "oracle": {
    "seed": 5,
    "cpu_range_mhz": [2000, 3000],
    "gpu_range_mhz": [1000, 2000],
    "interaction_strength": 0.5,
    "noise_std_time": 0.03,
    "noise_std_ssim": 0.002,
    "samples": 600
  },
  "train": {
    "n_estimators": 20,
    "learning_rate": 0.1,
    "depth_range": [1, 4],
    "split": [7, 3],
    "min_samples_leaf": 5,
    "seed": 1
  },
  "lut": {"percentile": 0.25},
  "scenario": {
    "frames": 60,
    "lod_schedule": [0, 1],
    "lod_hold_frames": 10,
    "source": {"random_walk": {"seed": 3, "max_step_mhz": 40.0}}
  },
  "paths": {
    "dataset": "out/data.csv",
    "phi": "out/phi.json",
    "psi": "out/psi.json",
    "lut": "out/table.lut",
    "report_dir": "out/report"
  }
}"#;

fn framelut(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_framelut"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn framelut")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = framelut(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cfg.json"), SMALL_CONFIG).unwrap();
    dir
}

fn run_pipeline(dir: &Path) {
    ok(dir, &["generate-data", "--config", "cfg.json"]);
    ok(dir, &["train", "--config", "cfg.json", "--target", "ssim"]);
    ok(dir, &["train", "--config", "cfg.json", "--target", "time"]);
    ok(dir, &["build-lut", "--config", "cfg.json"]);
    ok(dir, &["evaluate", "--config", "cfg.json"]);
}

#[test]
fn pipeline_commands_succeed_and_report() {
    let dir = workspace();
    let d = dir.path();
    run_pipeline(d);
    for f in ["out/data.csv", "out/phi.json", "out/psi.json", "out/table.lut", "out/report/frames.csv", "out/report/summary.csv"] {
        assert!(d.join(f).is_file(), "missing {f}");
    }

    let q = ok(d, &["query", "--lut", "out/table.lut", "--lod", "1", "--cpu", "2400", "--gpu", "1333", "--config", "cfg.json"]);
    assert!(q.starts_with("cell lod=1 cpu_bin=0 (2000 MHz) gpu_bin=1 (1250 MHz)"), "{q}");
    assert!(q.contains("resolution = "), "{q}");
    assert_eq!(q.lines().count(), 4);

    let b = ok(d, &["bench", "--lut", "out/table.lut", "--iters", "2000"]);
    assert!(b.starts_with("iterations=2000 "), "{b}");

    let s = ok(d, &["sweep", "--config", "cfg.json", "--from", "1000", "--to", "1100", "--step", "10", "--out", "out/sweep.csv"]);
    assert!(s.starts_with("rows=11 "), "{s}");
    assert_eq!(fs::read_to_string(d.join("out/sweep.csv")).unwrap().lines().count(), 12);

    let a = ok(d, &["ablate", "--config", "cfg.json"]);
    assert!(a.contains("match_rate=1.0000"), "{a}");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let first = workspace();
    let second = workspace();
    run_pipeline(first.path());
    run_pipeline(second.path());
    for f in ["out/data.csv", "out/phi.json", "out/psi.json", "out/table.lut", "out/report/frames.csv", "out/report/summary.csv"] {
        let a = fs::read(first.path().join(f)).unwrap();
        let b = fs::read(second.path().join(f)).unwrap();
        assert!(a == b, "{f} differs between runs");
    }
}

#[test]
fn usage_errors_are_rejected() {
    let dir = workspace();
    let d = dir.path();
    for args in [
        &["generate-data", "--config", "cfg.json", "--samples", "0"][..],
        &["train", "--config", "cfg.json", "--target", "foo"][..],
        &["query", "--lut", "x.lut", "--lod", "-1", "--cpu", "1", "--gpu", "1"][..],
        &["frobnicate"][..],
    ] {
        let out = framelut(d, args);
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn missing_and_corrupt_inputs_fail_cleanly() {
    let dir = workspace();
    let d = dir.path();
    let out = framelut(d, &["build-lut", "--config", "cfg.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: reading model out/phi.json"), "{err}");

    let out = framelut(d, &["generate-data", "--config", "nope.json"]);
    assert_eq!(out.status.code(), Some(1));

    fs::write(d.join("bad.lut"), b"LUT1 definitely not a table").unwrap();
    let out = framelut(d, &["query", "--lut", "bad.lut", "--lod", "0", "--cpu", "2000", "--gpu", "1000"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("reading bad.lut"));
}

#[test]
fn query_rejects_unknown_lod() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["generate-data", "--config", "cfg.json"]);
    ok(d, &["train", "--config", "cfg.json", "--target", "ssim"]);
    ok(d, &["train", "--config", "cfg.json", "--target", "time"]);
    ok(d, &["build-lut", "--config", "cfg.json"]);
    let out = framelut(d, &["query", "--lut", "out/table.lut", "--lod", "2", "--cpu", "2000", "--gpu", "1000"]);
    assert_eq!(out.status.code(), Some(1));
}

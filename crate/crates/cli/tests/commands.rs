use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

const CIRCLE: &str = r#"{
    "manifold": "circle",
    "n": [250, 500],
    "replicates": 2,
    "schedule": {"c_eps": 10, "c_h": 40, "gamma_factor": 0.25},
    "m": 2
}"#;

fn ok_json(out: Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn err_json(out: Output) -> Value {
    assert_eq!(out.status.code(), Some(1), "stdout: {}", String::from_utf8_lossy(&out.stdout));
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    v["error"].clone()
}

struct Work {
    dir: tempfile::TempDir,
    cfg: PathBuf,
}

impl Work {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("config.json");
        std::fs::write(&cfg, config).unwrap();
        Work { dir, cfg }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// `manidens <cmd> --config <cfg> --seed 3`, then `flag value` pairs;
    /// non-numeric values are file names in the work directory.
    fn cmd(&self, cmd: &str, args: &[(&str, &str)]) -> Output {
        let mut c = Command::new(env!("CARGO_BIN_EXE_manidens"));
        c.arg(cmd).arg("--config").arg(&self.cfg).args(["--seed", "3"]);
        for (flag, v) in args {
            c.arg(flag);
            if v.parse::<f64>().is_ok() {
                c.arg(v);
            } else {
                c.arg(self.path(v));
            }
        }
        c.output().unwrap()
    }
}

#[test]
fn full_chain() {
    let w = Work::new(CIRCLE);
    let g = ok_json(w.cmd("gen", &[("--n", "600"), ("--out", "clean.csv")]));
    assert_eq!(g["points"], 600);
    assert!(w.path("clean.json").exists());

    let nz = ok_json(w.cmd("noise", &[("--input", "clean.csv"), ("--out", "cloud.csv")]));
    assert!(nz["gamma"].as_f64().unwrap() > 0.0);

    let f = ok_json(w.cmd("fps", &[("--input", "cloud.csv"), ("--out", "centers.csv")]));
    let centers = f["centers"].as_u64().unwrap();
    assert!(centers > 10);

    let c = ok_json(w.cmd("fit-charts", &[("--input", "cloud.csv"), ("--centers", "centers.csv"), ("--out", "charts.json")]));
    assert_eq!(c["charts"].as_u64().unwrap(), centers);

    let v = ok_json(w.cmd("estimate-volume", &[("--input", "cloud.csv"), ("--charts", "charts.json"), ("--out", "volume.csv")]));
    let total = v["total_mass"].as_f64().unwrap();
    assert!((total - std::f64::consts::TAU).abs() < 0.05 * std::f64::consts::TAU, "{total}");

    let d = ok_json(w.cmd(
        "estimate-density",
        &[("--input", "cloud.csv"), ("--volume", "volume.csv"), ("--export-kernel", "kernel.json"), ("--out", "est.csv")],
    ));
    assert!((d["raw_mass"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    ok_json(w.cmd(
        "estimate-density",
        &[("--input", "cloud.csv"), ("--volume", "volume.csv"), ("--kernel", "kernel.json"), ("--out", "est2.csv")],
    ));
    assert_eq!(std::fs::read(w.path("est.csv")).unwrap(), std::fs::read(w.path("est2.csv")).unwrap());

    let o = ok_json(w.cmd("wasserstein", &[("--source", "est.csv"), ("--target", "clean.csv")]));
    let dist = o["distance"].as_f64().unwrap();
    assert!(dist > 0.0 && dist < 0.5, "{dist}");
    assert!(o["gap"].as_f64().unwrap() <= 1e-9);
    let same = ok_json(w.cmd("wasserstein", &[("--source", "est.csv"), ("--target", "est.csv")]));
    assert!(same["distance"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn same_seed_same_bytes() {
    let w = Work::new(CIRCLE);
    ok_json(w.cmd("gen", &[("--n", "300"), ("--out", "a.csv")]));
    ok_json(w.cmd("gen", &[("--n", "300"), ("--out", "b.csv")]));
    assert_eq!(std::fs::read(w.path("a.csv")).unwrap(), std::fs::read(w.path("b.csv")).unwrap());
}

#[test]
fn config_errors_are_stage_tagged() {
    let w = Work::new(r#"{"manifold": "circle", "schedule": {"c_h": -1}}"#);
    let e = err_json(w.cmd("gen", &[("--n", "10"), ("--out", "x.csv")]));
    assert_eq!(e["stage"], "config");
    assert_eq!(e["key"], "schedule.c_h");

    let w = Work::new(r#"{"manifold": "circle", "bogus": true}"#);
    let e = err_json(w.cmd("gen", &[("--n", "10"), ("--out", "x.csv")]));
    assert_eq!(e["key"], "bogus");

    let w = Work::new("{ not json");
    let e = err_json(w.cmd("gen", &[("--n", "10"), ("--out", "x.csv")]));
    assert_eq!(e["stage"], "config");
}

#[test]
fn missing_input_is_io_error() {
    let w = Work::new(CIRCLE);
    let e = err_json(w.cmd("fps", &[("--input", "nothing.csv"), ("--out", "c.csv")]));
    assert_eq!(e["stage"], "io");
}

#[test]
fn degenerate_neighborhoods_fail_at_charts() {
    // defaults give a chart radius too small for 200 points
    let w = Work::new(r#"{"manifold": "circle"}"#);
    ok_json(w.cmd("gen", &[("--n", "200"), ("--out", "cloud.csv")]));
    let e = err_json(w.cmd("fit-charts", &[("--input", "cloud.csv"), ("--out", "charts.json")]));
    assert_eq!(e["stage"], "charts");
    assert!(e["message"].as_str().unwrap().contains("neighbo"), "{e}");
}

#[test]
fn noise_needs_truth() {
    let w = Work::new(CIRCLE);
    std::fs::write(w.path("plain.csv"), "x0,x1\n1,0\n0,1\n").unwrap();
    let e = err_json(w.cmd("noise", &[("--input", "plain.csv"), ("--out", "n.csv")]));
    assert_eq!(e["stage"], "noise");
}

#[test]
fn usage_errors_exit_nonzero() {
    let out = Command::new(env!("CARGO_BIN_EXE_manidens")).args(["gen", "--n", "5"]).output().unwrap();
    assert!(!out.status.success());
}

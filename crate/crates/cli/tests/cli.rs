use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gpdm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpdm")).args(args).output().expect("binary runs")
}

fn ok_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).expect("stdout is json");
    assert_eq!(v["status"], "ok");
    v
}

fn err_json(out: &Output) -> Value {
    assert!(!out.status.success());
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("an error line");
    let v: Value = serde_json::from_str(line).expect("error line is json");
    assert_eq!(v["status"], "error");
    v
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn tune_writes_bandwidth_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let v = ok_json(&gpdm(&["tune", "--problem", "circle", "--size", "256", "--out", out]));
    let eps = v["epsilon"].as_f64().unwrap();
    assert!(eps > 0.0 && eps < 1.0);
    assert!((v["estimated_dim"].as_f64().unwrap() - 1.0).abs() < 0.2);
    let csv = read(&dir.path().join("bandwidth.csv"));
    assert_eq!(csv.lines().next().unwrap(), "epsilon,logS");
    assert_eq!(csv.lines().count(), 122);
}

#[test]
fn solve_writes_snapshot_frame_and_operator() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let v = ok_json(&gpdm(&[
        "solve", "--problem", "annulus-neumann", "--size", "540", "--dt", "1e-3", "--t-end", "0.01", "--layers", "4",
        "--export-operator", "--out", out,
    ]));
    assert_eq!(v["n"], 540);
    assert_eq!(v["layers"], 4);
    assert!(v["err_linf"].as_f64().unwrap() < 0.1);
    let snap = read(&dir.path().join("final.csv"));
    assert!(snap.starts_with("idx,x1,x2,x3,x4,x5,U,u_true,abs_err"));
    assert_eq!(snap.lines().count(), 541);
    let frame = read(&dir.path().join("ghost_frame.csv"));
    // 45 boundary points per circle, interior ghost plus 4 layers each.
    assert_eq!(frame.lines().count(), 1 + 90 * 5);
    let ops = read(&dir.path().join("operator.csv"));
    assert!(ops.lines().count() > 540);
}

#[test]
fn sweep_runs_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        "[experiment]\nproblem = \"circle\"\nmethod = \"dm\"\nsizes = [64, 128, 256]\ntrials = 2\n\
         [epsilon]\nmode = \"schedule\"\nrho = 0.2857\n[settings]\nk = 30\ndt = 1e-3\nt_end = 0.01\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let v = ok_json(&gpdm(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    assert_eq!(v["failed_cells"], 0);
    let rows = read(&out.join("results.csv"));
    assert_eq!(rows.lines().count(), 7);
    assert!(read(&out.join("convergence.svg")).starts_with("<svg"));
    let summary: Value = serde_json::from_str(&read(&out.join("summary.json"))).unwrap();
    assert!(summary["slope_l2"]["slope"].as_f64().unwrap().is_finite());
}

#[test]
fn compare_ranks_methods() {
    let dir = tempfile::tempdir().unwrap();
    let v = ok_json(&gpdm(&[
        "compare", "--problem", "annulus-dirichlet", "--size", "540", "--methods", "dm,gpdm,vcdm", "--dt", "1e-3",
        "--t-end", "0.01", "--out", dir.path().to_str().unwrap(),
    ]));
    assert!(v["winner"].is_string());
}

#[test]
fn ingest_heat_on_obj() {
    let dir = tempfile::tempdir().unwrap();
    let obj = dir.path().join("s.obj");
    let mut text = String::from("# sphere\n");
    let n = 300;
    for i in 0..n {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
        let r = (1.0 - z * z).sqrt();
        let t = i as f64 * 2.399963229728653;
        text.push_str(&format!("v {} {} {}\n", r * t.cos(), r * t.sin(), z));
    }
    let first = text.lines().nth(1).unwrap().to_string();
    text.push_str(&format!("{first}0\nf 1 2 3\n"));
    std::fs::write(&obj, text).unwrap();
    let v = ok_json(&gpdm(&[
        "ingest-heat", "--input", obj.to_str().unwrap(), "--k", "40", "--dt", "1e-2", "--t-samples", "0.1,0.5",
        "--out", dir.path().to_str().unwrap(),
    ]));
    assert_eq!(v["n"], n);
    assert!(dir.path().join("heat.json").exists());
}

#[test]
fn failures_emit_one_json_line() {
    let v = err_json(&gpdm(&["solve", "--problem", "circle", "--size", "64", "--method", "vcdm"]));
    assert_eq!(v["kind"], "argument");
    let v = err_json(&gpdm(&["solve", "--problem", "circle"]));
    assert_eq!(v["kind"], "usage");
    let v = err_json(&gpdm(&["sweep", "--config", "/nonexistent/x.toml"]));
    assert_eq!(v["kind"], "io");
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x,y,z\n1,2,3\n1,oops,3\n").unwrap();
    let v = err_json(&gpdm(&["tune", "--input", bad.to_str().unwrap(), "--dim", "2"]));
    assert_eq!(v["kind"], "parse");
    assert!(v["message"].as_str().unwrap().contains('3'));
}

#[test]
fn help_exits_zero() {
    assert!(gpdm(&["--help"]).status.success());
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sisnet::io;

fn sisnet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sisnet"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn simulate_subthreshold_decay_with_plot() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.cfg"), "system.tau = 0.04\ncontrol.T = 10\n").unwrap();
    let out = sisnet(dir.path(), &["simulate", "--config", "run.cfg", "--out", "res", "--plot"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let res = dir.path().join("res");
    let text = fs::read_to_string(res.join("trajectory.csv")).unwrap();
    assert!(text.starts_with("t,I,SI,II,SS,n,u1,u2\n"));
    let rows = io::read_trajectory(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 101);
    assert!(rows[100][1] < 10.0);
    assert!(fs::read_to_string(res.join("trajectory.svg")).unwrap().contains("<polyline"));
    let s = summary(&res);
    assert_eq!(s["params"]["tau"], 0.04);
    assert_eq!(s["T"], 10.0);
}

#[test]
fn simulate_from_schedule_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("u.csv"), "u1,u2\n2,0.001\n2,0.001\n0,0\n").unwrap();
    fs::write(dir.path().join("run.cfg"), "control.schedule = u.csv\ncontrol.dt = 0.5\n").unwrap();
    let out = sisnet(dir.path(), &["simulate", "--config", "run.cfg", "--out", "res"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = io::read_trajectory(fs::File::open(dir.path().join("res/trajectory.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[3][0], 1.5);
    assert_eq!((rows[0][6], rows[2][6]), (2.0, 0.0));
}

#[test]
fn configuration_errors_exit_2_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("control.M3 = 1\n", "control.M3", "simulate"),
        ("system.tau = fast\n", "system.tau", "simulate"),
        ("system.gamma = 0\n", "system.gamma", "simulate"),
        ("control.M2 = 0.5\n", "control.M1", "nmpc"),
    ];
    for (text, key, cmd) in cases {
        fs::write(dir.path().join("bad.cfg"), text).unwrap();
        let out = sisnet(dir.path(), &[cmd, "--config", "bad.cfg"]);
        assert_eq!(out.status.code(), Some(2), "{text}");
        assert!(String::from_utf8_lossy(&out.stderr).contains(key), "{text}");
    }
    let out = sisnet(dir.path(), &["simulate", "--config", "missing.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    let out = sisnet(dir.path(), &["experiment", "fig9"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fig9"));
    let out = sisnet(dir.path(), &["simulate", "--cost-indexing", "sideways"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn regions_single_cell_grid() {
    let dir = tempfile::tempdir().unwrap();
    let grid = "grid.u1_min = 20\ngrid.u1_max = 20\ngrid.u1_points = 1\ngrid.u2_min = 0.01\ngrid.u2_max = 0.01\ngrid.u2_points = 1\n";
    fs::write(dir.path().join("grid.cfg"), grid).unwrap();
    let out = sisnet(dir.path(), &["regions", "--config", "grid.cfg", "--out", "res", "--plot"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let res = dir.path().join("res");
    assert_eq!(fs::read_to_string(res.join("regions.csv")).unwrap(), "u1,u2,class\n20,0.01,oscillatory\n");
    let s = summary(&res);
    assert!((s["transcritical_u1"].as_f64().unwrap() - 98.8).abs() < 1e-12);
    assert!(s["hopf_points"].as_u64().unwrap() > 0);
    let hopf = fs::read_to_string(res.join("hopf.csv")).unwrap();
    assert!(hopf.starts_with("u1,u2\n") && hopf.lines().count() > 1);
    assert!(res.join("regions.svg").exists());
}

#[test]
fn nmpc_success_case_reports_controllable() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("fig4.cfg"), "system.tau = 2\ncontrol.M1 = 18\ncontrol.M2 = 0.001\n").unwrap();
    let out = sisnet(dir.path(), &["nmpc", "--config", "fig4.cfg", "--out", "res", "--seed", "42"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let res = dir.path().join("res");
    let s = summary(&res);
    assert_eq!(s["controllable"], true);
    assert_eq!(s["config"]["seed"], 42);
    assert_eq!(s["config"]["m1"], 18.0);
    let controls = fs::read_to_string(res.join("controls.csv")).unwrap();
    assert!(controls.starts_with("t,u1,u2\n"));
    assert_eq!(controls.lines().count(), 101);
    for line in controls.lines().skip(1) {
        let u: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert!((0.0..=18.0).contains(&u[1]) && u[2].abs() <= 0.001);
    }
}

#[test]
fn nmpc_unreachable_target_is_data_not_failure() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("weak.cfg"), "system.tau = 1\ncontrol.M1 = 1\ncontrol.M2 = 0.001\ncontrol.restarts = 0\n").unwrap();
    let out = sisnet(dir.path(), &["nmpc", "--config", "weak.cfg", "--out", "res"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(summary(&dir.path().join("res"))["controllable"], false);
}

#[test]
fn experiment_resurgence_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = sisnet(dir.path(), &["experiment", "fig2", "--out", "res", "--plot"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let res = dir.path().join("res");
    let s = summary(&res);
    assert_eq!(s["scenario"], "resurgence");
    assert_eq!(s["results"]["resurgent"], true);
    assert!(res.join("trajectory.svg").exists());
}

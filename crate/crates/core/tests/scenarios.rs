use std::fs;

use sisnet::experiments::{scenario_run, SCENARIOS};
use sisnet::io;
use sisnet::{Error, Overrides};

fn overrides(text: &str) -> Overrides {
    Overrides::parse(text).unwrap()
}

#[test]
fn regionmap_writes_grid_and_counts() {
    let dir = tempfile::tempdir().unwrap();
    let o = overrides("grid.u1_points = 4\ngrid.u2_points = 3\n");
    let summary = scenario_run("fig1", &o, dir.path()).unwrap();
    assert_eq!(summary["scenario"], "regionmap");
    let cells = io::read_regions(fs::File::open(dir.path().join("regions.csv")).unwrap()).unwrap();
    assert_eq!(cells.len(), 12);
    assert!(dir.path().join("summary.json").exists());
    let on_disk: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(on_disk, summary);
}

#[test]
fn resurgence_rebounds_and_logs_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let summary = scenario_run("resurgence", &Overrides::default(), dir.path()).unwrap();
    let r = &summary["results"];
    assert_eq!(r["resurgent"], true);
    assert!(r["dip_time"].as_f64().unwrap() < r["rebound_time"].as_f64().unwrap());
    let rows = io::read_trajectory(fs::File::open(dir.path().join("trajectory.csv")).unwrap()).unwrap();
    assert_eq!(rows.last().unwrap()[0], 200.0);
}

#[test]
fn resurgence_respects_control_override() {
    let dir = tempfile::tempdir().unwrap();
    // Far above the threshold the epidemic never comes back.
    let o = overrides("control.u1 = 110\ncontrol.u2 = 0.05\ncontrol.T = 50\n");
    let summary = scenario_run("resurgence", &o, dir.path()).unwrap();
    assert_eq!(summary["results"]["resurgent"], false);
    assert_eq!(summary["overrides"]["control.u1"], 110.0);
}

#[test]
fn unknown_scenario_and_bad_override_are_configuration_errors() {
    let dir = tempfile::tempdir().unwrap();
    let e = scenario_run("fig9", &Overrides::default(), dir.path()).unwrap_err();
    assert!(matches!(e, Error::UnknownScenario(_)));
    assert!(e.is_configuration());

    let e = scenario_run("resurgence", &overrides("system.tau = -1\n"), dir.path()).unwrap_err();
    assert!(e.is_configuration());
}

#[test]
fn scenario_list_is_complete() {
    for name in ["regionmap", "resurgence", "fig3", "fig4", "fig5-left", "fig5-right", "fig6", "stepsize", "damping", "table2"] {
        assert!(SCENARIOS.contains(&name), "{name}");
    }
}

#[test]
fn controlled_run_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let o = overrides("control.T = 4\n");
    let sa = scenario_run("fig4", &o, a.path()).unwrap();
    let sb = scenario_run("fig4", &o, b.path()).unwrap();
    assert_eq!(sa, sb);
    assert_eq!(
        fs::read(a.path().join("trajectory.csv")).unwrap(),
        fs::read(b.path().join("trajectory.csv")).unwrap()
    );
}

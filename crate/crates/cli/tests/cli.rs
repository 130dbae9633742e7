use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_contact-reach"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn scenario(dir: &Path, body: &str) -> String {
    let path = dir.join("s.toml");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn safe_run_exits_zero_and_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(dir.path(), "mass = 4.5\nspeed = 0.45\n");
    let out = cli(&["run", "--scenario", &s, "--out", "res", "--dump"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("Safe"));
    for f in ["envelope.csv", "run.json", "sets.dump"] {
        assert!(dir.path().join("res").join(f).is_file(), "{f}");
    }
}

#[test]
fn unsafe_run_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(dir.path(), "mass = 8.0\nspeed = 0.55\n");
    let out = cli(&["run", "--scenario", &s, "--out", "res"], dir.path());
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("res/envelope.csv").is_file());
}

#[test]
fn errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(&["run", "--method", "magic"], dir.path()).status.code(), Some(2));
    let out = cli(&["run", "--scenario", "missing.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.toml"));
    let s = scenario(dir.path(), "mass = -1.0\n");
    assert_eq!(cli(&["run", "--scenario", &s], dir.path()).status.code(), Some(2));
    let s = scenario(dir.path(), "colour = 3\n");
    assert_eq!(cli(&["check", "--scenario", &s], dir.path()).status.code(), Some(2));
}

#[test]
fn grid_writes_tables_and_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["grid", "--masses", "4.5", "--speeds", "0.35,0.45", "--out", "g"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let grid = std::fs::read_to_string(dir.path().join("g/grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 3);
    assert!(dir.path().join("g/intersections.csv").is_file());
    assert!(dir.path().join("g/m4.5_v0.35/envelope.csv").is_file());
}

#[test]
fn check_reports_containment() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(dir.path(), "mass = 1.5\nspeed = 0.35\n");
    let out = cli(&["check", "--scenario", &s, "--samples", "20", "--out", "c"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("20 trajectories") && stdout.contains("0 violations"), "{stdout}");
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("c/run.json")).unwrap()).unwrap();
    assert_eq!(meta["containment"]["samples"], 20);
}

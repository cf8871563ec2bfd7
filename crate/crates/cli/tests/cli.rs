use std::path::Path;
use std::process::{Command, Output};

fn nalab(sub: &str, config: &str, dir: &Path) -> Output {
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_nalab"))
        .arg(sub)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn outputs(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir.join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn profile_summary_for_the_cubic() {
    let dir = tempfile::tempdir().unwrap();
    let o = nalab("profile", "{}", dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary = outputs(dir.path()).into_iter().find(|n| n.starts_with("profile_summary_")).unwrap();
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out").join(summary)).unwrap()).unwrap();
    let c0 = 3.0 / 2f64.sqrt();
    assert!((v["c0_wave"].as_f64().unwrap() - c0).abs() < 1e-6);
    assert!((v["c0_intrinsic"].as_f64().unwrap() - c0).abs() < 1e-6);
    assert_eq!(v["schema_version"], 1);
}

#[test]
fn uncoupled_profile_has_zero_speed() {
    let dir = tempfile::tempdir().unwrap();
    let o = nalab("profile", r#"{"coupling": 0}"#, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary = outputs(dir.path()).into_iter().find(|n| n.starts_with("profile_summary_")).unwrap();
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out").join(summary)).unwrap()).unwrap();
    assert_eq!(v["c0_wave"].as_f64().unwrap().abs(), 0.0);
}

#[test]
fn malformed_key_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let o = nalab("profile", r#"{"epsilon": 0.04, "epsilonn": 0.1}"#, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("epsilonn"), "{}", stderr(&o));
}

#[test]
fn non_bistable_model_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = nalab("profile", r#"{"coefficients": [0, -1, 0, -1]}"#, dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn two_epsilons_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = nalab("study", r#"{"study": "generation", "epsList": [0.08, 0.04]}"#, dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("at least 3"));
}

#[test]
fn zero_end_time_gives_one_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let o = nalab("simulate", r#"{"epsilon": 0.08, "tEnd": 0}"#, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let names = outputs(dir.path());
    let snaps = names.iter().filter(|n| n.starts_with("snapshot_") && n.ends_with(".bin")).count();
    assert_eq!(snaps, 1, "{names:?}");
}

#[test]
fn rerun_overwrites_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"epsilon": 0.08, "tEnd": 0.002, "snapshotEvery": 50}"#;
    assert_eq!(nalab("simulate", cfg, dir.path()).status.code(), Some(0));
    let first = outputs(dir.path());
    let read = |names: &[String]| -> Vec<Vec<u8>> {
        names.iter().map(|n| std::fs::read(dir.path().join("out").join(n)).unwrap()).collect()
    };
    let bytes = read(&first);
    assert_eq!(nalab("simulate", cfg, dir.path()).status.code(), Some(0));
    assert_eq!(outputs(dir.path()), first);
    assert_eq!(read(&first), bytes);
    let hashed = first.iter().filter(|n| !n.starts_with("config")).all(|n| n.contains('_'));
    assert!(hashed && first.len() > 4);
}

#[test]
fn unresolved_grid_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = nalab("simulate", r#"{"epsilon": 0.04, "nx": 21, "ny": 21, "tEnd": 0.001}"#, dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn swapped_pair_fixture_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = include_str!("fixtures/swapped_pair.json");
    let o = nalab("verify", fixture, dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let name = outputs(dir.path()).into_iter().find(|n| n.starts_with("verify_")).unwrap();
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out").join(name)).unwrap()).unwrap();
    assert_eq!(v["passed"], false);
    assert_eq!(v["control_swapped"]["passed"], true);
}

#[test]
fn radial_interface_series() {
    let dir = tempfile::tempdir().unwrap();
    let o = nalab("interface", r#"{"coupling": 0, "tEnd": 0.1}"#, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary = outputs(dir.path()).into_iter().find(|n| n.starts_with("radial_summary_")).unwrap();
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out").join(summary)).unwrap()).unwrap();
    // R0 = 0.4 under curve shortening vanishes at R0^2 / 2
    assert!((v["extinction"].as_f64().unwrap() - 0.08).abs() < 1e-9);
}

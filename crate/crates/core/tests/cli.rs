use std::path::Path;
use std::process::{Command, Output};

use poprank::report::{ColumnKind, Table, INDEX_COLUMNS};

fn poprank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_poprank")).args(args).output().expect("binary runs")
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("cfg.json");
    std::fs::write(&path, r#"{"N": 2000, "T": 4, "window": 500, "master_seed": 7}"#).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn simulate_writes_report_and_echo() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let o = poprank(&["simulate", "--config", &cfg, "--eta", "10", "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t = Table::read_csv(&out.join("simulate.csv"), &INDEX_COLUMNS).unwrap();
    let names: Vec<&str> = t.rows.iter().map(|r| r[3].as_str()).collect();
    for want in ["ENG", "ENG_PC", "MIS", "POL", "POL_G", "HHI", "W_0", "W_1"] {
        assert!(names.contains(&want), "missing {want}");
    }
    assert!(t.rows.iter().all(|r| r[6] == "4" && r[7] == "500"));
    assert!(out.join("simulate.json").exists());
    let echo: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(echo["eta"], 10.0);
    assert_eq!(echo["N"], 2000);
}

#[test]
fn simulate_event_log() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let events = dir.path().join("events.csv");
    let o = poprank(&[
        "simulate",
        "--config",
        &cfg,
        "--runs",
        "2",
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--emit-events",
        events.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let runs = poprank::report::read_event_log(&events).unwrap();
    assert_eq!(runs.len(), 2);
    assert!(runs.iter().all(|r| r.len() == 2000));
}

#[test]
fn invalid_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"p_C": 0.9, "p_E": 0.9, "p_I": 0.9}"#).unwrap();
    let o = poprank(&["simulate", "--config", bad.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());

    std::fs::write(&bad, r#"{"no_such_key": 1}"#).unwrap();
    let o = poprank(&["simulate", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let o = poprank(&["simulate", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let o = poprank(&["simulate", "--eta", "-1", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn degenerate_fit_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = poprank(&[
        "fit-rank",
        "--eta",
        "0",
        "--runs",
        "3",
        "--agents",
        "200",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn analytic_with_given_zeta() {
    let dir = tempfile::tempdir().unwrap();
    let o = poprank(&[
        "analytic",
        "--eta",
        "50",
        "--zeta0",
        "20",
        "--zeta1",
        "200",
        "--step",
        "0.5",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cols: Vec<(&str, ColumnKind)> =
        ["y", "mu_h", "pi", "lcd", "lhd", "lcd_l", "lcd_r"].iter().map(|&c| (c, ColumnKind::Real)).collect();
    let t = Table::read_csv(&dir.path().join("analytic.csv"), &cols).unwrap();
    assert_eq!(t.rows.len(), 33);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("analytic_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["zeta1"], 200.0);
    assert!(summary["eng"].as_f64().unwrap() > 0.0);
}

#[test]
fn sweep_from_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"base": {"N": 500, "T": 2, "window": 200}, "eta_grid": [0, 10], "lambda_grid": [1],
            "modes": [{"Flat": {"p_A_const": 0.5}}], "figures": ["clicking_hist"]}"#,
    )
    .unwrap();
    let out = dir.path().join("sweep");
    let o = poprank(&["sweep", "--spec", spec.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["sweep.csv", "sweep.json", "histograms.csv", "sweep_spec.json", "config.json"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let echoed = poprank::sweep::SweepSpec::<f64>::from_json_file(&out.join("sweep_spec.json")).unwrap();
    assert_eq!(echoed.eta_grid, vec![0.0, 10.0]);
    assert_eq!(echoed.base.agents, 500);

    std::fs::write(&spec, r#"{"base": {}, "eta_grid": [0], "lambda_grid": [1], "modes": [{"Flat": {"p_A_const": 0.5}}], "extra": 1}"#).unwrap();
    let o = poprank(&["sweep", "--spec", spec.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_from_grid_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("sweep");
    let o = poprank(&[
        "sweep",
        "--config",
        &cfg,
        "--eta-grid",
        "0,100",
        "--lambda-grid",
        "0,1",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.contains("master_seed") && header.contains("cell_seed"));
    // 2 modes x 2 eta x 2 lambda cells.
    let pol_rows = text.lines().filter(|l| l.contains(",POL,")).count();
    assert_eq!(pol_rows, 8);
}

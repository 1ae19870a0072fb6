mod common;

use std::process::Command;

use molcom_harness::ResultTable;

fn molcom() -> Command {
    Command::new(env!("CARGO_BIN_EXE_molcom"))
}

#[test]
fn presets_print_three_systems() {
    let out = molcom().arg("presets").output().unwrap();
    assert!(out.status.success());
    let t = ResultTable::parse_csv(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(t.values("system"), vec![1.0, 2.0, 3.0]);
}

#[test]
fn exit_codes() {
    let bad = molcom().args(["analytic", "--system", "no-such-system"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let refused = molcom().args(["simulate", "--budget", "1000"]).output().unwrap();
    assert_eq!(refused.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&refused.stderr).contains("trials"));
    let bad_xi = molcom().args(["detect", "--thresholds", "5-1"]).output().unwrap();
    assert_eq!(bad_xi.status.code(), Some(2));
    let no_tables = molcom().arg("summarize").output().unwrap();
    assert_eq!(no_tables.status.code(), Some(2));
}

#[test]
fn shards_summarize_and_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::write_small_config(dir.path());
    let cfg = cfg.to_str().unwrap();
    let run = |offset: &str, trials: &str, name: &str| {
        let path = dir.path().join(name);
        let status = molcom()
            .args(["detect", "--simulate", "--system", cfg, "--seed", "4", "--thresholds", "1-4"])
            .args(["--trial-offset", offset, "--trials", trials, "--out"])
            .arg(&path)
            .status()
            .unwrap();
        assert!(status.success());
        path
    };
    let whole = run("0", "6", "whole.csv");
    let a = run("0", "2", "a.csv");
    let b = run("2", "4", "b.csv");
    let merged = dir.path().join("merged.csv");
    let status = molcom().arg("summarize").arg(&b).arg(&a).arg("--out").arg(&merged).status().unwrap();
    assert!(status.success());
    let read = |p| std::fs::read_to_string(p).unwrap();
    assert_eq!(read(&merged), read(&whole));

    let again = dir.path().join("again.csv");
    let status = molcom().arg("rerun").arg(&whole).arg("--out").arg(&again).status().unwrap();
    assert!(status.success());
    assert_eq!(read(&again), read(&whole));
}

#[test]
fn plot_script_is_written_beside_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("decay.csv");
    let status = molcom().args(["analytic", "--curve", "decay", "--plot", "--out"]).arg(&out).status().unwrap();
    assert!(status.success());
    assert!(dir.path().join("decay.plot.py").exists());
}

use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_handoff-sim"))
}

#[test]
fn run_writes_csvs_and_plotdata_reads_them() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let st = bin()
        .args(["run", "--case", "II", "--seed", "3", "--horizon-s", "20", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(st.success());
    for f in ["throughput.csv", "delay.csv", "handoffs.csv", "drops.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let o = bin().args(["plotdata", "--figure", "throughput", "--in"]).arg(&out).output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("t_sec,node,mn_count,throughput_mbps"));
    assert!(text.contains(",ESS,"));
}

#[test]
fn config_file_run() {
    let dir = tempfile::tempdir().unwrap();
    let preset = concat!(env!("CARGO_MANIFEST_DIR"), "/presets/case_III.conf");
    let st = bin()
        .args(["run", "--config", preset, "--horizon-s", "16", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(st.success());
}

#[test]
fn bad_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.conf");
    fs::write(&p, "[mac]\nqueue_capacity = lots\n").unwrap();
    let o = bin().args(["run", "--config"]).arg(&p).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
}

#[test]
fn missing_results_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin().args(["plotdata", "--figure", "delay", "--in"]).arg(dir.path().join("none")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_writes_one_dir_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let st = bin().args(["sweep", "--case", "I", "--seeds", "1..2", "--out"]).arg(dir.path()).status().unwrap();
    assert!(st.success());
    assert!(dir.path().join("seed_1/throughput.csv").exists());
    assert!(dir.path().join("seed_2/throughput.csv").exists());
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ridepool::experiment::read_kpis;

const SMALL: &str = "seed = 3\n[demand]\nrate_per_hour = 120\nbatch_minutes = 10\n";

fn ridepool(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ridepool")).args(args).current_dir(dir).output().unwrap()
}

fn small_config(dir: &Path) {
    fs::write(dir.join("small.toml"), SMALL).unwrap();
}

#[test]
fn run_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path());
    let out = ridepool(&["run", "--config", "small.toml", "--out", "out"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let root = dir.path().join("out");
    for file in [
        "requests.csv",
        "rides.csv",
        "kpis.json",
        "discount_hist.csv",
        "degree_hist.csv",
        "profitability_per_ride.csv",
        "savings_vs_profitability.csv",
        "acceptance_hist.csv",
        "heatmap_bins.csv",
    ] {
        assert!(root.join(file).is_file(), "missing {file}");
    }
    for strategy in ["personalised", "flat_0.15", "flat_0.2", "private"] {
        assert!(root.join(strategy).join("priced.csv").is_file());
        assert!(root.join(strategy).join("offer.csv").is_file());
    }
    let kpis = read_kpis(&root.join("kpis.json")).unwrap();
    assert_eq!(kpis.strategies.len(), 4);
    assert!(kpis.strategies.iter().all(|s| s.travellers == 20));
}

#[test]
fn strategy_flag_replaces_configured_list() {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path());
    let out = ridepool(
        &["match", "--config", "small.toml", "--strategy", "private", "--strategy", "flat:0.3", "--out", "o"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut dirs: Vec<String> = fs::read_dir(dir.path().join("o"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    dirs.sort();
    assert_eq!(dirs, ["flat_0.3", "private"]);
}

#[test]
fn graph_and_price_write_their_stage_files() {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path());
    assert!(ridepool(&["graph", "--config", "small.toml", "--out", "g"], dir.path()).status.success());
    assert!(dir.path().join("g/rides.csv").is_file());
    assert!(ridepool(&["price", "--config", "small.toml", "--out", "p", "--strategy", "personalised"], dir.path())
        .status
        .success());
    assert!(dir.path().join("p/personalised/priced.csv").is_file());
    assert!(!dir.path().join("p/personalised/offer.csv").exists());
}

#[test]
fn report_prints_kpi_table() {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path());
    let out = ridepool(&["report", "--config", "small.toml", "--out", "r"], dir.path());
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.starts_with("strategy"));
    assert_eq!(table.lines().count(), 5);
    assert!(table.contains("flat:0.15"));
}

#[test]
fn requests_file_is_used_as_given() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("req.csv"),
        "id,origin_x,origin_y,dest_x,dest_y,request_time_s\n1,0,0,3,0,0\n2,0.1,0,3.1,0,30\n",
    )
    .unwrap();
    let out = ridepool(&["graph", "--requests", "req.csv", "--out", "g"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rides = fs::read_to_string(dir.path().join("g/rides.csv")).unwrap();
    assert_eq!(rides.lines().count(), 4, "header, two privates and the shared pair:\n{rides}");
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[pricing]\nfare_per_kilometre = 1.5\n").unwrap();
    let out = ridepool(&["graph", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let out = ridepool(&["graph", "--strategy", "flat:1.5"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = ridepool(&["graph", "--threads", "0", "--strategy", "discount"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn data_errors_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("dup.csv"),
        "id,origin_x,origin_y,dest_x,dest_y,request_time_s\n1,0,0,3,0,0\n1,1,1,4,4,10\n",
    )
    .unwrap();
    let out = ridepool(&["graph", "--requests", "dup.csv"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("duplicate id 1"));

    fs::write(dir.path().join("cols.csv"), "id,x\n1,2\n").unwrap();
    let out = ridepool(&["graph", "--requests", "cols.csv"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

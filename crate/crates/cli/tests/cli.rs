use serde_json::Value;
use std::path::PathBuf;
use std::process::{Command, Output};

const VOL_41: f64 = 2.029883212819307;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn famed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_famed")).args(args).env_remove("FAMED_TOL").output().expect("binary runs")
}

fn json_out(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn f41() -> String {
    fixture("4_1.json").display().to_string()
}

#[test]
fn check_exit_codes() {
    let o = famed(&["check", &f41()]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_out(&o);
    assert_eq!(v["certificate"]["famed_lm"], Value::Bool(true));
    assert_eq!(famed(&["check", fixture("bad_meridian.json").to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(famed(&["check", fixture("bad_longitude.json").to_str().unwrap()]).status.code(), Some(3));
    let bad = famed(&["check", fixture("malformed.json").to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("MalformedInput"));
    assert_eq!(famed(&["check", "/nonexistent/file.json"]).status.code(), Some(1));
}

#[test]
fn check_verify_and_determinism() {
    let a = famed(&["check", &f41(), "--verify"]);
    let b = famed(&["check", &f41(), "--verify"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json_out(&a)["verified"], Value::Bool(true));
}

#[test]
fn batch_mode() {
    let dir = fixture("");
    let o = famed(&["check", "--batch", dir.to_str().unwrap()]);
    let lines: Vec<Value> = String::from_utf8(o.stdout).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(o.status.code(), Some(1));
    let names: Vec<String> = lines.iter().map(|v| v["input"].as_str().unwrap().to_string()).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
}

#[test]
fn solve_complete_structure() {
    let o = famed(&["solve", &f41(), "--xi", "0", "--verify"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_out(&o);
    assert!((v["geometry"]["volume"].as_f64().unwrap() - VOL_41).abs() < 1e-9);
    assert!((v["geometry"]["tau_modulus"].as_f64().unwrap() - 3.0).abs() < 1e-9);
    assert_eq!(v["verified"], Value::Bool(true));
}

#[test]
fn solve_guard_and_meridian() {
    let o = famed(&["solve", &f41(), "--xi", "5"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ContinuationBreakdown"));
    let o = famed(&["solve", &f41(), "--curve", "m", "--wm", "0.1"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_out(&o);
    let wm = &v["geometry"]["meridian_holonomy"];
    assert!((wm[0].as_f64().unwrap() - 0.1).abs() < 1e-10 && wm[1].as_f64().unwrap().abs() < 1e-10);
    assert!(v["geometry"]["volume"].as_f64().unwrap() < VOL_41);
    assert_eq!(famed(&["solve", &f41(), "--xi", "zz"]).status.code(), Some(1));
}

#[test]
fn tolerance_env_echoed() {
    let o = Command::new(env!("CARGO_BIN_EXE_famed")).args(["solve", &f41()]).env("FAMED_TOL", "1e-7").output().unwrap();
    let v = json_out(&o);
    assert_eq!(v["tolerances"]["verify"].as_f64(), Some(1e-7));
    assert_eq!(v["tolerances"]["source"], "FAMED_TOL");
    let o = Command::new(env!("CARGO_BIN_EXE_famed")).args(["solve", &f41()]).env("FAMED_TOL", "x").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn asymptotics_z_defaults() {
    let tsv = std::env::temp_dir().join(format!("famed_z_{}.tsv", std::process::id()));
    let o = famed(&["asymptotics", &f41(), "--mode", "z", "--tsv", tsv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_out(&o);
    let slope = v["asymptotics"]["fit"]["slope"].as_f64().unwrap();
    assert!((slope + VOL_41).abs() < 0.05 * VOL_41, "{slope}");
    let table = std::fs::read_to_string(&tsv).unwrap();
    assert_eq!(table.lines().count(), 6);
    assert!(table.starts_with("hbar\t"));
    let _ = std::fs::remove_file(tsv);
}

#[test]
fn asymptotics_j_at_zero() {
    let o = famed(&["asymptotics", &f41(), "--mode", "j", "--w", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let slope = json_out(&o)["asymptotics"]["fit"]["slope"].as_f64().unwrap();
    assert!((slope + VOL_41).abs() < 0.05 * VOL_41, "{slope}");
}

#[test]
fn asymptotics_needs_samples() {
    let o = famed(&["asymptotics", &f41(), "--hbar-list="]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("InsufficientSamples"));
    let o = famed(&["asymptotics", &f41(), "--hbar-list", "1/8,1/12,1/16"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn report_round_trip() {
    let a = famed(&["report", &f41(), "--no-asymptotics", "--verify"]);
    let b = famed(&["report", &f41(), "--no-asymptotics", "--verify"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v = json_out(&a);
    assert_eq!(v["verified"], Value::Bool(true));
    let path = std::env::temp_dir().join(format!("famed_report_{}.json", std::process::id()));
    std::fs::write(&path, &a.stdout).unwrap();
    let c = famed(&["report", path.to_str().unwrap(), "--existing"]);
    assert_eq!(c.status.code(), Some(0));
    assert_eq!(json_out(&c)["verified"], Value::Bool(true));
    let mut tampered = v.clone();
    tampered["geometry"]["volume"] = Value::from(2.0);
    std::fs::write(&path, tampered.to_string()).unwrap();
    let d = famed(&["report", path.to_str().unwrap(), "--existing"]);
    assert_eq!(d.status.code(), Some(4));
    let _ = std::fs::remove_file(path);
}

#[test]
fn report_status_codes() {
    let o = famed(&["report", fixture("bad_longitude.json").to_str().unwrap(), "--no-asymptotics"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(json_out(&o)["geometry"].is_null());
    let o = famed(&["report", fixture("bad_meridian.json").to_str().unwrap(), "--no-asymptotics"]);
    assert_eq!(o.status.code(), Some(2));
}

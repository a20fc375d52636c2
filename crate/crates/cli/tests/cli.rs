use std::fs;
use std::path::Path;
use std::process::Command;

fn wmsn() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wmsn"))
}

fn run_short(out: &Path) {
    let status = wmsn()
        .args(["run", "-V", "100", "--slots", "60", "--seed", "2", "--out"])
        .arg(out)
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    run_short(dir.path());
    for name in ["trace.csv", "summary.json", "constants.json"] {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 61);
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["slots"], 60);
    assert_eq!(summary["violation_count"], 0);
}

#[test]
fn same_inputs_same_trace() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_short(a.path());
    run_short(b.path());
    let read = |d: &Path| fs::read(d.join("trace.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn verify_accepts_clean_and_rejects_corrupt_trace() {
    let dir = tempfile::tempdir().unwrap();
    run_short(dir.path());
    let trace = dir.path().join("trace.csv");
    let ok = wmsn().arg("verify").arg("--trace").arg(&trace).output().unwrap();
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stdout));

    // Push the first data-queue column of one row far past its bound.
    let text = fs::read_to_string(&trace).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let header: Vec<&str> = lines[0].split(',').collect();
    let col = header.iter().position(|h| h.starts_with("Q[")).unwrap();
    let mut row: Vec<String> = lines[30].split(',').map(String::from).collect();
    row[col] = "1e9".into();
    lines[30] = row.join(",");
    fs::write(&trace, lines.join("\n") + "\n").unwrap();
    let bad = wmsn().arg("verify").arg("--trace").arg(&trace).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("slot 29"));
}

#[test]
fn sweep_writes_tradeoff() {
    let dir = tempfile::tempdir().unwrap();
    let status = wmsn()
        .args(["sweep", "-V", "50,100", "--seeds", "1,2", "--slots", "30", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let table = fs::read_to_string(dir.path().join("tradeoff.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "V,objective,backlog,runs");
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("50,") && rows[1].ends_with(",2"));
    assert!(dir.path().join("summaries.json").is_file());
}

#[test]
fn derive_constants_prints_json() {
    let out = wmsn().args(["derive-constants", "-V", "100"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["rho_bound"].as_f64().unwrap() - 280.0).abs() < 1e-4);
    assert!((v["lambda_bound"].as_f64().unwrap() - 5600.0).abs() < 1e-3);
}

#[test]
fn bad_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "R_max = 1.0\n").unwrap();
    let out = wmsn().args(["run", "--slots", "5", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

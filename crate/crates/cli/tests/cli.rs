//! End-to-end checks of the binary: exit codes, JSON shape, and the
//! determinism criterion (repeated `verify --level quick` runs must produce
//! byte-identical JSON).

use std::process::Command;

fn cnc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cnc"))
}

#[test]
fn r3_example() {
    let out = cnc().args(["r3", "--q", "7", "--n", "13"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["r3"], 3);
    assert_eq!(v["schema"], 1);
}

#[test]
fn invalid_form_arity_exits_1() {
    let out = cnc().args(["rho", "--form", "1,0,0", "--s", "10"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_flag_rejected() {
    let out = cnc().args(["r3", "--q", "7", "--n", "5", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn budget_exit_code_2() {
    // grid oracle beyond its scale
    let out = cnc()
        .args(["delta", "--n", "200000000", "--weights", "unit"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn field_and_char_json() {
    let out = cnc().args(["field", "--builtin", "q13"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["conductor"], 13);
    assert_eq!(v["disc"], 169);

    let out = cnc().args(["char", "--q", "7"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["g1"], serde_json::json!([1, 6]));
}

#[test]
fn count_writes_pinned_csv_columns() {
    let dir = std::env::temp_dir().join("cnc_csv_test");
    std::fs::create_dir_all(&dir).unwrap();
    let csv_path = dir.join("out.csv");
    let out = cnc()
        .args([
            "count", "--q", "7", "--form", "1,0,0,2", "--region", "disc:1.0", "--xi", "10,20",
            "--pmax", "100", "--kq-cap", "3", "--csv",
        ])
        .arg(&csv_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("xi,points,Q,main_term,ratio,seconds\r\n"));
    assert_eq!(csv.lines().count(), 3);
}

/// Criterion 11: identical config + seed produce byte-identical JSON.
#[test]
fn verify_quick_json_deterministic() {
    let dir = std::env::temp_dir().join("cnc_determinism_test");
    std::fs::create_dir_all(&dir).unwrap();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let path = dir.join(format!("verify_{run}.json"));
        let out = cnc()
            .args(["verify", "--level", "quick", "--seed", "7", "--json"])
            .arg(&path)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "verify JSON differs between runs");
    println!("criterion 11: PASS — byte-identical verify JSON across runs");
}

#[test]
fn verify_failure_would_exit_3() {
    // sanity on the exit-code contract: a passing quick run exits 0
    let out = cnc().args(["verify", "--level", "quick", "--seed", "3"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

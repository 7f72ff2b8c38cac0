//! Command-line behavior: flag handling, exit codes, determinism, and the
//! compare/score output contracts.

mod common;

use common::{assert_ok, bin, fixture, run_cli};
use std::fs;

#[test]
fn validate_accepts_the_demo_topology() {
    let out = run_cli(&["validate", "--topology", fixture("demo.topo").to_str().unwrap()]);
    assert_ok(&out, "validate");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("3 domains"), "{stdout}");
}

#[test]
fn validate_rejects_duplicate_hosts_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dup.topo");
    fs::write(&path, "domain d1\nhost h1 domain=d1\nhost h1 domain=d1\n").unwrap();
    let out = run_cli(&["validate", "--topology", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("h1"), "{stderr}");
}

#[test]
fn missing_required_flag_prints_usage_and_exits_1() {
    let out = run_cli(&["run", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.to_lowercase().contains("usage"), "{stderr}");
}

#[test]
fn unknown_flag_rejected_with_exit_1() {
    let out = run_cli(&["validate", "--topology", "x", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_input_file_is_a_runtime_error() {
    let out = run_cli(&["validate", "--topology", "/nonexistent/never.topo"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_exits_0() {
    let out = run_cli(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
}

fn demo_run(dir: &std::path::Path, name: &str, extra: &[&str]) -> std::path::PathBuf {
    let out_path = dir.join(name);
    let mut args = vec![
        "run".to_string(),
        "--topology".into(),
        fixture("demo.topo").to_str().unwrap().into(),
        "--trace".into(),
        fixture("demo.trace").to_str().unwrap().into(),
        "--rules".into(),
        fixture("demo.rules").to_str().unwrap().into(),
        "--seed".into(),
        "42".into(),
        "--out".into(),
        out_path.to_str().unwrap().into(),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    let out = bin().args(&args).output().unwrap();
    assert_ok(&out, "run");
    out_path
}

#[test]
fn identical_invocations_produce_byte_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let a = demo_run(dir.path(), "a.json", &[]);
    let b = demo_run(dir.path(), "b.json", &[]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn compare_is_symmetric_and_diffs_are_printed() {
    let dir = tempfile::tempdir().unwrap();
    let clean = demo_run(dir.path(), "clean.json", &[]);
    let faulted = demo_run(dir.path(), "faulted.json", &["--fault", "dca:lan2@0"]);

    let same = run_cli(&["compare", clean.to_str().unwrap(), clean.to_str().unwrap()]);
    assert_eq!(same.status.code(), Some(0));

    let ab = run_cli(&["compare", clean.to_str().unwrap(), faulted.to_str().unwrap()]);
    let ba = run_cli(&["compare", faulted.to_str().unwrap(), clean.to_str().unwrap()]);
    assert_eq!(ab.status.code(), Some(1));
    assert_eq!(ab.status.code(), ba.status.code());
    let stdout = String::from_utf8_lossy(&ab.stdout);
    assert!(stdout.contains("only in"), "{stdout}");
}

#[test]
fn gen_trace_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let t1 = dir.path().join("t1.evt");
    let t2 = dir.path().join("t2.evt");
    let t3 = dir.path().join("t3.evt");
    for (path, seed) in [(&t1, "5"), (&t2, "5"), (&t3, "6")] {
        let out = run_cli(&[
            "gen-trace",
            "--topology",
            fixture("demo.topo").to_str().unwrap(),
            "--target",
            "ba-web",
            "--rate",
            "3",
            "--duration",
            "4",
            "--seed",
            seed,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_ok(&out, "gen-trace");
    }
    assert_eq!(fs::read(&t1).unwrap(), fs::read(&t2).unwrap());
    assert_ne!(fs::read(&t1).unwrap(), fs::read(&t3).unwrap());
    // 3/s for 4s
    let body = fs::read_to_string(&t1).unwrap();
    assert_eq!(body.lines().count(), 13); // header + 12 events
}

#[test]
fn score_prints_the_five_row_table() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("kdd.json");
    let out = run_cli(&[
        "run",
        "--topology",
        fixture("kdd.topo").to_str().unwrap(),
        "--trace",
        fixture("sample.kdd").to_str().unwrap(),
        "--rules",
        fixture("kdd.rules").to_str().unwrap(),
        "--seed",
        "1",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_ok(&out, "kdd run");
    let out = run_cli(&["score", "--report", report.to_str().unwrap()]);
    assert_ok(&out, "score");
    let stdout = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 6, "{stdout}");
    assert!(lines[0].contains("Detection Rate"));
    assert!(lines[0].contains("False Positive Rate"));
    for (row, label) in [
        (1, "Denial of Service (DoS)"),
        (2, "Remote to User (R2U)"),
        (3, "User to Root (U2R)"),
        (4, "Probe"),
        (5, "Normal"),
    ] {
        assert!(lines[row].starts_with(label), "row {row}: {}", lines[row]);
    }
    // the exact-match fixture classifies the sample perfectly
    assert!(lines[1].contains("100.00%"));
    assert!(lines[5].contains("0.00%"));
}

#[test]
fn score_on_unlabeled_report_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let clean = demo_run(dir.path(), "clean.json", &[]);
    let out = run_cli(&["score", "--report", clean.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_rejects_trace_referencing_unknown_agent() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("bad.evt");
    fs::write(&trace, "time,host,agent,category\n0.0,web,ghost,icmp.request\n").unwrap();
    let out = run_cli(&[
        "run",
        "--topology",
        fixture("demo.topo").to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
        "--rules",
        fixture("demo.rules").to_str().unwrap(),
        "--seed",
        "1",
        "--out",
        dir.path().join("r.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ghost"));
}

#[test]
fn bad_fault_spec_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "run",
            "--topology",
            fixture("demo.topo").to_str().unwrap(),
            "--trace",
            fixture("demo.trace").to_str().unwrap(),
            "--rules",
            fixture("demo.rules").to_str().unwrap(),
            "--seed",
            "1",
            "--fault",
            "dca:lan2",
            "--out",
            dir.path().join("r.json").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

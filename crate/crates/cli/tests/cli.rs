use std::path::PathBuf;
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn conrepair(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conrepair"))
        .args(args)
        .current_dir(root())
        .output()
        .unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn help_exits_zero() {
    let out = conrepair(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("--allow-wait-notify"));
}

#[test]
fn paper1_mixed_report() {
    let out = conrepair(&["fixtures/paper1.cw", "--mode", "mixed", "--report", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["status"], "fixed");
    assert_eq!(r["iterations"], 1);
    assert!(r["diff"].as_str().unwrap().contains("+  A: x := 1;"));
}

#[test]
fn sequential_bug_is_an_input_error() {
    let out = conrepair(&["fixtures/fig4-right.cw", "--mode", "mixed"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("input contract"));
    let out = conrepair(&["fixtures/fig4-right.cw", "--allow-wait-notify"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn bad_input_exits_two() {
    assert_eq!(conrepair(&["no/such/file.cw"]).status.code(), Some(2));
    assert_eq!(conrepair(&["--mode", "sideways", "fixtures/paper1.cw"]).status.code(), Some(2));
}

#[test]
fn budget_exhaustion_exits_one() {
    let out = conrepair(&["fixtures/paper1.cw", "--max-iter", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn reports_are_deterministic() {
    let args = ["fixtures/ex4.cw", "--report", "json", "--seed", "3"];
    let mut a = json(&conrepair(&args));
    let mut b = json(&conrepair(&args));
    a["timings"] = serde_json::Value::Null;
    b["timings"] = serde_json::Value::Null;
    assert_eq!(a, b);
}

#[test]
fn emits_fixed_program_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let fixed = dir.path().join("fixed.cw");
    let traces = dir.path().join("traces.json");
    let out = conrepair(&[
        "fixtures/paper1.cw",
        "--emit-fixed",
        fixed.to_str().unwrap(),
        "--dump-traces",
        traces.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let p = conrepair::lang::parse(&std::fs::read_to_string(&fixed).unwrap()).unwrap();
    assert_eq!(p.threads.len(), 3);
    let dumped = conrepair::explore::trace::parse_dump(&std::fs::read_to_string(traces).unwrap()).unwrap();
    assert_eq!(dumped.len(), 11);
    assert!(dumped[..10].iter().all(|t| !t.bad && t.complete));
    assert!(dumped[10].bad);
    // The fixed program is already correct.
    let again = conrepair(&[fixed.to_str().unwrap(), "--report", "json"]);
    assert_eq!(json(&again)["iterations"], 0);
}

#[test]
fn empty_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let out = conrepair(&["--corpus", dir.path().to_str().unwrap(), "--report", "json"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["rows"].as_array().unwrap().len(), 0);
}

#[test]
fn corpus_skips_programs_without_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(root().join("fixtures/ex1.cw"), dir.path().join("ex1.cw")).unwrap();
    std::fs::copy(root().join("fixtures/paper1.cw"), dir.path().join("paper1.cw")).unwrap();
    std::fs::copy(root().join("fixtures/paper1.expect.toml"), dir.path().join("paper1.expect.toml")).unwrap();
    let out = conrepair(&["--corpus", dir.path().to_str().unwrap(), "--mode", "mixed", "--report", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let s = json(&out);
    assert_eq!(s["skipped"], serde_json::json!(["ex1"]));
    assert_eq!(s["rows"][0]["fixture"], "paper1");
    assert_eq!(s["rows"][0]["iterations"], 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}

#[test]
fn bundled_corpus_matches_expectations() {
    let out = conrepair(&["--corpus", "fixtures", "--report", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let s = json(&out);
    let rows = s["rows"].as_array().unwrap();
    let unsound: Vec<_> = rows.iter().filter(|r| r["expect_unsound"] == true).collect();
    assert!(!unsound.is_empty());
    assert!(unsound.iter().all(|r| r["fixture"] == "ex-regr"));
}

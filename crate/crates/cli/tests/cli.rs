use std::path::PathBuf;
use std::process::{Command, Output};

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn reopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reopt"))
        .args(args)
        .current_dir(scenarios())
        .env_remove("RUST_LOG")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn solve_prints_baseline() {
    let o = reopt(&["solve", "toy.json"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("objective: 162.0"), "{}", stdout(&o));
}

#[test]
fn replay_both_variants() {
    let o = reopt(&["replay", "toy.json", "toy_catalog.json", "--planner", "mock", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let objs: Vec<f64> = v["rows"].as_array().unwrap().iter().map(|r| r["objective"].as_f64().unwrap()).collect();
    assert_eq!(objs, vec![174.0, 184.0, 192.0]);
    assert_eq!(v["aggregates"][0]["final_success"], 3);

    let o = reopt(&["replay", "toy.json", "toy_catalog.json", "--variant", "patch-no-selector", "--format", "csv"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.contains(",succeeded,1,scratch,")), "{text}");
}

#[test]
fn replay_writes_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = reopt(&["replay", "toy", "toy_catalog", "--out", out]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("3/3 (100%)"));
    assert!(dir.path().join("report.json").exists());
    assert!(dir.path().join("report.csv").exists());
}

#[test]
fn prompt_against_a_stored_session() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().to_str().unwrap();
    let o = reopt(&["prompt", "toy.json", "Plant 2 to Customer 2 can take at most 5 units", "--store", store]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("objective: 162.0 -> 184.0"), "{text}");
    let err = String::from_utf8_lossy(&o.stderr).into_owned();
    let id = err.lines().find_map(|l| l.strip_prefix("session: ")).unwrap().trim().to_string();

    let o = reopt(&["prompt", &id, "Customer 3 needs 10 extra units", "--store", store, "--strategy", "scratch"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("version: 1 -> 2"), "{text}");
    assert!(text.contains("objective: 184.0 -> 214.0"), "{text}");
    assert!(text.contains("parameters.demand.C3: 18.0 -> 28.0"), "{text}");
    assert!(text.contains("strategy: scratch"), "{text}");
}

#[test]
fn failed_step_exits_nonzero() {
    let o = reopt(&["prompt", "toy.json", "please rearrange everything", "--budget", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FailedBudgetExhausted"));
}

#[test]
fn exit_codes() {
    assert_eq!(reopt(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(reopt(&["solve"]).status.code(), Some(2));
    assert_eq!(reopt(&["prompt", "toy", "x", "--strategy", "telepathy"]).status.code(), Some(1));
    let o = reopt(&["solve", "missing.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.json"));
}

#[test]
fn malformed_catalog_lists_entries() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, r#"[{"prompt_id": "A"}, {"prompt_id": "B", "delta": "ok"}, {"delta": 5}]"#).unwrap();
    let o = reopt(&["replay", "toy.json", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("entry 0 (A)") && err.contains("entry 2 (?)"), "{err}");
}

#[test]
fn export_lp_round_trips() {
    let o = reopt(&["export-lp", "toy.json"]);
    assert!(o.status.success());
    let inst = reopt_core::model::lp::parse_lp(&stdout(&o)).unwrap();
    let r = reopt_core::solver::solve_mip(&inst, &Default::default(), None).unwrap();
    assert!((r.objective.unwrap() - 162.0).abs() < 1e-9);
}

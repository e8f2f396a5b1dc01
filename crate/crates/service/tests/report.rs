use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reopt_core::agents::{CaseScore, FailureMode, StepOutcome, StepStatus};
use reopt_core::scenario::{load_catalog, toy_catalog, Scenario};
use reopt_service::{compute_report, gap_pct, replay, CaseResult, ReplayOptions, Variant};

fn outcome(ok: bool, objective: Option<f64>) -> StepOutcome {
    let solution = objective.map(|o| {
        serde_json::from_value(serde_json::json!({
            "status": "optimal", "objective": o, "best_bound": o, "gap": 0.0, "wall_time": 0.0, "node_count": 1
        }))
        .unwrap()
    });
    StepOutcome {
        status: if ok { StepStatus::Succeeded } else { StepStatus::FailedBudgetExhausted },
        applied_action_set: None,
        new_state_version: 0,
        solution,
        attempts_used: 1,
        candidate_log: vec![],
        failures: vec![],
        planner_output: None,
        strategy: None,
        diff: None,
    }
}

fn case(id: &str, ok: bool, obj: Option<f64>, reference: Option<f64>, score: Option<CaseScore>) -> CaseResult {
    CaseResult {
        instance: "t".into(),
        prompt_id: id.into(),
        variant: "patch".into(),
        outcome: outcome(ok, obj),
        score,
        reference_objective: reference,
        wall_time: 0.0,
        domain_metrics: Default::default(),
    }
}

fn full() -> CaseScore {
    CaseScore { update_correct: true, prompt_satisfied: true, first_attempt_success: true, final_success: true, failure_modes: BTreeSet::new() }
}

#[test]
fn gap_conventions() {
    let r = compute_report(&[case("a", true, Some(50.0), Some(50.0), Some(full()))]);
    assert_eq!(r.rows[0].delta_obj, Some(0.0));
    assert_eq!(r.rows[0].gap_pct, Some(0.0));
    assert_eq!(gap_pct(110.0, 100.0), 10.0);
    assert_eq!(gap_pct(-90.0, -100.0), 10.0);
    // Denominator floored at 1 near a zero reference.
    assert_eq!(gap_pct(0.5, 0.0), 50.0);
    assert!((gap_pct(0.6, 0.2) - 40.0).abs() < 1e-9);
}

#[test]
fn injected_no_incumbent_row() {
    let mut bad = CaseScore::default();
    bad.failure_modes.insert(FailureMode::NoIncumbent);
    let rows = [
        case("a", true, Some(1.0), Some(1.0), Some(full())),
        case("b", false, None, Some(2.0), Some(bad)),
        case("c", true, Some(3.0), None, None),
    ];
    let r = compute_report(&rows);
    let a = &r.aggregates[0];
    assert_eq!(a.scored, 2);
    assert_eq!(a.final_success, 1);
    assert_eq!(a.failure_counts.get(&FailureMode::NoIncumbent), Some(&1));
    assert_eq!(a.failure_counts.len(), 1);
    assert_eq!(r.missing_reference, 1);
    assert!(r.rows[2].missing_reference);
    assert_eq!(r.rows[1].objective, None);
    assert!(r.is_nested());
    assert!(r.to_text().contains("excluded"));
    let csv = r.to_csv();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().nth(2).unwrap().contains("no_incumbent"));
}

#[test]
fn random_grids_stay_nested() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let n = rng.random_range(0..12);
        let rows: Vec<CaseResult> = (0..n)
            .map(|i| {
                // Scores come from nested flags, as score_case produces them.
                let level = rng.random_range(0..5);
                let s = CaseScore {
                    update_correct: level >= 1,
                    prompt_satisfied: level >= 2,
                    final_success: level >= 3,
                    first_attempt_success: level >= 4,
                    failure_modes: BTreeSet::new(),
                };
                let mut c = case(&format!("p{i}"), level >= 3, Some(1.0), Some(1.0), Some(s));
                c.variant = if rng.random_bool(0.5) { "patch" } else { "patch-no-selector" }.into();
                c
            })
            .collect();
        let r = compute_report(&rows);
        assert!(r.is_nested());
        assert_eq!(r.aggregates.iter().map(|a| a.scored).sum::<usize>(), n);
    }
}

#[test]
fn toy_catalog_replay() {
    let sc = Scenario::toy();
    let opts = ReplayOptions { variants: vec![Variant::Patch, Variant::PatchNoSelector], ..Default::default() };
    let r = compute_report(&replay(&sc, &toy_catalog(), &opts).unwrap());
    assert_eq!(r.rows.len(), 6);
    for a in &r.aggregates {
        assert_eq!((a.scored, a.update_correct, a.prompt_satisfied, a.first_attempt_success, a.final_success), (3, 3, 3, 3, 3));
        assert!(a.failure_counts.is_empty());
    }
    let objs: Vec<f64> = r.rows.iter().filter(|x| x.variant == "patch").map(|x| x.objective.unwrap()).collect();
    assert_eq!(objs, vec![174.0, 184.0, 192.0]);
    assert!(r.rows.iter().filter(|x| x.variant == "patch-no-selector").all(|x| x.strategy.as_deref() == Some("scratch")));
    let p3 = r.rows.iter().find(|x| x.prompt_id == "P3").unwrap();
    assert_eq!(p3.domain_metrics["served_share"], 1.0);
    assert_eq!(p3.domain_metrics["c3_inflow"], 28.0);
    let back: reopt_service::ReplayReport = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(back, r);
}

#[test]
fn malformed_catalog_lists_entries() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.json");
    std::fs::write(&p, r#"[{"prompt_id":"A"},{"prompt_id":"B","delta":"x"},{"prompt_id":"C","delta":3}]"#).unwrap();
    let err = load_catalog(p.to_str().unwrap()).unwrap_err().to_string();
    assert!(err.contains("entry 0 (A)") && err.contains("entry 2 (C)") && !err.contains("(B)"), "{err}");
}

mod support;

use reopt_core::agents::{
    classify_failure, run_closed_loop, validate_and_solve, FailureMode, FailureStage, LoopContext,
    StepStatus, StrategyChoice,
};
use reopt_core::llm::{MockChat, MockScript};
use reopt_core::patch::{normalize_action_set, parse_planner_output};
use reopt_core::toolbox::Strategy;
use serde_json::json;
use support::loop_cases::*;

#[test]
fn injected_failure_is_repaired() {
    let toy = toy();
    let run = repaired_on_second_attempt(&toy);
    let o = &run.result.outcome;
    assert_eq!(o.status, StepStatus::Succeeded);
    assert_eq!(o.attempts_used, 2);
    assert_eq!(run.calls, 2);
    assert_eq!(o.failures.len(), 1);
    assert_eq!(o.failures[0].failure_stage, FailureStage::PlanParse);
    assert!(!run.score.first_attempt_success);
    assert!(run.score.final_success);
    assert!((run.result.solution.as_ref().unwrap().objective.unwrap() - 174.0).abs() < 1e-6);
}

#[test]
fn exhausted_budget_leaves_state_alone() {
    let toy = toy();
    for budget in [1, 2, 3] {
        let run = always_failing(&toy, budget);
        let o = &run.result.outcome;
        assert_eq!(o.status, StepStatus::FailedBudgetExhausted);
        assert_eq!(run.calls, budget);
        assert_eq!(o.attempts_used, budget);
        assert_eq!(o.new_state_version, toy.state.version());
        assert_eq!(run.result.state, toy.state);
        assert_eq!(run.result.solution.as_ref(), Some(&toy.prior));
        // The history handed to attempt n lists the n - 1 earlier failures.
        for (n, f) in o.failures.iter().enumerate() {
            assert_eq!(f.attempt_history.len(), n);
        }
    }
}

#[test]
fn repair_prelude_reaches_the_planner() {
    let toy = toy();
    let item = toy.item("P1");
    let mock = MockChat::new(MockScript::default().entry(".", [GARBAGE])).unwrap();
    let ctx = LoopContext::new(&mock);
    let _ = run_closed_loop(&item.delta, &toy.state, Some(&toy.prior), &[], &ctx);
    let seen = mock.requests();
    assert_eq!(seen.len(), 2);
    assert!(!seen[0].user.contains("[plan_parse]"));
    assert!(seen[1].user.contains("plan_parse"));
}

#[test]
fn each_failure_mode_is_reproduced() {
    let toy = toy();
    let cases = failure_mode_cases(&toy);
    for c in &cases {
        assert!(
            c.run.score.failure_modes.contains(&c.expect),
            "{}: {:?}",
            c.label,
            c.run.score.failure_modes
        );
        assert!(c.run.score.is_nested(), "{}", c.label);
    }
    assert_eq!(modes_seen(&cases).len(), FailureMode::ALL.len());
}

#[test]
fn mode_sets_match_their_definitions() {
    let toy = toy();
    let cases = failure_mode_cases(&toy);
    let get = |l: &str| &cases.iter().find(|c| c.label == l).unwrap().run;

    let garbage = get("missing output");
    assert_eq!(
        garbage.score.failure_modes,
        [FailureMode::InvalidPatch, FailureMode::MissingOutput].into()
    );
    let bad = get("bad update");
    assert_eq!(bad.result.outcome.status, StepStatus::Succeeded);
    assert_eq!(bad.score.failure_modes, [FailureMode::BadUpdate].into());
    assert!(!bad.score.update_correct);

    let strict = get("prompt violation");
    assert!(strict.score.update_correct);
    assert!(!strict.score.prompt_satisfied);
    assert_eq!(strict.score.failure_modes, [FailureMode::PromptViolation].into());

    let infeasible = get("no incumbent");
    assert!(!infeasible.score.failure_modes.contains(&FailureMode::InvalidPatch));
    assert!(infeasible.result.outcome.failures.iter().all(|f| f.failure_stage == FailureStage::Solve));
}

#[test]
fn golden_outcome_has_no_modes() {
    let toy = toy();
    let item = toy.item("P2");
    let run = run_scripted(
        &toy,
        &item.delta,
        vec![planner_doc(json!([{"op": "UPDATE_BOUND", "target": "flows", "scope": {"index": ["P2", "C2"]}, "update": {"bound_type": "upper", "value": 5.0}}]))],
        &item.prompt_checks,
        &item.reference().unwrap(),
        2,
    );
    assert!(classify_failure(&run.result.outcome, item.reference().as_ref(), &toy.state).is_empty());
}

#[test]
fn best_candidate_is_the_cheapest_passing_one() {
    let toy = toy();
    let doc = json!({
        "edit_summary": "variants",
        "candidate_action_sets": [
            {"actions": [{"op": "UPDATE_BOUND", "target": "flows", "scope": {"index": ["P2", "C2"]}, "update": {"bound_type": "upper", "value": 2.0}}]},
            {"actions": [{"op": "UPDATE_BOUND", "target": "flows", "scope": {"index": ["P2", "C2"]}, "update": {"bound_type": "upper", "value": 5.0}}]},
            {"actions": [{"op": "UPDATE_BOUND", "target": "flows", "scope": {"index": ["P2", "C2"]}, "update": {"bound_type": "upper", "value": 5.0}}]},
            {"actions": [{"op": "UPDATE_BOUND", "target": "flows", "scope": {"index": ["P2", "C2"]}, "update": {"bound_type": "upper", "value": 9.0}}]}
        ]
    });
    let out = parse_planner_output(&doc.to_string()).unwrap();
    let sets: Vec<_> = out
        .candidate_action_sets
        .iter()
        .map(|s| normalize_action_set(s, &toy.state).unwrap())
        .collect();
    let checks = &toy.item("P2").prompt_checks;
    let mock = MockChat::new(MockScript::default()).unwrap();
    let ctx = LoopContext::new(&mock);
    let choice = StrategyChoice {
        solve_strategy: Strategy::Scratch,
        toolbox_plan: vec![],
        rationale: String::new(),
        confidence: None,
    };
    let (res, logs) = validate_and_solve(&sets, &choice, &toy.state, Some(&toy.prior), checks, &ctx, 0);
    let v = res.unwrap();
    // Upper 9 violates the check; upper 5 is the cheapest passing one and
    // the earlier of the two equal candidates wins.
    assert_eq!(v.index, 1);
    assert!((v.result.objective.unwrap() - 184.0).abs() < 1e-6);
    assert_eq!(logs.len(), 4);
    assert!(!logs[3].succeeded);
    assert_eq!(logs[3].failure.as_ref().unwrap().stage, FailureStage::PromptCheck);
}

#[test]
fn infeasible_candidate_reports_no_incumbent() {
    let toy = toy();
    let cases = failure_mode_cases(&toy);
    let run = &cases.iter().find(|c| c.label == "no incumbent").unwrap().run;
    let f = &run.result.outcome.failures[0];
    assert_eq!(f.failure_stage, FailureStage::Solve);
    assert_eq!(f.failure_kind, "infeasible");
}

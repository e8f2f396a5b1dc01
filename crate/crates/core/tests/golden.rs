use std::time::Instant;

use reopt_core::agents::{run_closed_loop, score_case, LoopContext, StepStatus};
use reopt_core::llm::MockChat;
use reopt_core::model::instantiate;
use reopt_core::scenario::{toy_catalog, Scenario};
use reopt_core::solver::{solve_mip, SolveStatus, SolverConfig};
use reopt_core::toolbox::Strategy;

#[test]
fn toy_baseline_and_prompts() {
    let sc = Scenario::toy();
    let inst = instantiate(&sc.state).unwrap();
    let t = Instant::now();
    let base = solve_mip(&inst, &SolverConfig::default(), None).unwrap();
    assert!(t.elapsed().as_secs_f64() < 1.0);
    assert_eq!(base.status, SolveStatus::Optimal);
    assert!((base.objective.unwrap() - 162.0).abs() < 1e-6);

    let mock = MockChat::new(sc.mock.clone().unwrap()).unwrap();
    let mut ctx = LoopContext::new(&mock);
    ctx.preset = sc.meta.preset.clone();
    let expected = [("P1", 174.0), ("P2", 184.0), ("P3", 192.0)];
    for (item, (id, obj)) in toy_catalog().iter().zip(expected) {
        assert_eq!(item.prompt_id, id);
        let t = Instant::now();
        let r = run_closed_loop(&item.delta, &sc.state, Some(&base), &item.prompt_checks, &ctx);
        assert!(t.elapsed().as_secs_f64() < 1.0, "{id} too slow");
        assert_eq!(r.outcome.status, StepStatus::Succeeded, "{id}: {:?}", r.outcome.failures);
        assert_eq!(r.outcome.attempts_used, 1);
        assert_eq!(r.outcome.strategy.as_ref().unwrap().solve_strategy, Strategy::Warm);
        let got = r.solution.as_ref().unwrap().objective.unwrap();
        assert!((got - obj).abs() < 1e-6, "{id}: {got}");
        let score = score_case(&r.outcome, &item.reference().unwrap(), &sc.state);
        assert!(score.update_correct && score.prompt_satisfied && score.first_attempt_success && score.final_success);
        assert!(score.failure_modes.is_empty());
        if id == "P2" {
            let x = r.solution.as_ref().unwrap().value("flows(P2,C2)").unwrap();
            assert!((x - 5.0).abs() < 1e-6);
        }
    }
}

//! Scripted closed-loop runs on the toy model: injected failures, repairs
//! and one case per failure mode.

use std::collections::BTreeSet;

use reopt_core::agents::{
    run_closed_loop, score_case, CaseScore, FailureMode, LoopContext, LoopResult, PromptCheck,
    Reference,
};
use reopt_core::llm::{MockChat, MockScript};
use reopt_core::model::{instantiate, ModelState};
use reopt_core::patch::{ActionSet, Patch};
use reopt_core::scenario::{toy_catalog, CatalogItem, Scenario};
use reopt_core::solver::{solve_mip, SolveResult, SolverConfig};
use serde_json::{json, Value};

pub fn planner_doc(actions: Value) -> String {
    json!({
        "edit_summary": "scripted",
        "relevant_components": [],
        "candidate_action_sets": [{"actions": actions}],
        "planning_hints": {"edit_scope": "local"}
    })
    .to_string()
}

pub const GARBAGE: &str = "I would rather not answer in JSON today.";

pub struct Toy {
    pub state: ModelState,
    pub prior: SolveResult,
    pub catalog: Vec<CatalogItem>,
}

pub fn toy() -> Toy {
    let state = Scenario::toy().state;
    let prior = solve_mip(&instantiate(&state).unwrap(), &SolverConfig::default(), None).unwrap();
    Toy {
        state,
        prior,
        catalog: toy_catalog(),
    }
}

impl Toy {
    pub fn item(&self, id: &str) -> &CatalogItem {
        self.catalog.iter().find(|c| c.prompt_id == id).unwrap()
    }
}

pub struct Run {
    pub result: LoopResult,
    pub calls: usize,
    pub score: CaseScore,
}

/// Runs `delta` with a planner that answers `responses` in attempt order.
pub fn run_scripted(
    toy: &Toy,
    delta: &str,
    responses: Vec<String>,
    checks: &[PromptCheck],
    reference: &Reference,
    budget: usize,
) -> Run {
    let mock = MockChat::new(MockScript::default().entry(".", responses)).unwrap();
    let mut ctx = LoopContext::new(&mock);
    ctx.budget = budget;
    let result = run_closed_loop(delta, &toy.state, Some(&toy.prior), checks, &ctx);
    let score = score_case(&result.outcome, reference, &toy.state);
    Run {
        result,
        calls: mock.calls(),
        score,
    }
}

fn p1_patch(value: f64) -> Value {
    json!([{"op": "UPDATE_PARAMETER", "target": "supply", "update": {"key": "P1", "value": value}}])
}

/// Attempt 1 returns garbage; attempt 2 returns the right patch.
pub fn repaired_on_second_attempt(toy: &Toy) -> Run {
    let item = toy.item("P1");
    run_scripted(
        toy,
        &item.delta,
        vec![GARBAGE.into(), planner_doc(p1_patch(0.0))],
        &item.prompt_checks,
        &item.reference().unwrap(),
        2,
    )
}

/// Every attempt returns garbage.
pub fn always_failing(toy: &Toy, budget: usize) -> Run {
    let item = toy.item("P1");
    run_scripted(
        toy,
        &item.delta,
        vec![GARBAGE.into()],
        &item.prompt_checks,
        &item.reference().unwrap(),
        budget,
    )
}

pub struct ModeCase {
    pub label: &'static str,
    pub expect: FailureMode,
    pub run: Run,
}

/// One scripted case per failure mode.
pub fn failure_mode_cases(toy: &Toy) -> Vec<ModeCase> {
    let p1 = toy.item("P1");
    let p2 = toy.item("P2");
    let p3 = toy.item("P3");
    let mut out = Vec::new();

    // Edits demand although the request is about plant supply.
    out.push(ModeCase {
        label: "wrong component",
        expect: FailureMode::WrongComponent,
        run: run_scripted(
            toy,
            &p1.delta,
            vec![planner_doc(json!([{"op": "UPDATE_PARAMETER", "target": "demand", "update": {"key": "C1", "value": 0.0}}]))],
            &p1.prompt_checks,
            &p1.reference().unwrap(),
            2,
        ),
    });
    out.push(ModeCase {
        label: "invalid patch",
        expect: FailureMode::InvalidPatch,
        run: run_scripted(
            toy,
            &p1.delta,
            vec![planner_doc(json!([{"op": "UPDATE_PARAMETER", "target": "suply", "update": {"key": "P1", "value": 0.0}}]))],
            &p1.prompt_checks,
            &p1.reference().unwrap(),
            2,
        ),
    });
    // Right target, wrong number; the prompt check still passes.
    out.push(ModeCase {
        label: "bad update",
        expect: FailureMode::BadUpdate,
        run: run_scripted(
            toy,
            &p2.delta,
            vec![planner_doc(json!([{"op": "UPDATE_BOUND", "target": "flows", "scope": {"index": ["P2", "C2"]}, "update": {"bound_type": "upper", "value": 4.0}}]))],
            &p2.prompt_checks,
            &p2.reference().unwrap(),
            2,
        ),
    });
    // Demand beyond total supply.
    out.push(ModeCase {
        label: "no incumbent",
        expect: FailureMode::NoIncumbent,
        run: run_scripted(
            toy,
            &p3.delta,
            vec![planner_doc(json!([{"op": "UPDATE_PARAMETER", "target": "demand", "update": {"key": "C3", "delta": 1000.0}}]))],
            &p3.prompt_checks,
            &p3.reference().unwrap(),
            2,
        ),
    });
    // Correct edit; the evaluation-side check asks for more than the model
    // can give while the loop itself only runs the usual checks.
    let mut strict = p1.reference().unwrap();
    strict.checks.push(PromptCheck::ObjectiveAtMost { value: 170.0, tol: 1e-6 });
    out.push(ModeCase {
        label: "prompt violation",
        expect: FailureMode::PromptViolation,
        run: run_scripted(
            toy,
            &p1.delta,
            vec![planner_doc(p1_patch(0.0))],
            &p1.prompt_checks,
            &strict,
            2,
        ),
    });
    out.push(ModeCase {
        label: "missing output",
        expect: FailureMode::MissingOutput,
        run: always_failing(toy, 2),
    });
    out
}

pub fn reference_of(actions: Vec<Patch>, checks: Vec<PromptCheck>) -> Reference {
    Reference {
        actions: ActionSet::new(actions),
        checks,
    }
}

pub fn modes_seen(cases: &[ModeCase]) -> BTreeSet<FailureMode> {
    cases.iter().flat_map(|c| c.run.score.failure_modes.iter().copied()).collect()
}

use std::path::PathBuf;

use super::select::toolbox_plan;
use super::validate::aggregate;
use super::{
    plan, select_strategy, validate_and_solve, AttemptEntry, CandidateLog, FailureRecord,
    FailureStage, PromptCheck, SelectorInput, StepOutcome, StepStatus, StrategyChoice,
};
use crate::llm::{ChatModel, PromptSettings};
use crate::model::{ModelState, RenderOptions, SemanticRegistry};
use crate::patch::{normalize_with, NormalizeError, PlannerOutput};
use crate::solver::{BackendRegistry, CancelToken, SolveResult, SolverConfig};
use crate::toolbox::{list_strategies, Strategy};

/// Everything one closed-loop run needs besides the state and the delta.
pub struct LoopContext<'a> {
    pub planner: &'a dyn ChatModel,
    /// `None` selects with the rule-based fallback.
    pub selector: Option<&'a dyn ChatModel>,
    /// Total planner attempts.
    pub budget: usize,
    pub settings: PromptSettings,
    pub framing: Option<String>,
    /// Tuned preset registered for the instance.
    pub preset: Option<String>,
    pub preset_dirs: Vec<PathBuf>,
    pub solver: SolverConfig,
    pub backends: BackendRegistry,
    pub backend: String,
    pub registry: SemanticRegistry,
    /// Forces one strategy and skips the selector.
    pub strategy_override: Option<Strategy>,
    pub render: RenderOptions,
    pub cancel: Option<CancelToken>,
}

impl<'a> LoopContext<'a> {
    pub fn new(planner: &'a dyn ChatModel) -> Self {
        LoopContext {
            planner,
            selector: None,
            budget: 2,
            settings: PromptSettings::default(),
            framing: None,
            preset: None,
            preset_dirs: Vec::new(),
            solver: SolverConfig::default(),
            backends: BackendRegistry::default(),
            backend: "builtin".into(),
            registry: SemanticRegistry::builtin(),
            strategy_override: None,
            render: RenderOptions::default(),
            cancel: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LoopResult {
    pub outcome: StepOutcome,
    /// The committed state, or a copy of the input on failure.
    pub state: ModelState,
    pub solution: Option<SolveResult>,
}

struct Attempt {
    output: PlannerOutput,
    choice: StrategyChoice,
    validated: super::Validated,
}

fn attempt_once(
    n: usize,
    delta: &str,
    state: &ModelState,
    prior: Option<&SolveResult>,
    checks: &[PromptCheck],
    repair: Option<&FailureRecord>,
    ctx: &LoopContext<'_>,
    logs: &mut Vec<CandidateLog>,
    last_output: &mut Option<PlannerOutput>,
    last_choice: &mut Option<StrategyChoice>,
) -> Result<Attempt, FailureRecord> {
    let output = plan(delta, state, repair, ctx)?;
    *last_output = Some(output.clone());

    let mut kept = Vec::new();
    let mut origin = Vec::new();
    let mut local_logs = Vec::new();
    for (i, set) in output.candidate_action_sets.iter().enumerate() {
        match normalize_with(set, state, &ctx.registry) {
            Ok(norm) => {
                kept.push(norm);
                origin.push(i);
            }
            Err(e) => {
                let kind = match e {
                    NormalizeError::UnmappableLabel { .. } => "unmappable_label",
                    NormalizeError::Schema { .. } => "schema",
                };
                local_logs.push(CandidateLog {
                    attempt: n,
                    candidate: i,
                    succeeded: false,
                    objective: None,
                    failure: Some(AttemptEntry {
                        stage: FailureStage::Normalize,
                        kind: kind.into(),
                        message: e.to_string(),
                    }),
                    targets: set.targets(),
                    action_set: None,
                });
            }
        }
    }
    if kept.is_empty() {
        let rec = aggregate(&local_logs);
        logs.extend(local_logs);
        return Err(rec);
    }

    let has_prior = prior.is_some_and(|p| p.assignment.is_some());
    let catalog = list_strategies(state, has_prior, ctx.preset.as_deref());
    let choice = match ctx.strategy_override {
        Some(s) => {
            let s = if catalog.is_available(s) { s } else { Strategy::Scratch };
            StrategyChoice {
                solve_strategy: s,
                toolbox_plan: toolbox_plan(s, &catalog),
                rationale: "Strategy fixed by the caller; selector skipped.".into(),
                confidence: None,
            }
        }
        None => select_strategy(
            &SelectorInput {
                action_sets: &kept,
                relevant: &output.relevant_components,
                hints: &output.planning_hints,
                prior_available: has_prior,
                catalog: &catalog,
            },
            ctx.selector,
            &ctx.settings,
        ),
    };
    *last_choice = Some(choice.clone());

    let (res, mut vlogs) = validate_and_solve(&kept, &choice, state, prior, checks, ctx, n);
    for l in &mut vlogs {
        l.candidate = origin[l.candidate];
    }
    local_logs.extend(vlogs);
    local_logs.sort_by_key(|l| l.candidate);
    let failed_all = res.is_err();
    let rec = if failed_all { Some(aggregate(&local_logs)) } else { None };
    logs.extend(local_logs);
    match res {
        Ok(mut v) => {
            v.index = origin[v.index];
            Ok(Attempt {
                output,
                choice,
                validated: v,
            })
        }
        Err(_) => Err(rec.unwrap_or_else(|| aggregate(&[]))),
    }
}

/// Plans, normalizes, selects and validates until one attempt succeeds or
/// `budget` attempts are spent. Failure leaves state and solution as given.
pub fn run_closed_loop(
    delta: &str,
    state: &ModelState,
    prior: Option<&SolveResult>,
    checks: &[PromptCheck],
    ctx: &LoopContext<'_>,
) -> LoopResult {
    let budget = ctx.budget.max(1);
    let mut logs = Vec::new();
    let mut failures: Vec<FailureRecord> = Vec::new();
    let mut history: Vec<AttemptEntry> = Vec::new();
    let mut repair: Option<FailureRecord> = None;
    let mut last_output = None;
    let mut last_choice = None;
    for n in 0..budget {
        let res = attempt_once(
            n,
            delta,
            state,
            prior,
            checks,
            repair.as_ref(),
            ctx,
            &mut logs,
            &mut last_output,
            &mut last_choice,
        );
        match res {
            Ok(a) => {
                let v = a.validated;
                let outcome = StepOutcome {
                    status: StepStatus::Succeeded,
                    applied_action_set: Some(v.action_set),
                    new_state_version: v.state.version(),
                    solution: Some(v.result.clone()),
                    attempts_used: n + 1,
                    candidate_log: logs,
                    failures,
                    planner_output: Some(a.output),
                    strategy: Some(a.choice),
                    diff: Some(v.diff),
                };
                return LoopResult {
                    outcome,
                    state: v.state,
                    solution: Some(v.result),
                };
            }
            Err(mut record) => {
                tracing::info!(attempt = n, stage = %record.failure_stage, kind = %record.failure_kind, "attempt failed");
                record.attempt_history = history.clone();
                history.push(record.entry());
                failures.push(record.clone());
                repair = Some(record);
            }
        }
    }
    LoopResult {
        outcome: StepOutcome {
            status: StepStatus::FailedBudgetExhausted,
            applied_action_set: None,
            new_state_version: state.version(),
            solution: prior.cloned(),
            attempts_used: budget,
            candidate_log: logs,
            failures,
            planner_output: last_output,
            strategy: last_choice,
            diff: None,
        },
        state: state.clone(),
        solution: prior.cloned(),
    }
}

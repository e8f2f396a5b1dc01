use std::collections::BTreeSet;

use super::{
    evaluate_checks, AttemptEntry, CandidateLog, FailureRecord, FailureStage, LoopContext,
    PromptCheck, StrategyChoice,
};
use crate::model::{instantiate_with, Instance, ModelState};
use crate::patch::{apply_action_set_with, ActionSet, ApplyContext, StateDiff};
use crate::solver::{SolveResult, SolveStatus, SolverConfig, WarmStart};
use crate::toolbox::{
    direct_warm_start, exam_heuristic_warm_start, exam_params_from_state, exam_warm_start,
    fix_and_release, load_preset_from, Strategy,
};

/// The committed candidate.
#[derive(Clone, Debug)]
pub struct Validated {
    pub index: usize,
    pub action_set: ActionSet,
    pub state: ModelState,
    pub diff: StateDiff,
    pub result: SolveResult,
}

fn entry(stage: FailureStage, kind: &str, message: impl Into<String>) -> AttemptEntry {
    AttemptEntry {
        stage,
        kind: kind.to_string(),
        message: message.into(),
    }
}

fn config_for(choice: &StrategyChoice, ctx: &LoopContext<'_>) -> SolverConfig {
    if choice.solve_strategy.uses_preset() {
        if let Some(name) = &ctx.preset {
            let dirs: Vec<&std::path::Path> = ctx.preset_dirs.iter().map(|p| p.as_path()).collect();
            match load_preset_from(name, &dirs) {
                Ok(cfg) => return cfg,
                Err(e) => tracing::warn!(error = %e, "preset unavailable; using base config"),
            }
        }
    }
    ctx.solver.clone()
}

fn run(
    ctx: &LoopContext<'_>,
    instance: &Instance,
    config: &SolverConfig,
    warm: Option<&WarmStart>,
) -> Result<SolveResult, AttemptEntry> {
    let backend = ctx
        .backends
        .get(&ctx.backend)
        .map_err(|e| entry(FailureStage::Solve, "solver_error", e.to_string()))?;
    backend
        .solve(instance, config, warm, ctx.cancel.as_ref())
        .map_err(|e| entry(FailureStage::Solve, "solver_error", e.to_string()))
}

fn solve_candidate(
    before: &ModelState,
    after: &ModelState,
    instance: &Instance,
    choice: &StrategyChoice,
    prior: Option<&SolveResult>,
    ctx: &LoopContext<'_>,
) -> Result<SolveResult, AttemptEntry> {
    let config = config_for(choice, ctx);
    let prior_x = prior.and_then(|p| p.assignment.as_ref());
    match (choice.solve_strategy, prior_x) {
        (Strategy::Warm | Strategy::WarmTuned, Some(x)) => {
            let ws = direct_warm_start(x, instance);
            run(ctx, instance, &config, Some(&ws.warm_start))
        }
        (Strategy::FixAndRelease, Some(x)) => {
            let old = instantiate_with(before, &ctx.registry)
                .map_err(|e| entry(FailureStage::Solve, "solver_error", e.to_string()))?;
            let mut affected: BTreeSet<String> = old.changed_keys(instance).into_iter().collect();
            affected.extend(
                instance
                    .variables
                    .iter()
                    .filter(|v| !x.contains_key(&v.key))
                    .map(|v| v.key.clone()),
            );
            match fix_and_release(x, &affected, instance) {
                Ok(fr) => {
                    let restricted = fr.restrict(instance);
                    let res = run(ctx, &restricted, &config, Some(&fr.warm_start))?;
                    if res.status.has_incumbent() {
                        return Ok(res);
                    }
                    tracing::info!("fixed solve found nothing; releasing every variable");
                    run(ctx, instance, &config, Some(&fr.warm_start))
                }
                Err(e) => {
                    tracing::warn!(error = %e, "fix_and_release unavailable; plain warm start");
                    let ws = direct_warm_start(x, instance);
                    run(ctx, instance, &config, Some(&ws.warm_start))
                }
            }
        }
        (Strategy::HeuristicWarm, Some(x)) => {
            let ws = exam_params_from_state(after, Some(x))
                .and_then(|p| exam_heuristic_warm_start(&p).ok().map(|a| (p, a)))
                .map(|(p, a)| exam_warm_start(&a.assignment, "assign", &p));
            run(ctx, instance, &config, ws.as_ref())
        }
        _ => run(ctx, instance, &config, None),
    }
}

/// Applies, solves and checks every candidate against its own copy of the
/// state, then keeps the lowest objective among those that pass. Ties go to
/// the earliest candidate.
pub fn validate_and_solve(
    action_sets: &[ActionSet],
    choice: &StrategyChoice,
    state: &ModelState,
    prior: Option<&SolveResult>,
    checks: &[PromptCheck],
    ctx: &LoopContext<'_>,
    attempt: usize,
) -> (Result<Validated, FailureRecord>, Vec<CandidateLog>) {
    let apply_ctx = ApplyContext {
        registry: ctx.registry.clone(),
        ..ApplyContext::default()
    };
    let mut logs = Vec::new();
    let mut best: Option<Validated> = None;
    for (i, set) in action_sets.iter().enumerate() {
        let mut log = CandidateLog {
            attempt,
            candidate: i,
            succeeded: false,
            objective: None,
            failure: None,
            targets: set.targets(),
            action_set: Some(set.clone()),
        };
        let outcome = (|| {
            let (after, diff) = apply_action_set_with(state, set, &apply_ctx).map_err(|e| {
                let kind = e.violations.first().map_or("apply_error", |v| v.code());
                entry(FailureStage::Apply, kind, e.to_string())
            })?;
            let instance = instantiate_with(&after, &ctx.registry)
                .map_err(|e| entry(FailureStage::Apply, "model_error", e.to_string()))?;
            let result = solve_candidate(state, &after, &instance, choice, prior, ctx)?;
            match result.status {
                SolveStatus::Optimal | SolveStatus::FeasibleTimeLimit => {}
                SolveStatus::NoIncumbent => {
                    return Err(entry(
                        FailureStage::Solve,
                        "no_incumbent",
                        "no incumbent within the time limit",
                    ))
                }
                s => return Err(entry(FailureStage::Solve, s.as_str(), format!("model is {s}"))),
            }
            let failed = evaluate_checks(checks, &after, &result);
            if !failed.is_empty() {
                return Err(entry(FailureStage::PromptCheck, "prompt_violation", failed.join("; ")));
            }
            Ok((after, diff, result))
        })();
        match outcome {
            Ok((after, diff, result)) => {
                log.succeeded = true;
                log.objective = result.objective;
                let obj = result.objective.unwrap_or(f64::INFINITY);
                let better = best
                    .as_ref()
                    .is_none_or(|b| obj < b.result.objective.unwrap_or(f64::INFINITY));
                if better {
                    best = Some(Validated {
                        index: i,
                        action_set: set.clone(),
                        state: after,
                        diff,
                        result,
                    });
                }
            }
            Err(f) => log.failure = Some(f),
        }
        logs.push(log);
    }
    match best {
        Some(v) => (Ok(v), logs),
        None => {
            let record = aggregate(&logs);
            (Err(record), logs)
        }
    }
}

/// Folds candidate failures into one record, staged at the furthest point
/// any candidate reached.
pub(crate) fn aggregate(logs: &[CandidateLog]) -> FailureRecord {
    let failures: Vec<(usize, &AttemptEntry)> = logs
        .iter()
        .filter_map(|l| l.failure.as_ref().map(|f| (l.candidate, f)))
        .collect();
    let Some(&(_, lead)) = failures.iter().max_by(|a, b| a.1.stage.cmp(&b.1.stage).then(b.0.cmp(&a.0))) else {
        return FailureRecord::new(FailureStage::PlanParse, "empty_plan", "no candidates to validate");
    };
    let message = if failures.len() == 1 {
        lead.message.clone()
    } else {
        failures
            .iter()
            .map(|(i, f)| format!("candidate {i}: [{}] {}: {}", f.stage, f.kind, f.message))
            .collect::<Vec<_>>()
            .join("; ")
    };
    FailureRecord::new(lead.stage, lead.kind.clone(), message)
}

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{evaluate_checks, CaseScore, FailureMode, FailureStage, PromptCheck, StepOutcome};
use crate::model::{instantiate_with, Instance, ModelState, SemanticRegistry};
use crate::patch::{apply_action_set_with, normalize_with, ActionSet, ApplyContext};

/// The hindsight reference edit for one prompt plus its checks.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub actions: ActionSet,
    #[serde(default)]
    pub checks: Vec<PromptCheck>,
}

fn applied(base: &ModelState, set: &ActionSet) -> Option<(ModelState, Instance)> {
    let registry = SemanticRegistry::builtin();
    let set = normalize_with(set, base, &registry).unwrap_or_else(|_| set.clone());
    let (after, _) = apply_action_set_with(base, &set, &ApplyContext::default()).ok()?;
    let inst = instantiate_with(&after, &registry).ok()?;
    Some((after, inst))
}

fn equivalent(base: &ModelState, a: &ActionSet, reference: &Instance) -> bool {
    applied(base, a).is_some_and(|(_, inst)| inst.approx_eq(reference, 1e-9))
}

fn reference_targets(base: &ModelState, r: &Reference) -> BTreeSet<String> {
    let set = normalize_with(&r.actions, base, &SemanticRegistry::builtin())
        .unwrap_or_else(|_| r.actions.clone());
    set.targets().into_iter().chain(r.actions.targets()).collect()
}

/// Maps an outcome to the failure modes it exhibits. Modes overlap.
pub fn classify_failure(
    outcome: &StepOutcome,
    reference: Option<&Reference>,
    base: &ModelState,
) -> BTreeSet<FailureMode> {
    let mut modes = BTreeSet::new();
    let logs = &outcome.candidate_log;
    let stages = outcome
        .failures
        .iter()
        .map(|f| f.failure_stage)
        .chain(logs.iter().filter_map(|l| l.failure.as_ref().map(|f| f.stage)));
    for stage in stages {
        match stage {
            FailureStage::PlanParse | FailureStage::Normalize | FailureStage::Apply => {
                modes.insert(FailureMode::InvalidPatch);
            }
            FailureStage::Solve => {
                modes.insert(FailureMode::NoIncumbent);
            }
            FailureStage::PromptCheck => {
                modes.insert(FailureMode::PromptViolation);
            }
        }
    }
    if !outcome.succeeded() {
        modes.insert(FailureMode::MissingOutput);
    }
    let Some(reference) = reference else {
        return modes;
    };
    let targets = reference_targets(base, reference);
    if logs
        .iter()
        .flat_map(|l| &l.targets)
        .any(|t| !targets.contains(t))
    {
        modes.insert(FailureMode::WrongComponent);
    }
    if let Some((ref_state, ref_inst)) = applied(base, &reference.actions) {
        let bad = match &outcome.applied_action_set {
            Some(set) if outcome.succeeded() => !equivalent(base, set, &ref_inst),
            _ => logs
                .iter()
                .filter(|l| l.applied())
                .filter_map(|l| l.action_set.as_ref())
                .any(|s| !equivalent(base, s, &ref_inst)),
        };
        if bad {
            modes.insert(FailureMode::BadUpdate);
        }
        if outcome.succeeded() {
            if let Some(sol) = &outcome.solution {
                let after = outcome
                    .applied_action_set
                    .as_ref()
                    .and_then(|s| applied(base, s))
                    .map_or(ref_state, |(s, _)| s);
                if !evaluate_checks(&reference.checks, &after, sol).is_empty() {
                    modes.insert(FailureMode::PromptViolation);
                }
            }
        }
    }
    modes
}

/// Scores one case against its reference. The result always satisfies the
/// nesting chain.
pub fn score_case(outcome: &StepOutcome, reference: &Reference, base: &ModelState) -> CaseScore {
    let failure_modes = classify_failure(outcome, Some(reference), base);
    let ref_applied = applied(base, &reference.actions);
    let committed = outcome
        .applied_action_set
        .as_ref()
        .filter(|_| outcome.succeeded())
        .and_then(|s| applied(base, s));
    let update_correct = match (&committed, &ref_applied) {
        (Some((_, a)), Some((_, r))) => a.approx_eq(r, 1e-9),
        _ => false,
    };
    let prompt_satisfied = update_correct
        && match (&committed, &outcome.solution) {
            (Some((after, _)), Some(sol)) if sol.status.has_incumbent() => {
                evaluate_checks(&reference.checks, after, sol).is_empty()
            }
            _ => false,
        };
    let final_success = prompt_satisfied && outcome.succeeded();
    let first_attempt_success = final_success && outcome.attempts_used == 1;
    CaseScore {
        update_correct,
        prompt_satisfied,
        first_attempt_success,
        final_success,
        failure_modes,
    }
}

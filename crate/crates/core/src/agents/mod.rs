//! Planner/selector orchestration, the validator, the bounded closed loop
//! and nested success scoring.

mod checks;
mod closed_loop;
mod plan;
mod score;
mod select;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::patch::{ActionSet, PlannerOutput, StateDiff};
use crate::solver::SolveResult;
use crate::toolbox::Strategy;

pub use checks::{evaluate_check, evaluate_checks, PromptCheck};
pub use closed_loop::{run_closed_loop, LoopContext, LoopResult};
pub use plan::{plan, planner_request};
pub use score::{classify_failure, score_case, Reference};
pub use select::{fallback_choice, select_strategy, SelectorInput};
pub use validate::{validate_and_solve, Validated};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureStage {
    PlanParse,
    Normalize,
    Apply,
    Solve,
    PromptCheck,
}

impl FailureStage {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureStage::PlanParse => "plan_parse",
            FailureStage::Normalize => "normalize",
            FailureStage::Apply => "apply",
            FailureStage::Solve => "solve",
            FailureStage::PromptCheck => "prompt_check",
        }
    }
}

impl fmt::Display for FailureStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttemptEntry {
    pub stage: FailureStage,
    pub kind: String,
    pub message: String,
}

/// Typed failure context handed back to the planner on retry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub failure_stage: FailureStage,
    pub failure_kind: String,
    pub failure_message: String,
    pub repair_instruction: String,
    pub attempt_history: Vec<AttemptEntry>,
}

impl FailureRecord {
    pub fn new(stage: FailureStage, kind: impl Into<String>, message: impl Into<String>) -> Self {
        let kind = kind.into();
        let message: String = message.into();
        FailureRecord {
            repair_instruction: repair_instruction(stage, &kind).to_string(),
            failure_stage: stage,
            failure_kind: kind,
            failure_message: message.split_whitespace().collect::<Vec<_>>().join(" "),
            attempt_history: Vec::new(),
        }
    }

    pub fn entry(&self) -> AttemptEntry {
        AttemptEntry {
            stage: self.failure_stage,
            kind: self.failure_kind.clone(),
            message: self.failure_message.clone(),
        }
    }
}

fn repair_instruction(stage: FailureStage, kind: &str) -> &'static str {
    match (stage, kind) {
        (FailureStage::PlanParse, "empty_plan") => {
            "Return at least one executable candidate action set for the request."
        }
        (FailureStage::PlanParse, _) => {
            "Return one JSON object with the required keys and patches that use the canonical keys op, target, scope, update."
        }
        (FailureStage::Normalize, "unmappable_label") => {
            "Use ids listed in the entity registry or index sets for every index component."
        }
        (FailureStage::Normalize, _) => "Match each patch payload to the schema of its op.",
        (FailureStage::Apply, "unknown_target") => {
            "Target a component name that appears in the model representation."
        }
        (FailureStage::Apply, "unknown_index") => {
            "Use index keys that exist in the target family or parameter."
        }
        (FailureStage::Apply, "bound_inversion") => "Keep every lower bound at or below its upper bound.",
        (FailureStage::Apply, "pattern_matches_nothing" | "invalid_pattern") => {
            "Use a regular expression that matches existing flat variable or row names."
        }
        (FailureStage::Apply, _) => "Emit patches that follow the op schemas exactly.",
        (FailureStage::Solve, "no_incumbent") => {
            "The solver found no incumbent in time; keep the edit minimal so the model stays easy to solve."
        }
        (FailureStage::Solve, _) => {
            "The edited model has no usable solution; re-read the request and avoid over-constraining the model."
        }
        (FailureStage::PromptCheck, _) => {
            "The solution violated a requested condition; express that condition directly as a model edit."
        }
    }
}

/// The selector's decision for one attempt.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyChoice {
    pub solve_strategy: Strategy,
    pub toolbox_plan: Vec<String>,
    pub rationale: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Succeeded,
    FailedBudgetExhausted,
}

/// What happened to one candidate action set in one attempt.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateLog {
    pub attempt: usize,
    pub candidate: usize,
    pub succeeded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<AttemptEntry>,
    pub targets: Vec<String>,
    /// The normalized set when normalization succeeded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_set: Option<ActionSet>,
}

impl CandidateLog {
    /// True when the candidate made it through application.
    pub fn applied(&self) -> bool {
        self.succeeded
            || self
                .failure
                .as_ref()
                .is_some_and(|f| matches!(f.stage, FailureStage::Solve | FailureStage::PromptCheck))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub status: StepStatus,
    pub applied_action_set: Option<ActionSet>,
    pub new_state_version: u64,
    pub solution: Option<SolveResult>,
    pub attempts_used: usize,
    pub candidate_log: Vec<CandidateLog>,
    /// One record per failed attempt.
    pub failures: Vec<FailureRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planner_output: Option<PlannerOutput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<StrategyChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diff: Option<StateDiff>,
}

impl StepOutcome {
    pub fn succeeded(&self) -> bool {
        self.status == StepStatus::Succeeded
    }

    pub fn objective(&self) -> Option<f64> {
        self.solution.as_ref().and_then(|s| s.objective)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureMode {
    WrongComponent,
    InvalidPatch,
    BadUpdate,
    NoIncumbent,
    PromptViolation,
    MissingOutput,
}

impl FailureMode {
    pub const ALL: [FailureMode; 6] = [
        FailureMode::WrongComponent,
        FailureMode::InvalidPatch,
        FailureMode::BadUpdate,
        FailureMode::NoIncumbent,
        FailureMode::PromptViolation,
        FailureMode::MissingOutput,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FailureMode::WrongComponent => "wrong_component",
            FailureMode::InvalidPatch => "invalid_patch",
            FailureMode::BadUpdate => "bad_update",
            FailureMode::NoIncumbent => "no_incumbent",
            FailureMode::PromptViolation => "prompt_violation",
            FailureMode::MissingOutput => "missing_output",
        }
    }
}

impl fmt::Display for FailureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseScore {
    pub update_correct: bool,
    pub prompt_satisfied: bool,
    pub first_attempt_success: bool,
    pub final_success: bool,
    pub failure_modes: std::collections::BTreeSet<FailureMode>,
}

impl CaseScore {
    pub fn is_nested(&self) -> bool {
        (!self.final_success || self.prompt_satisfied)
            && (!self.prompt_satisfied || self.update_correct)
            && (!self.first_attempt_success || self.final_success)
    }
}


//! Planner and selector request assembly.

use std::fmt::Write;
use std::time::Duration;

use serde_json::{Map, Value};

use super::ChatRequest;
use crate::agents::FailureRecord;
use crate::patch::{ActionSet, OpKind};
use crate::toolbox::StrategyCatalog;

pub const PLANNER_SYSTEM: &str = "You are a reoptimization planner. Use the deterministic model representation to interpret the requested change and propose candidate model edits. Return JSON only. Use candidate_action_sets as the canonical output format.

Each candidate_action_set is one executable plan; put all coordinated edits for a single plan in the same action set. Each item must be a JSON object with actions=[...]; the patch list key inside each item must be actions. Each patch object must use the canonical keys op, target, scope, update, and optional notes. Return multiple candidate action sets only when they are genuinely different alternative plans, and do not duplicate the same edits in both grouped and flat forms.

Patch payloads must be executable as written: use concrete ids and numeric literals for indices, row labels, and values whenever the model representation provides enough information. Do not emit pseudo-code, formulas, set names, or symbolic placeholders inside patch indices or values. For keyed parameter edits, place the concrete sub-index in update.key. For numeric requests phrased as \"increase by\", \"decrease by\", or other additive changes, use update.delta instead of overwriting with update.value. For materialized_linear constraint families, use matching concrete row ids in lhs_spec.rows and rhs_spec, and concrete executable variable indices in every term. If the representation explicitly exposes a compact problem-specific semantic lhs_spec.kind, that semantic payload may be used instead of materializing every row term. If a valid executable patch cannot be expressed, return empty candidate lists rather than a symbolic or guessed placeholder patch.

Required JSON keys:
edit_summary (short free-form summary of the requested edit);
affected_sets (object mapping entity or set labels to identifiers mentioned or strongly implied by the delta, or {} if none);
relevant_components (list of model component names);
candidate_action_sets (list of executable candidate plans, each {actions: [...]});
planning_hints (optional planner hints such as edit_scope='local|structural' or expected_reuse='high|low').";

pub const REPAIR_PRELUDE: &str = "This is a fresh repair attempt for the same user request from a fresh planning pass. Preserve the user's intent, not the previous implementation details. Use the runtime feedback below only to avoid the previous failure mode. The items below are runtime feedback from earlier attempts in this same run.";

pub const SELECTOR_SYSTEM: &str = "You choose the fastest safe reoptimization solve strategy. Return JSON only.

Pick exactly one solve strategy from the allowed list. Do not invent toolbox items or unsupported strategies. Toolbox plans are executable in this runtime and must match the chosen solve strategy.

Prefer warm+tuned over warm alone when both warm reuse and tuned solving are available and the edit looks reuse-friendly. Prefer warm reuse for local edits when a reusable solution exists but tuned solving is unavailable or unnecessary. Prefer tuned or scratch for structural edits when warm reuse looks fragile.

Required JSON keys: solve_strategy, toolbox_plan, rationale. Optional JSON key: confidence as a number in [0,1].";

pub const RENDER_HEADER: &str = "MODEL REPRESENTATION:";
pub const DELTA_HEADER: &str = "USER REQUEST:";

#[derive(Clone, Debug, PartialEq)]
pub struct PromptSettings {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout: Duration,
}

impl Default for PromptSettings {
    fn default() -> Self {
        PromptSettings {
            model: "gpt-4o".into(),
            temperature: 0.0,
            max_tokens: 4096,
            timeout: Duration::from_secs(120),
        }
    }
}

/// One line per op naming the payload each expects.
pub fn op_schema(op: OpKind) -> &'static str {
    match op {
        OpKind::UpdateParameter => {
            "target=<parameter>; update={key?: <index>, value: number | delta: number}"
        }
        OpKind::UpdateBound => {
            "target=<variable family>; scope={index: [..]}; update={bound_type: lower|upper|both, value: number}"
        }
        OpKind::UpdateConstraintRhs => {
            "target=<constraint family>; scope={row: [..]}; update={value: number | delta: number}"
        }
        OpKind::UpdateConstraintLhs => "target=<constraint family>; update={lhs_spec: {...}}",
        OpKind::UpdateObjectiveCoeff => {
            "target=<objective component>; scope={var_family?, index: [..]}; update={value | delta}"
        }
        OpKind::UpdateObjectiveWeight => "target=<objective component>; update={value | delta}",
        OpKind::UpdateCoefficient => {
            "target=<row regex>; scope={var_pattern: <variable regex>}; update={value | scale}"
        }
        OpKind::FixVariablesByPattern => {
            "target=<variable regex>; scope={families?: [..]}; update={value: number}"
        }
        OpKind::UpdateConstraintRhsByPattern => "target=<row regex>; update={value | scale}",
        OpKind::AddVariableFamily => "target=<new name>; update={family: <variable family>}",
        OpKind::AddConstraintFamily => "target=<new name>; update={family: <constraint family>}",
        OpKind::RemoveConstraintFamily => "target=<constraint family>",
        OpKind::AddObjectiveComponent => {
            "target=<new name>; update={component: <objective component>}"
        }
    }
}

pub fn op_schemas(ops: &[OpKind]) -> String {
    let mut out = String::new();
    for op in ops {
        let _ = writeln!(out, "- {}: {}", op.name(), op_schema(*op));
    }
    out
}

/// The repair block placed ahead of the user text on a retry.
pub fn repair_block(record: &FailureRecord) -> String {
    let mut out = String::from(REPAIR_PRELUDE);
    out.push('\n');
    let _ = writeln!(out, "- failure_stage: {}", record.failure_stage);
    let _ = writeln!(out, "- failure_kind: {}", record.failure_kind);
    let _ = writeln!(out, "- failure_message: {}", record.failure_message);
    let _ = writeln!(out, "- repair_instruction: {}", record.repair_instruction);
    out.push_str("- attempt_history:");
    if record.attempt_history.is_empty() {
        out.push_str(" []\n");
    } else {
        out.push('\n');
        for h in &record.attempt_history {
            let _ = writeln!(out, "  - [{}] {}: {}", h.stage, h.kind, h.message);
        }
    }
    out
}

pub fn assemble_planner_prompt(
    render: &str,
    delta: &str,
    repair: Option<&FailureRecord>,
    framing: Option<&str>,
    ops: &[OpKind],
    settings: &PromptSettings,
) -> ChatRequest {
    let mut system = String::from(PLANNER_SYSTEM);
    if let Some(f) = framing.filter(|f| !f.trim().is_empty()) {
        system.push_str("\n\nPROBLEM CONTEXT:\n");
        system.push_str(f.trim_end());
    }
    system.push_str("\n\nALLOWED PATCH OPERATIONS: ");
    system.push_str(&ops.iter().map(|o| o.name()).collect::<Vec<_>>().join(", "));
    system.push_str("\n\nPATCH SCHEMAS:\n");
    system.push_str(&op_schemas(ops));

    let mut user = String::new();
    if let Some(r) = repair {
        user.push_str(&repair_block(r));
        user.push('\n');
    }
    let _ = write!(user, "{RENDER_HEADER}\n{}\n\n{DELTA_HEADER}\n{delta}", render.trim_end());
    ChatRequest {
        model: settings.model.clone(),
        system,
        user,
        temperature: settings.temperature,
        max_tokens: settings.max_tokens,
        timeout: settings.timeout,
    }
}

pub fn assemble_selector_prompt(
    action_sets: &[ActionSet],
    catalog: &StrategyCatalog,
    hints: &Map<String, Value>,
    prior_available: bool,
    settings: &PromptSettings,
) -> ChatRequest {
    let mut user = String::from("ALLOWED STRATEGIES:\n");
    for e in catalog.available() {
        let _ = write!(user, "- {}: {}", e.strategy, e.description);
        if let Some(p) = &e.preset {
            let _ = write!(user, " (preset {p})");
        }
        user.push('\n');
    }
    let _ = writeln!(
        user,
        "\nPRIOR SOLUTION: {}",
        if prior_available { "available" } else { "none" }
    );
    user.push_str("\nNORMALIZED ACTIONS:\n");
    for (i, set) in action_sets.iter().enumerate() {
        let json = serde_json::to_string(&set.actions).unwrap_or_default();
        let _ = writeln!(user, "- candidate {i}: {json}");
    }
    if !hints.is_empty() {
        user.push_str("\nPLANNING HINTS:\n");
        for (k, v) in hints {
            let v = v.as_str().map_or_else(|| v.to_string(), str::to_string);
            let _ = writeln!(user, "- {k}: {v}");
        }
    }
    ChatRequest {
        model: settings.model.clone(),
        system: SELECTOR_SYSTEM.to_string(),
        user,
        temperature: settings.temperature,
        max_tokens: settings.max_tokens,
        timeout: settings.timeout,
    }
}

/// The delta section of an assembled planner user text.
pub fn delta_of(user: &str) -> &str {
    match user.rfind(&format!("\n{DELTA_HEADER}\n")) {
        Some(i) => &user[i + DELTA_HEADER.len() + 2..],
        None => user,
    }
}

/// Zero for a first attempt, otherwise one more than the number of earlier
/// failures listed in the repair block.
pub fn attempt_index_of(user: &str) -> usize {
    if !user.starts_with(REPAIR_PRELUDE) {
        return 0;
    }
    let head = user.split(RENDER_HEADER).next().unwrap_or("");
    1 + head.lines().filter(|l| l.starts_with("  - [")).count()
}

use super::{FailureRecord, FailureStage, LoopContext};
use crate::llm::{assemble_planner_prompt, ChatRequest};
use crate::model::{render_for_planner_with, ModelState};
use crate::patch::{parse_planner_output, OpKind, PatchError, PlannerOutput};

fn patch_error_kind(e: &PatchError) -> &'static str {
    match e {
        PatchError::MalformedDocument(_) => "malformed_document",
        PatchError::MissingKey(_) => "missing_key",
        PatchError::UnknownOp(_) => "unknown_op",
        PatchError::MalformedPatch { .. } => "malformed_patch",
    }
}

pub fn planner_request(
    delta: &str,
    state: &ModelState,
    repair: Option<&FailureRecord>,
    ctx: &LoopContext<'_>,
) -> ChatRequest {
    let render = render_for_planner_with(state, &ctx.render, &ctx.registry);
    assemble_planner_prompt(
        &render,
        delta,
        repair,
        ctx.framing.as_deref(),
        &OpKind::ALL,
        &ctx.settings,
    )
}

/// One planner call: assemble, invoke, parse.
pub fn plan(
    delta: &str,
    state: &ModelState,
    repair: Option<&FailureRecord>,
    ctx: &LoopContext<'_>,
) -> Result<PlannerOutput, FailureRecord> {
    let request = planner_request(delta, state, repair, ctx);
    let text = ctx
        .planner
        .complete(&request)
        .map_err(|e| FailureRecord::new(FailureStage::PlanParse, e.code(), e.to_string()))?;
    let mut out = parse_planner_output(&text).map_err(|e| {
        FailureRecord::new(FailureStage::PlanParse, patch_error_kind(&e), e.to_string())
    })?;
    out.candidate_action_sets.retain(|s| !s.is_empty());
    if out.candidate_action_sets.is_empty() {
        return Err(FailureRecord::new(
            FailureStage::PlanParse,
            "empty_plan",
            "the planner returned no executable candidate action set",
        ));
    }
    Ok(out)
}

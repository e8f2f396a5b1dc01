//! Replays a prompt catalog against a scenario, each prompt on the baseline.

use std::str::FromStr;
use std::time::Instant;

use reopt_core::agents::{run_closed_loop, score_case};
use reopt_core::patch::apply_action_set;
use reopt_core::scenario::{CatalogItem, Scenario};
use reopt_core::toolbox::Strategy;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planner::{Agents, PlannerError, PlannerKind};
use crate::report::{evaluate_metrics, CaseResult};
use crate::session::solve_state;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Planner plus strategy selector.
    #[default]
    Patch,
    /// Selector disabled; every step solves from scratch.
    PatchNoSelector,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Patch => "patch",
            Variant::PatchNoSelector => "patch-no-selector",
        }
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "patch" => Ok(Variant::Patch),
            "patch-no-selector" | "patch_no_selector" => Ok(Variant::PatchNoSelector),
            other => Err(format!("unknown variant `{other}` (expected patch or patch-no-selector)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReplayOptions {
    pub variants: Vec<Variant>,
    pub planner: PlannerKind,
    pub budget: Option<usize>,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        ReplayOptions { variants: vec![Variant::Patch], planner: PlannerKind::Mock, budget: None }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("baseline cannot be solved: {0}")]
    Baseline(String),
    #[error(transparent)]
    Planner(#[from] PlannerError),
}

pub fn replay(scenario: &Scenario, catalog: &[CatalogItem], opts: &ReplayOptions) -> Result<Vec<CaseResult>, HarnessError> {
    let base = solve_state(&scenario.state).map_err(HarnessError::Baseline)?;
    let mut out = Vec::new();
    for item in catalog {
        let reference = item.reference();
        // The reference optimum is what the Δobj and gap columns compare against.
        let reference_objective = reference.as_ref().and_then(|r| {
            let (s, _) = apply_action_set(&scenario.state, &r.actions).ok()?;
            solve_state(&s).ok()?.objective
        });
        for &variant in &opts.variants {
            // Fresh agents per case so scripted state never leaks across prompts.
            let agents = Agents::build(scenario, opts.planner)?;
            let mut ctx = agents.context(scenario);
            if let Some(b) = opts.budget {
                ctx.budget = b.max(1);
            }
            if variant == Variant::PatchNoSelector {
                ctx.strategy_override = Some(Strategy::Scratch);
            }
            let t = Instant::now();
            let run = run_closed_loop(&item.delta, &scenario.state, Some(&base), &item.prompt_checks, &ctx);
            let wall_time = t.elapsed().as_secs_f64();
            let score = reference.as_ref().map(|r| score_case(&run.outcome, r, &scenario.state));
            let domain_metrics = match (&item.domain_metrics, &run.solution) {
                (Some(spec), Some(sol)) if run.outcome.succeeded() => {
                    evaluate_metrics(spec, &run.state, sol).unwrap_or_else(|e| {
                        tracing::warn!(prompt = %item.prompt_id, "domain metric skipped: {e}");
                        Default::default()
                    })
                }
                _ => Default::default(),
            };
            out.push(CaseResult {
                instance: scenario.name.clone(),
                prompt_id: item.prompt_id.clone(),
                variant: variant.name().to_string(),
                outcome: run.outcome,
                score,
                reference_objective,
                wall_time,
                domain_metrics,
            });
        }
    }
    Ok(out)
}

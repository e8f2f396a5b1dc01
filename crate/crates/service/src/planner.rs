use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use reopt_core::agents::LoopContext;
use reopt_core::llm::{ChatModel, MockChat, OpenAiClient};
use reopt_core::scenario::Scenario;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    /// The scenario's scripted mock; needs no network.
    #[default]
    Mock,
    /// An OpenAI-compatible endpoint configured through `REOPT_LLM_*`.
    Llm,
}

impl FromStr for PlannerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mock" => Ok(PlannerKind::Mock),
            "llm" => Ok(PlannerKind::Llm),
            other => Err(format!("unknown planner `{other}` (expected mock or llm)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("scenario `{0}` has no mock script; use the llm planner")]
    NoMock(String),
    #[error("mock script for `{0}` is invalid: {1}")]
    BadMock(String, String),
}

/// Planner plus optional selector model for one loop run.
pub struct Agents {
    pub planner: Arc<dyn ChatModel>,
    pub selector: Option<Arc<dyn ChatModel>>,
}

impl Agents {
    pub fn build(scenario: &Scenario, kind: PlannerKind) -> Result<Agents, PlannerError> {
        match kind {
            PlannerKind::Mock => {
                let script = scenario
                    .mock
                    .clone()
                    .ok_or_else(|| PlannerError::NoMock(scenario.name.clone()))?;
                let mock = MockChat::new(script)
                    .map_err(|e| PlannerError::BadMock(scenario.name.clone(), e.to_string()))?;
                // The mock has no selector entries, so the rule-based fallback picks.
                Ok(Agents { planner: Arc::new(mock), selector: None })
            }
            PlannerKind::Llm => {
                let client: Arc<dyn ChatModel> = Arc::new(OpenAiClient::from_env());
                Ok(Agents { planner: client.clone(), selector: Some(client) })
            }
        }
    }

    pub fn context<'a>(&'a self, scenario: &Scenario) -> LoopContext<'a> {
        let mut ctx = LoopContext::new(self.planner.as_ref());
        ctx.selector = self.selector.as_deref();
        ctx.preset = scenario.meta.preset.clone();
        ctx.preset_dirs = preset_dirs(scenario);
        ctx.framing = scenario.framing.clone();
        ctx
    }
}

/// Where tuned preset files are looked up for a scenario.
pub fn preset_dirs(scenario: &Scenario) -> Vec<PathBuf> {
    let mut dirs = Vec::new();
    if let Some(d) = &scenario.dir {
        dirs.push(d.clone());
        dirs.push(d.join("presets"));
        if let Some(p) = d.parent() {
            dirs.push(p.join("presets"));
        }
    }
    dirs.push(PathBuf::from("presets"));
    dirs
}

use std::collections::BTreeMap;
use std::time::Instant;

use chrono::{DateTime, Utc};
use reopt_core::agents::{run_closed_loop, score_case, CaseScore, PromptCheck, Reference, StepOutcome};
use reopt_core::model::{instantiate, ModelState};
use reopt_core::patch::{apply_action_set, ActionSet, Patch, StateDiff};
use reopt_core::scenario::Scenario;
use reopt_core::solver::{solve_mip, SolveResult, SolverConfig};
use reopt_core::toolbox::Strategy;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::planner::{Agents, PlannerError, PlannerKind};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("baseline cannot be solved: {0}")]
    Baseline(String),
    #[error(transparent)]
    Planner(#[from] PlannerError),
}

/// Per-prompt knobs; everything defaults to the scenario's settings.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default)]
    pub checks: Vec<PromptCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planner: Option<PlannerKind>,
    /// When present the step is scored against this reference.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_actions: Option<Vec<Patch>>,
}

/// One processed prompt, in log order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: usize,
    pub at: DateTime<Utc>,
    pub delta: String,
    pub from_version: u64,
    pub outcome: StepOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<CaseScore>,
    pub wall_time: f64,
}

impl SessionEvent {
    pub fn committed(&self) -> Option<&ActionSet> {
        if self.outcome.succeeded() {
            self.outcome.applied_action_set.as_ref()
        } else {
            None
        }
    }
}

#[derive(Clone, Debug)]
pub struct Session {
    pub id: String,
    /// What the session was created from: a scenario name, a path, or `inline`.
    pub source: String,
    pub scenario: Scenario,
    pub baseline: ModelState,
    pub states: BTreeMap<u64, ModelState>,
    pub solutions: BTreeMap<u64, SolveResult>,
    /// Keyed by the version the diff leads to.
    pub diffs: BTreeMap<u64, StateDiff>,
    pub events: Vec<SessionEvent>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

pub fn solve_state(state: &ModelState) -> Result<SolveResult, String> {
    let inst = instantiate(state).map_err(|e| e.to_string())?;
    solve_mip(&inst, &SolverConfig::default(), None).map_err(|e| e.to_string())
}

impl Session {
    /// Starts a session and solves its baseline.
    pub fn create(id: String, source: String, scenario: Scenario) -> Result<Session, SessionError> {
        let baseline = solve_state(&scenario.state).map_err(SessionError::Baseline)?;
        Ok(Session::with_baseline(id, source, scenario, baseline, Utc::now()))
    }

    pub fn with_baseline(
        id: String,
        source: String,
        scenario: Scenario,
        solution: SolveResult,
        at: DateTime<Utc>,
    ) -> Session {
        let state = scenario.state.clone();
        let v = state.version();
        Session {
            id,
            source,
            baseline: state.clone(),
            states: BTreeMap::from([(v, state)]),
            solutions: BTreeMap::from([(v, solution)]),
            diffs: BTreeMap::new(),
            events: Vec::new(),
            created_at: at,
            updated_at: at,
            scenario,
        }
    }

    pub fn version(&self) -> u64 {
        *self.states.keys().next_back().expect("baseline always present")
    }

    pub fn state(&self) -> &ModelState {
        &self.states[&self.version()]
    }

    pub fn latest_solution(&self) -> Option<&SolveResult> {
        self.solutions.get(&self.version())
    }

    /// Diff leading to `v`; the baseline maps to an empty diff.
    pub fn diff(&self, v: u64) -> Option<StateDiff> {
        if v == self.baseline.version() {
            return Some(StateDiff::empty(v));
        }
        self.diffs.get(&v).cloned()
    }

    /// Runs one closed-loop step on the current version.
    pub fn prompt(&mut self, delta: &str, opts: &PromptOptions, default_planner: PlannerKind) -> Result<SessionEvent, SessionError> {
        let agents = Agents::build(&self.scenario, opts.planner.unwrap_or(default_planner))?;
        let mut ctx = agents.context(&self.scenario);
        if let Some(b) = opts.budget {
            ctx.budget = b.max(1);
        }
        ctx.strategy_override = opts.strategy;
        let state = self.state().clone();
        let t = Instant::now();
        let run = run_closed_loop(delta, &state, self.latest_solution(), &opts.checks, &ctx);
        let wall_time = t.elapsed().as_secs_f64();
        let score = opts.reference_actions.as_ref().map(|actions| {
            let reference = Reference { actions: ActionSet::new(actions.clone()), checks: opts.checks.clone() };
            score_case(&run.outcome, &reference, &state)
        });
        let event = SessionEvent {
            seq: self.events.len(),
            at: Utc::now(),
            delta: delta.to_string(),
            from_version: state.version(),
            outcome: run.outcome,
            score,
            wall_time,
        };
        self.record(event.clone(), Some((run.state, run.solution)))
            .expect("a fresh loop result is consistent with its own state");
        Ok(event)
    }

    /// Appends an event. Without a precomputed state the committed action set
    /// is replayed on the current version and must reproduce the logged diff.
    pub fn record(
        &mut self,
        event: SessionEvent,
        computed: Option<(ModelState, Option<SolveResult>)>,
    ) -> Result<(), String> {
        if let Some(set) = event.committed() {
            let (next, diff) = match computed {
                Some((next, _)) => {
                    let diff = event.outcome.diff.clone().unwrap_or_else(|| StateDiff::empty(next.version()));
                    (next, diff)
                }
                None => {
                    let (next, diff) = apply_action_set(self.state(), set)
                        .map_err(|e| format!("event {}: replay failed at patch {}", event.seq, e.index))?;
                    if event.outcome.diff.as_ref().is_some_and(|d| d != &diff) {
                        return Err(format!("event {}: replayed diff differs from the log", event.seq));
                    }
                    (next, diff)
                }
            };
            if next.version() != event.outcome.new_state_version {
                return Err(format!(
                    "event {}: replay reached version {} but the log says {}",
                    event.seq,
                    next.version(),
                    event.outcome.new_state_version
                ));
            }
            let v = next.version();
            if let Some(sol) = event.outcome.solution.clone() {
                self.solutions.insert(v, sol);
            }
            self.states.insert(v, next);
            self.diffs.insert(v, diff);
        }
        self.updated_at = event.at;
        self.events.push(event);
        Ok(())
    }

    pub fn summary(&self) -> Value {
        let s = self.state();
        let sol = self.latest_solution();
        json!({
            "id": self.id,
            "scenario": self.scenario.name,
            "source": self.source,
            "version": self.version(),
            "versions": self.states.keys().collect::<Vec<_>>(),
            "events": self.events.len(),
            "created_at": self.created_at,
            "updated_at": self.updated_at,
            "objective": sol.and_then(|r| r.objective),
            "counts": {
                "parameters": s.parameters().count(),
                "variable_families": s.variable_families().count(),
                "constraint_families": s.constraint_families().count(),
                "objective_components": s.objective_components().count(),
            },
            "state": serde_json::from_str::<Value>(&reopt_core::model::save_state(s)).unwrap_or(Value::Null),
            "solution": sol,
        })
    }
}

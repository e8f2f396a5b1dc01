//! Desk-scale LP/MIP kernel: simplex, branch-and-bound, feasibility checks
//! and a named backend registry.

mod bnb;
mod simplex;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Instance, Sense};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeSelection {
    #[default]
    BestBound,
    DepthFirst,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branching {
    #[default]
    MostFractional,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Seconds.
    pub time_limit: f64,
    pub mip_gap_tolerance: f64,
    pub feasibility_tolerance: f64,
    pub node_selection: NodeSelection,
    pub branching: Branching,
    pub preset_name: Option<String>,
    pub random_seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            time_limit: 300.0,
            mip_gap_tolerance: 1e-4,
            feasibility_tolerance: 1e-6,
            node_selection: NodeSelection::BestBound,
            branching: Branching::MostFractional,
            preset_name: None,
            random_seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(self.time_limit > 0.0) {
            return Err(SolverError::InvalidConfig("time_limit must be > 0".into()));
        }
        if !positive(self.mip_gap_tolerance) || !positive(self.feasibility_tolerance) {
            return Err(SolverError::InvalidConfig("tolerances must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    FeasibleTimeLimit,
    Infeasible,
    Unbounded,
    NoIncumbent,
}

impl SolveStatus {
    pub fn has_incumbent(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::FeasibleTimeLimit)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::FeasibleTimeLimit => "feasible_time_limit",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NoIncumbent => "no_incumbent",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmSource {
    Direct,
    Heuristic,
    FixAndRelease,
}

/// A partial assignment keyed by flat variable key.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarmStart {
    pub values: BTreeMap<String, f64>,
    pub source_label: WarmSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarmStartReport {
    pub source_label: WarmSource,
    pub matched: usize,
    pub dropped: usize,
    /// True when the start (or its completion) became the first incumbent.
    pub installed_as_incumbent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment: Option<BTreeMap<String, f64>>,
    pub objective: Option<f64>,
    pub best_bound: Option<f64>,
    pub gap: Option<f64>,
    /// Seconds.
    pub wall_time: f64,
    pub node_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warm_start: Option<WarmStartReport>,
}

impl SolveResult {
    pub fn value(&self, key: &str) -> Option<f64> {
        self.assignment.as_ref()?.get(key).copied()
    }
}

pub fn gap(objective: f64, bound: f64) -> f64 {
    (objective - bound).abs() / objective.abs().max(1.0)
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SolverError {
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("solver backend `{0}` is not available")]
    BackendUnavailable(String),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

/// Cooperative stop signal; a cancelled solve returns its current incumbent.
#[derive(Clone, Debug, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeasibilityViolation {
    Missing { variable: String },
    Bound { variable: String, value: f64, lower: f64, upper: f64, magnitude: f64 },
    Integrality { variable: String, value: f64, magnitude: f64 },
    Row { row: String, activity: f64, sense: Sense, rhs: f64, magnitude: f64 },
}

pub(crate) fn violations_of(instance: &Instance, x: &[f64], tol: f64) -> Vec<FeasibilityViolation> {
    let mut out = Vec::new();
    for (v, &val) in instance.variables.iter().zip(x) {
        let excess = (v.lower - val).max(val - v.upper).max(0.0);
        if excess > tol || val.is_nan() {
            out.push(FeasibilityViolation::Bound {
                variable: v.key.clone(),
                value: val,
                lower: v.lower,
                upper: v.upper,
                magnitude: excess,
            });
        }
        if v.var_type.is_integral() {
            let frac = (val - val.round()).abs();
            if frac > tol {
                out.push(FeasibilityViolation::Integrality {
                    variable: v.key.clone(),
                    value: val,
                    magnitude: frac,
                });
            }
        }
    }
    for r in &instance.rows {
        let activity: f64 = r.coefs.iter().map(|&(j, a)| a * x[j]).sum();
        let excess = match r.sense {
            Sense::Le => activity - r.rhs,
            Sense::Ge => r.rhs - activity,
            Sense::Eq => (activity - r.rhs).abs(),
        };
        if excess > tol {
            out.push(FeasibilityViolation::Row {
                row: r.key.clone(),
                activity,
                sense: r.sense,
                rhs: r.rhs,
                magnitude: excess,
            });
        }
    }
    out
}

/// Checks an assignment against every bound, row and integrality
/// requirement of `instance`.
pub fn check_feasible(
    instance: &Instance,
    assignment: &BTreeMap<String, f64>,
    tolerance: f64,
) -> Result<(), Vec<FeasibilityViolation>> {
    let mut missing = Vec::new();
    let x: Vec<f64> = instance
        .variables
        .iter()
        .map(|v| match assignment.get(&v.key) {
            Some(&val) => val,
            None => {
                missing.push(FeasibilityViolation::Missing {
                    variable: v.key.clone(),
                });
                0.0
            }
        })
        .collect();
    let mut out = missing;
    if out.is_empty() {
        out = violations_of(instance, &x, tolerance);
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Solves the continuous relaxation.
pub fn solve_lp(instance: &Instance, config: &SolverConfig) -> Result<SolveResult, SolverError> {
    config.validate()?;
    bnb::run(instance, config, None, None, false)
}

/// Branch-and-bound over the integer variables of `instance`.
pub fn solve_mip(
    instance: &Instance,
    config: &SolverConfig,
    warm_start: Option<&WarmStart>,
) -> Result<SolveResult, SolverError> {
    solve_mip_cancellable(instance, config, warm_start, None)
}

pub fn solve_mip_cancellable(
    instance: &Instance,
    config: &SolverConfig,
    warm_start: Option<&WarmStart>,
    cancel: Option<&CancelToken>,
) -> Result<SolveResult, SolverError> {
    config.validate()?;
    bnb::run(instance, config, warm_start, cancel, true)
}

/// The solve contract an external solver must satisfy.
pub trait Backend: Send + Sync {
    fn name(&self) -> &str;
    fn solve(
        &self,
        instance: &Instance,
        config: &SolverConfig,
        warm_start: Option<&WarmStart>,
        cancel: Option<&CancelToken>,
    ) -> Result<SolveResult, SolverError>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct BuiltinBackend;

impl Backend for BuiltinBackend {
    fn name(&self) -> &str {
        "builtin"
    }

    fn solve(
        &self,
        instance: &Instance,
        config: &SolverConfig,
        warm_start: Option<&WarmStart>,
        cancel: Option<&CancelToken>,
    ) -> Result<SolveResult, SolverError> {
        solve_mip_cancellable(instance, config, warm_start, cancel)
    }
}

#[derive(Clone)]
pub struct BackendRegistry {
    backends: BTreeMap<String, Arc<dyn Backend>>,
}

impl fmt::Debug for BackendRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.backends.keys()).finish()
    }
}

impl Default for BackendRegistry {
    fn default() -> Self {
        let mut r = BackendRegistry {
            backends: BTreeMap::new(),
        };
        r.register(Arc::new(BuiltinBackend));
        r
    }
}

impl BackendRegistry {
    pub fn register(&mut self, backend: Arc<dyn Backend>) {
        self.backends.insert(backend.name().to_string(), backend);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Backend>, SolverError> {
        self.backends
            .get(name)
            .cloned()
            .ok_or_else(|| SolverError::BackendUnavailable(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.backends.keys().map(String::as_str)
    }
}

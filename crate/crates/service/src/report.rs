//! Replay rows, criteria aggregates and failure tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use regex::Regex;
use reopt_core::agents::{CaseScore, FailureMode, StepOutcome};
use reopt_core::model::{ModelState, ParameterValue};
use reopt_core::solver::SolveResult;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Scenario-supplied solution metrics, named in a catalog entry's
/// `domain_metrics` object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainMetric {
    /// Sum of a variable family over the sum of a keyed parameter.
    ServedShare { family: String, target: String },
    /// Sum of a variable family, optionally filtered by a regex on flat keys.
    FamilySum {
        family: String,
        #[serde(default)]
        pattern: Option<String>,
    },
}

fn family_sum(solution: &SolveResult, family: &str, pattern: Option<&Regex>) -> f64 {
    let prefix = format!("{family}(");
    solution
        .assignment
        .iter()
        .flatten()
        .filter(|(k, _)| k.starts_with(&prefix) || k.as_str() == family)
        .filter(|(k, _)| pattern.is_none_or(|p| p.is_match(k)))
        .map(|(_, v)| v)
        .sum()
}

impl DomainMetric {
    pub fn evaluate(&self, state: &ModelState, solution: &SolveResult) -> Result<f64, String> {
        match self {
            DomainMetric::ServedShare { family, target } => {
                let total = match state.parameter(target).map(|p| &p.value) {
                    Some(ParameterValue::Keyed(m)) => m.values().sum::<f64>(),
                    Some(ParameterValue::Scalar(v)) => *v,
                    _ => return Err(format!("`{target}` is not a numeric parameter")),
                };
                if total.abs() < 1e-12 {
                    return Ok(1.0);
                }
                Ok(family_sum(solution, family, None) / total)
            }
            DomainMetric::FamilySum { family, pattern } => {
                let re = pattern
                    .as_deref()
                    .map(Regex::new)
                    .transpose()
                    .map_err(|e| e.to_string())?;
                Ok(family_sum(solution, family, re.as_ref()))
            }
        }
    }
}

/// Evaluates every metric named in a `domain_metrics` object.
pub fn evaluate_metrics(spec: &Value, state: &ModelState, solution: &SolveResult) -> Result<BTreeMap<String, f64>, String> {
    let Value::Object(map) = spec else {
        return Err("domain_metrics must be an object".into());
    };
    let mut out = BTreeMap::new();
    for (name, v) in map {
        let m: DomainMetric = serde_json::from_value(v.clone()).map_err(|e| format!("{name}: {e}"))?;
        out.insert(name.clone(), m.evaluate(state, solution).map_err(|e| format!("{name}: {e}"))?);
    }
    Ok(out)
}

/// Raw result of one (instance, prompt, variant) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub instance: String,
    pub prompt_id: String,
    pub variant: String,
    pub outcome: StepOutcome,
    /// `None` when the prompt has no reference.
    pub score: Option<CaseScore>,
    pub reference_objective: Option<f64>,
    pub wall_time: f64,
    #[serde(default)]
    pub domain_metrics: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub instance: String,
    pub prompt_id: String,
    pub variant: String,
    pub status: String,
    pub attempts_used: usize,
    pub strategy: Option<String>,
    pub objective: Option<f64>,
    pub reference_objective: Option<f64>,
    pub delta_obj: Option<f64>,
    pub gap_pct: Option<f64>,
    pub wall_time: f64,
    pub missing_reference: bool,
    pub score: Option<CaseScore>,
    pub domain_metrics: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub variant: String,
    pub scored: usize,
    pub update_correct: usize,
    pub prompt_satisfied: usize,
    pub first_attempt_success: usize,
    pub final_success: usize,
    pub failure_counts: BTreeMap<FailureMode, usize>,
    pub mean_gap_pct: Option<f64>,
}

impl Aggregate {
    pub fn rate(&self, count: usize) -> f64 {
        if self.scored == 0 {
            0.0
        } else {
            count as f64 / self.scored as f64
        }
    }

    /// final ≤ prompt_satisfied ≤ update_correct and first_attempt ≤ final.
    pub fn is_nested(&self) -> bool {
        self.final_success <= self.prompt_satisfied
            && self.prompt_satisfied <= self.update_correct
            && self.first_attempt_success <= self.final_success
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub rows: Vec<ReportRow>,
    /// One per variant, in first-seen order.
    pub aggregates: Vec<Aggregate>,
    pub missing_reference: usize,
}

/// Reference-relative gap in percent; the denominator is floored at 1.
pub fn gap_pct(objective: f64, reference: f64) -> f64 {
    (objective - reference) / reference.abs().max(1.0) * 100.0
}

pub fn compute_report(results: &[CaseResult]) -> ReplayReport {
    let mut report = ReplayReport::default();
    let mut gaps: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in results {
        let objective = if r.outcome.succeeded() { r.outcome.objective() } else { None };
        let delta = objective.zip(r.reference_objective).map(|(o, f)| o - f);
        let gap = objective.zip(r.reference_objective).map(|(o, f)| gap_pct(o, f));
        let missing = r.score.is_none();
        report.missing_reference += missing as usize;
        let pos = match report.aggregates.iter().position(|a| a.variant == r.variant) {
            Some(p) => p,
            None => {
                report.aggregates.push(Aggregate { variant: r.variant.clone(), ..Default::default() });
                report.aggregates.len() - 1
            }
        };
        if let Some(s) = &r.score {
            let a = &mut report.aggregates[pos];
            a.scored += 1;
            a.update_correct += s.update_correct as usize;
            a.prompt_satisfied += s.prompt_satisfied as usize;
            a.first_attempt_success += s.first_attempt_success as usize;
            a.final_success += s.final_success as usize;
            for m in &s.failure_modes {
                *a.failure_counts.entry(*m).or_default() += 1;
            }
            if let Some(g) = gap {
                gaps.entry(r.variant.clone()).or_default().push(g);
            }
        }
        report.rows.push(ReportRow {
            instance: r.instance.clone(),
            prompt_id: r.prompt_id.clone(),
            variant: r.variant.clone(),
            status: if r.outcome.succeeded() { "succeeded" } else { "failed" }.into(),
            attempts_used: r.outcome.attempts_used,
            strategy: r.outcome.strategy.as_ref().map(|s| s.solve_strategy.to_string()),
            objective,
            reference_objective: r.reference_objective,
            delta_obj: delta,
            gap_pct: gap,
            wall_time: r.wall_time,
            missing_reference: missing,
            score: r.score.clone(),
            domain_metrics: r.domain_metrics.clone(),
        });
    }
    for a in &mut report.aggregates {
        if let Some(g) = gaps.get(&a.variant).filter(|g| !g.is_empty()) {
            a.mean_gap_pct = Some(g.iter().sum::<f64>() / g.len() as f64);
        }
    }
    report
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.digits$}"))
}

impl ReplayReport {
    pub fn is_nested(&self) -> bool {
        self.aggregates.iter().all(Aggregate::is_nested)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// Flat row table.
    pub fn to_csv(&self) -> String {
        let metric_names: Vec<String> = self
            .rows
            .iter()
            .flat_map(|r| r.domain_metrics.keys().cloned())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = [
            "instance", "prompt_id", "variant", "status", "attempts_used", "strategy", "objective",
            "reference_objective", "delta_obj", "gap_pct", "wall_time", "update_correct",
            "prompt_satisfied", "first_attempt_success", "final_success", "failure_modes",
            "missing_reference",
        ]
        .map(String::from)
        .to_vec();
        header.extend(metric_names.iter().cloned());
        w.write_record(&header).expect("in-memory csv");
        let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let b = |v: Option<bool>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let s = r.score.as_ref();
            let mut rec = vec![
                r.instance.clone(),
                r.prompt_id.clone(),
                r.variant.clone(),
                r.status.clone(),
                r.attempts_used.to_string(),
                r.strategy.clone().unwrap_or_default(),
                f(r.objective),
                f(r.reference_objective),
                f(r.delta_obj),
                f(r.gap_pct),
                r.wall_time.to_string(),
                b(s.map(|s| s.update_correct)),
                b(s.map(|s| s.prompt_satisfied)),
                b(s.map(|s| s.first_attempt_success)),
                b(s.map(|s| s.final_success)),
                s.map(|s| s.failure_modes.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(";")).unwrap_or_default(),
                r.missing_reference.to_string(),
            ];
            rec.extend(metric_names.iter().map(|m| f(r.domain_metrics.get(m).copied())));
            w.write_record(&rec).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
    }

    /// Human-readable rows, criteria and failure tables.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<10} {:<8} {:<18} {:<10} {:>3} {:<15} {:>12} {:>12} {:>10} {:>8} {:>8}",
            "instance", "prompt", "variant", "status", "att", "strategy", "objective", "reference", "d_obj", "gap%", "time_s"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<10} {:<8} {:<18} {:<10} {:>3} {:<15} {:>12} {:>12} {:>10} {:>8} {:>8.3}",
                r.instance,
                r.prompt_id,
                r.variant,
                r.status,
                r.attempts_used,
                r.strategy.as_deref().unwrap_or("-"),
                opt(r.objective, 4),
                opt(r.reference_objective, 4),
                opt(r.delta_obj, 4),
                opt(r.gap_pct, 2),
                r.wall_time,
            );
        }
        out.push_str("\nCRITERIA\n");
        let _ = writeln!(
            out,
            "{:<18} {:>6} {:>14} {:>16} {:>14} {:>14}",
            "variant", "scored", "update_correct", "prompt_satisfied", "first_attempt", "final_success"
        );
        for a in &self.aggregates {
            let c = |n: usize| format!("{n}/{} ({:.0}%)", a.scored, 100.0 * a.rate(n));
            let _ = writeln!(
                out,
                "{:<18} {:>6} {:>14} {:>16} {:>14} {:>14}",
                a.variant,
                a.scored,
                c(a.update_correct),
                c(a.prompt_satisfied),
                c(a.first_attempt_success),
                c(a.final_success)
            );
        }
        out.push_str("\nFAILURE MODES\n");
        let _ = write!(out, "{:<18}", "variant");
        for m in FailureMode::ALL {
            let _ = write!(out, " {:>16}", m.as_str());
        }
        out.push('\n');
        for a in &self.aggregates {
            let _ = write!(out, "{:<18}", a.variant);
            for m in FailureMode::ALL {
                let _ = write!(out, " {:>16}", a.failure_counts.get(&m).copied().unwrap_or(0));
            }
            out.push('\n');
        }
        if self.missing_reference > 0 {
            let _ = writeln!(out, "\n{} row(s) without a reference were excluded from the aggregates", self.missing_reference);
        }
        out
    }
}

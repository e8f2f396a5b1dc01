use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::model::{IndexKey, ModelState, ParameterValue};
use crate::solver::SolveResult;

fn default_tol() -> f64 {
    1e-6
}

/// Declarative predicates over a patched state and its incumbent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum PromptCheck {
    VarAtMost {
        family: String,
        index: IndexKey,
        value: f64,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    VarAtLeast {
        family: String,
        index: IndexKey,
        value: f64,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    VarEquals {
        family: String,
        index: IndexKey,
        value: f64,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    ParamEquals {
        param: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        key: Option<IndexKey>,
        value: f64,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    /// Sum of a family's values, optionally restricted by a regex on flat keys.
    SumAtMost {
        family: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pattern: Option<String>,
        value: f64,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    /// Served share: sum of `family` over the sum of parameter `target`.
    #[serde(alias = "metric_at_least")]
    FulfillmentAtLeast {
        family: String,
        target: String,
        ratio: f64,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    ObjectiveAtMost {
        value: f64,
        #[serde(default = "default_tol")]
        tol: f64,
    },
}

fn var(result: &SolveResult, family: &str, index: &IndexKey) -> Result<f64, String> {
    let key = index.flat(family);
    result
        .value(&key)
        .ok_or_else(|| format!("no incumbent value for `{key}`"))
}

fn family_values<'a>(
    result: &'a SolveResult,
    family: &'a str,
) -> impl Iterator<Item = (&'a String, f64)> + 'a {
    let prefix = format!("{family}(");
    result
        .assignment
        .iter()
        .flatten()
        .filter(move |(k, _)| k.starts_with(&prefix) || k.as_str() == family)
        .map(|(k, v)| (k, *v))
}

pub fn evaluate_check(
    check: &PromptCheck,
    state: &ModelState,
    result: &SolveResult,
) -> Result<(), String> {
    let fail = |what: String| Err(what);
    match check {
        PromptCheck::VarAtMost { family, index, value, tol } => {
            let x = var(result, family, index)?;
            if x > value + tol {
                return fail(format!("{} = {x} exceeds {value}", index.flat(family)));
            }
        }
        PromptCheck::VarAtLeast { family, index, value, tol } => {
            let x = var(result, family, index)?;
            if x < value - tol {
                return fail(format!("{} = {x} is below {value}", index.flat(family)));
            }
        }
        PromptCheck::VarEquals { family, index, value, tol } => {
            let x = var(result, family, index)?;
            if (x - value).abs() > *tol {
                return fail(format!("{} = {x}, expected {value}", index.flat(family)));
            }
        }
        PromptCheck::ParamEquals { param, key, value, tol } => {
            let entry = state
                .parameter(param)
                .ok_or_else(|| format!("unknown parameter `{param}`"))?;
            let got = match (&entry.value, key) {
                (ParameterValue::Scalar(v), None) => *v,
                (ParameterValue::Keyed(m), Some(k)) => *m
                    .get(k)
                    .ok_or_else(|| format!("parameter `{param}` has no key {k}"))?,
                _ => return fail(format!("parameter `{param}` has a different shape")),
            };
            if (got - value).abs() > *tol {
                return fail(format!("{param} = {got}, expected {value}"));
            }
        }
        PromptCheck::SumAtMost { family, pattern, value, tol } => {
            let re = pattern
                .as_deref()
                .map(Regex::new)
                .transpose()
                .map_err(|e| e.to_string())?;
            let total: f64 = family_values(result, family)
                .filter(|(k, _)| re.as_ref().is_none_or(|r| r.is_match(k)))
                .map(|(_, v)| v)
                .sum();
            if total > value + tol {
                return fail(format!("sum of {family} = {total} exceeds {value}"));
            }
        }
        PromptCheck::FulfillmentAtLeast { family, target, ratio, tol } => {
            let served: f64 = family_values(result, family).map(|(_, v)| v).sum();
            let wanted: f64 = match state.parameter(target).map(|p| &p.value) {
                Some(ParameterValue::Keyed(m)) => m.values().sum(),
                Some(ParameterValue::Scalar(v)) => *v,
                _ => return fail(format!("unknown numeric parameter `{target}`")),
            };
            let share = if wanted.abs() < 1e-12 { 1.0 } else { served / wanted };
            if share < ratio - tol {
                return fail(format!("fulfillment {share:.4} is below {ratio}"));
            }
        }
        PromptCheck::ObjectiveAtMost { value, tol } => {
            let obj = result.objective.ok_or("no incumbent objective")?;
            if obj > value + tol {
                return fail(format!("objective {obj} exceeds {value}"));
            }
        }
    }
    Ok(())
}

/// All failed check messages; empty when every check passes.
pub fn evaluate_checks(checks: &[PromptCheck], state: &ModelState, result: &SolveResult) -> Vec<String> {
    checks
        .iter()
        .filter_map(|c| evaluate_check(c, state, result).err())
        .collect()
}

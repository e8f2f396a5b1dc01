//! The deterministic programmer: label canonicalization, index coercion and
//! rewriting of row rhs edits into parameter edits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::action::{Action, ParamUpdate};
use super::apply::family_rows;
use super::{ActionSet, Patch};
use crate::model::{
    is_valid_component, CoefExpr, IndexKey, KeyPart, LhsSpec, ModelState, ParameterValue,
    SemanticRegistry,
};

#[derive(Clone, Debug, PartialEq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormalizeError {
    #[error("patch {index}: label `{label}` maps to no registered id")]
    UnmappableLabel { index: usize, label: String },
    #[error("patch {index}: {message}")]
    Schema { index: usize, message: String },
}

fn squash(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

fn canonical_component(state: &ModelState, c: &str) -> Option<String> {
    let reg = state.entity_registry();
    if reg.values().any(|id| id == c) {
        return Some(c.to_string());
    }
    if let Some(id) = reg.get(c) {
        return Some(id.clone());
    }
    let wanted = squash(c);
    if let Some((_, id)) = reg.iter().find(|(label, _)| squash(label) == wanted) {
        return Some(id.clone());
    }
    is_valid_component(c).then(|| c.to_string())
}

fn canonical_key(state: &ModelState, key: &IndexKey, index: usize) -> Result<IndexKey, NormalizeError> {
    key.parts()
        .iter()
        .map(|c| {
            canonical_component(state, c).ok_or_else(|| NormalizeError::UnmappableLabel {
                index,
                label: c.clone(),
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .map(IndexKey::new)
}

/// Resolves which parameter entry an expression reads, if any.
fn param_ref(
    state: &ModelState,
    expr: &CoefExpr,
    var: Option<&IndexKey>,
    row: Option<&IndexKey>,
) -> Option<(String, IndexKey)> {
    let CoefExpr::Param { param, key } = expr else {
        return None;
    };
    let mut parts = Vec::with_capacity(key.len());
    for p in key {
        parts.push(match p {
            KeyPart::Var(i) => var?.get(*i)?.to_string(),
            KeyPart::Row(i) => row?.get(*i)?.to_string(),
            KeyPart::Lit(s) => s.clone(),
        });
    }
    let _ = state.parameter(param)?;
    Some((param.clone(), IndexKey::new(parts)))
}

/// Counts places in the state that read entry `key` of parameter `param`.
/// Returns `None` when a use cannot be resolved statically.
fn uses_of(
    state: &ModelState,
    registry: &SemanticRegistry,
    param: &str,
    key: &IndexKey,
) -> Option<usize> {
    let mut count = 0;
    let hit = |r: Option<(String, IndexKey)>| r.is_some_and(|(p, k)| p == param && &k == key);
    for comp in state.objective_components() {
        for t in &comp.terms {
            if t.coef.param_name() == Some(param) {
                count += usize::from(hit(param_ref(state, &t.coef, Some(&t.index), None)));
            }
        }
    }
    for fam in state.constraint_families() {
        match &fam.lhs_spec {
            LhsSpec::ExplicitTerms { rows } => {
                for (row, terms) in rows {
                    for t in terms {
                        if t.coef.param_name() == Some(param) {
                            count += usize::from(hit(param_ref(state, &t.coef, Some(&t.index), Some(row))));
                        }
                    }
                }
            }
            LhsSpec::IndexedSum { coef, .. } => {
                if coef.param_name() == Some(param) {
                    return None;
                }
            }
            LhsSpec::Semantic { payload, .. } => {
                // Packs may read parameters by name from the payload.
                if payload.values().any(|v| v.as_str() == Some(param)) {
                    return None;
                }
            }
        }
        let rows = family_rows(state, fam, registry).ok()?;
        for (row, _) in rows {
            if let Some(e) = fam.rhs_spec.expr_for(&row) {
                if e.param_name() == Some(param) {
                    count += usize::from(hit(param_ref(state, e, None, Some(&row))));
                }
            }
        }
    }
    Some(count)
}

/// An rhs edit on a row whose rhs reads one parameter entry that nothing
/// else reads becomes an edit of that entry.
fn rewrite(state: &ModelState, registry: &SemanticRegistry, action: Action) -> Action {
    let Action::UpdateConstraintRhs {
        family,
        row,
        change,
    } = &action
    else {
        return action;
    };
    let Some(fam) = state.constraint_family(family) else {
        return action;
    };
    let Some(expr) = fam.rhs_spec.expr_for(row) else {
        return action;
    };
    let Some((param, key)) = param_ref(state, expr, None, Some(row)) else {
        return action;
    };
    let row_exists = family_rows(state, fam, registry)
        .map(|rows| rows.iter().any(|(k, _)| k == row))
        .unwrap_or(false);
    if !row_exists || uses_of(state, registry, &param, &key) != Some(1) {
        return action;
    }
    let key = match state.parameter(&param).map(|p| &p.value) {
        Some(ParameterValue::Keyed(map)) if map.contains_key(&key) => Some(key),
        Some(ParameterValue::Scalar(_)) if key.arity() == 0 => None,
        _ => return action,
    };
    Action::UpdateParameter {
        name: param,
        key,
        update: ParamUpdate::Number(*change),
    }
}

/// Canonicalizes every patch of the set. The result is deterministic and
/// normalizing it again changes nothing.
pub fn normalize_action_set(
    actions: &ActionSet,
    state: &ModelState,
) -> Result<ActionSet, NormalizeError> {
    normalize_with(actions, state, &SemanticRegistry::builtin())
}

pub(crate) fn normalize_with(
    actions: &ActionSet,
    state: &ModelState,
    registry: &SemanticRegistry,
) -> Result<ActionSet, NormalizeError> {
    let mut out = Vec::with_capacity(actions.len());
    for (i, patch) in actions.actions.iter().enumerate() {
        let mut action = patch.interpret().map_err(|v| NormalizeError::Schema {
            index: i,
            message: v.to_string(),
        })?;
        match &mut action {
            Action::UpdateParameter { key: Some(k), .. } => *k = canonical_key(state, k, i)?,
            Action::UpdateBound { index, .. } => *index = canonical_key(state, index, i)?,
            Action::UpdateConstraintRhs { row, .. } => *row = canonical_key(state, row, i)?,
            Action::UpdateObjectiveCoeff { index, .. } => *index = canonical_key(state, index, i)?,
            _ => {}
        }
        let action = rewrite(state, registry, action);
        let mut canon: Patch = action.to_patch();
        canon.notes = patch.notes.clone();
        out.push(canon);
    }
    Ok(ActionSet::new(out))
}

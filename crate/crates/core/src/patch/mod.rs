//! Patch documents, the deterministic normalizer, atomic application and
//! state diffs.

mod action;
mod apply;
mod diff;
mod normalize;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};
use thiserror::Error;

pub use action::{Action, BoundSide, Change, ParamUpdate, ScaleOrSet};
pub use apply::{
    apply_action_set, apply_action_set_with, apply_patch, apply_patch_with, validate_patch,
    validate_patch_with, ApplyContext, ApplyError, Violation,
};
pub use diff::{diff_states, replay, state_from_tree, state_tree, DiffEntry, StateDiff};
pub use normalize::{normalize_action_set, NormalizeError};
pub(crate) use normalize::normalize_with;

use crate::llm::extract_json;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    UpdateParameter,
    UpdateBound,
    UpdateConstraintRhs,
    UpdateConstraintLhs,
    UpdateObjectiveCoeff,
    UpdateObjectiveWeight,
    UpdateCoefficient,
    FixVariablesByPattern,
    UpdateConstraintRhsByPattern,
    AddVariableFamily,
    AddConstraintFamily,
    RemoveConstraintFamily,
    AddObjectiveComponent,
}

impl OpKind {
    pub const ALL: [OpKind; 13] = [
        OpKind::UpdateParameter,
        OpKind::UpdateBound,
        OpKind::UpdateConstraintRhs,
        OpKind::UpdateConstraintLhs,
        OpKind::UpdateObjectiveCoeff,
        OpKind::UpdateObjectiveWeight,
        OpKind::UpdateCoefficient,
        OpKind::FixVariablesByPattern,
        OpKind::UpdateConstraintRhsByPattern,
        OpKind::AddVariableFamily,
        OpKind::AddConstraintFamily,
        OpKind::RemoveConstraintFamily,
        OpKind::AddObjectiveComponent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::UpdateParameter => "UPDATE_PARAMETER",
            OpKind::UpdateBound => "UPDATE_BOUND",
            OpKind::UpdateConstraintRhs => "UPDATE_CONSTRAINT_RHS",
            OpKind::UpdateConstraintLhs => "UPDATE_CONSTRAINT_LHS",
            OpKind::UpdateObjectiveCoeff => "UPDATE_OBJECTIVE_COEFF",
            OpKind::UpdateObjectiveWeight => "UPDATE_OBJECTIVE_WEIGHT",
            OpKind::UpdateCoefficient => "UPDATE_COEFFICIENT",
            OpKind::FixVariablesByPattern => "FIX_VARIABLES_BY_PATTERN",
            OpKind::UpdateConstraintRhsByPattern => "UPDATE_CONSTRAINT_RHS_BY_PATTERN",
            OpKind::AddVariableFamily => "ADD_VARIABLE_FAMILY",
            OpKind::AddConstraintFamily => "ADD_CONSTRAINT_FAMILY",
            OpKind::RemoveConstraintFamily => "REMOVE_CONSTRAINT_FAMILY",
            OpKind::AddObjectiveComponent => "ADD_OBJECTIVE_COMPONENT",
        }
    }

    /// Ops that add or remove whole families.
    pub fn is_structural(self) -> bool {
        matches!(
            self,
            OpKind::AddVariableFamily
                | OpKind::AddConstraintFamily
                | OpKind::RemoveConstraintFamily
                | OpKind::AddObjectiveComponent
                | OpKind::UpdateConstraintLhs
        )
    }

    pub fn is_pattern(self) -> bool {
        matches!(
            self,
            OpKind::UpdateCoefficient
                | OpKind::FixVariablesByPattern
                | OpKind::UpdateConstraintRhsByPattern
        )
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OpKind {
    type Err = PatchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.trim().to_ascii_uppercase();
        OpKind::ALL
            .into_iter()
            .find(|op| op.name() == upper)
            .ok_or_else(|| PatchError::UnknownOp(s.to_string()))
    }
}

impl Serialize for OpKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for OpKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One structured edit in wire form. `scope` and `update` stay as raw JSON
/// until [`Patch::interpret`] gives them op-specific meaning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub op: OpKind,
    #[serde(default)]
    pub target: String,
    #[serde(default)]
    pub scope: Value,
    #[serde(default)]
    pub update: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

impl Patch {
    pub fn new(op: OpKind, target: impl Into<String>, scope: Value, update: Value) -> Self {
        let update = match update {
            Value::Object(m) => m,
            _ => Map::new(),
        };
        Patch {
            op,
            target: target.into(),
            scope,
            update,
            notes: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ActionSet {
    pub actions: Vec<Patch>,
}

impl ActionSet {
    pub fn new(actions: Vec<Patch>) -> Self {
        ActionSet { actions }
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    /// Names of the families and parameters the set targets (pattern ops excluded).
    pub fn targets(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for p in &self.actions {
            if !p.op.is_pattern() && !out.contains(&p.target) {
                out.push(p.target.clone());
            }
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlannerOutput {
    pub edit_summary: String,
    #[serde(default)]
    pub affected_sets: Map<String, Value>,
    #[serde(default)]
    pub relevant_components: Vec<String>,
    #[serde(default)]
    pub candidate_action_sets: Vec<ActionSet>,
    #[serde(default)]
    pub planning_hints: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intention: Option<String>,
}

impl PlannerOutput {
    pub fn hint(&self, key: &str) -> Option<&str> {
        self.planning_hints.get(key).and_then(Value::as_str)
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum PatchError {
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("unknown op `{0}`")]
    UnknownOp(String),
    #[error("malformed patch {index}: {message}")]
    MalformedPatch { index: usize, message: String },
}

fn parse_patch(index: usize, value: &Value) -> Result<Patch, PatchError> {
    let obj = value.as_object().ok_or_else(|| PatchError::MalformedPatch {
        index,
        message: "patch must be an object".into(),
    })?;
    let op = match obj.get("op") {
        Some(Value::String(s)) => s.parse::<OpKind>()?,
        Some(_) => {
            return Err(PatchError::MalformedPatch {
                index,
                message: "`op` must be a string".into(),
            })
        }
        None => {
            return Err(PatchError::MalformedPatch {
                index,
                message: "missing `op`".into(),
            })
        }
    };
    let target = match obj.get("target") {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(other) => {
            return Err(PatchError::MalformedPatch {
                index,
                message: format!("`target` must be a string, got {other}"),
            })
        }
    };
    let update = match obj.get("update") {
        None | Some(Value::Null) => Map::new(),
        Some(Value::Object(m)) => m.clone(),
        Some(other) => {
            return Err(PatchError::MalformedPatch {
                index,
                message: format!("`update` must be an object, got {other}"),
            })
        }
    };
    let notes = obj.get("notes").and_then(|v| match v {
        Value::String(s) => Some(s.clone()),
        Value::Null => None,
        other => Some(other.to_string()),
    });
    Ok(Patch {
        op,
        target,
        scope: obj.get("scope").cloned().unwrap_or(Value::Null),
        update,
        notes,
    })
}

fn parse_actions(value: &Value, offset: &mut usize) -> Result<ActionSet, PatchError> {
    let list = match value {
        Value::Array(items) => items,
        Value::Object(m) => match m.get("actions") {
            Some(Value::Array(items)) => items,
            _ => return Err(PatchError::MissingKey("actions".into())),
        },
        _ => {
            return Err(PatchError::MalformedDocument(
                "candidate action set must be an object with `actions`".into(),
            ))
        }
    };
    let mut actions = Vec::with_capacity(list.len());
    for item in list {
        actions.push(parse_patch(*offset, item)?);
        *offset += 1;
    }
    Ok(ActionSet { actions })
}

fn string_list(v: Option<&Value>) -> Vec<String> {
    match v {
        Some(Value::Array(items)) => items
            .iter()
            .map(|i| match i {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            })
            .collect(),
        Some(Value::String(s)) => vec![s.clone()],
        _ => Vec::new(),
    }
}

/// Parses raw planner text: fences are stripped and the outermost JSON object is used.
pub fn parse_planner_output(document: &str) -> Result<PlannerOutput, PatchError> {
    let value = extract_json(document).map_err(|e| PatchError::MalformedDocument(e.to_string()))?;
    planner_output_from_value(&value)
}

pub fn planner_output_from_value(value: &Value) -> Result<PlannerOutput, PatchError> {
    let obj = value
        .as_object()
        .ok_or_else(|| PatchError::MalformedDocument("top level must be an object".into()))?;
    let edit_summary = match obj.get("edit_summary") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Null) | None => return Err(PatchError::MissingKey("edit_summary".into())),
        Some(other) => other.to_string(),
    };
    let mut offset = 0;
    let candidate_action_sets = match (obj.get("candidate_action_sets"), obj.get("actions")) {
        (Some(Value::Array(sets)), _) => sets
            .iter()
            .map(|s| parse_actions(s, &mut offset))
            .collect::<Result<Vec<_>, _>>()?,
        (Some(Value::Null) | None, Some(actions @ Value::Array(_))) => {
            vec![parse_actions(actions, &mut offset)?]
        }
        (Some(_), _) => {
            return Err(PatchError::MalformedDocument(
                "`candidate_action_sets` must be a list".into(),
            ))
        }
        (None, _) => return Err(PatchError::MissingKey("candidate_action_sets".into())),
    };
    let map_or_empty = |key: &str| match obj.get(key) {
        Some(Value::Object(m)) => m.clone(),
        _ => Map::new(),
    };
    Ok(PlannerOutput {
        edit_summary,
        affected_sets: map_or_empty("affected_sets"),
        relevant_components: string_list(obj.get("relevant_components")),
        candidate_action_sets,
        planning_hints: map_or_empty("planning_hints"),
        intention: obj.get("intention").and_then(Value::as_str).map(str::to_string),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const P1: &str = r#"{
        "edit_summary": "set supply of plant P1 to zero",
        "affected_sets": {"plants": ["P1"]},
        "relevant_components": ["supply", "supply_constraints", "flows"],
        "candidate_action_sets": [{"actions": [
            {"op": "UPDATE_PARAMETER", "target": "supply", "scope": null,
             "update": {"key": "P1", "value": 0.0}}
        ]}]
    }"#;

    #[test]
    fn parses_planner_document() {
        let out = parse_planner_output(P1).unwrap();
        assert_eq!(out.candidate_action_sets.len(), 1);
        let p = &out.candidate_action_sets[0].actions[0];
        assert_eq!(p.op, OpKind::UpdateParameter);
        assert_eq!(p.target, "supply");
        assert_eq!(p.update["value"], 0.0);
    }

    #[test]
    fn fenced_equals_unfenced() {
        let fenced = format!("Here you go:\n```json\n{P1}\n```\n");
        assert_eq!(parse_planner_output(&fenced), parse_planner_output(P1));
    }

    #[test]
    fn unknown_op_is_named() {
        let doc = r#"{"edit_summary":"x","candidate_action_sets":[{"actions":[{"op":"DELETE_EVERYTHING","target":"supply"}]}]}"#;
        assert_eq!(
            parse_planner_output(doc),
            Err(PatchError::UnknownOp("DELETE_EVERYTHING".into()))
        );
    }

    #[test]
    fn bare_actions_and_missing_keys() {
        let doc = r#"{"edit_summary":"x","actions":[{"op":"UPDATE_PARAMETER","target":"supply","update":{"key":"P1","value":1}}]}"#;
        assert_eq!(parse_planner_output(doc).unwrap().candidate_action_sets.len(), 1);
        let doc = r#"{"candidate_action_sets":[]}"#;
        assert_eq!(
            parse_planner_output(doc),
            Err(PatchError::MissingKey("edit_summary".into()))
        );
        let doc = r#"{"edit_summary":"x"}"#;
        assert_eq!(
            parse_planner_output(doc),
            Err(PatchError::MissingKey("candidate_action_sets".into()))
        );
        assert!(matches!(
            parse_planner_output("no json here"),
            Err(PatchError::MalformedDocument(_))
        ));
    }
}

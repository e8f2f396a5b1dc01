use serde_json::{json, Map, Value};

use super::apply::Violation;
use super::{OpKind, Patch};
use crate::model::{
    number_to_component, ConstraintFamily, IndexKey, LhsSpec, ObjectiveComponent, ParameterValue,
    VariableFamily,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Change {
    Value(f64),
    Delta(f64),
}

impl Change {
    pub fn apply_to(self, current: f64) -> f64 {
        match self {
            Change::Value(v) => v,
            Change::Delta(d) => current + d,
        }
    }

    fn to_update(self) -> Map<String, Value> {
        let mut m = Map::new();
        match self {
            Change::Value(v) => m.insert("value".into(), json!(v)),
            Change::Delta(d) => m.insert("delta".into(), json!(d)),
        };
        m
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScaleOrSet {
    Set(f64),
    Scale(f64),
}

impl ScaleOrSet {
    pub fn apply_to(self, current: f64) -> f64 {
        match self {
            ScaleOrSet::Set(v) => v,
            ScaleOrSet::Scale(s) => current * s,
        }
    }

    fn to_update(self) -> Map<String, Value> {
        let mut m = Map::new();
        match self {
            ScaleOrSet::Set(v) => m.insert("value".into(), json!(v)),
            ScaleOrSet::Scale(s) => m.insert("scale".into(), json!(s)),
        };
        m
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundSide {
    Lower,
    Upper,
    Both,
}

impl BoundSide {
    fn name(self) -> &'static str {
        match self {
            BoundSide::Lower => "lower",
            BoundSide::Upper => "upper",
            BoundSide::Both => "both",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ParamUpdate {
    Number(Change),
    Replace(ParameterValue),
}

/// A patch with its scope and update resolved into typed fields.
#[derive(Clone, Debug, PartialEq)]
pub enum Action {
    UpdateParameter {
        name: String,
        key: Option<IndexKey>,
        update: ParamUpdate,
    },
    UpdateBound {
        family: String,
        index: IndexKey,
        side: BoundSide,
        value: f64,
    },
    UpdateConstraintRhs {
        family: String,
        row: IndexKey,
        change: Change,
    },
    UpdateConstraintLhs {
        family: String,
        lhs: LhsSpec,
    },
    UpdateObjectiveCoeff {
        component: String,
        var_family: Option<String>,
        index: IndexKey,
        change: Change,
    },
    UpdateObjectiveWeight {
        component: String,
        change: Change,
    },
    UpdateCoefficient {
        row_pattern: String,
        var_pattern: String,
        change: ScaleOrSet,
    },
    FixVariablesByPattern {
        pattern: String,
        families: Vec<String>,
        value: f64,
    },
    UpdateRhsByPattern {
        pattern: String,
        change: ScaleOrSet,
    },
    AddVariableFamily(VariableFamily),
    AddConstraintFamily(ConstraintFamily),
    RemoveConstraintFamily(String),
    AddObjectiveComponent(ObjectiveComponent),
}

fn schema(msg: impl Into<String>) -> Violation {
    Violation::Schema {
        message: msg.into(),
    }
}

pub(crate) fn number(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

fn component(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.trim().to_string()),
        Value::Number(n) => Some(number_to_component(n)),
        _ => None,
    }
}

/// Coerces an index given as a list, a scalar, or a string like `(P2, C2)`.
pub(crate) fn index_from_value(v: &Value) -> Option<IndexKey> {
    match v {
        Value::Array(items) => {
            let mut parts = Vec::with_capacity(items.len());
            for item in items {
                match item {
                    // A doubly wrapped single index, e.g. [["P2","C2"]].
                    Value::Array(_) if items.len() == 1 => return index_from_value(item),
                    other => parts.push(component(other)?),
                }
            }
            Some(IndexKey::new(parts))
        }
        Value::String(s) => {
            let t = s.trim();
            let inner = t
                .strip_prefix('(')
                .and_then(|r| r.strip_suffix(')'))
                .or_else(|| t.strip_prefix('[').and_then(|r| r.strip_suffix(']')))
                .unwrap_or(t);
            if inner.contains(',') {
                Some(IndexKey::new(
                    inner
                        .split(',')
                        .map(|p| p.trim().trim_matches(|c| c == '"' || c == '\'').to_string()),
                ))
            } else {
                Some(IndexKey::single(inner.trim()))
            }
        }
        Value::Number(n) => Some(IndexKey::single(number_to_component(n))),
        Value::Object(m) => ["index", "key", "row"]
            .iter()
            .find_map(|k| m.get(*k))
            .and_then(index_from_value),
        _ => None,
    }
}

fn field<'a>(v: &'a Value, names: &[&str]) -> Option<&'a Value> {
    let m = v.as_object()?;
    names
        .iter()
        .find_map(|n| m.get(*n))
        .filter(|v| !v.is_null())
}

fn text_field(v: &Value, names: &[&str]) -> Option<String> {
    field(v, names).and_then(Value::as_str).map(str::to_string)
}

fn scope_index(scope: &Value, names: &[&str]) -> Option<IndexKey> {
    match scope {
        Value::Null => None,
        Value::Object(_) => field(scope, names).and_then(index_from_value),
        other => index_from_value(other),
    }
}

fn change(update: &Map<String, Value>, extra_value_keys: &[&str]) -> Result<Change, Violation> {
    let value = std::iter::once("value")
        .chain(extra_value_keys.iter().copied())
        .find_map(|k| update.get(k).filter(|v| !v.is_null()));
    let delta = update.get("delta").filter(|v| !v.is_null());
    match (value, delta) {
        (Some(v), None) => number(v)
            .map(Change::Value)
            .ok_or_else(|| schema(format!("update.value must be a number, got {v}"))),
        (None, Some(d)) => number(d)
            .map(Change::Delta)
            .ok_or_else(|| schema(format!("update.delta must be a number, got {d}"))),
        (Some(_), Some(_)) => Err(schema("update carries both value and delta")),
        (None, None) => Err(schema("update needs exactly one of value or delta")),
    }
}

fn scale_or_set(update: &Map<String, Value>) -> Result<ScaleOrSet, Violation> {
    let value = update.get("value").filter(|v| !v.is_null());
    let scale = update.get("scale").filter(|v| !v.is_null());
    match (value, scale) {
        (Some(v), None) => number(v)
            .map(ScaleOrSet::Set)
            .ok_or_else(|| schema(format!("update.value must be a number, got {v}"))),
        (None, Some(s)) => number(s)
            .map(ScaleOrSet::Scale)
            .ok_or_else(|| schema(format!("update.scale must be a number, got {s}"))),
        (Some(_), Some(_)) => Err(schema("update carries both value and scale")),
        (None, None) => Err(schema("update needs exactly one of value or scale")),
    }
}

fn pattern(patch: &Patch, scope_keys: &[&str]) -> Result<String, Violation> {
    if let Some(p) = text_field(&patch.scope, scope_keys) {
        return Ok(p);
    }
    if !patch.target.is_empty() {
        return Ok(patch.target.clone());
    }
    Err(schema(format!("{} needs a pattern", patch.op)))
}

fn definition<T: serde::de::DeserializeOwned>(patch: &Patch) -> Result<T, Violation> {
    let mut def = match ["family", "definition", "component"]
        .iter()
        .find_map(|k| patch.update.get(*k))
    {
        Some(Value::Object(m)) => m.clone(),
        Some(other) => return Err(schema(format!("family definition must be an object, got {other}"))),
        None => patch.update.clone(),
    };
    if !def.contains_key("name") && !patch.target.is_empty() {
        def.insert("name".into(), Value::String(patch.target.clone()));
    }
    serde_json::from_value(Value::Object(def))
        .map_err(|e| schema(format!("invalid {} payload: {e}", patch.op)))
}

fn require_target(patch: &Patch) -> Result<String, Violation> {
    if patch.target.trim().is_empty() {
        Err(schema(format!("{} needs a target", patch.op)))
    } else {
        Ok(patch.target.trim().to_string())
    }
}

impl Patch {
    /// Resolves scope and update into a typed action. Only the shape is
    /// checked here; references are checked against a state on application.
    pub fn interpret(&self) -> Result<Action, Violation> {
        let u = &self.update;
        let upd = Value::Object(u.clone());
        Ok(match self.op {
            OpKind::UpdateParameter => {
                let key = field(&upd, &["key", "index"])
                    .map(|v| index_from_value(v).ok_or_else(|| schema(format!("bad key {v}"))))
                    .transpose()?
                    .or_else(|| scope_index(&self.scope, &["key", "index"]));
                let update = match u.get("value") {
                    Some(v @ (Value::Object(_) | Value::Array(_))) => {
                        if key.is_some() {
                            return Err(schema("a keyed update needs a numeric value"));
                        }
                        ParamUpdate::Replace(replacement_value(v)?)
                    }
                    _ => ParamUpdate::Number(change(u, &[])?),
                };
                Action::UpdateParameter {
                    name: require_target(self)?,
                    key,
                    update,
                }
            }
            OpKind::UpdateBound => {
                let index = scope_index(&self.scope, &["index", "key"])
                    .or_else(|| field(&upd, &["index"]).and_then(index_from_value))
                    .ok_or_else(|| schema("UPDATE_BOUND needs an index in scope"))?;
                let (side, value) = match text_field(&upd, &["bound_type", "bound", "side"]) {
                    Some(t) => {
                        let side = match t.to_ascii_lowercase().as_str() {
                            "lower" | "lb" | "min" => BoundSide::Lower,
                            "upper" | "ub" | "max" => BoundSide::Upper,
                            "both" | "fix" | "fixed" => BoundSide::Both,
                            other => return Err(schema(format!("unknown bound_type `{other}`"))),
                        };
                        let v = u
                            .get("value")
                            .and_then(number)
                            .ok_or_else(|| schema("UPDATE_BOUND needs a numeric update.value"))?;
                        (side, v)
                    }
                    None => match (u.get("lower").and_then(number), u.get("upper").and_then(number)) {
                        (Some(l), None) => (BoundSide::Lower, l),
                        (None, Some(h)) => (BoundSide::Upper, h),
                        _ => return Err(schema("UPDATE_BOUND needs bound_type and value")),
                    },
                };
                Action::UpdateBound {
                    family: require_target(self)?,
                    index,
                    side,
                    value,
                }
            }
            OpKind::UpdateConstraintRhs => {
                let row = scope_index(&self.scope, &["row", "index", "key"])
                    .or_else(|| field(&upd, &["row", "index"]).and_then(index_from_value))
                    .ok_or_else(|| schema("UPDATE_CONSTRAINT_RHS needs a row in scope"))?;
                Action::UpdateConstraintRhs {
                    family: require_target(self)?,
                    row,
                    change: change(u, &["rhs"])?,
                }
            }
            OpKind::UpdateConstraintLhs => {
                let spec = field(&upd, &["lhs_spec", "lhs"])
                    .ok_or_else(|| schema("UPDATE_CONSTRAINT_LHS needs update.lhs_spec"))?;
                let lhs = serde_json::from_value(spec.clone())
                    .map_err(|e| schema(format!("invalid lhs_spec: {e}")))?;
                Action::UpdateConstraintLhs {
                    family: require_target(self)?,
                    lhs,
                }
            }
            OpKind::UpdateObjectiveCoeff => {
                let var_family = text_field(&self.scope, &["var_family", "variable", "family"])
                    .or_else(|| text_field(&upd, &["var_family", "variable"]));
                let index = scope_index(&self.scope, &["index", "key"])
                    .or_else(|| field(&upd, &["index", "key"]).and_then(index_from_value))
                    .ok_or_else(|| schema("UPDATE_OBJECTIVE_COEFF needs an index in scope"))?;
                Action::UpdateObjectiveCoeff {
                    component: require_target(self)?,
                    var_family,
                    index,
                    change: change(u, &["coef", "coefficient"])?,
                }
            }
            OpKind::UpdateObjectiveWeight => Action::UpdateObjectiveWeight {
                component: require_target(self)?,
                change: change(u, &["weight"])?,
            },
            OpKind::UpdateCoefficient => Action::UpdateCoefficient {
                row_pattern: pattern(self, &["row_pattern", "constraint_pattern"])?,
                var_pattern: text_field(&self.scope, &["var_pattern", "variable_pattern"])
                    .or_else(|| text_field(&upd, &["var_pattern", "variable_pattern"]))
                    .ok_or_else(|| schema("UPDATE_COEFFICIENT needs scope.var_pattern"))?,
                change: scale_or_set(u)?,
            },
            OpKind::FixVariablesByPattern => Action::FixVariablesByPattern {
                pattern: pattern(self, &["pattern", "var_pattern"])?,
                families: match field(&self.scope, &["families", "family"]) {
                    Some(Value::Array(items)) => {
                        items.iter().filter_map(Value::as_str).map(str::to_string).collect()
                    }
                    Some(Value::String(s)) => vec![s.clone()],
                    _ => Vec::new(),
                },
                value: u
                    .get("value")
                    .and_then(number)
                    .ok_or_else(|| schema("FIX_VARIABLES_BY_PATTERN needs a numeric update.value"))?,
            },
            OpKind::UpdateConstraintRhsByPattern => Action::UpdateRhsByPattern {
                pattern: pattern(self, &["pattern", "row_pattern"])?,
                change: scale_or_set(u)?,
            },
            OpKind::AddVariableFamily => Action::AddVariableFamily(definition(self)?),
            OpKind::AddConstraintFamily => Action::AddConstraintFamily(definition(self)?),
            OpKind::AddObjectiveComponent => Action::AddObjectiveComponent(definition(self)?),
            OpKind::RemoveConstraintFamily => {
                Action::RemoveConstraintFamily(require_target(self)?)
            }
        })
    }
}

fn replacement_value(v: &Value) -> Result<ParameterValue, Violation> {
    match v {
        Value::Array(items) => items
            .iter()
            .map(|i| index_from_value(i).ok_or_else(|| schema(format!("bad list item {i}"))))
            .collect::<Result<Vec<_>, _>>()
            .map(ParameterValue::List),
        Value::Object(m) => {
            let mut out = std::collections::BTreeMap::new();
            for (k, val) in m {
                let key = index_from_value(&Value::String(k.clone()))
                    .ok_or_else(|| schema(format!("bad key {k}")))?;
                let n = number(val).ok_or_else(|| schema(format!("value for {k} is not a number")))?;
                out.insert(key, n);
            }
            Ok(ParameterValue::Keyed(out))
        }
        other => Err(schema(format!("cannot replace a parameter with {other}"))),
    }
}

fn index_json(k: &IndexKey) -> Value {
    serde_json::to_value(k).expect("index keys serialize")
}

impl Action {
    pub fn op(&self) -> OpKind {
        match self {
            Action::UpdateParameter { .. } => OpKind::UpdateParameter,
            Action::UpdateBound { .. } => OpKind::UpdateBound,
            Action::UpdateConstraintRhs { .. } => OpKind::UpdateConstraintRhs,
            Action::UpdateConstraintLhs { .. } => OpKind::UpdateConstraintLhs,
            Action::UpdateObjectiveCoeff { .. } => OpKind::UpdateObjectiveCoeff,
            Action::UpdateObjectiveWeight { .. } => OpKind::UpdateObjectiveWeight,
            Action::UpdateCoefficient { .. } => OpKind::UpdateCoefficient,
            Action::FixVariablesByPattern { .. } => OpKind::FixVariablesByPattern,
            Action::UpdateRhsByPattern { .. } => OpKind::UpdateConstraintRhsByPattern,
            Action::AddVariableFamily(_) => OpKind::AddVariableFamily,
            Action::AddConstraintFamily(_) => OpKind::AddConstraintFamily,
            Action::RemoveConstraintFamily(_) => OpKind::RemoveConstraintFamily,
            Action::AddObjectiveComponent(_) => OpKind::AddObjectiveComponent,
        }
    }

    /// Canonical wire form; `interpret` of the result gives back `self`.
    pub fn to_patch(&self) -> Patch {
        let op = self.op();
        let (target, scope, update): (String, Value, Map<String, Value>) = match self {
            Action::UpdateParameter { name, key, update } => {
                let mut m = match update {
                    ParamUpdate::Number(c) => c.to_update(),
                    ParamUpdate::Replace(v) => {
                        let mut m = Map::new();
                        m.insert("value".into(), replacement_json(v));
                        m
                    }
                };
                if let Some(k) = key {
                    m.insert("key".into(), index_json(k));
                }
                (name.clone(), Value::Null, m)
            }
            Action::UpdateBound {
                family,
                index,
                side,
                value,
            } => {
                let mut m = Map::new();
                m.insert("bound_type".into(), json!(side.name()));
                m.insert("value".into(), json!(value));
                (family.clone(), json!({ "index": index_json(index) }), m)
            }
            Action::UpdateConstraintRhs { family, row, change } => {
                (family.clone(), json!({ "row": index_json(row) }), change.to_update())
            }
            Action::UpdateConstraintLhs { family, lhs } => {
                let mut m = Map::new();
                m.insert("lhs_spec".into(), serde_json::to_value(lhs).expect("lhs serializes"));
                (family.clone(), Value::Null, m)
            }
            Action::UpdateObjectiveCoeff {
                component,
                var_family,
                index,
                change,
            } => {
                let mut scope = Map::new();
                if let Some(f) = var_family {
                    scope.insert("var_family".into(), json!(f));
                }
                scope.insert("index".into(), index_json(index));
                (component.clone(), Value::Object(scope), change.to_update())
            }
            Action::UpdateObjectiveWeight { component, change } => {
                (component.clone(), Value::Null, change.to_update())
            }
            Action::UpdateCoefficient {
                row_pattern,
                var_pattern,
                change,
            } => (
                row_pattern.clone(),
                json!({ "var_pattern": var_pattern }),
                change.to_update(),
            ),
            Action::FixVariablesByPattern {
                pattern,
                families,
                value,
            } => {
                let scope = if families.is_empty() {
                    Value::Null
                } else {
                    json!({ "families": families })
                };
                let mut m = Map::new();
                m.insert("value".into(), json!(value));
                (pattern.clone(), scope, m)
            }
            Action::UpdateRhsByPattern { pattern, change } => {
                (pattern.clone(), Value::Null, change.to_update())
            }
            Action::AddVariableFamily(f) => definition_patch(&f.name, f),
            Action::AddConstraintFamily(f) => definition_patch(&f.name, f),
            Action::AddObjectiveComponent(f) => definition_patch(&f.name, f),
            Action::RemoveConstraintFamily(name) => (name.clone(), Value::Null, Map::new()),
        };
        Patch {
            op,
            target,
            scope,
            update,
            notes: None,
        }
    }
}

fn definition_patch<T: serde::Serialize>(name: &str, def: &T) -> (String, Value, Map<String, Value>) {
    let mut m = Map::new();
    m.insert("family".into(), serde_json::to_value(def).expect("families serialize"));
    (name.to_string(), Value::Null, m)
}

fn replacement_json(v: &ParameterValue) -> Value {
    match v {
        ParameterValue::List(items) => Value::Array(items.iter().map(index_json).collect()),
        ParameterValue::Keyed(map) => Value::Object(
            map.iter()
                .map(|(k, v)| (k.joined(), json!(v)))
                .collect(),
        ),
        ParameterValue::Scalar(v) => json!(v),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_coercion_forms() {
        let want = IndexKey::new(["P2", "C2"]);
        assert_eq!(index_from_value(&json!(["P2", "C2"])), Some(want.clone()));
        assert_eq!(index_from_value(&json!("(P2, C2)")), Some(want.clone()));
        assert_eq!(index_from_value(&json!([["P2", "C2"]])), Some(want.clone()));
        assert_eq!(index_from_value(&json!({"index": "P2,C2"})), Some(want));
        assert_eq!(index_from_value(&json!(4)), Some(IndexKey::single("4")));
    }

    #[test]
    fn value_and_delta_are_exclusive() {
        let p = Patch::new(
            OpKind::UpdateParameter,
            "demand",
            Value::Null,
            json!({"key": "C3", "value": 1, "delta": 2}),
        );
        assert!(matches!(p.interpret(), Err(Violation::Schema { .. })));
        let p = Patch::new(OpKind::UpdateParameter, "demand", Value::Null, json!({"key": "C3"}));
        assert!(matches!(p.interpret(), Err(Violation::Schema { .. })));
    }

    #[test]
    fn canonical_form_round_trips() {
        let p = Patch::new(
            OpKind::UpdateBound,
            "flows",
            json!(["P2", "C2"]),
            json!({"bound_type": "upper", "value": 5.0}),
        );
        let a = p.interpret().unwrap();
        let canon = a.to_patch();
        assert_eq!(canon.interpret().unwrap(), a);
        assert_eq!(canon.scope, json!({"index": ["P2", "C2"]}));
    }
}

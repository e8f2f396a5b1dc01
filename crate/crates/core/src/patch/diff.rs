//! Path-level differences between two states.
//!
//! States are projected onto a JSON tree in which keyed collections are
//! objects (keyed by comma-joined index or flat term key), so an edit to one
//! entry shows up as one path such as `parameters.supply.P1`.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{json, Map, Value};

use crate::model::{
    parse_flat, Bounds, CoefExpr, ConstraintFamily, IndexKey, LhsSpec, ModelError, ModelState,
    ObjectiveComponent, ParameterEntry, ParameterValue, RhsSpec, Term, VariableFamily,
};

fn present<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Value>, D::Error> {
    Value::deserialize(d).map(Some)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffEntry {
    /// Dotted form of `segments`, for display.
    pub path: String,
    pub segments: Vec<String>,
    #[serde(default, deserialize_with = "present", skip_serializing_if = "Option::is_none")]
    pub before: Option<Value>,
    #[serde(default, deserialize_with = "present", skip_serializing_if = "Option::is_none")]
    pub after: Option<Value>,
}

impl DiffEntry {
    fn new(segments: Vec<String>, before: Option<Value>, after: Option<Value>) -> Self {
        DiffEntry {
            path: segments.join("."),
            segments,
            before,
            after,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateDiff {
    pub from_version: u64,
    pub to_version: u64,
    pub entries: Vec<DiffEntry>,
}

impl StateDiff {
    pub fn empty(version: u64) -> Self {
        StateDiff {
            from_version: version,
            to_version: version,
            entries: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One line per entry, `path: before -> after`.
    pub fn render(&self) -> String {
        let show = |v: &Option<Value>| match v {
            None => "(absent)".to_string(),
            Some(v) => v.to_string(),
        };
        self.entries
            .iter()
            .map(|e| format!("{}: {} -> {}\n", e.path, show(&e.before), show(&e.after)))
            .collect()
    }
}

fn keyed_obj<T, F: Fn(&T) -> Value>(map: &BTreeMap<IndexKey, T>, f: F) -> Value {
    Value::Object(map.iter().map(|(k, v)| (k.joined(), f(v))).collect())
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("state parts serialize")
}

fn param_tree(v: &ParameterValue) -> Value {
    match v {
        ParameterValue::Scalar(x) => json!(x),
        ParameterValue::Keyed(map) => keyed_obj(map, |x| json!(x)),
        ParameterValue::List(items) => Value::Array(items.iter().map(to_json).collect()),
    }
}

fn meta(description: &str, tags: &std::collections::BTreeSet<String>) -> (Value, Value) {
    (json!(description), to_json(tags))
}

fn variable_tree(f: &VariableFamily) -> Value {
    let (d, t) = meta(&f.description, &f.tags);
    json!({
        "index_set": to_json(&f.index_set),
        "var_type": to_json(&f.var_type),
        "default_bounds": to_json(&f.default_bounds),
        "bound_overrides": keyed_obj(&f.bound_overrides, to_json),
        "description": d,
        "tags": t,
    })
}

fn constraint_tree(f: &ConstraintFamily) -> Value {
    let lhs = match &f.lhs_spec {
        LhsSpec::ExplicitTerms { rows } => json!({
            "kind": "explicit_terms",
            "rows": keyed_obj(rows, to_json),
        }),
        other => to_json(other),
    };
    let (d, t) = meta(&f.description, &f.tags);
    json!({
        "index_set": to_json(&f.index_set),
        "lhs_spec": lhs,
        "sense": to_json(&f.sense),
        "rhs_spec": {
            "default": to_json(&f.rhs_spec.default),
            "overrides": keyed_obj(&f.rhs_spec.overrides, to_json),
        },
        "description": d,
        "tags": t,
    })
}

fn objective_tree(c: &ObjectiveComponent) -> Value {
    let terms: Map<String, Value> = c.terms.iter().map(|t| (t.flat(), to_json(&t.coef))).collect();
    let (d, t) = meta(&c.description, &c.tags);
    json!({
        "weight": c.weight,
        "terms": terms,
        "description": d,
        "tags": t,
    })
}

/// Projects a state (minus its version) onto the diff tree.
pub fn state_tree(state: &ModelState) -> Value {
    let mut params = Map::new();
    let mut param_meta = Map::new();
    for p in state.parameters() {
        params.insert(p.name.clone(), param_tree(&p.value));
        let (d, t) = meta(&p.description, &p.tags);
        param_meta.insert(p.name.clone(), json!({ "description": d, "tags": t }));
    }
    let named = |items: Vec<(String, Value)>| Value::Object(items.into_iter().collect());
    json!({
        "parameters": params,
        "parameter_meta": param_meta,
        "variable_families": named(state.variable_families().map(|f| (f.name.clone(), variable_tree(f))).collect()),
        "constraint_families": named(state.constraint_families().map(|f| (f.name.clone(), constraint_tree(f))).collect()),
        "objective_components": named(state.objective_components().map(|c| (c.name.clone(), objective_tree(c))).collect()),
        "entity_registry": to_json(state.entity_registry()),
    })
}

fn bad(what: impl Into<String>) -> ModelError {
    ModelError::unresolved("state tree", what.into())
}

fn from_json<T: serde::de::DeserializeOwned>(v: &Value, what: &str) -> Result<T, ModelError> {
    serde_json::from_value(v.clone()).map_err(|e| bad(format!("{what}: {e}")))
}

fn obj<'a>(v: &'a Value, what: &str) -> Result<&'a Map<String, Value>, ModelError> {
    v.as_object().ok_or_else(|| bad(format!("{what} is not an object")))
}

fn get<'a>(m: &'a Map<String, Value>, key: &str) -> Result<&'a Value, ModelError> {
    m.get(key).ok_or_else(|| bad(format!("missing `{key}`")))
}

fn keyed_from<T: serde::de::DeserializeOwned>(
    v: &Value,
    what: &str,
) -> Result<BTreeMap<IndexKey, T>, ModelError> {
    obj(v, what)?
        .iter()
        .map(|(k, x)| Ok((IndexKey::from_joined(k), from_json(x, what)?)))
        .collect()
}

/// Inverse of [`state_tree`]; the version is set to 0.
pub fn state_from_tree(tree: &Value) -> Result<ModelState, ModelError> {
    let root = obj(tree, "root")?;
    let mut state = ModelState::default();
    let meta_root = obj(get(root, "parameter_meta")?, "parameter_meta")?;
    for (name, v) in obj(get(root, "parameters")?, "parameters")? {
        let value = match v {
            Value::Number(n) => ParameterValue::Scalar(n.as_f64().unwrap_or(f64::NAN)),
            Value::Object(_) => ParameterValue::Keyed(keyed_from(v, name)?),
            Value::Array(_) => ParameterValue::List(from_json(v, name)?),
            _ => return Err(bad(format!("parameter `{name}` has value {v}"))),
        };
        let mut entry = ParameterEntry::new(name.clone(), value);
        if let Some(m) = meta_root.get(name).and_then(Value::as_object) {
            entry.description = m.get("description").and_then(Value::as_str).unwrap_or("").into();
            entry.tags = m.get("tags").map(|t| from_json(t, "tags")).transpose()?.unwrap_or_default();
        }
        state.insert_parameter(entry)?;
    }
    for (name, v) in obj(get(root, "variable_families")?, "variable_families")? {
        let m = obj(v, name)?;
        let fam = VariableFamily {
            name: name.clone(),
            index_set: from_json(get(m, "index_set")?, name)?,
            var_type: from_json(get(m, "var_type")?, name)?,
            default_bounds: from_json::<Option<Bounds>>(get(m, "default_bounds")?, name)?,
            bound_overrides: keyed_from(get(m, "bound_overrides")?, name)?,
            description: from_json(get(m, "description")?, name)?,
            tags: from_json(get(m, "tags")?, name)?,
        };
        state.insert_variable_family(fam)?;
    }
    for (name, v) in obj(get(root, "constraint_families")?, "constraint_families")? {
        let m = obj(v, name)?;
        let lhs_v = get(m, "lhs_spec")?;
        let lhs = match lhs_v.get("kind").and_then(Value::as_str) {
            Some("explicit_terms") => LhsSpec::ExplicitTerms {
                rows: keyed_from::<Vec<Term>>(get(obj(lhs_v, name)?, "rows")?, name)?,
            },
            _ => from_json(lhs_v, name)?,
        };
        let rhs = obj(get(m, "rhs_spec")?, name)?;
        let fam = ConstraintFamily {
            name: name.clone(),
            index_set: from_json(get(m, "index_set")?, name)?,
            lhs_spec: lhs,
            sense: from_json(get(m, "sense")?, name)?,
            rhs_spec: RhsSpec {
                default: from_json::<Option<CoefExpr>>(get(rhs, "default")?, name)?,
                overrides: keyed_from(get(rhs, "overrides")?, name)?,
            },
            description: from_json(get(m, "description")?, name)?,
            tags: from_json(get(m, "tags")?, name)?,
        };
        state.insert_constraint_family(fam)?;
    }
    for (name, v) in obj(get(root, "objective_components")?, "objective_components")? {
        let m = obj(v, name)?;
        let mut terms = Vec::new();
        for (flat, coef) in obj(get(m, "terms")?, name)? {
            let (family, index) = parse_flat(flat).ok_or_else(|| bad(format!("bad term key {flat}")))?;
            terms.push(Term::new(family, index, from_json(coef, name)?));
        }
        let comp = ObjectiveComponent {
            name: name.clone(),
            weight: from_json(get(m, "weight")?, name)?,
            terms,
            description: from_json(get(m, "description")?, name)?,
            tags: from_json(get(m, "tags")?, name)?,
        };
        state.insert_objective_component(comp)?;
    }
    state.entity_registry = from_json(get(root, "entity_registry")?, "entity_registry")?;
    Ok(state)
}

/// Common keys keep their relative order and new keys only trail, so
/// appending during replay reproduces the order of `b`.
fn order_compatible(a: &Map<String, Value>, b: &Map<String, Value>) -> bool {
    let common_a: Vec<&String> = a.keys().filter(|k| b.contains_key(*k)).collect();
    let common_b: Vec<&String> = b.keys().filter(|k| a.contains_key(*k)).collect();
    if common_a != common_b {
        return false;
    }
    let mut seen_new = false;
    for k in b.keys() {
        if a.contains_key(k) {
            if seen_new {
                return false;
            }
        } else {
            seen_new = true;
        }
    }
    true
}

fn diff_value(path: &mut Vec<String>, a: &Value, b: &Value, out: &mut Vec<DiffEntry>) {
    if a == b {
        return;
    }
    match (a, b) {
        (Value::Object(ma), Value::Object(mb)) if order_compatible(ma, mb) => {
            for (k, va) in ma {
                path.push(k.clone());
                match mb.get(k) {
                    Some(vb) => diff_value(path, va, vb, out),
                    None => out.push(DiffEntry::new(path.clone(), Some(va.clone()), None)),
                }
                path.pop();
            }
            for (k, vb) in mb {
                if !ma.contains_key(k) {
                    path.push(k.clone());
                    out.push(DiffEntry::new(path.clone(), None, Some(vb.clone())));
                    path.pop();
                }
            }
        }
        _ => out.push(DiffEntry::new(path.clone(), Some(a.clone()), Some(b.clone()))),
    }
}

pub fn diff_states(before: &ModelState, after: &ModelState) -> StateDiff {
    let mut entries = Vec::new();
    diff_value(&mut Vec::new(), &state_tree(before), &state_tree(after), &mut entries);
    StateDiff {
        from_version: before.version(),
        to_version: after.version(),
        entries,
    }
}

/// Applies a diff to the state it was computed from.
pub fn replay(before: &ModelState, diff: &StateDiff) -> Result<ModelState, ModelError> {
    let mut tree = state_tree(before);
    for e in &diff.entries {
        let Some((last, parents)) = e.segments.split_last() else {
            return Err(bad("empty diff path"));
        };
        let mut node = &mut tree;
        for seg in parents {
            node = node
                .get_mut(seg)
                .ok_or_else(|| bad(format!("diff path {} does not exist", e.path)))?;
        }
        let m = node
            .as_object_mut()
            .ok_or_else(|| bad(format!("diff path {} is not inside an object", e.path)))?;
        match &e.after {
            Some(v) => {
                m.insert(last.clone(), v.clone());
            }
            None => {
                m.shift_remove(last);
            }
        }
    }
    let mut state = state_from_tree(&tree)?;
    state.version = diff.to_version;
    Ok(state)
}

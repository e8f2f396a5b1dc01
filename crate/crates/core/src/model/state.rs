use std::collections::{BTreeMap, HashSet};
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::types::*;
use super::IndexKey;
use super::key::is_valid_name;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub message: String,
    pub line: usize,
    pub column: usize,
}

impl From<serde_json::Error> for ParseError {
    fn from(e: serde_json::Error) -> Self {
        ParseError {
            message: e.to_string(),
            line: e.line(),
            column: e.column(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("name `{0}` is already registered")]
    DuplicateName(String),
    #[error("`{0}` is not a valid identifier")]
    InvalidName(String),
    #[error("malformed keys in `{name}`: {detail}")]
    MalformedKeys { name: String, detail: String },
    #[error("invalid bounds in `{family}`: {detail}")]
    InvalidBounds { family: String, detail: String },
    #[error("unresolved reference in {context}: {detail}")]
    UnresolvedReference { context: String, detail: String },
    #[error("constraint family `{family}` uses unregistered semantic kind `{kind}`")]
    UnregisteredSemanticKind { family: String, kind: String },
    #[error("non-finite number in {0}")]
    NonFinite(String),
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
}

impl ModelError {
    pub(crate) fn unresolved(context: impl Into<String>, detail: impl Into<String>) -> Self {
        ModelError::UnresolvedReference {
            context: context.into(),
            detail: detail.into(),
        }
    }
}

/// Which namespace a registered name lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NameKind {
    Parameter,
    VariableFamily,
    ConstraintFamily,
    ObjectiveComponent,
}

impl fmt::Display for NameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NameKind::Parameter => "parameter",
            NameKind::VariableFamily => "variable family",
            NameKind::ConstraintFamily => "constraint family",
            NameKind::ObjectiveComponent => "objective component",
        })
    }
}

/// The mutable model state: parameters, the three family collections, the
/// entity registry and a version counter. Minimization is implied.
///
/// Values are treated as immutable; the builder methods return a new state.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelState {
    pub(crate) parameters: IndexMap<String, ParameterEntry>,
    pub(crate) variable_families: IndexMap<String, VariableFamily>,
    pub(crate) constraint_families: IndexMap<String, ConstraintFamily>,
    pub(crate) objective_components: IndexMap<String, ObjectiveComponent>,
    pub(crate) entity_registry: BTreeMap<String, String>,
    pub(crate) version: u64,
}

pub fn new_state() -> ModelState {
    ModelState::default()
}

impl ModelState {
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn parameters(&self) -> impl Iterator<Item = &ParameterEntry> {
        self.parameters.values()
    }

    pub fn variable_families(&self) -> impl Iterator<Item = &VariableFamily> {
        self.variable_families.values()
    }

    pub fn constraint_families(&self) -> impl Iterator<Item = &ConstraintFamily> {
        self.constraint_families.values()
    }

    pub fn objective_components(&self) -> impl Iterator<Item = &ObjectiveComponent> {
        self.objective_components.values()
    }

    pub fn entity_registry(&self) -> &BTreeMap<String, String> {
        &self.entity_registry
    }

    pub fn parameter(&self, name: &str) -> Option<&ParameterEntry> {
        self.parameters.get(name)
    }

    pub fn variable_family(&self, name: &str) -> Option<&VariableFamily> {
        self.variable_families.get(name)
    }

    pub fn constraint_family(&self, name: &str) -> Option<&ConstraintFamily> {
        self.constraint_families.get(name)
    }

    pub fn objective_component(&self, name: &str) -> Option<&ObjectiveComponent> {
        self.objective_components.get(name)
    }

    pub fn family_count(&self) -> usize {
        self.variable_families.len() + self.constraint_families.len() + self.objective_components.len()
    }

    pub fn kind_of(&self, name: &str) -> Option<NameKind> {
        if self.parameters.contains_key(name) {
            Some(NameKind::Parameter)
        } else if self.variable_families.contains_key(name) {
            Some(NameKind::VariableFamily)
        } else if self.constraint_families.contains_key(name) {
            Some(NameKind::ConstraintFamily)
        } else if self.objective_components.contains_key(name) {
            Some(NameKind::ObjectiveComponent)
        } else {
            None
        }
    }

    /// All names across the four namespaces, in registration order per namespace.
    pub fn names(&self) -> Vec<&str> {
        self.parameters
            .keys()
            .chain(self.variable_families.keys())
            .chain(self.constraint_families.keys())
            .chain(self.objective_components.keys())
            .map(String::as_str)
            .collect()
    }

    pub fn register_parameter(&self, entry: ParameterEntry) -> Result<ModelState, ModelError> {
        let mut next = self.clone();
        next.insert_parameter(entry)?;
        Ok(next)
    }

    pub fn register_variable_family(&self, family: VariableFamily) -> Result<ModelState, ModelError> {
        let mut next = self.clone();
        next.insert_variable_family(family)?;
        Ok(next)
    }

    pub fn register_constraint_family(
        &self,
        family: ConstraintFamily,
    ) -> Result<ModelState, ModelError> {
        let mut next = self.clone();
        next.insert_constraint_family(family)?;
        Ok(next)
    }

    pub fn register_objective_component(
        &self,
        component: ObjectiveComponent,
    ) -> Result<ModelState, ModelError> {
        let mut next = self.clone();
        next.insert_objective_component(component)?;
        Ok(next)
    }

    pub fn register_entity(
        &self,
        label: impl Into<String>,
        id: impl Into<String>,
    ) -> ModelState {
        let mut next = self.clone();
        next.entity_registry.insert(label.into(), id.into());
        next
    }

    fn check_fresh_name(&self, name: &str) -> Result<(), ModelError> {
        if !is_valid_name(name) {
            return Err(ModelError::InvalidName(name.to_string()));
        }
        if self.kind_of(name).is_some() {
            return Err(ModelError::DuplicateName(name.to_string()));
        }
        Ok(())
    }

    pub(crate) fn insert_parameter(&mut self, entry: ParameterEntry) -> Result<(), ModelError> {
        self.check_fresh_name(&entry.name)?;
        validate_parameter_value(&entry.name, &entry.value)?;
        self.parameters.insert(entry.name.clone(), entry);
        Ok(())
    }

    pub(crate) fn insert_variable_family(&mut self, family: VariableFamily) -> Result<(), ModelError> {
        self.check_fresh_name(&family.name)?;
        validate_variable_family(&family)?;
        self.variable_families.insert(family.name.clone(), family);
        Ok(())
    }

    pub(crate) fn insert_constraint_family(
        &mut self,
        family: ConstraintFamily,
    ) -> Result<(), ModelError> {
        self.check_fresh_name(&family.name)?;
        validate_constraint_family(&family)?;
        self.constraint_families.insert(family.name.clone(), family);
        Ok(())
    }

    pub(crate) fn insert_objective_component(
        &mut self,
        component: ObjectiveComponent,
    ) -> Result<(), ModelError> {
        self.check_fresh_name(&component.name)?;
        validate_objective_component(&component)?;
        self.objective_components
            .insert(component.name.clone(), component);
        Ok(())
    }

    /// Eagerly checks that every variable and parameter reference of the
    /// named family resolves. Semantic payloads are checked at instantiation.
    pub fn check_family_references(&self, name: &str) -> Result<(), ModelError> {
        if let Some(c) = self.constraint_families.get(name) {
            let ctx = format!("constraint family `{name}`");
            match &c.lhs_spec {
                LhsSpec::ExplicitTerms { rows } => {
                    for terms in rows.values() {
                        for t in terms {
                            self.check_term(&ctx, t)?;
                        }
                    }
                }
                LhsSpec::IndexedSum {
                    var_family, coef, ..
                } => {
                    if !self.variable_families.contains_key(var_family) {
                        return Err(ModelError::unresolved(
                            ctx,
                            format!("unknown variable family `{var_family}`"),
                        ));
                    }
                    self.check_param_name(&ctx, coef)?;
                }
                LhsSpec::Semantic { .. } => {}
            }
            if let Some(d) = &c.rhs_spec.default {
                self.check_param_name(&ctx, d)?;
            }
            for e in c.rhs_spec.overrides.values() {
                self.check_param_name(&ctx, e)?;
            }
        } else if let Some(o) = self.objective_components.get(name) {
            let ctx = format!("objective component `{name}`");
            for t in &o.terms {
                self.check_term(&ctx, t)?;
            }
        }
        Ok(())
    }

    pub fn check_all_references(&self) -> Result<(), ModelError> {
        for name in self
            .constraint_families
            .keys()
            .chain(self.objective_components.keys())
        {
            self.check_family_references(name)?;
        }
        Ok(())
    }

    fn check_term(&self, ctx: &str, t: &Term) -> Result<(), ModelError> {
        let fam = self.variable_families.get(&t.var_family).ok_or_else(|| {
            ModelError::unresolved(ctx, format!("unknown variable family `{}`", t.var_family))
        })?;
        if !fam.contains(&t.index) {
            return Err(ModelError::unresolved(
                ctx,
                format!("unknown index {} of `{}`", t.index, t.var_family),
            ));
        }
        self.check_param_name(ctx, &t.coef)
    }

    fn check_param_name(&self, ctx: &str, expr: &CoefExpr) -> Result<(), ModelError> {
        if let Some(p) = expr.param_name() {
            if !self.parameters.contains_key(p) {
                return Err(ModelError::unresolved(ctx, format!("unknown parameter `{p}`")));
            }
        }
        Ok(())
    }
}

fn check_keys<'a>(
    name: &str,
    keys: impl IntoIterator<Item = &'a IndexKey>,
    unique: bool,
) -> Result<Option<usize>, ModelError> {
    let mut arity = None;
    let mut seen = HashSet::new();
    for k in keys {
        if let Some(bad) = k.invalid_component() {
            return Err(ModelError::MalformedKeys {
                name: name.to_string(),
                detail: format!("invalid index component `{bad}` in {k}"),
            });
        }
        match arity {
            None => arity = Some(k.arity()),
            Some(a) if a != k.arity() => {
                return Err(ModelError::MalformedKeys {
                    name: name.to_string(),
                    detail: format!("key {k} has arity {}, expected {a}", k.arity()),
                })
            }
            _ => {}
        }
        if unique && !seen.insert(k) {
            return Err(ModelError::MalformedKeys {
                name: name.to_string(),
                detail: format!("duplicate index {k}"),
            });
        }
    }
    Ok(arity)
}

pub(crate) fn validate_parameter_value(name: &str, value: &ParameterValue) -> Result<(), ModelError> {
    match value {
        ParameterValue::Scalar(v) => {
            if !v.is_finite() {
                return Err(ModelError::NonFinite(format!("parameter `{name}`")));
            }
        }
        ParameterValue::Keyed(map) => {
            check_keys(name, map.keys(), false)?;
            if map.values().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite(format!("parameter `{name}`")));
            }
        }
        ParameterValue::List(keys) => {
            check_keys(name, keys.iter(), false)?;
        }
    }
    Ok(())
}

pub(crate) fn validate_bounds(family: &VariableFamily, b: &Bounds, at: &str) -> Result<(), ModelError> {
    if !b.is_ordered() {
        return Err(ModelError::InvalidBounds {
            family: family.name.clone(),
            detail: format!("{at}: lower {} exceeds upper {}", b.lower, b.upper),
        });
    }
    if family.var_type == VarType::Binary && (b.lower < 0.0 || b.upper > 1.0) {
        return Err(ModelError::InvalidBounds {
            family: family.name.clone(),
            detail: format!("{at}: binary bounds must lie within [0, 1], got {b}"),
        });
    }
    Ok(())
}

pub(crate) fn validate_variable_family(family: &VariableFamily) -> Result<(), ModelError> {
    check_keys(&family.name, family.index_set.iter(), true)?;
    validate_bounds(family, &family.effective_default(), "default bounds")?;
    for (k, b) in &family.bound_overrides {
        if !family.contains(k) {
            return Err(ModelError::MalformedKeys {
                name: family.name.clone(),
                detail: format!("bound override for {k} outside the index set"),
            });
        }
        validate_bounds(family, b, &format!("override {k}"))?;
    }
    Ok(())
}

pub(crate) fn validate_constraint_family(family: &ConstraintFamily) -> Result<(), ModelError> {
    check_keys(&family.name, family.index_set.iter(), true)?;
    if let LhsSpec::ExplicitTerms { rows } = &family.lhs_spec {
        for (row, terms) in rows {
            if !family.index_set.contains(row) {
                return Err(ModelError::MalformedKeys {
                    name: family.name.clone(),
                    detail: format!("lhs row {row} outside the index set"),
                });
            }
            if let Some(t) = terms.iter().find(|t| t.index.invalid_component().is_some()) {
                return Err(ModelError::MalformedKeys {
                    name: family.name.clone(),
                    detail: format!("term index {} is malformed", t.index),
                });
            }
        }
    }
    check_keys(&family.name, family.rhs_spec.overrides.keys(), false)?;
    let semantic = matches!(family.lhs_spec, LhsSpec::Semantic { .. });
    for row in family.rhs_spec.overrides.keys() {
        // Semantic families derive their rows from the payload.
        if !semantic && !family.index_set.contains(row) {
            return Err(ModelError::MalformedKeys {
                name: family.name.clone(),
                detail: format!("rhs override for row {row} outside the index set"),
            });
        }
    }
    Ok(())
}

pub(crate) fn validate_objective_component(component: &ObjectiveComponent) -> Result<(), ModelError> {
    if !component.weight.is_finite() {
        return Err(ModelError::NonFinite(format!(
            "weight of objective component `{}`",
            component.name
        )));
    }
    let mut seen = HashSet::new();
    for t in &component.terms {
        if !seen.insert((t.var_family.as_str(), &t.index)) {
            return Err(ModelError::MalformedKeys {
                name: component.name.clone(),
                detail: format!("duplicate term for {}", t.flat()),
            });
        }
    }
    Ok(())
}

/// On-disk form of a [`ModelState`].
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateDocument {
    parameters: Vec<ParameterEntry>,
    variable_families: Vec<VariableFamily>,
    constraint_families: Vec<ConstraintFamily>,
    objective_components: Vec<ObjectiveComponent>,
    entity_registry: BTreeMap<String, String>,
    version: u64,
}

impl StateDocument {
    fn from_state(state: &ModelState) -> Self {
        StateDocument {
            parameters: state.parameters.values().cloned().collect(),
            variable_families: state.variable_families.values().cloned().collect(),
            constraint_families: state.constraint_families.values().cloned().collect(),
            objective_components: state.objective_components.values().cloned().collect(),
            entity_registry: state.entity_registry.clone(),
            version: state.version,
        }
    }

    fn into_state(self) -> Result<ModelState, ModelError> {
        let mut state = ModelState::default();
        for p in self.parameters {
            state.insert_parameter(p)?;
        }
        for v in self.variable_families {
            state.insert_variable_family(v)?;
        }
        for c in self.constraint_families {
            state.insert_constraint_family(c)?;
        }
        for o in self.objective_components {
            state.insert_objective_component(o)?;
        }
        state.entity_registry = self.entity_registry;
        state.version = self.version;
        Ok(state)
    }
}

impl Serialize for ModelState {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        StateDocument::from_state(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ModelState {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        StateDocument::deserialize(deserializer)?
            .into_state()
            .map_err(serde::de::Error::custom)
    }
}

/// Serializes a state into its JSON document form.
pub fn save_state(state: &ModelState) -> String {
    serde_json::to_string_pretty(&StateDocument::from_state(state))
        .expect("state documents always serialize")
}

/// Parses a JSON state document.
pub fn load_state(document: &str) -> Result<ModelState, ModelError> {
    let doc: StateDocument = serde_json::from_str(document).map_err(ParseError::from)?;
    doc.into_state()
}

use std::fmt;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::action::{Action, BoundSide, ParamUpdate};
use super::diff::{diff_states, StateDiff};
use super::{ActionSet, OpKind, Patch};
use crate::model::{
    eval_coef, instantiate_with, validate_constraint_family, validate_parameter_value,
    validate_variable_family, Bounds, CoefExpr, ConstraintFamily, IndexKey, LhsSpec, ModelError,
    ModelState, NameKind, ParameterValue, SemanticRegistry, Term, VarType,
};

/// A reason a patch cannot be applied to a given state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Error)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    #[error("schema: {message}")]
    Schema { message: String },
    #[error("unknown {expected} `{target}`")]
    UnknownTarget { target: String, expected: String },
    #[error("`{target}` has no index {index}")]
    UnknownIndex { target: String, index: String },
    #[error("bounds of {target}{index} would invert: lower {lower} > upper {upper}")]
    BoundInversion {
        target: String,
        index: String,
        lower: f64,
        upper: f64,
    },
    #[error("type mismatch on `{target}`: {message}")]
    TypeMismatch { target: String, message: String },
    #[error("pattern `{pattern}` matches nothing")]
    PatternMatchesNothing { pattern: String },
    #[error("invalid pattern `{pattern}`: {message}")]
    InvalidPattern { pattern: String, message: String },
    #[error("{message}")]
    Model { message: String },
}

impl Violation {
    pub fn code(&self) -> &'static str {
        match self {
            Violation::Schema { .. } => "schema",
            Violation::UnknownTarget { .. } => "unknown_target",
            Violation::UnknownIndex { .. } => "unknown_index",
            Violation::BoundInversion { .. } => "bound_inversion",
            Violation::TypeMismatch { .. } => "type_mismatch",
            Violation::PatternMatchesNothing { .. } => "pattern_matches_nothing",
            Violation::InvalidPattern { .. } => "invalid_pattern",
            Violation::Model { .. } => "model_error",
        }
    }
}

impl From<ModelError> for Violation {
    fn from(e: ModelError) -> Self {
        Violation::Model {
            message: e.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Error)]
pub struct ApplyError {
    /// Position of the failing patch in its action set.
    pub index: usize,
    pub op: OpKind,
    pub violations: Vec<Violation>,
}

impl fmt::Display for ApplyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msgs: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        write!(f, "patch {} ({}) failed: {}", self.index, self.op, msgs.join("; "))
    }
}

#[derive(Clone, Debug)]
pub struct ApplyContext {
    pub registry: SemanticRegistry,
    /// When false, a pattern op that selects nothing is a silent no-op.
    pub empty_pattern_is_error: bool,
}

impl Default for ApplyContext {
    fn default() -> Self {
        ApplyContext {
            registry: SemanticRegistry::builtin(),
            empty_pattern_is_error: true,
        }
    }
}

fn unknown(state: &ModelState, target: &str, expected: NameKind) -> Violation {
    match state.kind_of(target) {
        Some(actual) => Violation::TypeMismatch {
            target: target.to_string(),
            message: format!("expected a {expected}, found a {actual}"),
        },
        None => Violation::UnknownTarget {
            target: target.to_string(),
            expected: expected.to_string(),
        },
    }
}

fn compile(pattern: &str) -> Result<Regex, Violation> {
    Regex::new(pattern).map_err(|e| Violation::InvalidPattern {
        pattern: pattern.to_string(),
        message: e.to_string(),
    })
}

fn finite(v: f64, what: &str) -> Result<f64, Violation> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Violation::Schema {
            message: format!("{what} must be finite, got {v}"),
        })
    }
}

/// Row keys of a constraint family, expanding semantic families.
pub(crate) fn family_rows(
    state: &ModelState,
    fam: &ConstraintFamily,
    registry: &SemanticRegistry,
) -> Result<Vec<(IndexKey, Option<f64>)>, Violation> {
    match &fam.lhs_spec {
        LhsSpec::Semantic { kind, payload } => {
            let pack = registry
                .get(kind)
                .ok_or_else(|| ModelError::UnregisteredSemanticKind {
                    family: fam.name.clone(),
                    kind: kind.clone(),
                })?;
            Ok(pack
                .expand(state, fam, payload)?
                .into_iter()
                .map(|r| (r.key, r.default_rhs))
                .collect())
        }
        _ => Ok(fam.index_set.iter().map(|k| (k.clone(), None)).collect()),
    }
}

fn current_rhs(
    state: &ModelState,
    fam: &ConstraintFamily,
    row: &IndexKey,
    default_rhs: Option<f64>,
) -> Result<f64, Violation> {
    let ctx = format!("constraint family `{}`", fam.name);
    match fam.rhs_spec.expr_for(row) {
        Some(e) => Ok(eval_coef(state, e, None, Some(row), &ctx)?),
        None => default_rhs.ok_or_else(|| Violation::Model {
            message: format!("{ctx} has no right-hand side for row {row}"),
        }),
    }
}

fn set_bound(
    fam: &mut crate::model::VariableFamily,
    index: &IndexKey,
    side: BoundSide,
    value: f64,
) -> Result<(), Violation> {
    if value.is_nan() {
        return Err(Violation::Schema {
            message: "bound value is NaN".into(),
        });
    }
    let mut b = fam.bounds_of(index);
    match side {
        BoundSide::Lower => b.lower = value,
        BoundSide::Upper => b.upper = value,
        BoundSide::Both => b = Bounds::fixed(value),
    }
    if b.lower > b.upper {
        return Err(Violation::BoundInversion {
            target: fam.name.clone(),
            index: index.to_string(),
            lower: b.lower,
            upper: b.upper,
        });
    }
    if fam.var_type == VarType::Binary && (b.lower < 0.0 || b.upper > 1.0) {
        return Err(Violation::TypeMismatch {
            target: fam.name.clone(),
            message: format!("binary variable {index} cannot take bounds {b}"),
        });
    }
    fam.bound_overrides.insert(index.clone(), b);
    Ok(())
}

pub(crate) fn apply_action(
    state: &mut ModelState,
    action: &Action,
    ctx: &ApplyContext,
) -> Result<(), Violation> {
    match action {
        Action::UpdateParameter { name, key, update } => {
            let Some(entry) = state.parameters.get_mut(name) else {
                return Err(unknown(state, name, NameKind::Parameter));
            };
            let mismatch = |message: String| Violation::TypeMismatch {
                target: name.clone(),
                message,
            };
            match (update, key, &mut entry.value) {
                (ParamUpdate::Replace(v), None, value) => {
                    validate_parameter_value(name, v)?;
                    *value = v.clone();
                }
                (ParamUpdate::Number(c), None, ParameterValue::Scalar(v)) => {
                    *v = finite(c.apply_to(*v), "parameter value")?;
                }
                (ParamUpdate::Number(c), Some(k), ParameterValue::Keyed(map)) => {
                    let arity = map.keys().next().map(IndexKey::arity);
                    if arity.is_some_and(|a| a != k.arity()) || k.invalid_component().is_some() {
                        return Err(Violation::UnknownIndex {
                            target: name.clone(),
                            index: k.to_string(),
                        });
                    }
                    let next = match (map.get(k), c) {
                        (Some(cur), _) => c.apply_to(*cur),
                        (None, super::Change::Value(v)) => *v,
                        (None, super::Change::Delta(_)) => {
                            return Err(Violation::UnknownIndex {
                                target: name.clone(),
                                index: k.to_string(),
                            })
                        }
                    };
                    map.insert(k.clone(), finite(next, "parameter value")?);
                }
                (ParamUpdate::Number(_), None, ParameterValue::Keyed(_)) => {
                    return Err(mismatch("keyed parameter needs update.key".into()))
                }
                (_, _, value) => {
                    return Err(mismatch(format!(
                        "cannot apply this update to a {} parameter",
                        value.kind()
                    )))
                }
            }
        }
        Action::UpdateBound {
            family,
            index,
            side,
            value,
        } => {
            let Some(fam) = state.variable_families.get_mut(family) else {
                return Err(unknown(state, family, NameKind::VariableFamily));
            };
            if !fam.contains(index) {
                return Err(Violation::UnknownIndex {
                    target: family.clone(),
                    index: index.to_string(),
                });
            }
            set_bound(fam, index, *side, *value)?;
        }
        Action::UpdateConstraintRhs {
            family,
            row,
            change,
        } => {
            let Some(fam) = state.constraint_families.get(family) else {
                return Err(unknown(state, family, NameKind::ConstraintFamily));
            };
            let rows = family_rows(state, fam, &ctx.registry)?;
            let Some((_, default_rhs)) = rows.iter().find(|(k, _)| k == row) else {
                return Err(Violation::UnknownIndex {
                    target: family.clone(),
                    index: row.to_string(),
                });
            };
            let next = finite(
                change.apply_to(current_rhs(state, fam, row, *default_rhs)?),
                "right-hand side",
            )?;
            state
                .constraint_families
                .get_mut(family)
                .expect("checked above")
                .rhs_spec
                .overrides
                .insert(row.clone(), CoefExpr::Literal(next));
        }
        Action::UpdateConstraintLhs { family, lhs } => {
            let Some(fam) = state.constraint_families.get_mut(family) else {
                return Err(unknown(state, family, NameKind::ConstraintFamily));
            };
            let mut next = fam.clone();
            next.lhs_spec = lhs.clone();
            validate_constraint_family(&next)?;
            *fam = next;
        }
        Action::UpdateObjectiveCoeff {
            component,
            var_family,
            index,
            change,
        } => {
            let Some(comp) = state.objective_components.get(component) else {
                return Err(unknown(state, component, NameKind::ObjectiveComponent));
            };
            let vf_name = match var_family {
                Some(f) => f.clone(),
                None => {
                    let mut fams: Vec<&str> =
                        comp.terms.iter().map(|t| t.var_family.as_str()).collect();
                    fams.sort_unstable();
                    fams.dedup();
                    match fams.as_slice() {
                        [one] => one.to_string(),
                        _ => {
                            return Err(Violation::Schema {
                                message: format!(
                                    "scope.var_family is required for component `{component}`"
                                ),
                            })
                        }
                    }
                }
            };
            let Some(vf) = state.variable_family(&vf_name) else {
                return Err(unknown(state, &vf_name, NameKind::VariableFamily));
            };
            if !vf.contains(index) {
                return Err(Violation::UnknownIndex {
                    target: vf_name,
                    index: index.to_string(),
                });
            }
            let ctxs = format!("objective component `{component}`");
            let pos = comp.term_position(&vf_name, index);
            let current = match pos {
                Some(p) => eval_coef(state, &comp.terms[p].coef, Some(index), None, &ctxs)?,
                None => 0.0,
            };
            let next = CoefExpr::Literal(finite(change.apply_to(current), "coefficient")?);
            let comp = state
                .objective_components
                .get_mut(component)
                .expect("checked above");
            match pos {
                Some(p) => comp.terms[p].coef = next,
                None => comp.terms.push(Term::new(vf_name, index.clone(), next)),
            }
        }
        Action::UpdateObjectiveWeight { component, change } => {
            let Some(comp) = state.objective_components.get_mut(component) else {
                return Err(unknown(state, component, NameKind::ObjectiveComponent));
            };
            comp.weight = finite(change.apply_to(comp.weight), "objective weight")?;
        }
        Action::UpdateCoefficient {
            row_pattern,
            var_pattern,
            change,
        } => {
            let rows_re = compile(row_pattern)?;
            let vars_re = compile(var_pattern)?;
            let mut updates: Vec<(String, IndexKey, usize, f64)> = Vec::new();
            for fam in state.constraint_families() {
                let LhsSpec::ExplicitTerms { rows } = &fam.lhs_spec else {
                    continue;
                };
                let ctxs = format!("constraint family `{}`", fam.name);
                for (row, terms) in rows {
                    if !rows_re.is_match(&row.flat(&fam.name)) {
                        continue;
                    }
                    for (i, t) in terms.iter().enumerate() {
                        if vars_re.is_match(&t.flat()) {
                            let cur = eval_coef(state, &t.coef, Some(&t.index), Some(row), &ctxs)?;
                            let next = finite(change.apply_to(cur), "coefficient")?;
                            updates.push((fam.name.clone(), row.clone(), i, next));
                        }
                    }
                }
            }
            if updates.is_empty() && ctx.empty_pattern_is_error {
                return Err(Violation::PatternMatchesNothing {
                    pattern: format!("{row_pattern} x {var_pattern}"),
                });
            }
            for (fam, row, i, v) in updates {
                if let Some(LhsSpec::ExplicitTerms { rows }) =
                    state.constraint_families.get_mut(&fam).map(|f| &mut f.lhs_spec)
                {
                    if let Some(terms) = rows.get_mut(&row) {
                        terms[i].coef = CoefExpr::Literal(v);
                    }
                }
            }
        }
        Action::FixVariablesByPattern {
            pattern,
            families,
            value,
        } => {
            let re = compile(pattern)?;
            for f in families {
                if state.variable_family(f).is_none() {
                    return Err(unknown(state, f, NameKind::VariableFamily));
                }
            }
            let mut hits = 0;
            for fam in state.variable_families.values_mut() {
                if !families.is_empty() && !families.contains(&fam.name) {
                    continue;
                }
                let matched: Vec<IndexKey> = fam
                    .index_set
                    .iter()
                    .filter(|k| re.is_match(&k.flat(&fam.name)))
                    .cloned()
                    .collect();
                for k in matched {
                    set_bound(fam, &k, BoundSide::Both, finite(*value, "fix value")?)?;
                    hits += 1;
                }
            }
            if hits == 0 && ctx.empty_pattern_is_error {
                return Err(Violation::PatternMatchesNothing {
                    pattern: pattern.clone(),
                });
            }
        }
        Action::UpdateRhsByPattern { pattern, change } => {
            let re = compile(pattern)?;
            let mut updates = Vec::new();
            for fam in state.constraint_families() {
                for (row, default_rhs) in family_rows(state, fam, &ctx.registry)? {
                    if re.is_match(&row.flat(&fam.name)) {
                        let cur = current_rhs(state, fam, &row, default_rhs)?;
                        let next = finite(change.apply_to(cur), "right-hand side")?;
                        updates.push((fam.name.clone(), row, next));
                    }
                }
            }
            if updates.is_empty() && ctx.empty_pattern_is_error {
                return Err(Violation::PatternMatchesNothing {
                    pattern: pattern.clone(),
                });
            }
            for (fam, row, v) in updates {
                if let Some(f) = state.constraint_families.get_mut(&fam) {
                    f.rhs_spec.overrides.insert(row, CoefExpr::Literal(v));
                }
            }
        }
        Action::AddVariableFamily(f) => {
            validate_variable_family(f)?;
            state.insert_variable_family(f.clone())?;
        }
        Action::AddConstraintFamily(f) => {
            if let LhsSpec::Semantic { kind, .. } = &f.lhs_spec {
                if ctx.registry.get(kind).is_none() {
                    return Err(ModelError::UnregisteredSemanticKind {
                        family: f.name.clone(),
                        kind: kind.clone(),
                    }
                    .into());
                }
            }
            state.insert_constraint_family(f.clone())?;
        }
        Action::AddObjectiveComponent(c) => {
            state.insert_objective_component(c.clone())?;
        }
        Action::RemoveConstraintFamily(name) => {
            if state.constraint_families.shift_remove(name).is_none() {
                return Err(unknown(state, name, NameKind::ConstraintFamily));
            }
        }
    }
    Ok(())
}

fn fail(index: usize, op: OpKind, v: Violation) -> ApplyError {
    ApplyError {
        index,
        op,
        violations: vec![v],
    }
}

fn apply_one(
    state: &mut ModelState,
    index: usize,
    patch: &Patch,
    ctx: &ApplyContext,
) -> Result<(), ApplyError> {
    let action = patch.interpret().map_err(|v| fail(index, patch.op, v))?;
    apply_action(state, &action, ctx).map_err(|v| fail(index, patch.op, v))
}

/// Checks a single patch against a state without mutating it.
pub fn validate_patch(patch: &Patch, state: &ModelState) -> Result<(), Vec<Violation>> {
    validate_patch_with(patch, state, &ApplyContext::default())
}

pub fn validate_patch_with(
    patch: &Patch,
    state: &ModelState,
    ctx: &ApplyContext,
) -> Result<(), Vec<Violation>> {
    let mut scratch = state.clone();
    apply_one(&mut scratch, 0, patch, ctx).map_err(|e| e.violations)?;
    instantiate_with(&scratch, &ctx.registry).map_err(|e| vec![Violation::from(e)])?;
    Ok(())
}

/// Applies one patch. The version is left alone; only action sets bump it.
pub fn apply_patch(state: &ModelState, patch: &Patch) -> Result<ModelState, ApplyError> {
    apply_patch_with(state, patch, &ApplyContext::default())
}

pub fn apply_patch_with(
    state: &ModelState,
    patch: &Patch,
    ctx: &ApplyContext,
) -> Result<ModelState, ApplyError> {
    let mut next = state.clone();
    apply_one(&mut next, 0, patch, ctx)?;
    Ok(next)
}

pub fn apply_action_set(
    state: &ModelState,
    actions: &ActionSet,
) -> Result<(ModelState, StateDiff), ApplyError> {
    apply_action_set_with(state, actions, &ApplyContext::default())
}

/// Applies every patch in order to a working copy. Either all succeed and
/// the version goes up by one, or the error is returned and `state` is untouched.
pub fn apply_action_set_with(
    state: &ModelState,
    actions: &ActionSet,
    ctx: &ApplyContext,
) -> Result<(ModelState, StateDiff), ApplyError> {
    if actions.is_empty() {
        return Ok((state.clone(), StateDiff::empty(state.version())));
    }
    let mut working = state.clone();
    for (i, patch) in actions.actions.iter().enumerate() {
        apply_one(&mut working, i, patch, ctx)?;
    }
    if let Err(e) = instantiate_with(&working, &ctx.registry) {
        let last = actions.actions.len() - 1;
        return Err(fail(last, actions.actions[last].op, e.into()));
    }
    working.version = state.version() + 1;
    let diff = diff_states(state, &working);
    Ok((working, diff))
}

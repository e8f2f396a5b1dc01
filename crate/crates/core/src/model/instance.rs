use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::semantic::SemanticRegistry;
use super::{
    CoefExpr, IndexKey, KeyPart, LhsSpec, ModelError, ModelState, ParameterValue, Sense, VarType,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    /// Flat key `family(a,b)`.
    pub key: String,
    pub family: String,
    pub index: IndexKey,
    pub var_type: VarType,
    pub lower: f64,
    pub upper: f64,
    pub obj: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub key: String,
    pub family: String,
    pub index: IndexKey,
    /// Sparse coefficients as (variable position, value), sorted by position.
    pub coefs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A flattened, concrete MIP: minimize `obj . x` subject to the rows and bounds.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Instance {
    pub variables: Vec<Variable>,
    pub rows: Vec<Row>,
    #[serde(skip)]
    lookup: HashMap<String, usize>,
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.variables == other.variables && self.rows == other.rows
    }
}

impl Instance {
    pub fn new(variables: Vec<Variable>, rows: Vec<Row>) -> Self {
        let lookup = variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.key.clone(), i))
            .collect();
        Instance {
            variables,
            rows,
            lookup,
        }
    }

    pub fn position(&self, key: &str) -> Option<usize> {
        if self.lookup.len() != self.variables.len() {
            return self.variables.iter().position(|v| v.key == key);
        }
        self.lookup.get(key).copied()
    }

    pub fn variable(&self, key: &str) -> Option<&Variable> {
        self.position(key).map(|i| &self.variables[i])
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn has_integers(&self) -> bool {
        self.variables.iter().any(|v| v.var_type.is_integral())
    }

    pub fn objective_of(&self, x: &[f64]) -> f64 {
        self.variables.iter().zip(x).map(|(v, xi)| v.obj * xi).sum()
    }

    /// Re-derives the key lookup after deserialization or manual edits.
    pub fn reindex(&mut self) {
        self.lookup = self
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.key.clone(), i))
            .collect();
    }

    /// Equality with an absolute tolerance on every number.
    pub fn approx_eq(&self, other: &Instance, tol: f64) -> bool {
        let close = |a: f64, b: f64| a == b || (a - b).abs() <= tol;
        self.variables.len() == other.variables.len()
            && self.rows.len() == other.rows.len()
            && self.variables.iter().zip(&other.variables).all(|(a, b)| {
                a.key == b.key
                    && a.var_type == b.var_type
                    && close(a.lower, b.lower)
                    && close(a.upper, b.upper)
                    && close(a.obj, b.obj)
            })
            && self.rows.iter().zip(&other.rows).all(|(a, b)| {
                a.key == b.key
                    && a.sense == b.sense
                    && close(a.rhs, b.rhs)
                    && a.coefs.len() == b.coefs.len()
                    && a
                        .coefs
                        .iter()
                        .zip(&b.coefs)
                        .all(|(x, y)| x.0 == y.0 && close(x.1, y.1))
            })
    }

    /// Value-level differences between two instances, by flat key. Used to
    /// find the variables a model edit touches.
    pub fn changed_keys(&self, after: &Instance) -> Vec<String> {
        let mut changed = std::collections::BTreeSet::new();
        for v in &after.variables {
            match self.variable(&v.key) {
                Some(old)
                    if old.lower == v.lower
                        && old.upper == v.upper
                        && old.obj == v.obj
                        && old.var_type == v.var_type => {}
                _ => {
                    changed.insert(v.key.clone());
                }
            }
        }
        let named = |inst: &Instance, row: &Row| -> BTreeMap<String, f64> {
            row.coefs
                .iter()
                .map(|&(j, c)| (inst.variables[j].key.clone(), c))
                .collect()
        };
        let before_rows: HashMap<&str, &Row> =
            self.rows.iter().map(|r| (r.key.as_str(), r)).collect();
        let after_rows: HashMap<&str, &Row> =
            after.rows.iter().map(|r| (r.key.as_str(), r)).collect();
        for r in &after.rows {
            let new_terms = named(after, r);
            let same = before_rows.get(r.key.as_str()).is_some_and(|old| {
                old.sense == r.sense && old.rhs == r.rhs && named(self, old) == new_terms
            });
            if !same {
                changed.extend(new_terms.into_keys());
            }
        }
        for r in &self.rows {
            if !after_rows.contains_key(r.key.as_str()) {
                changed.extend(named(self, r).into_keys());
            }
        }
        changed.into_iter().collect()
    }
}

/// Evaluates a coefficient expression in the context of a variable index
/// and/or a row index.
pub fn eval_coef(
    state: &ModelState,
    expr: &CoefExpr,
    var: Option<&IndexKey>,
    row: Option<&IndexKey>,
    context: &str,
) -> Result<f64, ModelError> {
    let (param, key) = match expr {
        CoefExpr::Literal(v) => return Ok(*v),
        CoefExpr::Param { param, key } => (param, key),
    };
    let entry = state
        .parameter(param)
        .ok_or_else(|| ModelError::unresolved(context, format!("unknown parameter `{param}`")))?;
    let mut parts = Vec::with_capacity(key.len());
    for part in key {
        let (src, pos, label) = match part {
            KeyPart::Var(i) => (var, *i, "variable"),
            KeyPart::Row(i) => (row, *i, "row"),
            KeyPart::Lit(s) => {
                parts.push(s.clone());
                continue;
            }
        };
        let component = src.and_then(|k| k.get(pos)).ok_or_else(|| {
            ModelError::unresolved(
                context,
                format!("`{param}` key needs {label} index component {pos}"),
            )
        })?;
        parts.push(component.to_string());
    }
    let k = IndexKey::new(parts);
    match &entry.value {
        ParameterValue::Scalar(v) if k.arity() == 0 => Ok(*v),
        ParameterValue::Keyed(map) => map.get(&k).copied().ok_or_else(|| {
            ModelError::unresolved(context, format!("parameter `{param}` has no key {k}"))
        }),
        other => Err(ModelError::unresolved(
            context,
            format!("parameter `{param}` is {} and cannot be indexed by {k}", other.kind()),
        )),
    }
}

/// Flattens a state with the builtin semantic registry.
pub fn instantiate(state: &ModelState) -> Result<Instance, ModelError> {
    instantiate_with(state, &SemanticRegistry::builtin())
}

pub fn instantiate_with(
    state: &ModelState,
    registry: &SemanticRegistry,
) -> Result<Instance, ModelError> {
    let mut variables = Vec::new();
    let mut lookup = HashMap::new();
    for fam in state.variable_families() {
        for idx in &fam.index_set {
            let b = fam.bounds_of(idx);
            let key = idx.flat(&fam.name);
            lookup.insert(key.clone(), variables.len());
            variables.push(Variable {
                key,
                family: fam.name.clone(),
                index: idx.clone(),
                var_type: fam.var_type,
                lower: b.lower,
                upper: b.upper,
                obj: 0.0,
            });
        }
    }

    let resolve = |family: &str, index: &IndexKey, ctx: &str| -> Result<usize, ModelError> {
        let key = index.flat(family);
        lookup.get(&key).copied().ok_or_else(|| {
            if state.variable_family(family).is_none() {
                ModelError::unresolved(ctx, format!("unknown variable family `{family}`"))
            } else {
                ModelError::unresolved(ctx, format!("unknown variable `{key}`"))
            }
        })
    };

    for comp in state.objective_components() {
        let ctx = format!("objective component `{}`", comp.name);
        for t in &comp.terms {
            let j = resolve(&t.var_family, &t.index, &ctx)?;
            let c = eval_coef(state, &t.coef, Some(&t.index), None, &ctx)?;
            variables[j].obj += comp.weight * c;
        }
    }

    let mut rows = Vec::new();
    for fam in state.constraint_families() {
        let ctx = format!("constraint family `{}`", fam.name);
        let mut push_row = |index: IndexKey,
                            terms: Vec<(usize, f64)>,
                            default_rhs: Option<f64>|
         -> Result<(), ModelError> {
            let rhs = match fam.rhs_spec.expr_for(&index) {
                Some(e) => eval_coef(state, e, None, Some(&index), &ctx)?,
                None => default_rhs.ok_or_else(|| {
                    ModelError::unresolved(&ctx, format!("no right-hand side for row {index}"))
                })?,
            };
            let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
            for (j, c) in terms {
                *merged.entry(j).or_insert(0.0) += c;
            }
            rows.push(Row {
                key: index.flat(&fam.name),
                family: fam.name.clone(),
                index,
                coefs: merged.into_iter().filter(|&(_, c)| c != 0.0).collect(),
                sense: fam.sense,
                rhs,
            });
            Ok(())
        };
        match &fam.lhs_spec {
            LhsSpec::ExplicitTerms { rows: lhs } => {
                for idx in &fam.index_set {
                    let mut terms = Vec::new();
                    for t in lhs.get(idx).map(Vec::as_slice).unwrap_or(&[]) {
                        let j = resolve(&t.var_family, &t.index, &ctx)?;
                        terms.push((j, eval_coef(state, &t.coef, Some(&t.index), Some(idx), &ctx)?));
                    }
                    push_row(idx.clone(), terms, None)?;
                }
            }
            LhsSpec::IndexedSum {
                var_family,
                matching,
                coef,
            } => {
                let vf = state.variable_family(var_family).ok_or_else(|| {
                    ModelError::unresolved(&ctx, format!("unknown variable family `{var_family}`"))
                })?;
                for idx in &fam.index_set {
                    let mut terms = Vec::new();
                    for vidx in &vf.index_set {
                        let hit = matching.iter().all(|&(vp, rp)| {
                            matches!((vidx.get(vp), idx.get(rp)), (Some(a), Some(b)) if a == b)
                        });
                        if hit {
                            let j = resolve(var_family, vidx, &ctx)?;
                            terms.push((j, eval_coef(state, coef, Some(vidx), Some(idx), &ctx)?));
                        }
                    }
                    push_row(idx.clone(), terms, None)?;
                }
            }
            LhsSpec::Semantic { kind, payload } => {
                let pack = registry.get(kind).ok_or_else(|| ModelError::UnregisteredSemanticKind {
                    family: fam.name.clone(),
                    kind: kind.clone(),
                })?;
                for srow in pack.expand(state, fam, payload)? {
                    let mut terms = Vec::with_capacity(srow.terms.len());
                    for (f, i, c) in &srow.terms {
                        terms.push((resolve(f, i, &ctx)?, *c));
                    }
                    push_row(srow.key, terms, srow.default_rhs)?;
                }
            }
        }
    }

    for v in &variables {
        if !v.obj.is_finite() || v.lower.is_nan() || v.upper.is_nan() {
            return Err(ModelError::NonFinite(format!("variable `{}`", v.key)));
        }
    }
    for r in &rows {
        if !r.rhs.is_finite() || r.coefs.iter().any(|(_, c)| !c.is_finite()) {
            return Err(ModelError::NonFinite(format!("row `{}`", r.key)));
        }
    }
    Ok(Instance::new(variables, rows))
}

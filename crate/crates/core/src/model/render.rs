use std::fmt::Write;

use super::semantic::SemanticRegistry;
use super::{LhsSpec, ModelState, ParameterValue};
use crate::patch::OpKind;

#[derive(Clone, Debug)]
pub struct RenderOptions {
    /// Maximum indices (and keyed values) listed per family or parameter.
    pub index_cap: usize,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions { index_cap: 200 }
    }
}

pub fn render_for_planner(state: &ModelState) -> String {
    render_for_planner_with(state, &RenderOptions::default(), &SemanticRegistry::builtin())
}

fn meta(out: &mut String, description: &str, tags: &std::collections::BTreeSet<String>) {
    if !description.is_empty() {
        let _ = write!(out, " : {description}");
    }
    if !tags.is_empty() {
        let tags: Vec<&str> = tags.iter().map(String::as_str).collect();
        let _ = write!(out, " {{tags: {}}}", tags.join(", "));
    }
    out.push('\n');
}

fn truncated(out: &mut String, total: usize, cap: usize, what: &str) {
    if total > cap {
        let _ = writeln!(out, "    ... [truncated: {} more {what}]", total - cap);
    }
}

pub fn render_for_planner_with(
    state: &ModelState,
    opts: &RenderOptions,
    registry: &SemanticRegistry,
) -> String {
    let cap = opts.index_cap;
    let mut out = String::new();
    let _ = writeln!(out, "MODEL (sense: minimize, version: {})", state.version());

    out.push_str("\nPARAMETERS\n");
    for p in state.parameters() {
        let _ = write!(out, "- {} [{}]", p.name, p.value.kind());
        match &p.value {
            ParameterValue::Scalar(v) => {
                let _ = write!(out, " = {v}");
                meta(&mut out, &p.description, &p.tags);
            }
            ParameterValue::Keyed(map) => {
                meta(&mut out, &p.description, &p.tags);
                for (k, v) in map.iter().take(cap) {
                    let _ = writeln!(out, "    value {k} = {v}");
                }
                truncated(&mut out, map.len(), cap, "values");
            }
            ParameterValue::List(items) => {
                meta(&mut out, &p.description, &p.tags);
                for k in items.iter().take(cap) {
                    let _ = writeln!(out, "    item {k}");
                }
                truncated(&mut out, items.len(), cap, "items");
            }
        }
    }

    out.push_str("\nVARIABLE FAMILIES\n");
    for v in state.variable_families() {
        let _ = write!(
            out,
            "- {} [{}, {} indices, default bounds {}]",
            v.name,
            v.var_type,
            v.index_set.len(),
            v.effective_default()
        );
        meta(&mut out, &v.description, &v.tags);
        for k in v.index_set.iter().take(cap) {
            let _ = writeln!(out, "    index {k}");
        }
        truncated(&mut out, v.index_set.len(), cap, "indices");
        for (k, b) in v.bound_overrides.iter().take(cap) {
            let _ = writeln!(out, "    bounds {k} = {b}");
        }
        truncated(&mut out, v.bound_overrides.len(), cap, "bound overrides");
    }

    out.push_str("\nCONSTRAINT FAMILIES\n");
    for c in state.constraint_families() {
        let lhs = match &c.lhs_spec {
            LhsSpec::ExplicitTerms { .. } => "explicit_terms".to_string(),
            LhsSpec::IndexedSum {
                var_family,
                matching,
                coef,
            } => {
                let m: Vec<String> = matching
                    .iter()
                    .map(|(v, r)| format!("var{v}=row{r}"))
                    .collect();
                format!("indexed_sum of {coef} * {var_family} where {}", m.join(" and "))
            }
            LhsSpec::Semantic { kind, payload } => {
                format!("{kind} {}", serde_json::Value::Object(payload.clone()))
            }
        };
        let rhs = match &c.rhs_spec.default {
            Some(e) => e.to_string(),
            None => "per row".to_string(),
        };
        let _ = write!(
            out,
            "- {} [{} rows, lhs: {lhs}, sense {}, rhs {rhs}]",
            c.name,
            c.index_set.len(),
            c.sense
        );
        meta(&mut out, &c.description, &c.tags);
        for k in c.index_set.iter().take(cap) {
            let _ = writeln!(out, "    index {k}");
        }
        truncated(&mut out, c.index_set.len(), cap, "indices");
        if let LhsSpec::ExplicitTerms { rows } = &c.lhs_spec {
            for (k, terms) in rows.iter().take(cap) {
                let t: Vec<String> = terms
                    .iter()
                    .map(|t| format!("{} * {}", t.coef, t.flat()))
                    .collect();
                let _ = writeln!(out, "    row {k}: {}", t.join(" + "));
            }
            truncated(&mut out, rows.len(), cap, "rows");
        }
        for (k, e) in c.rhs_spec.overrides.iter().take(cap) {
            let _ = writeln!(out, "    rhs {k} = {e}");
        }
        truncated(&mut out, c.rhs_spec.overrides.len(), cap, "rhs overrides");
    }

    out.push_str("\nOBJECTIVE COMPONENTS\n");
    for o in state.objective_components() {
        let _ = write!(out, "- {} [weight {}, {} terms]", o.name, o.weight, o.terms.len());
        meta(&mut out, &o.description, &o.tags);
        for t in o.terms.iter().take(cap) {
            let _ = writeln!(out, "    term {} coef {}", t.flat(), t.coef);
        }
        truncated(&mut out, o.terms.len(), cap, "terms");
    }

    if !state.entity_registry().is_empty() {
        out.push_str("\nENTITY REGISTRY\n");
        for (label, id) in state.entity_registry() {
            let _ = writeln!(out, "- {label} -> {id}");
        }
    }

    let kinds: Vec<_> = registry.kinds().collect();
    if !kinds.is_empty() {
        out.push_str("\nSEMANTIC LHS KINDS\n");
        for k in kinds {
            let _ = writeln!(out, "- {}: {}", k.name(), k.describe());
        }
    }

    out.push_str("\nALLOWED PATCH OPERATIONS\n");
    for op in OpKind::ALL {
        let _ = writeln!(out, "- {}", op.name());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{new_state, IndexKey, VarType, VariableFamily};

    #[test]
    fn truncation_marker() {
        let idx: Vec<IndexKey> = (0..10_000).map(|i| IndexKey::single(format!("i{i}"))).collect();
        let s = new_state()
            .register_variable_family(VariableFamily::new("big", VarType::Binary, idx))
            .unwrap();
        let text = render_for_planner_with(
            &s,
            &RenderOptions { index_cap: 100 },
            &SemanticRegistry::empty(),
        );
        let listed = text.lines().filter(|l| l.starts_with("    index (")).count();
        assert_eq!(listed, 100);
        assert!(text.contains("[truncated: 9900 more indices]"));
    }
}

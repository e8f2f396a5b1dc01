//! Domain packs that expand `semantic` constraint families into rows.
//!
//! The builtin registry carries the exam-scheduling pack with two kinds:
//! `reserved_virtual_slot` and `slot_load_cap`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Deserialize;
use serde_json::{Map, Value};

use super::{ConstraintFamily, IndexKey, ModelError, ModelState, ParameterValue};

/// One expanded row: terms as (variable family, index, coefficient) and the
/// rhs to use when the family's rhs spec has no entry for the row.
#[derive(Clone, Debug, PartialEq)]
pub struct SemanticRow {
    pub key: IndexKey,
    pub terms: Vec<(String, IndexKey, f64)>,
    pub default_rhs: Option<f64>,
}

pub trait SemanticKind: Send + Sync {
    fn name(&self) -> &str;

    /// Short text shown in planner renderings.
    fn describe(&self) -> &str;

    fn expand(
        &self,
        state: &ModelState,
        family: &ConstraintFamily,
        payload: &Map<String, Value>,
    ) -> Result<Vec<SemanticRow>, ModelError>;
}

#[derive(Clone, Default)]
pub struct SemanticRegistry {
    kinds: BTreeMap<String, Arc<dyn SemanticKind>>,
}

impl fmt::Debug for SemanticRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.kinds.keys()).finish()
    }
}

impl SemanticRegistry {
    pub fn empty() -> Self {
        SemanticRegistry::default()
    }

    /// Registry with the exam-scheduling pack installed.
    pub fn builtin() -> Self {
        let mut reg = SemanticRegistry::empty();
        reg.register(Arc::new(ReservedVirtualSlot));
        reg.register(Arc::new(SlotLoadCap));
        reg
    }

    pub fn register(&mut self, kind: Arc<dyn SemanticKind>) {
        self.kinds.insert(kind.name().to_string(), kind);
    }

    pub fn get(&self, name: &str) -> Option<&Arc<dyn SemanticKind>> {
        self.kinds.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.kinds.keys().map(String::as_str)
    }

    pub fn kinds(&self) -> impl Iterator<Item = &Arc<dyn SemanticKind>> {
        self.kinds.values()
    }
}

fn default_var_family() -> String {
    "assign".to_string()
}

fn default_enrollment() -> String {
    "block_enrollment".to_string()
}

fn payload_error(family: &ConstraintFamily, e: serde_json::Error) -> ModelError {
    ModelError::unresolved(
        format!("semantic payload of `{}`", family.name),
        e.to_string(),
    )
}

#[derive(Deserialize)]
struct Pin {
    block: IndexKey,
    slot: IndexKey,
}

#[derive(Deserialize)]
struct ReservedPayload {
    #[serde(default = "default_var_family")]
    var_family: String,
    #[serde(default)]
    pins: Vec<Pin>,
    block: Option<IndexKey>,
    slot: Option<IndexKey>,
}

/// Pins a virtual block to a slot: one row `assign(block, slot) = 1` per pin.
pub struct ReservedVirtualSlot;

impl SemanticKind for ReservedVirtualSlot {
    fn name(&self) -> &str {
        "reserved_virtual_slot"
    }

    fn describe(&self) -> &str {
        "payload {var_family?, pins: [{block, slot}]} or {block, slot}; row assign(block,slot) with rhs 1"
    }

    fn expand(
        &self,
        _state: &ModelState,
        family: &ConstraintFamily,
        payload: &Map<String, Value>,
    ) -> Result<Vec<SemanticRow>, ModelError> {
        let p: ReservedPayload = serde_json::from_value(Value::Object(payload.clone()))
            .map_err(|e| payload_error(family, e))?;
        let mut pins = p.pins;
        if let (Some(block), Some(slot)) = (p.block, p.slot) {
            pins.push(Pin { block, slot });
        }
        Ok(pins
            .into_iter()
            .map(|pin| {
                let mut parts = pin.block.into_parts();
                parts.extend(pin.slot.into_parts());
                let idx = IndexKey::new(parts);
                SemanticRow {
                    key: idx.clone(),
                    terms: vec![(p.var_family.clone(), idx, 1.0)],
                    default_rhs: Some(1.0),
                }
            })
            .collect())
    }
}

#[derive(Deserialize)]
struct CapRow {
    #[serde(default = "default_row")]
    row: IndexKey,
    slots: Vec<IndexKey>,
    cap: f64,
}

fn default_row() -> IndexKey {
    IndexKey::single("cap")
}

#[derive(Deserialize)]
struct CapPayload {
    #[serde(default = "default_var_family")]
    var_family: String,
    #[serde(default = "default_enrollment")]
    enrollment: String,
    #[serde(default)]
    rows: Vec<CapRow>,
    slots: Option<Vec<IndexKey>>,
    cap: Option<f64>,
}

/// Caps the enrollment placed in a set of slots:
/// `sum_b e(b) * assign(b, s) over s in slots <= cap`.
///
/// Blocks absent from the enrollment parameter count as 0 (virtual blocks).
pub struct SlotLoadCap;

impl SemanticKind for SlotLoadCap {
    fn name(&self) -> &str {
        "slot_load_cap"
    }

    fn describe(&self) -> &str {
        "payload {var_family?, enrollment?, rows: [{row, slots, cap}]} or {slots, cap}; row sum e(b)*assign(b,s) over the slots"
    }

    fn expand(
        &self,
        state: &ModelState,
        family: &ConstraintFamily,
        payload: &Map<String, Value>,
    ) -> Result<Vec<SemanticRow>, ModelError> {
        let p: CapPayload = serde_json::from_value(Value::Object(payload.clone()))
            .map_err(|e| payload_error(family, e))?;
        let mut rows = p.rows;
        if let (Some(slots), Some(cap)) = (p.slots, p.cap) {
            rows.push(CapRow {
                row: default_row(),
                slots,
                cap,
            });
        }
        let ctx = format!("constraint family `{}`", family.name);
        let vars = state.variable_family(&p.var_family).ok_or_else(|| {
            ModelError::unresolved(&ctx, format!("unknown variable family `{}`", p.var_family))
        })?;
        let enrollment = match state.parameter(&p.enrollment).map(|e| &e.value) {
            Some(ParameterValue::Keyed(map)) => map,
            Some(_) => {
                return Err(ModelError::unresolved(
                    &ctx,
                    format!("parameter `{}` is not keyed", p.enrollment),
                ))
            }
            None => {
                return Err(ModelError::unresolved(
                    &ctx,
                    format!("unknown parameter `{}`", p.enrollment),
                ))
            }
        };
        let mut out = Vec::with_capacity(rows.len());
        for row in rows {
            let slots: Vec<&str> = row.slots.iter().filter_map(|s| s.get(0)).collect();
            let mut terms = Vec::new();
            for idx in &vars.index_set {
                let (Some(block), Some(slot)) = (idx.get(0), idx.get(1)) else {
                    continue;
                };
                if !slots.contains(&slot) {
                    continue;
                }
                let e = enrollment
                    .get(&IndexKey::single(block))
                    .copied()
                    .unwrap_or(0.0);
                if e != 0.0 {
                    terms.push((p.var_family.clone(), idx.clone(), e));
                }
            }
            out.push(SemanticRow {
                key: row.row,
                terms,
                default_rhs: Some(row.cap),
            });
        }
        Ok(out)
    }
}

/// The (block, slot) pins of a `reserved_virtual_slot` payload.
pub fn reserved_pins(payload: &Map<String, Value>) -> Option<Vec<(IndexKey, IndexKey)>> {
    let p: ReservedPayload = serde_json::from_value(Value::Object(payload.clone())).ok()?;
    let mut pins: Vec<(IndexKey, IndexKey)> = p.pins.into_iter().map(|p| (p.block, p.slot)).collect();
    if let (Some(b), Some(s)) = (p.block, p.slot) {
        pins.push((b, s));
    }
    Some(pins)
}

/// The (slots, cap) rows of a `slot_load_cap` payload.
pub fn cap_rows(payload: &Map<String, Value>) -> Option<Vec<(Vec<IndexKey>, f64)>> {
    let p: CapPayload = serde_json::from_value(Value::Object(payload.clone())).ok()?;
    let mut rows: Vec<(Vec<IndexKey>, f64)> = p.rows.into_iter().map(|r| (r.slots, r.cap)).collect();
    if let (Some(s), Some(c)) = (p.slots, p.cap) {
        rows.push((s, c));
    }
    Some(rows)
}

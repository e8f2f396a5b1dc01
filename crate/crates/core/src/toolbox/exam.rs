//! Four-stage exam-scheduling warm start: reserved-slot pinning,
//! front-loading of large blocks, day-load capping, base-assignment fallback.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ToolboxError;
use crate::model::semantic::{cap_rows, reserved_pins};
use crate::model::{IndexKey, LhsSpec, ModelState, ParameterValue};
use crate::solver::{WarmSource, WarmStart};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExamWarmStartParams {
    /// Block id to enrollment.
    pub enrollment: BTreeMap<String, u64>,
    /// Day id to its slots.
    pub days: BTreeMap<String, Vec<u32>>,
    pub reserved: BTreeMap<String, u32>,
    /// `None` disables front-loading.
    pub large_threshold: Option<u64>,
    /// Front-loading targets slots strictly below the cutoff.
    pub cutoff: Option<u32>,
    pub day_caps: BTreeMap<String, u64>,
    pub base: BTreeMap<String, u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExamStage {
    Pin,
    FrontLoad,
    DayCap,
    Fallback,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExamAssignment {
    pub assignment: BTreeMap<String, u32>,
    pub stage: BTreeMap<String, ExamStage>,
    /// Day load after each day-cap placement, in placement order.
    pub cap_loads: BTreeMap<String, Vec<u64>>,
}

impl ExamWarmStartParams {
    pub fn blocks(&self) -> BTreeSet<&str> {
        self.enrollment
            .keys()
            .chain(self.reserved.keys())
            .chain(self.base.keys())
            .map(String::as_str)
            .collect()
    }

    pub fn slots(&self) -> BTreeSet<u32> {
        self.days.values().flatten().copied().collect()
    }

    fn e(&self, b: &str) -> u64 {
        self.enrollment.get(b).copied().unwrap_or(0)
    }
}

fn sorted_by_e<'a>(p: &ExamWarmStartParams, mut blocks: Vec<&'a str>, descending: bool) -> Vec<&'a str> {
    blocks.sort_by(|a, b| {
        let ord = p.e(a).cmp(&p.e(b));
        let ord = if descending { ord.reverse() } else { ord };
        ord.then_with(|| a.cmp(b))
    });
    blocks
}

pub fn exam_heuristic_warm_start(
    params: &ExamWarmStartParams,
) -> Result<ExamAssignment, ToolboxError> {
    let blocks = params.blocks();
    let slots = params.slots();
    let slot_total: usize = params.days.values().map(Vec::len).sum();
    if slot_total != slots.len() {
        return Err(ToolboxError::InfeasibleInput("days do not partition the slots".into()));
    }
    if blocks.len() > slots.len() {
        return Err(ToolboxError::InfeasibleInput(format!(
            "{} blocks for {} slots",
            blocks.len(),
            slots.len()
        )));
    }
    let mut out = ExamAssignment::default();
    let mut free = slots.clone();
    let place = |out: &mut ExamAssignment, free: &mut BTreeSet<u32>, b: &str, s: u32, st| {
        out.assignment.insert(b.to_string(), s);
        out.stage.insert(b.to_string(), st);
        free.remove(&s);
    };

    for (v, &s) in &params.reserved {
        if !free.contains(&s) {
            return Err(ToolboxError::InfeasibleInput(format!(
                "reserved slot {s} of `{v}` is unknown or already pinned"
            )));
        }
        place(&mut out, &mut free, v, s, ExamStage::Pin);
    }

    if let Some(tau) = params.large_threshold {
        let large: Vec<&str> = blocks
            .iter()
            .copied()
            .filter(|b| !out.assignment.contains_key(*b) && params.e(b) >= tau)
            .collect();
        for b in sorted_by_e(params, large, true) {
            let pre = free
                .iter()
                .copied()
                .find(|&s| params.cutoff.is_some_and(|c| s < c));
            if let Some(s) = pre {
                place(&mut out, &mut free, b, s, ExamStage::FrontLoad);
            }
        }
    }

    for (d, &cap) in &params.day_caps {
        let Some(day_slots) = params.days.get(d) else {
            continue;
        };
        let mut load: u64 = out
            .assignment
            .iter()
            .filter(|(_, s)| day_slots.contains(s))
            .map(|(b, _)| params.e(b))
            .sum();
        let pending: Vec<&str> = blocks
            .iter()
            .copied()
            .filter(|b| !out.assignment.contains_key(*b))
            .collect();
        for b in sorted_by_e(params, pending, false) {
            let slot = free.iter().copied().find(|s| day_slots.contains(s));
            let Some(s) = slot else { break };
            if load + params.e(b) > cap {
                break;
            }
            place(&mut out, &mut free, b, s, ExamStage::DayCap);
            load += params.e(b);
            out.cap_loads.entry(d.clone()).or_default().push(load);
        }
    }

    for b in blocks {
        if out.assignment.contains_key(b) {
            continue;
        }
        let s = match params.base.get(b) {
            Some(s) if free.contains(s) => *s,
            _ => *free
                .iter()
                .next()
                .ok_or_else(|| ToolboxError::InfeasibleInput("free-slot pool exhausted".into()))?,
        };
        place(&mut out, &mut free, b, s, ExamStage::Fallback);
    }
    Ok(out)
}

/// Converts an assignment into a 0/1 start over `family(block, slot)`.
pub fn exam_warm_start(
    x: &BTreeMap<String, u32>,
    family: &str,
    params: &ExamWarmStartParams,
) -> WarmStart {
    let mut values = BTreeMap::new();
    for b in params.blocks() {
        for s in params.slots() {
            let on = x.get(b) == Some(&s);
            values.insert(
                IndexKey::new(vec![b.to_string(), s.to_string()]).flat(family),
                if on { 1.0 } else { 0.0 },
            );
        }
    }
    WarmStart {
        values,
        source_label: WarmSource::Heuristic,
    }
}

fn keyed<'a>(state: &'a ModelState, name: &str) -> Option<&'a BTreeMap<IndexKey, f64>> {
    match &state.parameter(name)?.value {
        ParameterValue::Keyed(m) => Some(m),
        _ => None,
    }
}

fn scalar(state: &ModelState, name: &str) -> Option<f64> {
    match state.parameter(name)?.value {
        ParameterValue::Scalar(v) => Some(v),
        _ => None,
    }
}

/// Reads heuristic inputs from an exam-style state: binary family `assign`
/// over (block, slot), parameters `block_enrollment`, `slot_day`,
/// `large_threshold` and `front_cutoff`, and the semantic pin and cap
/// families. The base assignment comes from `prior`.
pub fn exam_params_from_state(
    state: &ModelState,
    prior: Option<&BTreeMap<String, f64>>,
) -> Option<ExamWarmStartParams> {
    let assign = state.variable_family("assign")?;
    let mut p = ExamWarmStartParams::default();
    let mut slots = BTreeSet::new();
    for idx in &assign.index_set {
        let (b, s) = (idx.get(0)?, idx.get(1)?.parse::<u32>().ok()?);
        p.enrollment.entry(b.to_string()).or_insert(0);
        slots.insert(s);
    }
    if let Some(e) = keyed(state, "block_enrollment") {
        for (k, v) in e {
            if let Some(entry) = k.get(0).and_then(|b| p.enrollment.get_mut(b)) {
                *entry = v.max(0.0).round() as u64;
            }
        }
    }
    let slot_day = keyed(state, "slot_day");
    for s in &slots {
        let day = slot_day
            .and_then(|m| m.get(&IndexKey::single(s.to_string())))
            .map_or_else(|| "1".to_string(), |d| format!("{d}"));
        p.days.entry(day).or_default().push(*s);
    }
    p.large_threshold = scalar(state, "large_threshold").map(|v| v.max(0.0).ceil() as u64);
    p.cutoff = scalar(state, "front_cutoff").map(|v| v.max(0.0).round() as u32);
    for fam in state.constraint_families() {
        let LhsSpec::Semantic { kind, payload } = &fam.lhs_spec else {
            continue;
        };
        match kind.as_str() {
            "reserved_virtual_slot" => {
                for (b, s) in reserved_pins(payload)? {
                    let slot = s.get(0)?.parse::<u32>().ok()?;
                    p.reserved.insert(b.get(0)?.to_string(), slot);
                }
            }
            "slot_load_cap" => {
                for (row_slots, cap) in cap_rows(payload)? {
                    let set: BTreeSet<u32> =
                        row_slots.iter().filter_map(|k| k.get(0)?.parse().ok()).collect();
                    for (d, ds) in &p.days {
                        if ds.iter().copied().collect::<BTreeSet<_>>() == set {
                            p.day_caps.insert(d.clone(), cap.max(0.0).floor() as u64);
                        }
                    }
                }
            }
            _ => {}
        }
    }
    if let Some(prior) = prior {
        for idx in &assign.index_set {
            if prior.get(&idx.flat("assign")).is_some_and(|&v| v > 0.5) {
                p.base.insert(idx.get(0)?.to_string(), idx.get(1)?.parse().ok()?);
            }
        }
    }
    Some(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_example() {
        let p = ExamWarmStartParams {
            enrollment: [("b1", 400), ("b2", 100), ("v1", 0)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            days: [("day1", vec![1, 2, 3]), ("day2", vec![4, 5, 6])]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            reserved: [("v1".to_string(), 5)].into(),
            large_threshold: Some(300),
            cutoff: Some(3),
            day_caps: [("day2".to_string(), 150)].into(),
            base: [("b1", 4), ("b2", 6), ("v1", 5)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        };
        let x = exam_heuristic_warm_start(&p).unwrap();
        let want: BTreeMap<String, u32> = [("v1", 5), ("b1", 1), ("b2", 4)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        assert_eq!(x.assignment, want);
        assert_eq!(x.stage["b1"], ExamStage::FrontLoad);
        assert_eq!(x.stage["b2"], ExamStage::DayCap);
    }
}

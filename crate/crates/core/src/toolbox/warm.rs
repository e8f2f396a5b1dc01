use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ToolboxError;
use crate::model::Instance;
use crate::solver::{WarmSource, WarmStart};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectWarmStart {
    pub warm_start: WarmStart,
    /// Matched prior keys over instance variables.
    pub coverage: f64,
    pub dropped: Vec<String>,
}

/// Keeps the prior values whose keys still exist in `instance`.
pub fn direct_warm_start(prior: &BTreeMap<String, f64>, instance: &Instance) -> DirectWarmStart {
    let mut values = BTreeMap::new();
    let mut dropped = Vec::new();
    for (k, &v) in prior {
        if instance.position(k).is_some() {
            values.insert(k.clone(), v);
        } else {
            dropped.push(k.clone());
        }
    }
    let coverage = if instance.num_vars() == 0 {
        1.0
    } else {
        values.len() as f64 / instance.num_vars() as f64
    };
    DirectWarmStart {
        warm_start: WarmStart {
            values,
            source_label: WarmSource::Direct,
        },
        coverage,
        dropped,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixAndRelease {
    pub warm_start: WarmStart,
    /// Unaffected variables pinned to their prior values.
    pub fixed: BTreeMap<String, f64>,
    pub released: Vec<String>,
}

impl FixAndRelease {
    /// Copy of `instance` with every fixed variable's bounds collapsed.
    pub fn restrict(&self, instance: &Instance) -> Instance {
        let mut out = instance.clone();
        for v in &mut out.variables {
            if let Some(&val) = self.fixed.get(&v.key) {
                v.lower = val;
                v.upper = val;
            }
        }
        out
    }
}

/// Pins every variable outside `affected` to its prior value and frees the
/// rest; the whole prior rides along as the warm start.
pub fn fix_and_release(
    prior: &BTreeMap<String, f64>,
    affected: &BTreeSet<String>,
    instance: &Instance,
) -> Result<FixAndRelease, ToolboxError> {
    let mut fixed = BTreeMap::new();
    let mut released = Vec::new();
    for v in &instance.variables {
        if affected.contains(&v.key) {
            released.push(v.key.clone());
            continue;
        }
        let val = *prior
            .get(&v.key)
            .ok_or_else(|| ToolboxError::MissingPriorValue(v.key.clone()))?;
        fixed.insert(v.key.clone(), val);
    }
    let mut ws = direct_warm_start(prior, instance).warm_start;
    ws.source_label = WarmSource::FixAndRelease;
    Ok(FixAndRelease {
        warm_start: ws,
        fixed,
        released,
    })
}

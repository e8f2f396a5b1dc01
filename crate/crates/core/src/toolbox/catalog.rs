use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::exam::exam_params_from_state;
use crate::model::ModelState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "warm")]
    Warm,
    #[serde(rename = "warm+tuned")]
    WarmTuned,
    #[serde(rename = "tuned")]
    Tuned,
    #[serde(rename = "scratch")]
    Scratch,
    #[serde(rename = "heuristic_warm")]
    HeuristicWarm,
    #[serde(rename = "fix_and_release")]
    FixAndRelease,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Warm,
        Strategy::WarmTuned,
        Strategy::Tuned,
        Strategy::Scratch,
        Strategy::HeuristicWarm,
        Strategy::FixAndRelease,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Warm => "warm",
            Strategy::WarmTuned => "warm+tuned",
            Strategy::Tuned => "tuned",
            Strategy::Scratch => "scratch",
            Strategy::HeuristicWarm => "heuristic_warm",
            Strategy::FixAndRelease => "fix_and_release",
        }
    }

    pub fn needs_prior(self) -> bool {
        matches!(
            self,
            Strategy::Warm | Strategy::WarmTuned | Strategy::HeuristicWarm | Strategy::FixAndRelease
        )
    }

    pub fn uses_preset(self) -> bool {
        matches!(self, Strategy::Tuned | Strategy::WarmTuned)
    }

    fn describe(self) -> &'static str {
        match self {
            Strategy::Warm => "install the previous incumbent as a MIP start",
            Strategy::WarmTuned => "previous incumbent as MIP start plus the tuned preset",
            Strategy::Tuned => "solve from scratch with the instance's tuned preset",
            Strategy::Scratch => "solve from scratch with default settings",
            Strategy::HeuristicWarm => "exam-scheduling heuristic assignment as MIP start",
            Strategy::FixAndRelease => {
                "pin variables untouched by the edit to the previous incumbent and re-solve the rest"
            }
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        let t = if t == "warm_tuned" || t == "warm_+_tuned" { "warm+tuned".to_string() } else { t };
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == t)
            .ok_or_else(|| format!("unknown strategy `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub strategy: Strategy,
    pub available: bool,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyCatalog {
    pub entries: Vec<CatalogEntry>,
}

impl StrategyCatalog {
    pub fn available(&self) -> impl Iterator<Item = &CatalogEntry> {
        self.entries.iter().filter(|e| e.available)
    }

    pub fn is_available(&self, s: Strategy) -> bool {
        self.get(s).is_some_and(|e| e.available)
    }

    pub fn get(&self, s: Strategy) -> Option<&CatalogEntry> {
        self.entries.iter().find(|e| e.strategy == s)
    }

    pub fn preset(&self) -> Option<&str> {
        self.entries.iter().find_map(|e| e.preset.as_deref())
    }
}

/// Evaluates availability for the given state. `preset` is the tuned preset
/// registered for the instance, if any.
pub fn list_strategies(state: &ModelState, has_prior: bool, preset: Option<&str>) -> StrategyCatalog {
    let exam = has_prior && exam_params_from_state(state, None).is_some();
    let entries = Strategy::ALL
        .into_iter()
        .map(|s| {
            let available = match s {
                Strategy::Scratch => true,
                Strategy::Tuned => preset.is_some(),
                Strategy::WarmTuned => has_prior && preset.is_some(),
                Strategy::HeuristicWarm => exam,
                Strategy::Warm | Strategy::FixAndRelease => has_prior,
            };
            CatalogEntry {
                strategy: s,
                available,
                description: s.describe().to_string(),
                preset: if s.uses_preset() { preset.map(str::to_string) } else { None },
            }
        })
        .collect();
    StrategyCatalog { entries }
}

//! Scenario files: a serialized model state plus an optional sidecar
//! `<stem>.meta.json`, and prompt catalogs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::agents::{PromptCheck, Reference};
use crate::llm::MockScript;
use crate::model::{load_state, ModelError, ModelState};
use crate::patch::{ActionSet, Patch};

const TOY_STATE: &str = include_str!("../../../scenarios/toy.json");
const TOY_META: &str = include_str!("../../../scenarios/toy.meta.json");
const TOY_MOCK: &str = include_str!("../../../scenarios/toy.mock.json");
const TOY_CATALOG: &str = include_str!("../../../scenarios/toy_catalog.json");

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid scenario {path}: {source}")]
    Model { path: String, source: ModelError },
    #[error("invalid sidecar {path}: {message}")]
    Meta { path: String, message: String },
    #[error("malformed catalog:\n{}", .0.join("\n"))]
    Catalog(Vec<String>),
}

/// Sidecar metadata; every field is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioMeta {
    pub name: Option<String>,
    pub description: Option<String>,
    /// Tuned preset registered for this instance.
    pub preset: Option<String>,
    /// Domain framing text appended to the planner system prompt.
    pub framing: Option<String>,
    /// Path, relative to the scenario, of a text file holding the framing.
    pub framing_file: Option<String>,
    /// Path, relative to the scenario, of the mock planner script.
    pub mock_script: Option<String>,
    pub catalog: Option<String>,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub state: ModelState,
    pub meta: ScenarioMeta,
    pub framing: Option<String>,
    pub mock: Option<MockScript>,
    /// Directory the scenario was loaded from; `None` for built-ins.
    pub dir: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

impl Scenario {
    /// The toy transportation instance shipped with the crate.
    pub fn toy() -> Scenario {
        let state = load_state(TOY_STATE).expect("shipped toy scenario parses");
        let meta: ScenarioMeta = serde_json::from_str(TOY_META).expect("shipped toy meta parses");
        let mock = MockScript::from_json(TOY_MOCK).expect("shipped toy mock parses");
        Scenario {
            name: "toy".into(),
            state,
            framing: meta.framing.clone(),
            meta,
            mock: Some(mock),
            dir: None,
        }
    }

    pub fn builtin(name: &str) -> Option<Scenario> {
        (name == "toy" || name == "toy.json").then(Scenario::toy)
    }

    /// Loads a scenario file, or a built-in by name when no such file exists.
    pub fn load(spec: &str) -> Result<Scenario, ScenarioError> {
        let path = Path::new(spec);
        if !path.exists() {
            if let Some(s) = Scenario::builtin(spec) {
                return Ok(s);
            }
        }
        Scenario::from_path(path)
    }

    pub fn from_path(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = read(path)?;
        let state = load_state(&text).map_err(|source| ScenarioError::Model {
            path: path.display().to_string(),
            source,
        })?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("scenario")
            .to_string();
        let meta_path = dir.join(format!("{stem}.meta.json"));
        let meta: ScenarioMeta = if meta_path.exists() {
            serde_json::from_str(&read(&meta_path)?).map_err(|e| ScenarioError::Meta {
                path: meta_path.display().to_string(),
                message: e.to_string(),
            })?
        } else {
            ScenarioMeta::default()
        };
        let mut framing = meta.framing.clone();
        if let Some(f) = &meta.framing_file {
            framing = Some(read(&dir.join(f))?);
        }
        let mock_path = match &meta.mock_script {
            Some(m) => Some(dir.join(m)),
            None => Some(dir.join(format!("{stem}.mock.json"))).filter(|p| p.exists()),
        };
        let mock = match mock_path {
            Some(p) => Some(MockScript::from_json(&read(&p)?).map_err(|e| ScenarioError::Meta {
                path: p.display().to_string(),
                message: e.to_string(),
            })?),
            None => None,
        };
        Ok(Scenario {
            name: meta.name.clone().unwrap_or(stem),
            state,
            meta,
            framing,
            mock,
            dir: Some(dir),
        })
    }
}

/// One prompt of a replay catalog.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogItem {
    pub prompt_id: String,
    pub delta: String,
    #[serde(default)]
    pub reference_actions: Vec<Patch>,
    #[serde(default)]
    pub prompt_checks: Vec<PromptCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_metrics: Option<Value>,
}

impl CatalogItem {
    pub fn reference(&self) -> Option<Reference> {
        (!self.reference_actions.is_empty()).then(|| Reference {
            actions: ActionSet::new(self.reference_actions.clone()),
            checks: self.prompt_checks.clone(),
        })
    }
}

/// Parses a catalog, reporting every malformed entry at once.
pub fn parse_catalog(text: &str) -> Result<Vec<CatalogItem>, ScenarioError> {
    let raw: Vec<Value> = serde_json::from_str(text)
        .map_err(|e| ScenarioError::Catalog(vec![format!("not a JSON list: {e}")]))?;
    let mut items = Vec::new();
    let mut errors = Vec::new();
    for (i, v) in raw.into_iter().enumerate() {
        let id = v
            .get("prompt_id")
            .and_then(Value::as_str)
            .unwrap_or("?")
            .to_string();
        match serde_json::from_value::<CatalogItem>(v) {
            Ok(item) => items.push(item),
            Err(e) => errors.push(format!("entry {i} ({id}): {e}")),
        }
    }
    if errors.is_empty() {
        Ok(items)
    } else {
        Err(ScenarioError::Catalog(errors))
    }
}

pub fn load_catalog(spec: &str) -> Result<Vec<CatalogItem>, ScenarioError> {
    let path = Path::new(spec);
    if !path.exists() && (spec == "toy_catalog" || spec == "toy_catalog.json") {
        return parse_catalog(TOY_CATALOG);
    }
    parse_catalog(&read(path)?)
}

pub fn toy_catalog() -> Vec<CatalogItem> {
    parse_catalog(TOY_CATALOG).expect("shipped toy catalog parses")
}

/// The toy transportation model built in code: two plants, three
/// customers, minimize shipping cost.
pub fn toy_state() -> ModelState {
    use crate::model::{
        new_state, CoefExpr, ConstraintFamily, IndexKey, KeyPart, LhsSpec, ObjectiveComponent,
        ParameterEntry, ParameterValue, RhsSpec, Sense, Term, VarType, VariableFamily,
    };
    let plants = ["P1", "P2"];
    let customers = ["C1", "C2", "C3"];
    let costs = [[4.0, 6.0, 8.0], [5.0, 4.0, 3.0]];
    let pairs: Vec<IndexKey> = plants
        .iter()
        .flat_map(|p| customers.iter().map(move |c| IndexKey::from(vec![*p, *c])))
        .collect();
    let build = || -> Result<ModelState, ModelError> {
        let s = new_state()
            .register_parameter(
                ParameterEntry::new(
                    "plants",
                    ParameterValue::List(plants.iter().map(|p| IndexKey::single(*p)).collect()),
                )
                .describe("plant ids")
                .tag("set"),
            )?
            .register_parameter(
                ParameterEntry::new(
                    "customers",
                    ParameterValue::List(customers.iter().map(|c| IndexKey::single(*c)).collect()),
                )
                .describe("customer ids")
                .tag("set"),
            )?
            .register_parameter(
                ParameterEntry::new("supply", ParameterValue::keyed([("P1", 20.0), ("P2", 45.0)]))
                    .describe("plant capacity")
                    .tag("capacity"),
            )?
            .register_parameter(
                ParameterEntry::new(
                    "demand",
                    ParameterValue::keyed([("C1", 12.0), ("C2", 15.0), ("C3", 18.0)]),
                )
                .describe("customer demand")
                .tag("demand"),
            )?
            .register_parameter(
                ParameterEntry::new(
                    "costs",
                    ParameterValue::Keyed(
                        pairs
                            .iter()
                            .enumerate()
                            .map(|(k, key)| (key.clone(), costs[k / 3][k % 3]))
                            .collect(),
                    ),
                )
                .describe("unit shipping cost")
                .tag("cost"),
            )?
            .register_variable_family(
                VariableFamily::new("flows", VarType::Continuous, pairs.clone())
                    .describe("units shipped from plant to customer"),
            )?
            .register_constraint_family(
                ConstraintFamily::new(
                    "supply_constraints",
                    plants.iter().map(|p| IndexKey::single(*p)).collect(),
                    LhsSpec::IndexedSum {
                        var_family: "flows".into(),
                        matching: vec![(0, 0)],
                        coef: CoefExpr::Literal(1.0),
                    },
                    Sense::Le,
                    RhsSpec::uniform(CoefExpr::param("supply", vec![KeyPart::Row(0)])),
                )
                .describe("shipments out of a plant stay within its supply"),
            )?
            .register_constraint_family(
                ConstraintFamily::new(
                    "demand_constraints",
                    customers.iter().map(|c| IndexKey::single(*c)).collect(),
                    LhsSpec::IndexedSum {
                        var_family: "flows".into(),
                        matching: vec![(1, 0)],
                        coef: CoefExpr::Literal(1.0),
                    },
                    Sense::Ge,
                    RhsSpec::uniform(CoefExpr::param("demand", vec![KeyPart::Row(0)])),
                )
                .describe("each customer receives at least its demand"),
            )?
            .register_objective_component(
                ObjectiveComponent::new(
                    "transport_cost",
                    1.0,
                    pairs
                        .iter()
                        .map(|k| {
                            Term::new(
                                "flows",
                                k.clone(),
                                CoefExpr::param("costs", vec![KeyPart::Var(0), KeyPart::Var(1)]),
                            )
                        })
                        .collect(),
                )
                .describe("total shipping cost"),
            )?;
        Ok(s.register_entity("Plant 1", "P1")
            .register_entity("Plant 2", "P2")
            .register_entity("Customer 1", "C1")
            .register_entity("Customer 2", "C2")
            .register_entity("Customer 3", "C3"))
    };
    build().expect("toy model is well formed")
}

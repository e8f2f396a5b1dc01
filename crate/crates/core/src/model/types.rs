use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use super::serde_util::{inf_as_null, keyed_list};
use super::IndexKey;

/// Current value of a named parameter entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParameterValue {
    Scalar(f64),
    Keyed(#[serde(with = "keyed_list")] BTreeMap<IndexKey, f64>),
    List(Vec<IndexKey>),
}

impl ParameterValue {
    pub fn kind(&self) -> &'static str {
        match self {
            ParameterValue::Scalar(_) => "scalar",
            ParameterValue::Keyed(_) => "keyed",
            ParameterValue::List(_) => "list",
        }
    }

    pub fn keyed<I, K>(entries: I) -> Self
    where
        I: IntoIterator<Item = (K, f64)>,
        K: Into<IndexKey>,
    {
        ParameterValue::Keyed(entries.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterEntry {
    pub name: String,
    pub value: ParameterValue,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub tags: BTreeSet<String>,
}

impl ParameterEntry {
    pub fn new(name: impl Into<String>, value: ParameterValue) -> Self {
        ParameterEntry {
            name: name.into(),
            value,
            description: String::new(),
            tags: BTreeSet::new(),
        }
    }

    pub fn describe(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    pub fn tag(mut self, tag: impl Into<String>) -> Self {
        self.tags.insert(tag.into());
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarType {
    Binary,
    Integer,
    Continuous,
}

impl VarType {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarType::Continuous)
    }

    pub fn default_bounds(self) -> Bounds {
        match self {
            VarType::Binary => Bounds::new(0.0, 1.0),
            _ => Bounds::new(0.0, f64::INFINITY),
        }
    }
}

impl fmt::Display for VarType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VarType::Binary => "binary",
            VarType::Integer => "integer",
            VarType::Continuous => "continuous",
        })
    }
}

/// Lower/upper bound pair; infinities travel as `null`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    #[serde(
        serialize_with = "inf_as_null::serialize_lower",
        deserialize_with = "inf_as_null::deserialize_lower",
        default = "neg_inf"
    )]
    pub lower: f64,
    #[serde(
        serialize_with = "inf_as_null::serialize_upper",
        deserialize_with = "inf_as_null::deserialize_upper",
        default = "pos_inf"
    )]
    pub upper: f64,
}

fn neg_inf() -> f64 {
    f64::NEG_INFINITY
}

fn pos_inf() -> f64 {
    f64::INFINITY
}

impl Bounds {
    pub fn new(lower: f64, upper: f64) -> Self {
        Bounds { lower, upper }
    }

    pub fn fixed(value: f64) -> Self {
        Bounds::new(value, value)
    }

    pub fn is_ordered(&self) -> bool {
        !self.lower.is_nan() && !self.upper.is_nan() && self.lower <= self.upper
    }
}

impl fmt::Display for Bounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lo = if self.lower.is_finite() {
            format!("[{}", self.lower)
        } else {
            "(-inf".to_string()
        };
        let hi = if self.upper.is_finite() {
            format!("{}]", self.upper)
        } else {
            "inf)".to_string()
        };
        write!(f, "{lo}, {hi}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableFamily {
    pub name: String,
    pub index_set: Vec<IndexKey>,
    pub var_type: VarType,
    /// `None` means the type default: [0, 1] for binaries, [0, inf) otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_bounds: Option<Bounds>,
    #[serde(default, with = "keyed_list")]
    pub bound_overrides: BTreeMap<IndexKey, Bounds>,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub tags: BTreeSet<String>,
}

impl VariableFamily {
    pub fn new(name: impl Into<String>, var_type: VarType, index_set: Vec<IndexKey>) -> Self {
        VariableFamily {
            name: name.into(),
            index_set,
            var_type,
            default_bounds: None,
            bound_overrides: BTreeMap::new(),
            description: String::new(),
            tags: BTreeSet::new(),
        }
    }

    pub fn describe(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    pub fn tag(mut self, tag: impl Into<String>) -> Self {
        self.tags.insert(tag.into());
        self
    }

    pub fn with_default_bounds(mut self, bounds: Bounds) -> Self {
        self.default_bounds = Some(bounds);
        self
    }

    pub fn effective_default(&self) -> Bounds {
        self.default_bounds
            .unwrap_or_else(|| self.var_type.default_bounds())
    }

    pub fn bounds_of(&self, index: &IndexKey) -> Bounds {
        self.bound_overrides
            .get(index)
            .copied()
            .unwrap_or_else(|| self.effective_default())
    }

    pub fn contains(&self, index: &IndexKey) -> bool {
        self.index_set.contains(index)
    }
}

/// One component of a parameter key built from the surrounding context.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeyPart {
    /// Component `n` of the variable index.
    Var(usize),
    /// Component `n` of the row index.
    Row(usize),
    Lit(String),
}

/// Coefficient or right-hand-side expression: a literal or a parameter lookup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefExpr {
    Literal(f64),
    Param {
        param: String,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        key: Vec<KeyPart>,
    },
}

impl CoefExpr {
    pub fn param(name: impl Into<String>, key: Vec<KeyPart>) -> Self {
        CoefExpr::Param {
            param: name.into(),
            key,
        }
    }

    pub fn param_name(&self) -> Option<&str> {
        match self {
            CoefExpr::Param { param, .. } => Some(param),
            CoefExpr::Literal(_) => None,
        }
    }
}

impl Default for CoefExpr {
    fn default() -> Self {
        CoefExpr::Literal(1.0)
    }
}

impl fmt::Display for CoefExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoefExpr::Literal(v) => write!(f, "{v}"),
            CoefExpr::Param { param, key } if key.is_empty() => write!(f, "{param}"),
            CoefExpr::Param { param, key } => {
                let parts: Vec<String> = key
                    .iter()
                    .map(|p| match p {
                        KeyPart::Var(i) => format!("var{i}"),
                        KeyPart::Row(i) => format!("row{i}"),
                        KeyPart::Lit(s) => s.clone(),
                    })
                    .collect();
                write!(f, "{param}[{}]", parts.join(","))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub var_family: String,
    pub index: IndexKey,
    #[serde(default)]
    pub coef: CoefExpr,
}

impl Term {
    pub fn new(var_family: impl Into<String>, index: impl Into<IndexKey>, coef: CoefExpr) -> Self {
        Term {
            var_family: var_family.into(),
            index: index.into(),
            coef,
        }
    }

    pub fn flat(&self) -> String {
        self.index.flat(&self.var_family)
    }
}

/// Left-hand-side specification of a constraint family.
#[derive(Clone, Debug, PartialEq)]
pub enum LhsSpec {
    /// Row key -> explicit list of terms.
    ExplicitTerms { rows: BTreeMap<IndexKey, Vec<Term>> },
    /// Sum over every member of `var_family` whose index agrees with the row
    /// key on each `(var_position, row_position)` pair.
    IndexedSum {
        var_family: String,
        matching: Vec<(usize, usize)>,
        coef: CoefExpr,
    },
    /// Expanded by a registered domain pack.
    Semantic { kind: String, payload: Map<String, Value> },
}

impl LhsSpec {
    pub fn kind(&self) -> &str {
        match self {
            LhsSpec::ExplicitTerms { .. } => "explicit_terms",
            LhsSpec::IndexedSum { .. } => "indexed_sum",
            LhsSpec::Semantic { kind, .. } => kind,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ExplicitRepr {
    #[serde(with = "keyed_list")]
    rows: BTreeMap<IndexKey, Vec<Term>>,
}

#[derive(Serialize, Deserialize)]
struct IndexedSumRepr {
    var_family: String,
    #[serde(rename = "match", default)]
    matching: Vec<(usize, usize)>,
    #[serde(default)]
    coef: CoefExpr,
}

impl Serialize for LhsSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let (kind, body) = match self {
            LhsSpec::ExplicitTerms { rows } => (
                "explicit_terms",
                serde_json::to_value(ExplicitRepr { rows: rows.clone() }),
            ),
            LhsSpec::IndexedSum {
                var_family,
                matching,
                coef,
            } => (
                "indexed_sum",
                serde_json::to_value(IndexedSumRepr {
                    var_family: var_family.clone(),
                    matching: matching.clone(),
                    coef: coef.clone(),
                }),
            ),
            LhsSpec::Semantic { kind, payload } => (kind.as_str(), Ok(Value::Object(payload.clone()))),
        };
        let body = body.map_err(serde::ser::Error::custom)?;
        let mut map = Map::new();
        map.insert("kind".into(), Value::String(kind.to_string()));
        if let Value::Object(fields) = body {
            map.extend(fields);
        }
        Value::Object(map).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LhsSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let value = Value::deserialize(deserializer)?;
        let Value::Object(mut map) = value else {
            return Err(D::Error::custom("lhs_spec must be an object"));
        };
        let kind = match map.remove("kind") {
            Some(Value::String(k)) => k,
            Some(_) => return Err(D::Error::custom("lhs_spec.kind must be a string")),
            None => return Err(D::Error::missing_field("kind")),
        };
        match kind.as_str() {
            // `materialized_linear` is the planner-facing name for the same shape.
            "explicit_terms" | "materialized_linear" => {
                let repr: ExplicitRepr =
                    serde_json::from_value(Value::Object(map)).map_err(D::Error::custom)?;
                Ok(LhsSpec::ExplicitTerms { rows: repr.rows })
            }
            "indexed_sum" => {
                let repr: IndexedSumRepr =
                    serde_json::from_value(Value::Object(map)).map_err(D::Error::custom)?;
                Ok(LhsSpec::IndexedSum {
                    var_family: repr.var_family,
                    matching: repr.matching,
                    coef: repr.coef,
                })
            }
            _ => Ok(LhsSpec::Semantic { kind, payload: map }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=", alias = "le", alias = "≤")]
    Le,
    #[serde(rename = ">=", alias = "ge", alias = "≥")]
    Ge,
    #[serde(rename = "=", alias = "eq", alias = "==")]
    Eq,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        })
    }
}

/// Right-hand side: a default rule for every row plus per-row overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RhsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<CoefExpr>,
    #[serde(default, with = "keyed_list")]
    pub overrides: BTreeMap<IndexKey, CoefExpr>,
}

impl RhsSpec {
    pub fn uniform(expr: CoefExpr) -> Self {
        RhsSpec {
            default: Some(expr),
            overrides: BTreeMap::new(),
        }
    }

    pub fn expr_for(&self, row: &IndexKey) -> Option<&CoefExpr> {
        self.overrides.get(row).or(self.default.as_ref())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintFamily {
    pub name: String,
    pub index_set: Vec<IndexKey>,
    pub lhs_spec: LhsSpec,
    pub sense: Sense,
    #[serde(default)]
    pub rhs_spec: RhsSpec,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub tags: BTreeSet<String>,
}

impl ConstraintFamily {
    pub fn new(
        name: impl Into<String>,
        index_set: Vec<IndexKey>,
        lhs_spec: LhsSpec,
        sense: Sense,
        rhs_spec: RhsSpec,
    ) -> Self {
        ConstraintFamily {
            name: name.into(),
            index_set,
            lhs_spec,
            sense,
            rhs_spec,
            description: String::new(),
            tags: BTreeSet::new(),
        }
    }

    pub fn describe(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    pub fn tag(mut self, tag: impl Into<String>) -> Self {
        self.tags.insert(tag.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveComponent {
    pub name: String,
    #[serde(default = "one")]
    pub weight: f64,
    #[serde(default)]
    pub terms: Vec<Term>,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub tags: BTreeSet<String>,
}

fn one() -> f64 {
    1.0
}

impl ObjectiveComponent {
    pub fn new(name: impl Into<String>, weight: f64, terms: Vec<Term>) -> Self {
        ObjectiveComponent {
            name: name.into(),
            weight,
            terms,
            description: String::new(),
            tags: BTreeSet::new(),
        }
    }

    pub fn describe(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    pub fn tag(mut self, tag: impl Into<String>) -> Self {
        self.tags.insert(tag.into());
        self
    }

    pub fn term_position(&self, var_family: &str, index: &IndexKey) -> Option<usize> {
        self.terms
            .iter()
            .position(|t| t.var_family == var_family && &t.index == index)
    }
}

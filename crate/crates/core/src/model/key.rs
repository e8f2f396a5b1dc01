use std::fmt;

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::{Deserialize, Serialize};

/// An index into a family: an ordered tuple of entity ids.
///
/// Scalar indices are 1-tuples. Components may not be empty and may not
/// contain whitespace, commas or parentheses, so that the flat form
/// `family(a,b)` stays unambiguous.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct IndexKey(Vec<String>);

impl IndexKey {
    pub fn new<I, S>(parts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        IndexKey(parts.into_iter().map(Into::into).collect())
    }

    pub fn single(part: impl Into<String>) -> Self {
        IndexKey(vec![part.into()])
    }

    pub fn parts(&self) -> &[String] {
        &self.0
    }

    pub fn into_parts(self) -> Vec<String> {
        self.0
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, pos: usize) -> Option<&str> {
        self.0.get(pos).map(String::as_str)
    }

    /// Returns the first component that is not a valid entity id, if any.
    pub fn invalid_component(&self) -> Option<&str> {
        self.0
            .iter()
            .find(|c| !is_valid_component(c))
            .map(String::as_str)
    }

    /// Comma-joined form used as an object key in state trees (`P2,C2`).
    pub fn joined(&self) -> String {
        self.0.join(",")
    }

    pub fn from_joined(text: &str) -> Self {
        if text.is_empty() {
            return IndexKey(Vec::new());
        }
        IndexKey(text.split(',').map(str::to_string).collect())
    }

    /// Flat name `family(a,b)`; a 0-tuple renders as the bare family name.
    pub fn flat(&self, family: &str) -> String {
        if self.0.is_empty() {
            family.to_string()
        } else {
            format!("{family}({})", self.joined())
        }
    }
}

impl fmt::Display for IndexKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.joined())
    }
}

impl<S: Into<String>> From<Vec<S>> for IndexKey {
    fn from(parts: Vec<S>) -> Self {
        IndexKey::new(parts)
    }
}

impl From<&str> for IndexKey {
    fn from(part: &str) -> Self {
        IndexKey::single(part)
    }
}

pub fn is_valid_component(c: &str) -> bool {
    !c.is_empty()
        && !c
            .chars()
            .any(|ch| ch.is_whitespace() || matches!(ch, ',' | '(' | ')'))
}

/// Identifier rule for family and parameter names.
pub fn is_valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Splits a flat key `family(a,b)` into its family name and index.
pub fn parse_flat(flat: &str) -> Option<(String, IndexKey)> {
    match flat.find('(') {
        None => is_valid_name(flat).then(|| (flat.to_string(), IndexKey::default())),
        Some(open) => {
            let inner = flat[open + 1..].strip_suffix(')')?;
            let family = &flat[..open];
            is_valid_name(family).then(|| (family.to_string(), IndexKey::from_joined(inner)))
        }
    }
}

pub(crate) fn number_to_component(n: &serde_json::Number) -> String {
    if let Some(i) = n.as_i64() {
        return i.to_string();
    }
    if let Some(u) = n.as_u64() {
        return u.to_string();
    }
    let f = n.as_f64().unwrap_or(f64::NAN);
    if f.fract() == 0.0 && f.abs() < 1e15 {
        format!("{}", f as i64)
    } else {
        f.to_string()
    }
}

/// Index keys deserialize leniently: a string, a number, or an array of
/// strings and numbers. Numbers become their integer text when integral.
impl<'de> Deserialize<'de> for IndexKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct KeyVisitor;

        impl<'de> Visitor<'de> for KeyVisitor {
            type Value = IndexKey;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an index key (string, number, or array of them)")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<IndexKey, E> {
                Ok(IndexKey::single(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<IndexKey, E> {
                Ok(IndexKey::single(v.to_string()))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<IndexKey, E> {
                Ok(IndexKey::single(v.to_string()))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<IndexKey, E> {
                let n = serde_json::Number::from_f64(v)
                    .ok_or_else(|| E::custom("non-finite number in index key"))?;
                Ok(IndexKey::single(number_to_component(&n)))
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<IndexKey, A::Error> {
                let mut parts = Vec::new();
                while let Some(item) = seq.next_element::<serde_json::Value>()? {
                    match item {
                        serde_json::Value::String(s) => parts.push(s),
                        serde_json::Value::Number(n) => parts.push(number_to_component(&n)),
                        other => {
                            return Err(de::Error::custom(format!(
                                "index key components must be strings or numbers, got {other}"
                            )))
                        }
                    }
                }
                Ok(IndexKey(parts))
            }
        }

        deserializer.deserialize_any(KeyVisitor)
    }
}

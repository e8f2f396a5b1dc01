//! Serde helpers shared by the state document types.

/// `BTreeMap<IndexKey, T>` as an array of `[key, value]` pairs, so keys stay
/// arrays of strings on the wire.
pub mod keyed_list {
    use std::collections::BTreeMap;

    use serde::de::DeserializeOwned;
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::model::IndexKey;

    pub fn serialize<T: Serialize, S: Serializer>(
        map: &BTreeMap<IndexKey, T>,
        serializer: S,
    ) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(map.len()))?;
        for pair in map {
            seq.serialize_element(&pair)?;
        }
        seq.end()
    }

    pub fn deserialize<'de, T: DeserializeOwned, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<BTreeMap<IndexKey, T>, D::Error> {
        let pairs: Vec<(IndexKey, T)> = Vec::deserialize(deserializer)?;
        let mut map = BTreeMap::new();
        for (k, v) in pairs {
            if map.insert(k.clone(), v).is_some() {
                return Err(serde::de::Error::custom(format!("duplicate key {k}")));
            }
        }
        Ok(map)
    }
}

/// `f64` bound where an infinite value is written as `null`.
pub mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize_lower<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn serialize_upper<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        serialize_lower(v, s)
    }

    pub fn deserialize_lower<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }

    pub fn deserialize_upper<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

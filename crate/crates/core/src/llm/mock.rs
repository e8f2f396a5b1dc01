use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use super::{attempt_index_of, delta_of, ChatModel, ChatRequest, LlmError, SELECTOR_SYSTEM};

/// A scripted response rule: the first entry whose pattern matches the
/// request's delta answers it. Attempt `k` gets `responses[k]`; the last
/// response repeats once the list runs out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MockEntry {
    #[serde(rename = "match")]
    pub pattern: String,
    #[serde(deserialize_with = "texts")]
    pub responses: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    pub entries: Vec<MockEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty", deserialize_with = "texts")]
    pub selector: Vec<String>,
}

fn texts<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
    let raw = Vec::<Value>::deserialize(d)?;
    Ok(raw
        .into_iter()
        .map(|v| match v {
            Value::String(s) => s,
            other => other.to_string(),
        })
        .collect())
}

impl MockScript {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn entry(mut self, pattern: &str, responses: impl IntoIterator<Item = impl Into<String>>) -> Self {
        self.entries.push(MockEntry {
            pattern: pattern.to_string(),
            responses: responses.into_iter().map(Into::into).collect(),
        });
        self
    }
}

/// Chat model answering from a [`MockScript`]. Counts every call.
#[derive(Debug)]
pub struct MockChat {
    script: MockScript,
    compiled: Vec<Regex>,
    calls: AtomicUsize,
    seen: Mutex<Vec<ChatRequest>>,
}

impl MockChat {
    pub fn new(script: MockScript) -> Result<Self, regex::Error> {
        let compiled = script
            .entries
            .iter()
            .map(|e| Regex::new(&e.pattern))
            .collect::<Result<_, _>>()?;
        Ok(MockChat {
            script,
            compiled,
            calls: AtomicUsize::new(0),
            seen: Mutex::new(Vec::new()),
        })
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Every request received so far, in order.
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.seen.lock().map(|s| s.clone()).unwrap_or_default()
    }

    pub fn script(&self) -> &MockScript {
        &self.script
    }
}

fn pick(responses: &[String], attempt: usize) -> Option<&String> {
    responses.get(attempt.min(responses.len().saturating_sub(1)))
}

impl ChatModel for MockChat {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if let Ok(mut seen) = self.seen.lock() {
            seen.push(request.clone());
        }
        if request.system == SELECTOR_SYSTEM {
            return pick(&self.script.selector, 0)
                .cloned()
                .ok_or_else(|| LlmError::BadResponse("no scripted selector response".into()));
        }
        let delta = delta_of(&request.user);
        let attempt = attempt_index_of(&request.user);
        self.compiled
            .iter()
            .zip(&self.script.entries)
            .find(|(re, _)| re.is_match(delta))
            .and_then(|(_, e)| pick(&e.responses, attempt))
            .cloned()
            .ok_or_else(|| LlmError::BadResponse(format!("no scripted response for `{delta}`")))
    }
}

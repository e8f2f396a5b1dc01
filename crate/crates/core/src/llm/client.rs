use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

use super::{ChatModel, ChatRequest, LlmError};

#[derive(Clone, Debug, PartialEq)]
pub struct ClientConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub max_retries: u32,
    pub backoff: Duration,
}

impl ClientConfig {
    /// Reads `REOPT_LLM_BASE_URL`, `REOPT_LLM_API_KEY` and `REOPT_LLM_MODEL`.
    pub fn from_env() -> Self {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.trim().is_empty());
        ClientConfig {
            base_url: var("REOPT_LLM_BASE_URL").unwrap_or_else(|| "https://api.openai.com/v1".into()),
            api_key: var("REOPT_LLM_API_KEY"),
            model: var("REOPT_LLM_MODEL").unwrap_or_else(|| "gpt-4o".into()),
            max_retries: 2,
            backoff: Duration::from_millis(500),
        }
    }
}

/// Client for an OpenAI-compatible `/chat/completions` endpoint.
#[derive(Clone, Debug)]
pub struct OpenAiClient {
    config: ClientConfig,
}

impl OpenAiClient {
    pub fn new(config: ClientConfig) -> Self {
        OpenAiClient { config }
    }

    pub fn from_env() -> Self {
        Self::new(ClientConfig::from_env())
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    fn once(&self, key: &str, request: &ChatRequest) -> Result<String, LlmError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(request.timeout))
            .build()
            .into();
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let model = if request.model.is_empty() { &self.config.model } else { &request.model };
        let body = json!({
            "model": model,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
        });
        let mut resp = agent
            .post(&url)
            .header("Authorization", &format!("Bearer {key}"))
            .send_json(&body)
            .map_err(map_error)?;
        let doc: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| LlmError::BadResponse(e.to_string()))?;
        doc.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| LlmError::BadResponse("missing choices[0].message.content".into()))
    }
}

fn map_error(e: ureq::Error) -> LlmError {
    match e {
        ureq::Error::StatusCode(401 | 403) => LlmError::Auth("credential rejected".into()),
        ureq::Error::StatusCode(c) if c == 429 || c >= 500 => {
            LlmError::Transport(format!("http status {c}"))
        }
        ureq::Error::StatusCode(c) => LlmError::BadResponse(format!("http status {c}")),
        ureq::Error::Timeout(_) => LlmError::Timeout,
        other => LlmError::Transport(other.to_string()),
    }
}

impl ChatModel for OpenAiClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let Some(key) = self.config.api_key.as_deref() else {
            return Err(LlmError::Auth("REOPT_LLM_API_KEY is not set".into()));
        };
        let mut attempt = 0;
        loop {
            match self.once(key, request) {
                Err(LlmError::Transport(msg)) if attempt < self.config.max_retries => {
                    tracing::warn!(attempt, %msg, "retrying chat completion");
                    thread::sleep(self.config.backoff * 2u32.pow(attempt));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

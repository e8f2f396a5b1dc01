//! Chat-completion plumbing: request assembly, transport, output extraction
//! and the scripted mock used by tests.

mod client;
mod json;
mod mock;
mod prompts;

use std::time::Duration;

use thiserror::Error;

pub use client::{ClientConfig, OpenAiClient};
pub use json::{extract_json, ExtractError};
pub use mock::{MockChat, MockEntry, MockScript};
pub use prompts::{
    assemble_planner_prompt, assemble_selector_prompt, attempt_index_of, delta_of, op_schema,
    op_schemas, repair_block, PromptSettings, PLANNER_SYSTEM, REPAIR_PRELUDE, SELECTOR_SYSTEM,
};

#[derive(Clone, Debug, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub system: String,
    pub user: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout: Duration,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request timed out")]
    Timeout,
    #[error("authentication error: {0}")]
    Auth(String),
    #[error("unusable response: {0}")]
    BadResponse(String),
}

impl LlmError {
    pub fn code(&self) -> &'static str {
        match self {
            LlmError::Transport(_) => "transport_error",
            LlmError::Timeout => "timeout",
            LlmError::Auth(_) => "auth_error",
            LlmError::BadResponse(_) => "bad_response",
        }
    }
}

/// Anything that turns a system/user pair into raw assistant text.
pub trait ChatModel: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError>;
}

impl<T: ChatModel + ?Sized> ChatModel for std::sync::Arc<T> {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }
}

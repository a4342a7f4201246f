//! Chat-completion and embedding providers.

mod mock;
mod openai;

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::agent::Message;

pub use mock::{HashEmbedder, MockProvider, MockScript, MockStep, HASH_EMBED_DIM};
pub use openai::{OpenAiClient, EMBED_BATCH_SIZE};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum LlmError {
    #[error("provider error (status {status:?}): {body_excerpt}")]
    Provider { status: Option<u16>, body_excerpt: String },
    #[error("authentication rejected (status {status})")]
    Auth { status: u16 },
    #[error("embedding dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("mock script exhausted after {steps} steps")]
    ScriptExhausted { steps: usize },
    #[error("mock step {step}: expected request to contain {needle:?}")]
    ExpectationFailed { step: usize, needle: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

impl ChatResponse {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            ..Self::default()
        }
    }
}

pub trait ChatProvider: Send + Sync {
    fn complete(&self, messages: &[Message]) -> Result<ChatResponse, LlmError>;
}

pub trait Embedder: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, LlmError>;

    /// Identifies the embedding model; stored alongside an index.
    fn model_tag(&self) -> String;
}

impl<T: ChatProvider + ?Sized> ChatProvider for std::sync::Arc<T> {
    fn complete(&self, messages: &[Message]) -> Result<ChatResponse, LlmError> {
        (**self).complete(messages)
    }
}

impl<T: Embedder + ?Sized> Embedder for std::sync::Arc<T> {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, LlmError> {
        (**self).embed(texts)
    }

    fn model_tag(&self) -> String {
        (**self).model_tag()
    }
}

pub const ENV_BASE_URL: &str = "FOAMPILOT_LLM_BASE_URL";
pub const ENV_API_KEY: &str = "FOAMPILOT_LLM_API_KEY";
pub const ENV_MODEL: &str = "FOAMPILOT_LLM_MODEL";
pub const ENV_EMBED_MODEL: &str = "FOAMPILOT_EMBED_MODEL";
pub const ENV_TEMPERATURE: &str = "FOAMPILOT_TEMPERATURE";

/// Connection settings for an OpenAI-compatible endpoint.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub base_url: String,
    pub api_key: String,
    pub chat_model: String,
    pub embed_model: String,
    pub temperature: f64,
    /// Seconds.
    pub request_timeout: u64,
    pub max_retries: u32,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            base_url: String::new(),
            api_key: String::new(),
            chat_model: "gpt-4o".to_string(),
            embed_model: "text-embedding-ada-002".to_string(),
            temperature: 0.0,
            request_timeout: 120,
            max_retries: 3,
        }
    }
}

// api_key stays out of logs
impl fmt::Debug for ProviderConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProviderConfig")
            .field("base_url", &self.base_url)
            .field("api_key", &if self.api_key.is_empty() { "" } else { "<redacted>" })
            .field("chat_model", &self.chat_model)
            .field("embed_model", &self.embed_model)
            .field("temperature", &self.temperature)
            .field("request_timeout", &self.request_timeout)
            .field("max_retries", &self.max_retries)
            .finish()
    }
}

impl ProviderConfig {
    /// Overlay values present in the environment.
    pub fn apply_env<F>(&mut self, lookup: F) -> Result<(), LlmError>
    where
        F: Fn(&str) -> Option<String>,
    {
        if let Some(v) = lookup(ENV_BASE_URL) {
            self.base_url = v;
        }
        if let Some(v) = lookup(ENV_API_KEY) {
            self.api_key = v;
        }
        if let Some(v) = lookup(ENV_MODEL) {
            self.chat_model = v;
        }
        if let Some(v) = lookup(ENV_EMBED_MODEL) {
            self.embed_model = v;
        }
        if let Some(v) = lookup(ENV_TEMPERATURE) {
            self.temperature = v
                .trim()
                .parse()
                .map_err(|_| LlmError::InvalidRequest(format!("{ENV_TEMPERATURE} is not a number: {v}")))?;
        }
        Ok(())
    }

    pub fn from_env() -> Result<Self, LlmError> {
        let mut config = Self::default();
        config.apply_env(|k| std::env::var(k).ok())?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(LlmError::InvalidRequest("temperature must be >= 0".into()));
        }
        if self.base_url.trim().is_empty() {
            return Err(LlmError::InvalidRequest(format!("no provider base URL; set {ENV_BASE_URL}")));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.request_timeout.max(1))
    }

    /// Remove any occurrence of the API key from `text`.
    pub(crate) fn redact(&self, text: &str) -> String {
        if self.api_key.is_empty() {
            text.to_string()
        } else {
            text.replace(&self.api_key, "<redacted>")
        }
    }
}

use std::thread;
use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};
use tracing::{debug, warn};

use super::{ChatProvider, ChatResponse, Embedder, LlmError, ProviderConfig};
use crate::agent::{Message, Role};

/// Maximum number of texts per embeddings request.
pub const EMBED_BATCH_SIZE: usize = 64;

const BODY_EXCERPT_CHARS: usize = 512;

/// Blocking client for the OpenAI-compatible `/chat/completions` and
/// `/embeddings` endpoints.
pub struct OpenAiClient {
    config: ProviderConfig,
    agent: ureq::Agent,
    backoff_base: Duration,
}

#[derive(Deserialize)]
struct ChatReply {
    choices: Vec<ChatChoice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReplyMessage,
}

#[derive(Deserialize)]
struct ChatReplyMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    prompt_tokens: Option<u64>,
    completion_tokens: Option<u64>,
}

#[derive(Deserialize)]
struct EmbedReply {
    data: Vec<EmbedItem>,
}

#[derive(Deserialize)]
struct EmbedItem {
    embedding: Vec<f32>,
    #[serde(default)]
    index: Option<usize>,
}

fn wire_role(role: Role) -> &'static str {
    match role {
        Role::System => "system",
        Role::User => "user",
        Role::Assistant => "assistant",
        // observations go back as user turns; the action grammar is plain text
        Role::ToolObservation => "user",
    }
}

impl OpenAiClient {
    pub fn new(config: ProviderConfig) -> Result<Self, LlmError> {
        config.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout()))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            config,
            agent,
            backoff_base: Duration::from_secs(1),
        })
    }

    /// Override the first retry delay (doubles on each subsequent retry).
    pub fn with_backoff_base(mut self, base: Duration) -> Self {
        self.backoff_base = base;
        self
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    fn endpoint(&self, path: &str) -> String {
        format!("{}/{}", self.config.base_url.trim_end_matches('/'), path)
    }

    fn excerpt(&self, body: &str) -> String {
        let redacted = self.config.redact(body);
        redacted.chars().take(BODY_EXCERPT_CHARS).collect()
    }

    /// POST `body` with retries on transport failures, 429 and 5xx.
    fn post_json(&self, path: &str, body: &Value) -> Result<String, LlmError> {
        let url = self.endpoint(path);
        let mut attempt: u32 = 0;
        loop {
            attempt += 1;
            let mut request = self.agent.post(&url).header("Content-Type", "application/json");
            if !self.config.api_key.is_empty() {
                request = request.header("Authorization", &format!("Bearer {}", self.config.api_key));
            }
            let outcome = request.send(body.to_string());
            let retryable = match outcome {
                Ok(mut response) => {
                    let status = response.status().as_u16();
                    let text = response.body_mut().read_to_string().unwrap_or_default();
                    match status {
                        200..=299 => return Ok(text),
                        401 | 403 => return Err(LlmError::Auth { status }),
                        429 | 500..=599 => LlmError::Provider {
                            status: Some(status),
                            body_excerpt: self.excerpt(&text),
                        },
                        _ => {
                            return Err(LlmError::Provider {
                                status: Some(status),
                                body_excerpt: self.excerpt(&text),
                            })
                        }
                    }
                }
                Err(err) => LlmError::Provider {
                    status: None,
                    body_excerpt: self.excerpt(&err.to_string()),
                },
            };
            if attempt > self.config.max_retries {
                return Err(retryable);
            }
            let delay = self.backoff_base * 2u32.saturating_pow(attempt - 1);
            warn!(%url, attempt, ?delay, error = %retryable, "retrying provider request");
            thread::sleep(delay);
        }
    }

    fn embed_batch(&self, batch: &[String]) -> Result<Vec<Vec<f32>>, LlmError> {
        let body = json!({ "model": self.config.embed_model, "input": batch });
        let text = self.post_json("embeddings", &body)?;
        let mut reply: EmbedReply = serde_json::from_str(&text).map_err(|e| LlmError::Provider {
            status: None,
            body_excerpt: format!("unparseable embeddings reply: {e}"),
        })?;
        if reply.data.len() != batch.len() {
            return Err(LlmError::Provider {
                status: None,
                body_excerpt: format!("expected {} embeddings, got {}", batch.len(), reply.data.len()),
            });
        }
        if reply.data.iter().all(|d| d.index.is_some()) {
            reply.data.sort_by_key(|d| d.index);
        }
        Ok(reply.data.into_iter().map(|d| d.embedding).collect())
    }
}

impl ChatProvider for OpenAiClient {
    fn complete(&self, messages: &[Message]) -> Result<ChatResponse, LlmError> {
        if messages.is_empty() {
            return Err(LlmError::InvalidRequest("no messages".into()));
        }
        let wire: Vec<Value> = messages
            .iter()
            .map(|m| json!({ "role": wire_role(m.role), "content": m.content }))
            .collect();
        let body = json!({
            "model": self.config.chat_model,
            "temperature": self.config.temperature,
            "messages": wire,
        });
        debug!(model = %self.config.chat_model, messages = messages.len(), "chat completion");
        let text = self.post_json("chat/completions", &body)?;
        let reply: ChatReply = serde_json::from_str(&text).map_err(|e| LlmError::Provider {
            status: None,
            body_excerpt: format!("unparseable chat reply: {e}"),
        })?;
        let content = reply
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| LlmError::Provider {
                status: None,
                body_excerpt: "reply carried no message content".into(),
            })?;
        Ok(ChatResponse {
            text: content,
            prompt_tokens: reply.usage.as_ref().and_then(|u| u.prompt_tokens),
            completion_tokens: reply.usage.as_ref().and_then(|u| u.completion_tokens),
        })
    }
}

impl Embedder for OpenAiClient {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, LlmError> {
        if texts.is_empty() || texts.iter().any(|t| t.is_empty()) {
            return Err(LlmError::InvalidRequest("embedding inputs must be non-empty".into()));
        }
        let mut out = Vec::with_capacity(texts.len());
        for batch in texts.chunks(EMBED_BATCH_SIZE) {
            out.extend(self.embed_batch(batch)?);
        }
        let expected = out[0].len();
        if let Some(bad) = out.iter().find(|v| v.len() != expected) {
            return Err(LlmError::DimensionMismatch {
                expected,
                found: bad.len(),
            });
        }
        Ok(out)
    }

    fn model_tag(&self) -> String {
        self.config.embed_model.clone()
    }
}

use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use tracing::error;

use super::{ChatProvider, ChatResponse, Embedder, LlmError};
use crate::agent::Message;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockStep {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_substring: Option<String>,
    pub response: String,
}

impl MockStep {
    pub fn reply(response: impl Into<String>) -> Self {
        Self {
            expect_substring: None,
            response: response.into(),
        }
    }

    pub fn expecting(needle: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            expect_substring: Some(needle.into()),
            response: response.into(),
        }
    }
}

/// Ordered, replayed model responses.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MockScript {
    pub steps: Vec<MockStep>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScriptFile {
    Wrapped { steps: Vec<MockStep> },
    Bare(Vec<MockStep>),
}

impl MockScript {
    pub fn new(steps: Vec<MockStep>) -> Self {
        Self { steps }
    }

    /// Accepts `{"steps": [...]}` or a bare array of steps.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let steps = match serde_json::from_str::<ScriptFile>(text)? {
            ScriptFile::Wrapped { steps } | ScriptFile::Bare(steps) => steps,
        };
        Ok(Self { steps })
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

#[derive(Default)]
struct MockState {
    cursor: usize,
    requests: Vec<String>,
    failures: Vec<LlmError>,
}

/// Chat provider that replays a [`MockScript`] step by step.
pub struct MockProvider {
    script: MockScript,
    state: Mutex<MockState>,
}

impl MockProvider {
    pub fn new(script: MockScript) -> Self {
        Self {
            script,
            state: Mutex::new(MockState::default()),
        }
    }

    pub fn from_responses<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(MockScript::new(responses.into_iter().map(MockStep::reply).collect()))
    }

    /// Number of `complete` calls made so far.
    pub fn calls(&self) -> usize {
        self.state.lock().unwrap().requests.len()
    }

    /// Flattened request text of every call, in order.
    pub fn requests(&self) -> Vec<String> {
        self.state.lock().unwrap().requests.clone()
    }

    /// Expectation failures recorded so far.
    pub fn failures(&self) -> Vec<LlmError> {
        self.state.lock().unwrap().failures.clone()
    }

    pub fn remaining(&self) -> usize {
        self.script.steps.len() - self.state.lock().unwrap().cursor.min(self.script.steps.len())
    }
}

fn flatten(messages: &[Message]) -> String {
    messages
        .iter()
        .map(|m| m.content.as_str())
        .collect::<Vec<_>>()
        .join("\n")
}

impl ChatProvider for MockProvider {
    fn complete(&self, messages: &[Message]) -> Result<ChatResponse, LlmError> {
        let flat = flatten(messages);
        let mut state = self.state.lock().unwrap();
        state.requests.push(flat);
        let index = state.cursor;
        let Some(step) = self.script.steps.get(index) else {
            return Err(LlmError::ScriptExhausted {
                steps: self.script.steps.len(),
            });
        };
        state.cursor += 1;
        if let Some(needle) = &step.expect_substring {
            if !state.requests[index].contains(needle.as_str()) {
                let failure = LlmError::ExpectationFailed {
                    step: index,
                    needle: needle.clone(),
                };
                error!(%failure, "mock provider expectation not met");
                state.failures.push(failure.clone());
                return Err(failure);
            }
        }
        Ok(ChatResponse::text(step.response.clone()))
    }
}

pub const HASH_EMBED_DIM: usize = 256;

/// Deterministic bag-of-words embedder: lowercase alphanumeric tokens are
/// hashed into buckets, counted, and the count vector L2-normalized.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dimension: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self::new(HASH_EMBED_DIM)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

impl HashEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { dimension }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn embed_one(&self, text: &str) -> Vec<f32> {
        let mut counts = vec![0f64; self.dimension];
        let mut any = false;
        for token in text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            let bucket = (fnv1a(token.to_lowercase().as_bytes()) % self.dimension as u64) as usize;
            counts[bucket] += 1.0;
            any = true;
        }
        if !any {
            // punctuation-only text still gets a stable, nonzero vector
            let bucket = (fnv1a(text.as_bytes()) % self.dimension as u64) as usize;
            counts[bucket] = 1.0;
        }
        let norm = counts.iter().map(|c| c * c).sum::<f64>().sqrt();
        counts.into_iter().map(|c| (c / norm) as f32).collect()
    }
}

impl Embedder for HashEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, LlmError> {
        if texts.is_empty() || texts.iter().any(|t| t.is_empty()) {
            return Err(LlmError::InvalidRequest("embedding inputs must be non-empty".into()));
        }
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }

    fn model_tag(&self) -> String {
        format!("hash-bow-{}", self.dimension)
    }
}

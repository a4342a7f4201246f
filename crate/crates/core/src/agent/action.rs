//! Parsing of assistant output into a single tool call or final answer.
//!
//! The grammar is a JSON object with an `action` key and an `action_input`
//! key, normally inside a triple-backtick fence. When several candidate
//! blobs are present the last one wins.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const FINAL_ANSWER: &str = "Final Answer";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    ToolCall,
    FinalAnswer,
    Malformed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentAction {
    pub kind: ActionKind,
    pub tool_name: Option<String>,
    pub tool_input: Option<Value>,
    pub answer: Option<String>,
    pub raw: String,
}

impl AgentAction {
    fn malformed(raw: &str) -> Self {
        Self {
            kind: ActionKind::Malformed,
            tool_name: None,
            tool_input: None,
            answer: None,
            raw: raw.to_string(),
        }
    }

    /// The tool input rendered as text: strings verbatim, anything else as JSON.
    pub fn input_text(&self) -> String {
        match &self.tool_input {
            Some(value) => value_to_text(value),
            None => String::new(),
        }
    }
}

pub fn value_to_text(value: &Value) -> String {
    match value {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// Parse an assistant message. Never fails; text without a usable blob
/// yields [`ActionKind::Malformed`].
pub fn parse_action(assistant_text: &str) -> AgentAction {
    let blob = last_fenced_blob(assistant_text).or_else(|| last_bare_blob(assistant_text));
    let Some(blob) = blob else {
        return AgentAction::malformed(assistant_text);
    };

    let action = match blob.get("action") {
        Some(Value::String(s)) => s.trim().to_string(),
        _ => return AgentAction::malformed(assistant_text),
    };
    if action.is_empty() {
        return AgentAction::malformed(assistant_text);
    }
    let input = blob.get("action_input").cloned();

    if action == FINAL_ANSWER {
        let answer = input.as_ref().map(value_to_text).unwrap_or_default();
        if answer.trim().is_empty() {
            return AgentAction::malformed(assistant_text);
        }
        return AgentAction {
            kind: ActionKind::FinalAnswer,
            tool_name: None,
            tool_input: None,
            answer: Some(answer),
            raw: assistant_text.to_string(),
        };
    }

    AgentAction {
        kind: ActionKind::ToolCall,
        tool_name: Some(action),
        tool_input: Some(input.unwrap_or(Value::Null)),
        answer: None,
        raw: assistant_text.to_string(),
    }
}

fn as_action_object(value: Value) -> Option<Map<String, Value>> {
    match value {
        Value::Object(map) if map.contains_key("action") => Some(map),
        _ => None,
    }
}

/// Bodies of all triple-backtick fences, in order of appearance.
fn fenced_bodies(text: &str) -> Vec<&str> {
    let mut bodies = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("```") {
        let after_open = &rest[open + 3..];
        // skip an info string such as "json"
        let body_start = after_open.find('\n').map(|i| i + 1).unwrap_or(0);
        let info = &after_open[..body_start];
        let body_start = if info.trim().chars().all(|c| c.is_ascii_alphanumeric()) {
            body_start
        } else {
            0
        };
        let body = &after_open[body_start..];
        let Some(close) = body.find("```") else { break };
        bodies.push(&body[..close]);
        rest = &body[close + 3..];
    }
    bodies
}

fn last_fenced_blob(text: &str) -> Option<Map<String, Value>> {
    fenced_bodies(text)
        .into_iter()
        .rev()
        .find_map(|body| serde_json::from_str::<Value>(body.trim()).ok().and_then(as_action_object))
}

fn last_bare_blob(text: &str) -> Option<Map<String, Value>> {
    let mut found = None;
    let mut pos = 0;
    while let Some(offset) = text[pos..].find('{') {
        let start = pos + offset;
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(value)) => {
                let consumed = stream.byte_offset();
                if let Some(obj) = as_action_object(value) {
                    found = Some(obj);
                }
                pos = start + consumed.max(1);
            }
            _ => pos = start + 1,
        }
    }
    found
}

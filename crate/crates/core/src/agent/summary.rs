use super::{estimate_tokens, Message, Role, Transcript};
use crate::llm::ChatProvider;

pub const SUMMARY_INSTRUCTION: &str = "Summarize the progress of the agent session below for the user. \
State what was requested, which actions were taken and what they returned, and what remains to be done. \
Be concise and factual.";

const EXCERPT_CHARS: usize = 300;

/// Deterministic summary used when the provider cannot produce one.
pub fn fallback_summary(transcript: &Transcript) -> String {
    let tool_calls = transcript.count_role(Role::ToolObservation);
    let assistant_turns = transcript.count_role(Role::Assistant);
    let last = transcript
        .messages()
        .iter()
        .rev()
        .find(|m| m.role == Role::ToolObservation)
        .map(|m| {
            let count = m.content.chars().count();
            m.content.chars().skip(count.saturating_sub(EXCERPT_CHARS)).collect::<String>()
        })
        .unwrap_or_else(|| "none".to_string());
    format!(
        "Session summary: {tool_calls} tool calls, {assistant_turns} assistant turns.\nLast observation: {last}"
    )
}

fn render(message: &Message) -> String {
    format!("[{}]\n{}\n\n", message.role.as_str(), message.content)
}

/// Newest messages (after the system prompt) that fit in `available`
/// tokens, returned oldest first. The newest message is cut to its tail
/// if it does not fit on its own.
fn tail_window(transcript: &Transcript, available: usize) -> String {
    let mut picked: Vec<String> = Vec::new();
    let mut used = 0;
    for message in transcript.messages().iter().skip(1).rev() {
        let block = render(message);
        let cost = block.len();
        if used + cost <= available * 4 {
            used += cost;
            picked.push(block);
            continue;
        }
        if picked.is_empty() {
            let header = format!("[{}]\n", message.role.as_str());
            let room = (available * 4).saturating_sub(header.len() + 2);
            let content = &message.content;
            let mut start = content.len().saturating_sub(room);
            while !content.is_char_boundary(start) {
                start += 1;
            }
            picked.push(format!("{header}{}\n\n", &content[start..]));
        }
        break;
    }
    picked.reverse();
    picked.concat()
}

/// One provider call summarizing the transcript tail within
/// `budget_tokens`; falls back to [`fallback_summary`] on error.
pub fn summarize_transcript(transcript: &Transcript, llm: &dyn ChatProvider, budget_tokens: usize) -> String {
    let instruction = Message::system(SUMMARY_INSTRUCTION);
    let available = budget_tokens.saturating_sub(instruction.token_estimate);
    let body = tail_window(transcript, available);
    let request = [instruction, Message::user(body)];
    debug_assert!(request.iter().map(|m| m.token_estimate).sum::<usize>() <= budget_tokens.max(estimate_tokens(SUMMARY_INSTRUCTION)));
    match llm.complete(&request) {
        Ok(reply) if !reply.text.trim().is_empty() => reply.text,
        _ => fallback_summary(transcript),
    }
}

//! The model ↔ tool loop.

mod action;
mod prompt;
mod session;
mod summary;
mod transcript;

pub use action::{parse_action, value_to_text, ActionKind, AgentAction, FINAL_ANSWER};
pub use prompt::{render_prompt_template, render_system_prompt, PromptTemplate};
pub use session::{
    run_session, AgentEvent, EventSink, LoopOutcome, LoopStatus, NullSink, Session, SessionPolicy, SessionStatus,
    CORRECTIVE_MESSAGE,
};
pub use summary::{fallback_summary, summarize_transcript, SUMMARY_INSTRUCTION};
pub use transcript::{estimate_tokens, Message, Role, Transcript};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum AgentError {
    #[error("tool list is empty")]
    EmptyToolList,
    #[error("tool name listed twice: {0}")]
    DuplicateToolName(String),
    #[error("missing template binding: {0}")]
    MissingBinding(String),
    #[error("invalid session policy: {0}")]
    InvalidPolicy(String),
    #[error("session has not been started")]
    NotStarted,
}

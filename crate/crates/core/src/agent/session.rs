use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tracing::{debug, info};

use super::{
    fallback_summary, parse_action, render_system_prompt, summarize_transcript, ActionKind, AgentError, Message,
    Role, Transcript,
};
use crate::llm::ChatProvider;
use crate::tools::{ApprovalGate, ApprovalMode, Approver, ToolContext, ToolError, ToolRegistry, ToolResult};

pub const CORRECTIVE_MESSAGE: &str =
    "Invalid action format. Respond with one JSON blob containing keys action and action_input.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionPolicy {
    /// Cap on non-final assistant turns per run.
    pub max_loops: usize,
    pub max_parse_retries: usize,
    /// Tokens.
    pub context_window: usize,
    pub budget_fraction: f64,
    pub approval_mode: ApprovalMode,
    /// Whole-command regexes auto-approved in allowlist mode.
    pub allowlist: Vec<String>,
}

impl Default for SessionPolicy {
    fn default() -> Self {
        Self {
            max_loops: 25,
            max_parse_retries: 3,
            context_window: 128_000,
            budget_fraction: 0.8,
            approval_mode: ApprovalMode::Interactive,
            allowlist: Vec::new(),
        }
    }
}

impl SessionPolicy {
    pub fn validate(&self) -> Result<(), AgentError> {
        if self.max_loops < 1 {
            return Err(AgentError::InvalidPolicy("max_loops must be >= 1".into()));
        }
        if self.max_parse_retries < 1 {
            return Err(AgentError::InvalidPolicy("max_parse_retries must be >= 1".into()));
        }
        if self.context_window < 1024 {
            return Err(AgentError::InvalidPolicy("context_window must be >= 1024".into()));
        }
        if !(self.budget_fraction > 0.0 && self.budget_fraction <= 1.0) {
            return Err(AgentError::InvalidPolicy("budget_fraction must be in (0, 1]".into()));
        }
        Ok(())
    }

    /// Token threshold above which the session stops and summarizes.
    pub fn budget_tokens(&self) -> usize {
        (self.budget_fraction * self.context_window as f64).floor() as usize
    }

    pub fn gate(&self) -> Result<ApprovalGate, AgentError> {
        ApprovalGate::new(self.approval_mode, &self.allowlist)
            .map_err(|e| AgentError::InvalidPolicy(format!("bad allowlist pattern: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopStatus {
    Completed,
    GaveUp,
    MaxLoopsReached,
    BudgetExceeded,
    UserAborted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Running,
    Completed,
    GaveUp,
    MaxLoopsReached,
    BudgetExceeded,
    UserAborted,
}

impl From<LoopStatus> for SessionStatus {
    fn from(status: LoopStatus) -> Self {
        match status {
            LoopStatus::Completed => SessionStatus::Completed,
            LoopStatus::GaveUp => SessionStatus::GaveUp,
            LoopStatus::MaxLoopsReached => SessionStatus::MaxLoopsReached,
            LoopStatus::BudgetExceeded => SessionStatus::BudgetExceeded,
            LoopStatus::UserAborted => SessionStatus::UserAborted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopOutcome {
    pub status: LoopStatus,
    /// The final answer when completed, otherwise a summary.
    pub final_text: String,
    /// Tool dispatches in the transcript.
    pub loop_count: usize,
    pub transcript: Transcript,
}

/// Session progress, in the order it happened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AgentEvent {
    MessageAppended {
        index: usize,
        role: Role,
        content: String,
    },
    ToolRequested {
        approval_id: String,
        tool: String,
        input: String,
        requires_approval: bool,
    },
    ToolResult {
        approval_id: String,
        tool: String,
        ok: bool,
        output: String,
        exit_code: Option<i32>,
    },
    StatusChanged {
        status: SessionStatus,
    },
}

pub trait EventSink: Send + Sync {
    fn emit(&self, event: &AgentEvent);
}

impl<F> EventSink for F
where
    F: Fn(&AgentEvent) + Send + Sync,
{
    fn emit(&self, event: &AgentEvent) {
        self(event)
    }
}

pub struct NullSink;

impl EventSink for NullSink {
    fn emit(&self, _: &AgentEvent) {}
}

fn observation_text(result: &ToolResult) -> String {
    match result.exit_code {
        Some(code) if !result.ok && code != 0 => format!("{}\n[exit code {code}]", result.output),
        _ => result.output.clone(),
    }
}

/// A conversation with the model. The first [`Session::run`] starts it;
/// later user turns continue the same transcript.
pub struct Session<'a> {
    llm: &'a dyn ChatProvider,
    tools: &'a ToolRegistry,
    policy: SessionPolicy,
    gate: ApprovalGate,
    approver: &'a dyn Approver,
    sink: &'a dyn EventSink,
    transcript: Option<Transcript>,
    requests: usize,
    cancel: Option<Arc<AtomicBool>>,
}

impl<'a> Session<'a> {
    pub fn new(
        llm: &'a dyn ChatProvider,
        tools: &'a ToolRegistry,
        policy: SessionPolicy,
        approver: &'a dyn Approver,
        sink: &'a dyn EventSink,
    ) -> Result<Self, AgentError> {
        policy.validate()?;
        if tools.is_empty() {
            return Err(AgentError::EmptyToolList);
        }
        let gate = policy.gate()?;
        Ok(Self {
            llm,
            tools,
            policy,
            gate,
            approver,
            sink,
            transcript: None,
            requests: 0,
            cancel: None,
        })
    }

    /// Setting `flag` stops the loop before its next model call, as if the
    /// user had aborted.
    pub fn with_cancel(mut self, flag: Arc<AtomicBool>) -> Self {
        self.cancel = Some(flag);
        self
    }

    fn cancelled(&self) -> bool {
        self.cancel.as_ref().is_some_and(|f| f.load(Ordering::SeqCst))
    }

    pub fn transcript(&self) -> Option<&Transcript> {
        self.transcript.as_ref()
    }

    /// Start the session with `prompt` or, once started, add a user turn.
    pub fn run(&mut self, prompt: &str) -> Result<LoopOutcome, AgentError> {
        match self.transcript {
            None => {
                let system = render_system_prompt(&self.tools.names())?;
                let transcript = Transcript::new(system, prompt);
                for (index, m) in transcript.messages().iter().enumerate() {
                    self.sink.emit(&AgentEvent::MessageAppended {
                        index,
                        role: m.role,
                        content: m.content.clone(),
                    });
                }
                self.transcript = Some(transcript);
            }
            Some(_) => self.append(Message::user(prompt)),
        }
        Ok(self.drive())
    }

    fn transcript_mut(&mut self) -> &mut Transcript {
        self.transcript.as_mut().expect("session started")
    }

    fn append(&mut self, message: Message) {
        let transcript = self.transcript_mut();
        let index = transcript.len();
        let event = AgentEvent::MessageAppended {
            index,
            role: message.role,
            content: message.content.clone(),
        };
        transcript.push(message);
        self.sink.emit(&event);
    }

    fn finish(&mut self, status: LoopStatus, final_text: String) -> LoopOutcome {
        info!(?status, "session finished");
        self.sink.emit(&AgentEvent::StatusChanged { status: status.into() });
        let transcript = self.transcript.clone().expect("session started");
        LoopOutcome {
            status,
            final_text,
            loop_count: transcript.count_role(Role::ToolObservation),
            transcript,
        }
    }

    fn summarize(&self) -> String {
        summarize_transcript(
            self.transcript.as_ref().expect("session started"),
            self.llm,
            self.policy.budget_tokens(),
        )
    }

    fn over_budget(&self) -> bool {
        let total = self.transcript.as_ref().map_or(0, Transcript::total_token_estimate);
        total as f64 > self.policy.budget_fraction * self.policy.context_window as f64
    }

    fn drive(&mut self) -> LoopOutcome {
        self.sink.emit(&AgentEvent::StatusChanged {
            status: SessionStatus::Running,
        });
        let mut turns = 0usize;
        let mut malformed_streak = 0usize;
        loop {
            if self.cancelled() {
                let summary = fallback_summary(self.transcript.as_ref().unwrap());
                return self.finish(LoopStatus::UserAborted, summary);
            }
            if self.over_budget() {
                let summary = self.summarize();
                return self.finish(LoopStatus::BudgetExceeded, summary);
            }

            let reply = match self.llm.complete(self.transcript_mut().messages()) {
                Ok(reply) => reply,
                Err(err) => {
                    let summary = format!(
                        "{}\nProvider error: {err}",
                        fallback_summary(self.transcript.as_ref().unwrap())
                    );
                    return self.finish(LoopStatus::GaveUp, summary);
                }
            };
            self.append(Message::assistant(reply.text.clone()));
            let action = parse_action(&reply.text);

            if action.kind == ActionKind::FinalAnswer {
                let answer = action.answer.unwrap_or_default();
                return self.finish(LoopStatus::Completed, answer);
            }
            if turns >= self.policy.max_loops {
                let summary = self.summarize();
                return self.finish(LoopStatus::MaxLoopsReached, summary);
            }
            turns += 1;

            if action.kind == ActionKind::Malformed {
                malformed_streak += 1;
                debug!(malformed_streak, "malformed action");
                if malformed_streak >= self.policy.max_parse_retries {
                    let summary = self.summarize();
                    return self.finish(LoopStatus::GaveUp, summary);
                }
                self.append(Message::user(CORRECTIVE_MESSAGE));
                continue;
            }
            malformed_streak = 0;

            let name = action.tool_name.clone().unwrap_or_default();
            let input = action.tool_input.clone().unwrap_or(Value::Null);
            self.requests += 1;
            let approval_id = format!("req-{}", self.requests);
            let tool = self.tools.get(&name);
            self.sink.emit(&AgentEvent::ToolRequested {
                approval_id: approval_id.clone(),
                tool: name.clone(),
                input: tool.map_or_else(|| action.input_text(), |t| t.render_input(&input)),
                requires_approval: tool.is_some_and(|t| t.requires_approval(&input, &self.gate)),
            });

            let ctx = ToolContext {
                approval_id: &approval_id,
                approver: self.approver,
                gate: &self.gate,
            };
            let result = match self.tools.dispatch(&name, &input, &ctx) {
                Ok(result) => result,
                Err(ToolError::ApprovalChannelClosed) => {
                    let summary = self.summarize();
                    return self.finish(LoopStatus::UserAborted, summary);
                }
                Err(err) => ToolResult::message(false, format!("Error: {err}")),
            };
            self.sink.emit(&AgentEvent::ToolResult {
                approval_id,
                tool: name,
                ok: result.ok,
                output: result.output.clone(),
                exit_code: result.exit_code,
            });
            self.append(Message::observation(observation_text(&result)));
        }
    }
}

/// Run one session to completion.
pub fn run_session(
    initial_user_prompt: &str,
    llm: &dyn ChatProvider,
    tools: &ToolRegistry,
    policy: SessionPolicy,
    approver: &dyn Approver,
    event_sink: &dyn EventSink,
) -> Result<LoopOutcome, AgentError> {
    Session::new(llm, tools, policy, approver, event_sink)?.run(initial_user_prompt)
}

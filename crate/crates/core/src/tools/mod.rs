//! Tools the agent can call: a shell, a script interpreter, and code
//! retrieval. Commands that touch the system pass an approval gate first.

mod process;
mod retrieve;
mod script;
mod shell;
mod truncate;

use std::sync::Arc;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::index::IndexError;
use crate::llm::LlmError;

pub use process::{CommandSpec, ProcessOutput, ProcessSpawner, SystemSpawner};
pub use retrieve::{format_hits, retrieve, RetrieveTool};
pub use script::{run_script, ScriptTool, DEFAULT_INTERPRETER, ENV_SCRIPT_INTERPRETER};
pub use shell::{run_shell, ShellTool};
pub use truncate::{truncate_output, OutputLimits};

pub const SHELL_TOOL: &str = "shell";
pub const SCRIPT_TOOL: &str = "script";
pub const RETRIEVE_TOOL: &str = "retrieve";

pub const DEFAULT_SHELL_TIMEOUT: Duration = Duration::from_secs(600);
pub const DEFAULT_SCRIPT_TIMEOUT: Duration = Duration::from_secs(300);

pub const DENIED_OUTPUT: &str = "Command denied by user.";

#[derive(Debug, thiserror::Error)]
pub enum ToolError {
    #[error("working directory does not exist: {0}")]
    WorkdirMissing(std::path::PathBuf),
    #[error("approval channel closed")]
    ApprovalChannelClosed,
    #[error("script interpreter not found: {0}")]
    InterpreterMissing(String),
    #[error("no code index loaded")]
    IndexNotLoaded,
    #[error("embedding the query failed: {0}")]
    EmbedderError(#[from] LlmError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("invalid tool input: {0}")]
    InvalidInput(String),
    #[error("failed to start process: {0}")]
    Spawn(#[from] std::io::Error),
    #[error("duplicate tool name: {0}")]
    DuplicateTool(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub input_schema_hint: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolResult {
    pub ok: bool,
    pub output: String,
    pub exit_code: Option<i32>,
    pub duration: Duration,
    pub truncated: bool,
}

impl ToolResult {
    pub fn message(ok: bool, output: impl Into<String>) -> Self {
        Self {
            ok,
            output: output.into(),
            exit_code: None,
            duration: Duration::ZERO,
            truncated: false,
        }
    }

    pub fn denied() -> Self {
        Self::message(false, DENIED_OUTPUT)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApprovalMode {
    #[default]
    Interactive,
    Allowlist,
    AutoApprove,
}

impl std::str::FromStr for ApprovalMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "interactive" => Ok(Self::Interactive),
            "allowlist" => Ok(Self::Allowlist),
            "auto" | "auto_approve" => Ok(Self::AutoApprove),
            other => Err(format!("unknown approval mode {other:?} (interactive|allowlist|auto)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApprovalRequest {
    pub approval_id: String,
    pub tool: String,
    pub rendered_input: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApprovalDecision {
    Approve,
    Deny,
    /// Stop the whole session.
    Abort,
}

/// Human checkpoint consulted before a gated command runs. May block.
pub trait Approver: Send + Sync {
    fn decide(&self, request: &ApprovalRequest) -> ApprovalDecision;
}

impl<F> Approver for F
where
    F: Fn(&ApprovalRequest) -> ApprovalDecision + Send + Sync,
{
    fn decide(&self, request: &ApprovalRequest) -> ApprovalDecision {
        self(request)
    }
}

/// Approves everything; for sandboxes and tests.
pub struct ApproveAll;

impl Approver for ApproveAll {
    fn decide(&self, _: &ApprovalRequest) -> ApprovalDecision {
        ApprovalDecision::Approve
    }
}

pub struct DenyAll;

impl Approver for DenyAll {
    fn decide(&self, _: &ApprovalRequest) -> ApprovalDecision {
        ApprovalDecision::Deny
    }
}

/// Characters that chain or redirect commands; an allowlisted prefix must
/// not smuggle a second command past the gate.
const SHELL_METACHARS: &[&str] = &[";", "&", "|", "`", "$(", ">", "<", "\n"];

/// Decides which commands need a human.
#[derive(Debug, Clone)]
pub struct ApprovalGate {
    mode: ApprovalMode,
    allowlist: Vec<Regex>,
}

impl ApprovalGate {
    /// Allowlist patterns must match the whole command.
    pub fn new<S: AsRef<str>>(mode: ApprovalMode, allowlist: &[S]) -> Result<Self, regex::Error> {
        let allowlist = allowlist
            .iter()
            .map(|p| Regex::new(&format!("^(?:{})$", p.as_ref())))
            .collect::<Result<_, _>>()?;
        Ok(Self { mode, allowlist })
    }

    pub fn mode(&self) -> ApprovalMode {
        self.mode
    }

    /// Whether `command` (given to `tool`) runs without asking.
    pub fn auto_approves(&self, tool: &str, command: &str) -> bool {
        match self.mode {
            ApprovalMode::AutoApprove => true,
            ApprovalMode::Interactive => false,
            ApprovalMode::Allowlist => {
                tool == SHELL_TOOL
                    && !SHELL_METACHARS.iter().any(|m| command.contains(m))
                    && self.allowlist.iter().any(|r| r.is_match(command.trim()))
            }
        }
    }
}

impl Default for ApprovalGate {
    fn default() -> Self {
        Self {
            mode: ApprovalMode::Interactive,
            allowlist: Vec::new(),
        }
    }
}

/// Per-call context handed to a tool by the agent loop.
pub struct ToolContext<'a> {
    pub approval_id: &'a str,
    pub approver: &'a dyn Approver,
    pub gate: &'a ApprovalGate,
}

impl ToolContext<'_> {
    /// `Ok(true)` to run, `Ok(false)` when denied.
    pub fn authorize(&self, tool: &str, rendered_input: &str) -> Result<bool, ToolError> {
        if self.gate.auto_approves(tool, rendered_input) {
            return Ok(true);
        }
        let request = ApprovalRequest {
            approval_id: self.approval_id.to_string(),
            tool: tool.to_string(),
            rendered_input: rendered_input.to_string(),
        };
        match self.approver.decide(&request) {
            ApprovalDecision::Approve => Ok(true),
            ApprovalDecision::Deny => Ok(false),
            ApprovalDecision::Abort => Err(ToolError::ApprovalChannelClosed),
        }
    }
}

pub trait Tool: Send + Sync {
    fn spec(&self) -> ToolSpec;

    /// Text shown to the approver for this input.
    fn render_input(&self, input: &Value) -> String {
        crate::agent::value_to_text(input)
    }

    fn requires_approval(&self, _input: &Value, _gate: &ApprovalGate) -> bool {
        false
    }

    fn invoke(&self, input: &Value, ctx: &ToolContext<'_>) -> Result<ToolResult, ToolError>;
}

/// Named tools available to a session.
#[derive(Default, Clone)]
pub struct ToolRegistry {
    tools: Vec<Arc<dyn Tool>>,
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, tool: Arc<dyn Tool>) -> Result<(), ToolError> {
        let name = tool.spec().name;
        if self.get(&name).is_some() {
            return Err(ToolError::DuplicateTool(name));
        }
        self.tools.push(tool);
        Ok(())
    }

    pub fn with(mut self, tool: impl Tool + 'static) -> Result<Self, ToolError> {
        self.register(Arc::new(tool))?;
        Ok(self)
    }

    pub fn names(&self) -> Vec<String> {
        self.tools.iter().map(|t| t.spec().name).collect()
    }

    pub fn specs(&self) -> Vec<ToolSpec> {
        self.tools.iter().map(|t| t.spec()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&Arc<dyn Tool>> {
        self.tools.iter().find(|t| t.spec().name == name)
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }

    pub fn unknown_tool_message(&self, name: &str) -> String {
        format!("Unknown tool: {name}. Available: {}", self.names().join(", "))
    }

    /// Run `name`; unknown names produce an explanatory failed result.
    pub fn dispatch(&self, name: &str, input: &Value, ctx: &ToolContext<'_>) -> Result<ToolResult, ToolError> {
        match self.get(name) {
            Some(tool) => tool.invoke(input, ctx),
            None => Ok(ToolResult::message(false, self.unknown_tool_message(name))),
        }
    }
}

/// Pull a string field out of a tool input that may be a bare string or an
/// object carrying one of `keys`.
pub(crate) fn input_field(input: &Value, keys: &[&str]) -> Option<String> {
    match input {
        Value::String(s) => Some(s.clone()),
        Value::Object(map) => keys.iter().find_map(|k| map.get(*k).and_then(Value::as_str).map(str::to_string)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn allowlist_is_anchored_and_rejects_chaining() {
        let gate = ApprovalGate::new(ApprovalMode::Allowlist, &["ls( .*)?", "cat .*", "pwd"]).unwrap();
        for ok in ["ls", "ls -la system", "cat system/controlDict", "pwd"] {
            assert!(gate.auto_approves(SHELL_TOOL, ok), "{ok}");
        }
        for bad in ["rm -rf /", "echo ls", "cat a; rm b", "ls && rm x", "cat a > b", "pwd\nrm x"] {
            assert!(!gate.auto_approves(SHELL_TOOL, bad), "{bad}");
        }
        assert!(!gate.auto_approves(SCRIPT_TOOL, "ls"));
    }

    #[test]
    fn modes() {
        let auto = ApprovalGate::new::<&str>(ApprovalMode::AutoApprove, &[]).unwrap();
        assert!(auto.auto_approves(SHELL_TOOL, "rm -rf x"));
        assert!(!ApprovalGate::default().auto_approves(SHELL_TOOL, "ls"));
        assert_eq!("auto".parse::<ApprovalMode>().unwrap(), ApprovalMode::AutoApprove);
        assert!("bogus".parse::<ApprovalMode>().is_err());
    }

    #[test]
    fn input_field_forms() {
        assert_eq!(input_field(&Value::from("ls"), &["command"]).as_deref(), Some("ls"));
        let obj = serde_json::json!({"command": "pwd"});
        assert_eq!(input_field(&obj, &["cmd", "command"]).as_deref(), Some("pwd"));
        assert_eq!(input_field(&Value::Null, &["command"]), None);
    }
}

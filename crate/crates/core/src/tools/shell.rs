use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde_json::Value;

use super::{
    input_field, truncate_output, ApprovalGate, CommandSpec, OutputLimits, ProcessOutput, ProcessSpawner,
    SystemSpawner, Tool, ToolContext, ToolError, ToolResult, ToolSpec, DEFAULT_SHELL_TIMEOUT, SHELL_TOOL,
};

pub(crate) fn finish(out: ProcessOutput, timeout: Duration, limits: OutputLimits) -> ToolResult {
    let mut text = out.output;
    if out.timed_out {
        if !text.is_empty() && !text.ends_with('\n') {
            text.push('\n');
        }
        text.push_str(&format!("timed out after {}s", timeout.as_secs()));
    }
    let (output, truncated) = truncate_output(&text, limits.head, limits.tail);
    ToolResult {
        ok: !out.timed_out && out.exit_code == Some(0),
        output,
        exit_code: out.exit_code,
        duration: out.duration,
        truncated,
    }
}

/// Run `command` with bash in `workdir` once the gate allows it. A denial
/// is reported as a failed result rather than an error.
pub fn run_shell(
    command: &str,
    workdir: &Path,
    timeout: Duration,
    ctx: &ToolContext<'_>,
    spawner: &dyn ProcessSpawner,
    limits: OutputLimits,
) -> Result<ToolResult, ToolError> {
    if !workdir.is_dir() {
        return Err(ToolError::WorkdirMissing(workdir.to_path_buf()));
    }
    if !ctx.authorize(SHELL_TOOL, command)? {
        return Ok(ToolResult::denied());
    }
    let out = spawner.spawn(&CommandSpec::shell(command, workdir, timeout))?;
    Ok(finish(out, timeout, limits))
}

pub struct ShellTool {
    pub workdir: PathBuf,
    pub timeout: Duration,
    pub limits: OutputLimits,
    spawner: Arc<dyn ProcessSpawner>,
}

impl ShellTool {
    pub fn new(workdir: impl Into<PathBuf>) -> Self {
        Self {
            workdir: workdir.into(),
            timeout: DEFAULT_SHELL_TIMEOUT,
            limits: OutputLimits::SHELL,
            spawner: Arc::new(SystemSpawner),
        }
    }

    pub fn with_spawner(mut self, spawner: Arc<dyn ProcessSpawner>) -> Self {
        self.spawner = spawner;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }
}

impl Tool for ShellTool {
    fn spec(&self) -> ToolSpec {
        ToolSpec {
            name: SHELL_TOOL.to_string(),
            description: "Execute a Linux shell command in the working directory and return its combined output."
                .to_string(),
            input_schema_hint: "the command line as a string".to_string(),
        }
    }

    fn render_input(&self, input: &Value) -> String {
        input_field(input, &["command", "cmd"]).unwrap_or_else(|| crate::agent::value_to_text(input))
    }

    fn requires_approval(&self, input: &Value, gate: &ApprovalGate) -> bool {
        !gate.auto_approves(SHELL_TOOL, &self.render_input(input))
    }

    fn invoke(&self, input: &Value, ctx: &ToolContext<'_>) -> Result<ToolResult, ToolError> {
        let command = input_field(input, &["command", "cmd"])
            .filter(|c| !c.trim().is_empty())
            .ok_or_else(|| ToolError::InvalidInput("shell expects a command string".into()))?;
        run_shell(&command, &self.workdir, self.timeout, ctx, self.spawner.as_ref(), self.limits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tools::{ApprovalMode, ApproveAll, DenyAll, DENIED_OUTPUT};

    fn auto() -> ApprovalGate {
        ApprovalGate::new::<&str>(ApprovalMode::AutoApprove, &[]).unwrap()
    }

    fn ctx<'a>(gate: &'a ApprovalGate, approver: &'a dyn super::super::Approver) -> ToolContext<'a> {
        ToolContext {
            approval_id: "t-1",
            approver,
            gate,
        }
    }

    #[test]
    fn echo_hi() {
        let gate = auto();
        let r = run_shell("echo hi", &std::env::temp_dir(), Duration::from_secs(10), &ctx(&gate, &ApproveAll), &SystemSpawner, OutputLimits::SHELL).unwrap();
        assert!(r.ok);
        assert_eq!(r.output, "hi\n");
        assert_eq!(r.exit_code, Some(0));
    }

    #[test]
    fn exit_three() {
        let gate = auto();
        let r = run_shell("exit 3", &std::env::temp_dir(), Duration::from_secs(10), &ctx(&gate, &ApproveAll), &SystemSpawner, OutputLimits::SHELL).unwrap();
        assert!(!r.ok);
        assert_eq!(r.exit_code, Some(3));
    }

    #[test]
    fn interactive_deny() {
        let gate = ApprovalGate::default();
        let r = run_shell("echo hi", &std::env::temp_dir(), Duration::from_secs(10), &ctx(&gate, &DenyAll), &SystemSpawner, OutputLimits::SHELL).unwrap();
        assert!(!r.ok);
        assert_eq!(r.output, DENIED_OUTPUT);
    }

    #[test]
    fn timeout_reported() {
        let gate = auto();
        let r = run_shell("echo start; sleep 20", &std::env::temp_dir(), Duration::from_millis(200), &ctx(&gate, &ApproveAll), &SystemSpawner, OutputLimits::SHELL).unwrap();
        assert!(!r.ok);
        assert!(r.output.starts_with("start\n"));
        assert!(r.output.ends_with("timed out after 0s"));
    }

    #[test]
    fn missing_workdir() {
        let gate = auto();
        let err = run_shell("ls", Path::new("/no/such/dir/x"), Duration::from_secs(1), &ctx(&gate, &ApproveAll), &SystemSpawner, OutputLimits::SHELL).unwrap_err();
        assert!(matches!(err, ToolError::WorkdirMissing(_)));
    }

    #[test]
    fn abort_closes_channel() {
        let gate = ApprovalGate::default();
        let abort = |_: &crate::tools::ApprovalRequest| crate::tools::ApprovalDecision::Abort;
        let err = run_shell("ls", &std::env::temp_dir(), Duration::from_secs(1), &ctx(&gate, &abort), &SystemSpawner, OutputLimits::SHELL).unwrap_err();
        assert!(matches!(err, ToolError::ApprovalChannelClosed));
    }
}

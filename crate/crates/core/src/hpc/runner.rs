use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use super::HpcError;
use crate::tools::{
    run_shell, ApprovalGate, Approver, CommandSpec, OutputLimits, ProcessSpawner, SystemSpawner, ToolContext,
    ToolError, DENIED_OUTPUT,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShellOutput {
    /// `None` when killed by a signal or timed out.
    pub exit_code: Option<i32>,
    pub output: String,
}

impl ShellOutput {
    pub fn success(&self) -> bool {
        self.exit_code == Some(0)
    }
}

/// Executes scheduler and solver commands.
pub trait ShellRunner: Send + Sync {
    fn run(&self, command: &str, workdir: &Path, timeout: Duration) -> Result<ShellOutput, HpcError>;
}

/// Quote `path` for bash when needed.
pub fn quote(path: &str) -> String {
    shlex::try_quote(path).map_or_else(|_| path.to_string(), |q| q.into_owned())
}

/// `source {bashrc} && ` for commands that need the solver environment.
pub fn source_prefix(bashrc: &Path) -> String {
    format!("source {} && ", quote(&bashrc.to_string_lossy()))
}

/// Runs commands directly, without asking anyone.
#[derive(Clone)]
pub struct SystemRunner {
    spawner: Arc<dyn ProcessSpawner>,
}

impl Default for SystemRunner {
    fn default() -> Self {
        Self {
            spawner: Arc::new(SystemSpawner),
        }
    }
}

impl SystemRunner {
    pub fn new(spawner: Arc<dyn ProcessSpawner>) -> Self {
        Self { spawner }
    }
}

impl ShellRunner for SystemRunner {
    fn run(&self, command: &str, workdir: &Path, timeout: Duration) -> Result<ShellOutput, HpcError> {
        if !workdir.is_dir() {
            return Err(HpcError::CaseMissing(workdir.to_path_buf()));
        }
        let out = self.spawner.spawn(&CommandSpec::shell(command, workdir, timeout))?;
        Ok(ShellOutput {
            exit_code: if out.timed_out { None } else { out.exit_code },
            output: out.output,
        })
    }
}

/// Runs commands through the same approval gate as the shell tool.
pub struct GatedRunner<'a> {
    approver: &'a dyn Approver,
    gate: &'a ApprovalGate,
    spawner: Arc<dyn ProcessSpawner>,
    counter: AtomicUsize,
}

impl<'a> GatedRunner<'a> {
    pub fn new(approver: &'a dyn Approver, gate: &'a ApprovalGate) -> Self {
        Self {
            approver,
            gate,
            spawner: Arc::new(SystemSpawner),
            counter: AtomicUsize::new(0),
        }
    }

    pub fn with_spawner(mut self, spawner: Arc<dyn ProcessSpawner>) -> Self {
        self.spawner = spawner;
        self
    }
}

impl ShellRunner for GatedRunner<'_> {
    fn run(&self, command: &str, workdir: &Path, timeout: Duration) -> Result<ShellOutput, HpcError> {
        let n = self.counter.fetch_add(1, Ordering::Relaxed) + 1;
        let approval_id = format!("hpc-{n}");
        let ctx = ToolContext {
            approval_id: &approval_id,
            approver: self.approver,
            gate: self.gate,
        };
        let result = run_shell(command, workdir, timeout, &ctx, self.spawner.as_ref(), OutputLimits::SHELL)
            .map_err(|e| match e {
                ToolError::ApprovalChannelClosed => HpcError::Aborted,
                ToolError::WorkdirMissing(p) => HpcError::CaseMissing(p),
                other => HpcError::Io(other.to_string()),
            })?;
        if !result.ok && result.exit_code.is_none() && result.output == DENIED_OUTPUT {
            return Err(HpcError::Denied(command.to_string()));
        }
        Ok(ShellOutput {
            exit_code: result.exit_code,
            output: result.output,
        })
    }
}

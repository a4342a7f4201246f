use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde_json::Value;

use super::shell::finish;
use super::{
    input_field, CommandSpec, OutputLimits, ProcessSpawner, SystemSpawner, Tool, ToolContext, ToolError, ToolResult,
    ToolSpec, DEFAULT_SCRIPT_TIMEOUT, SCRIPT_TOOL,
};

pub const ENV_SCRIPT_INTERPRETER: &str = "FOAMPILOT_SCRIPT_INTERPRETER";
pub const DEFAULT_INTERPRETER: &str = "python3";

/// Write `source` to a temporary file under `scratch` and run it with
/// `interpreter`. The file is removed afterwards.
#[allow(clippy::too_many_arguments)]
pub fn run_script(
    source: &str,
    interpreter: &str,
    workdir: &Path,
    scratch: &Path,
    timeout: Duration,
    ctx: &ToolContext<'_>,
    spawner: &dyn ProcessSpawner,
    limits: OutputLimits,
) -> Result<ToolResult, ToolError> {
    if source.trim().is_empty() {
        return Err(ToolError::InvalidInput("script source is empty".into()));
    }
    if !workdir.is_dir() {
        return Err(ToolError::WorkdirMissing(workdir.to_path_buf()));
    }
    if !ctx.authorize(SCRIPT_TOOL, source)? {
        return Ok(ToolResult::denied());
    }
    std::fs::create_dir_all(scratch)?;
    let mut file = tempfile::Builder::new()
        .prefix("foampilot-script-")
        .suffix(".py")
        .tempfile_in(scratch)?;
    file.write_all(source.as_bytes())?;
    file.flush()?;

    let spec = CommandSpec {
        program: interpreter.to_string(),
        args: vec![file.path().to_string_lossy().into_owned()],
        workdir: workdir.to_path_buf(),
        timeout,
    };
    let out = spawner.spawn(&spec).map_err(|e| match e.kind() {
        ErrorKind::NotFound => ToolError::InterpreterMissing(interpreter.to_string()),
        _ => ToolError::Spawn(e),
    })?;
    Ok(finish(out, timeout, limits))
}

pub struct ScriptTool {
    pub interpreter: String,
    pub workdir: PathBuf,
    pub scratch: PathBuf,
    pub timeout: Duration,
    pub limits: OutputLimits,
    spawner: Arc<dyn ProcessSpawner>,
}

impl ScriptTool {
    /// Interpreter taken from `FOAMPILOT_SCRIPT_INTERPRETER`, else `python3`.
    pub fn new(workdir: impl Into<PathBuf>, scratch: impl Into<PathBuf>) -> Self {
        let interpreter = std::env::var(ENV_SCRIPT_INTERPRETER)
            .ok()
            .filter(|s| !s.trim().is_empty())
            .unwrap_or_else(|| DEFAULT_INTERPRETER.to_string());
        Self {
            interpreter,
            workdir: workdir.into(),
            scratch: scratch.into(),
            timeout: DEFAULT_SCRIPT_TIMEOUT,
            limits: OutputLimits::SHELL,
            spawner: Arc::new(SystemSpawner),
        }
    }

    pub fn with_interpreter(mut self, interpreter: impl Into<String>) -> Self {
        self.interpreter = interpreter.into();
        self
    }

    pub fn with_spawner(mut self, spawner: Arc<dyn ProcessSpawner>) -> Self {
        self.spawner = spawner;
        self
    }
}

impl Tool for ScriptTool {
    fn spec(&self) -> ToolSpec {
        ToolSpec {
            name: SCRIPT_TOOL.to_string(),
            description: format!("Run a {} script and return its combined output.", self.interpreter),
            input_schema_hint: "the full script source as a string".to_string(),
        }
    }

    fn render_input(&self, input: &Value) -> String {
        input_field(input, &["source", "code", "script"]).unwrap_or_else(|| crate::agent::value_to_text(input))
    }

    fn requires_approval(&self, input: &Value, gate: &super::ApprovalGate) -> bool {
        !gate.auto_approves(SCRIPT_TOOL, &self.render_input(input))
    }

    fn invoke(&self, input: &Value, ctx: &ToolContext<'_>) -> Result<ToolResult, ToolError> {
        let source = input_field(input, &["source", "code", "script"])
            .ok_or_else(|| ToolError::InvalidInput("script expects the source text".into()))?;
        run_script(
            &source,
            &self.interpreter,
            &self.workdir,
            &self.scratch,
            self.timeout,
            ctx,
            self.spawner.as_ref(),
            self.limits,
        )
    }
}

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use anyhow::Context;
use foampilot_core::agent::{render_prompt_template, PromptTemplate};
use foampilot_core::case::{build_config_prompt, flatten_tree, load_case, CaseTree};
use foampilot_core::hpc::SERIAL_TIMEOUT;
use foampilot_core::index::{load_index, VectorIndex};
use foampilot_core::llm::{ChatProvider, Embedder, HashEmbedder, MockProvider, MockScript, OpenAiClient};
use foampilot_core::tools::{RetrieveTool, ScriptTool, ShellTool, ToolRegistry};
use serde::{Deserialize, Serialize};
use tempfile::TempDir;

use crate::config::AppConfig;

/// A missing or unusable input named on the command line; exits with 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

/// Where model replies come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LlmSource {
    /// Replay a recorded script.
    Mock(PathBuf),
    /// The configured OpenAI-compatible endpoint.
    Provider,
}

impl FromStr for LlmSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            Some(("mock", path)) if !path.is_empty() => Ok(LlmSource::Mock(PathBuf::from(path))),
            _ if s == "provider" => Ok(LlmSource::Provider),
            _ => Err(format!("expected mock:PATH or provider, got {s:?}")),
        }
    }
}

/// Configuration plus the chosen model source; cheap to clone.
#[derive(Clone)]
pub struct Backends {
    pub config: AppConfig,
    pub llm: LlmSource,
}

impl Backends {
    pub fn new(config: AppConfig, llm: LlmSource) -> Self {
        Self { config, llm }
    }

    /// A fresh chat provider; mock scripts restart from the first step.
    pub fn chat(&self) -> anyhow::Result<Arc<dyn ChatProvider>> {
        match &self.llm {
            LlmSource::Mock(path) => {
                let script = MockScript::load(path).map_err(|e| usage(format!("mock script {}: {e}", path.display())))?;
                Ok(Arc::new(MockProvider::new(script)))
            }
            LlmSource::Provider => {
                let client = OpenAiClient::new(self.config.provider.clone()).map_err(|e| usage(e.to_string()))?;
                Ok(Arc::new(client))
            }
        }
    }

    fn uses_hash_embedder(&self) -> bool {
        matches!(self.llm, LlmSource::Mock(_)) || self.config.provider.base_url.trim().is_empty()
    }

    /// Embedder used to build a new index.
    pub fn embedder(&self) -> anyhow::Result<Arc<dyn Embedder>> {
        if self.uses_hash_embedder() {
            return Ok(Arc::new(HashEmbedder::default()));
        }
        Ok(Arc::new(OpenAiClient::new(self.config.provider.clone())?))
    }

    /// Embedder matching the model an index was built with.
    pub fn embedder_for(&self, index: &VectorIndex) -> anyhow::Result<Arc<dyn Embedder>> {
        let hash = HashEmbedder::new(index.dimension);
        if index.embed_model_tag == hash.model_tag() {
            return Ok(Arc::new(hash));
        }
        if self.uses_hash_embedder() {
            return Err(usage(format!(
                "index was embedded with {:?}; configure the provider to query it",
                index.embed_model_tag
            )));
        }
        Ok(Arc::new(OpenAiClient::new(self.config.provider.clone())?))
    }

    pub fn load_index(&self, path: &Path) -> anyhow::Result<Arc<VectorIndex>> {
        if !path.is_file() {
            return Err(usage(format!("index not found: {}", path.display())));
        }
        let index = load_index(path).with_context(|| format!("loading {}", path.display()))?;
        Ok(Arc::new(index))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionMode {
    Chat,
    Configure,
    RunSerial,
    RunHpc,
    Ask,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionParams {
    pub case: Option<PathBuf>,
    pub request: Option<String>,
    pub question: Option<String>,
    pub bashrc: Option<PathBuf>,
    pub index: Option<PathBuf>,
    /// Working directory for sessions without a case.
    pub cwd: Option<PathBuf>,
}

/// Everything a session needs before its first model call.
pub struct PreparedSession {
    pub mode: SessionMode,
    /// Opening user message; `None` waits for the user (chat).
    pub prompt: Option<String>,
    pub tools: ToolRegistry,
    pub llm: Arc<dyn ChatProvider>,
    pub workdir: PathBuf,
    /// Case contents before the session, for reporting edits.
    pub before: Option<CaseTree>,
    _scratch: TempDir,
}

fn existing_case(case: Option<&PathBuf>) -> anyhow::Result<PathBuf> {
    let case = case.ok_or_else(|| usage("--case is required"))?;
    if !case.is_dir() {
        return Err(usage(format!("case directory not found: {}", case.display())));
    }
    Ok(std::fs::canonicalize(case)?)
}

fn bashrc(params: &SessionParams, config: &AppConfig) -> anyhow::Result<PathBuf> {
    let path = params
        .bashrc
        .clone()
        .or_else(|| config.bashrc_path.clone())
        .ok_or_else(|| usage("--bashrc is required"))?;
    if !path.is_file() {
        return Err(usage(format!("bashrc not found: {}", path.display())));
    }
    Ok(path)
}

fn cwd(params: &SessionParams) -> anyhow::Result<PathBuf> {
    match &params.cwd {
        Some(dir) => Ok(dir.clone()),
        None => Ok(std::env::current_dir()?),
    }
}

fn display(path: &Path) -> String {
    path.to_string_lossy().into_owned()
}

pub fn prepare_session(mode: SessionMode, params: &SessionParams, backends: &Backends) -> anyhow::Result<PreparedSession> {
    let config = &backends.config;
    let scratch = tempfile::Builder::new().prefix("foampilot-").tempdir()?;
    let index_path = params.index.clone().unwrap_or_else(|| config.index_path.clone());

    // ask needs an index; the other modes use one when it exists
    let index = match mode {
        SessionMode::Ask => Some(backends.load_index(&index_path)?),
        _ if index_path.is_file() => Some(backends.load_index(&index_path)?),
        _ => None,
    };
    let retrieve = |index: Option<Arc<VectorIndex>>| -> anyhow::Result<RetrieveTool> {
        let embedder = match &index {
            Some(index) => backends.embedder_for(index)?,
            None => backends.embedder()?,
        };
        Ok(RetrieveTool::new(index, embedder).with_k(config.retrieval_k))
    };

    let mut tools = ToolRegistry::new();
    let mut before = None;
    let (prompt, workdir) = match mode {
        SessionMode::Ask => {
            let question = params.question.clone().ok_or_else(|| usage("a question is required"))?;
            let workdir = cwd(params)?;
            tools.register(Arc::new(retrieve(index)?))?;
            tools.register(Arc::new(ShellTool::new(&workdir)))?;
            (Some(question), workdir)
        }
        SessionMode::Configure => {
            let case = existing_case(params.case.as_ref())?;
            let request = params.request.clone().unwrap_or_default();
            let tree = load_case(&case)?;
            let prompt = build_config_prompt(&display(&case), &request, &flatten_tree(&tree));
            before = Some(tree);
            tools.register(Arc::new(ShellTool::new(&case)))?;
            if index.is_some() {
                tools.register(Arc::new(retrieve(index)?))?;
            }
            (Some(prompt), case)
        }
        SessionMode::RunSerial | SessionMode::RunHpc => {
            let case = existing_case(params.case.as_ref())?;
            let bashrc = display(&bashrc(params, config)?);
            let case_path = display(&case);
            let prompt = if mode == SessionMode::RunSerial {
                let bindings = HashMap::from([("case_path", case_path.as_str()), ("OF_bashrc_path", bashrc.as_str())]);
                render_prompt_template(PromptTemplate::SerialJob, &bindings)?
            } else {
                let tree = load_case(&case)?;
                let snapshot = flatten_tree(&tree);
                before = Some(tree);
                let bindings = HashMap::from([
                    ("case_path", case_path.as_str()),
                    ("OF_bashrc_path", bashrc.as_str()),
                    ("case_contents", snapshot.text.as_str()),
                ]);
                render_prompt_template(PromptTemplate::HpcJob, &bindings)?
            };
            tools.register(Arc::new(ShellTool::new(&case).with_timeout(SERIAL_TIMEOUT)))?;
            tools.register(Arc::new(ScriptTool::new(&case, scratch.path())))?;
            tools.register(Arc::new(retrieve(index)?))?;
            (Some(prompt), case)
        }
        SessionMode::Chat => {
            let workdir = match params.case.as_ref() {
                Some(_) => existing_case(params.case.as_ref())?,
                None => cwd(params)?,
            };
            tools.register(Arc::new(ShellTool::new(&workdir)))?;
            tools.register(Arc::new(ScriptTool::new(&workdir, scratch.path())))?;
            if index.is_some() {
                tools.register(Arc::new(retrieve(index)?))?;
            }
            (None, workdir)
        }
    };
    Ok(PreparedSession {
        mode,
        prompt,
        tools,
        llm: backends.chat()?,
        workdir,
        before,
        _scratch: scratch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn llm_source_parsing() {
        assert_eq!("mock:/x.json".parse::<LlmSource>(), Ok(LlmSource::Mock("/x.json".into())));
        assert_eq!("provider".parse::<LlmSource>(), Ok(LlmSource::Provider));
        assert!("mock:".parse::<LlmSource>().is_err());
        assert!("gpt".parse::<LlmSource>().is_err());
    }

    #[test]
    fn missing_inputs_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let script = dir.path().join("s.json");
        std::fs::write(&script, "[]").unwrap();
        let backends = Backends::new(AppConfig::default(), LlmSource::Mock(script));
        let cases = [
            (SessionMode::Configure, SessionParams::default()),
            (
                SessionMode::Configure,
                SessionParams { case: Some(dir.path().join("none")), ..Default::default() },
            ),
            (
                SessionMode::RunSerial,
                SessionParams { case: Some(dir.path().to_path_buf()), ..Default::default() },
            ),
            (
                SessionMode::Ask,
                SessionParams {
                    question: Some("q".into()),
                    index: Some(dir.path().join("missing.fpix")),
                    ..Default::default()
                },
            ),
        ];
        for (mode, params) in cases {
            let err = prepare_session(mode, &params, &backends).err().expect("should fail");
            assert!(err.downcast_ref::<UsageError>().is_some(), "{mode:?}: {err}");
        }
    }

    #[test]
    fn provider_without_url_is_usage_error() {
        let backends = Backends::new(AppConfig::default(), LlmSource::Provider);
        assert!(backends.chat().err().unwrap().downcast_ref::<UsageError>().is_some());
        assert!(backends.embedder().is_ok());
    }
}

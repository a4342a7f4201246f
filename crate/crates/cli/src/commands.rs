use std::collections::HashMap;
use std::ffi::OsString;
use std::net::IpAddr;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use foampilot_core::agent::{AgentEvent, EventSink, LoopOutcome, Session};
use foampilot_core::case::{diff_case, format_changes, load_case};
use foampilot_core::hpc::{plan_job, poll_status, submit, GatedRunner, HpcError, JobState};
use foampilot_core::index::{
    build_index, prepare_documents, save_index, scan_corpus, IndexError, DEFAULT_EMBED_MAX_TOKENS, DEFAULT_EXCLUDES,
    DEFAULT_INCLUDES,
};
use foampilot_core::tools::ApprovalMode;
use regex::Regex;

use crate::backends::{prepare_session, usage, Backends, LlmSource, SessionMode, SessionParams, UsageError};
use crate::config::{AppConfig, FlagOverrides};
use crate::console::{print_outcome, status_name, Console, ProgressSink, TerminalApprover};
use crate::serve;

/// Process context, injectable for in-process tests.
#[derive(Debug, Clone, Default)]
pub struct Environment {
    pub cwd: PathBuf,
    pub home: Option<PathBuf>,
    pub vars: HashMap<String, String>,
}

impl Environment {
    pub fn from_process() -> Self {
        Self {
            cwd: std::env::current_dir().unwrap_or_else(|_| PathBuf::from(".")),
            home: std::env::var_os("HOME").map(PathBuf::from),
            vars: std::env::vars().collect(),
        }
    }

    /// Absolute form of a path given on the command line.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.cwd.join(path)
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "foampilot", version, about = "Agent for setting up and running FireFOAM cases")]
pub struct Cli {
    /// Config file (default: ./foampilot.json, then ~/foampilot.json).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "interactive|allowlist|auto")]
    pub approval: Option<ApprovalMode>,
    /// mock:PATH replays a scripted provider.
    #[arg(long, global = true, default_value = "provider")]
    pub llm: LlmSource,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a retrieval index from a source tree.
    Index {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ask a question about the indexed source code.
    Ask {
        question: String,
        #[arg(long)]
        index: Option<PathBuf>,
    },
    /// Edit a case according to a request and report the changes.
    Configure {
        #[arg(long)]
        case: PathBuf,
        request: String,
        #[arg(long)]
        index: Option<PathBuf>,
    },
    /// Run a case locally or through the batch scheduler.
    Run {
        #[command(subcommand)]
        mode: RunMode,
    },
    /// Interactive session on the terminal.
    Chat {
        #[arg(long)]
        case: Option<PathBuf>,
        #[arg(long)]
        index: Option<PathBuf>,
    },
    /// HTTP API and web console.
    Serve {
        #[arg(long, default_value_t = serve::DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
    },
    /// Size a batch job from the cluster and mesh, without the model.
    HpcPlan {
        #[command(flatten)]
        target: RunArgs,
        #[arg(long)]
        partition: Option<String>,
        #[arg(long)]
        submit: bool,
    },
    /// Query the scheduler for a job.
    JobStatus {
        job_id: u64,
        #[arg(long)]
        case: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum RunMode {
    Serial(RunArgs),
    Hpc(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub case: PathBuf,
    #[arg(long)]
    pub bashrc: Option<PathBuf>,
    #[arg(long)]
    pub index: Option<PathBuf>,
}

/// Parse `args` and execute; returns the process exit code.
pub fn run<I, T>(args: I, console: Console, env: Environment) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                console.say(text.trim_end());
            } else {
                console.warn(text.trim_end());
            }
            return code;
        }
    };
    match execute(cli, &console, &env) {
        Ok(code) => code,
        Err(e) => {
            let message = format!("{e:#}").replace('\n', " ");
            console.warn(format!("error: {message}"));
            if e.downcast_ref::<UsageError>().is_some() {
                2
            } else {
                1
            }
        }
    }
}

fn load_config(cli: &Cli, env: &Environment, bashrc: Option<&Path>) -> anyhow::Result<AppConfig> {
    let flags = FlagOverrides {
        approval: cli.approval,
        index_path: None,
        bashrc_path: bashrc.map(|p| env.resolve(p)),
    };
    let explicit = cli.config.as_deref().map(|p| env.resolve(p));
    let mut config = AppConfig::load(explicit.as_deref(), &env.cwd, env.home.as_deref(), |k| env.vars.get(k).cloned(), &flags)
        .map_err(|e| usage(format!("{e:#}")))?;
    config.index_path = env.resolve(&config.index_path);
    if let Some(path) = &config.bashrc_path {
        config.bashrc_path = Some(env.resolve(path));
    }
    Ok(config)
}

fn execute(cli: Cli, console: &Console, env: &Environment) -> anyhow::Result<i32> {
    let bashrc = match &cli.command {
        Command::Run { mode: RunMode::Serial(a) | RunMode::Hpc(a) } => a.bashrc.clone(),
        Command::HpcPlan { target, .. } => target.bashrc.clone(),
        _ => None,
    };
    let config = load_config(&cli, env, bashrc.as_deref())?;
    let backends = Backends::new(config, resolve_llm(&cli.llm, env));
    let resolve = |p: &Option<PathBuf>| p.as_ref().map(|p| env.resolve(p));
    let session = |mode, params: SessionParams| run_session(mode, params, &backends, console);
    match &cli.command {
        Command::Index { src, out } => cmd_index(&env.resolve(src), resolve(out).as_deref(), &backends, console),
        Command::Ask { question, index } => session(
            SessionMode::Ask,
            SessionParams {
                question: Some(question.clone()),
                index: resolve(index),
                cwd: Some(env.cwd.clone()),
                ..Default::default()
            },
        ),
        Command::Configure { case, request, index } => session(
            SessionMode::Configure,
            SessionParams {
                case: Some(env.resolve(case)),
                request: Some(request.clone()),
                index: resolve(index),
                ..Default::default()
            },
        ),
        Command::Run { mode } => {
            let (mode, args) = match mode {
                RunMode::Serial(a) => (SessionMode::RunSerial, a),
                RunMode::Hpc(a) => (SessionMode::RunHpc, a),
            };
            session(
                mode,
                SessionParams {
                    case: Some(env.resolve(&args.case)),
                    bashrc: backends.config.bashrc_path.clone(),
                    index: resolve(&args.index),
                    ..Default::default()
                },
            )
        }
        Command::Chat { case, index } => cmd_chat(
            SessionParams {
                case: resolve(case),
                index: resolve(index),
                cwd: Some(env.cwd.clone()),
                ..Default::default()
            },
            &backends,
            console,
        ),
        Command::Serve { port, bind } => {
            let addr = std::net::SocketAddr::new(*bind, *port);
            serve::serve_blocking(addr, backends.clone(), env.cwd.clone(), console.clone())?;
            Ok(0)
        }
        Command::HpcPlan { target, partition, submit } => {
            cmd_hpc_plan(target, partition.as_deref(), *submit, &backends, console, env)
        }
        Command::JobStatus { job_id, case } => {
            let workdir = resolve(case).unwrap_or_else(|| env.cwd.clone());
            let approver = TerminalApprover::new(console.clone());
            let gate = backends.config.session_policy().gate()?;
            let runner = GatedRunner::new(&approver, &gate);
            let status = poll_status(*job_id, &runner, &workdir).map_err(hpc_error)?;
            console.say(format!("job {}: {}", status.job_id, job_state_name(status.state)));
            Ok(0)
        }
    }
}

fn resolve_llm(llm: &LlmSource, env: &Environment) -> LlmSource {
    match llm {
        LlmSource::Mock(path) => LlmSource::Mock(env.resolve(path)),
        LlmSource::Provider => LlmSource::Provider,
    }
}

fn hpc_error(e: HpcError) -> anyhow::Error {
    match e {
        HpcError::CaseMissing(_) | HpcError::MeshScriptMissing(_) | HpcError::UnknownPartition(_) => usage(e.to_string()),
        other => other.into(),
    }
}

fn job_state_name(state: JobState) -> String {
    serde_json::to_value(state)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_else(|| format!("{state:?}"))
}

fn plural(n: usize, word: &str) -> String {
    if n == 1 {
        format!("{n} {word}")
    } else {
        format!("{n} {word}s")
    }
}

pub fn cmd_index(src: &Path, out: Option<&Path>, backends: &Backends, console: &Console) -> anyhow::Result<i32> {
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| backends.config.index_path.clone());
    let entries = scan_corpus(src, DEFAULT_INCLUDES, DEFAULT_EXCLUDES).map_err(|e| match e {
        IndexError::RootMissing(_) => usage(e.to_string()),
        other => other.into(),
    })?;
    let docs = prepare_documents(src, &entries)?;
    let embedder = backends.embedder()?;
    let index = build_index(docs, embedder.as_ref(), DEFAULT_EMBED_MAX_TOKENS)?;
    save_index(&index, &out).with_context(|| format!("writing {}", out.display()))?;
    console.say(format!(
        "indexed {} into {} (dimension {}, model {})",
        plural(index.len(), "document"),
        out.display(),
        index.dimension,
        index.embed_model_tag
    ));
    console.say(format!("{} truncated for embedding", plural(index.truncated_count(), "document")));
    Ok(0)
}

/// Forwards to the progress printer and remembers submitted job ids.
struct JobIdWatcher {
    inner: ProgressSink,
    pattern: Regex,
    ids: Mutex<Vec<u64>>,
}

impl JobIdWatcher {
    fn new(console: Console) -> Self {
        Self {
            inner: ProgressSink::new(console),
            pattern: Regex::new(r"Submitted batch job (\d+)").expect("valid regex"),
            ids: Mutex::new(Vec::new()),
        }
    }
}

impl EventSink for JobIdWatcher {
    fn emit(&self, event: &AgentEvent) {
        if let AgentEvent::ToolResult { output, .. } = event {
            let mut ids = self.ids.lock().unwrap();
            ids.extend(self.pattern.captures_iter(output).filter_map(|c| c[1].parse::<u64>().ok()));
        }
        self.inner.emit(event);
    }
}

fn run_session(mode: SessionMode, params: SessionParams, backends: &Backends, console: &Console) -> anyhow::Result<i32> {
    let prepared = prepare_session(mode, &params, backends)?;
    let prompt = prepared.prompt.clone().unwrap_or_default();
    let approver = TerminalApprover::new(console.clone());
    let sink = JobIdWatcher::new(console.clone());
    let mut session = Session::new(
        prepared.llm.as_ref(),
        &prepared.tools,
        backends.config.session_policy(),
        &approver,
        &sink,
    )?;
    let outcome = session.run(&prompt)?;
    print_outcome(console, &outcome);
    match mode {
        SessionMode::Configure => {
            let before = prepared.before.as_ref().expect("configure snapshots the case");
            let after = load_case(&prepared.workdir)?;
            let changes = diff_case(before, &after);
            if changes.is_empty() {
                console.say("no files changed");
            } else {
                console.say(format_changes(&changes).trim_end());
            }
        }
        SessionMode::RunHpc => {
            for id in sink.ids.lock().unwrap().iter() {
                console.say(format!("job id: {id}"));
            }
        }
        _ => {}
    }
    Ok(0)
}

/// Terminal REPL; each line is a user turn. Ends at `exit`, `quit` or end of input.
pub fn cmd_chat(params: SessionParams, backends: &Backends, console: &Console) -> anyhow::Result<i32> {
    let prepared = prepare_session(SessionMode::Chat, &params, backends)?;
    let approver = TerminalApprover::new(console.clone());
    let sink = ProgressSink::new(console.clone());
    let mut session = Session::new(
        prepared.llm.as_ref(),
        &prepared.tools,
        backends.config.session_policy(),
        &approver,
        &sink,
    )?;
    let mut last: Option<LoopOutcome> = None;
    loop {
        console.prompt("> ");
        let Some(line) = console.read_line() else { break };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == "exit" || line == "quit" {
            break;
        }
        console.say(format!("you: {line}"));
        let outcome = session.run(line)?;
        console.say(format!("assistant: {}", outcome.final_text));
        console.say(format!("status: {}", status_name(&outcome)));
        last = Some(outcome);
    }
    if let Some(outcome) = last {
        console.say(format!("session ended after {}", plural(outcome.loop_count, "tool call")));
    }
    Ok(0)
}

fn cmd_hpc_plan(
    target: &RunArgs,
    partition: Option<&str>,
    do_submit: bool,
    backends: &Backends,
    console: &Console,
    env: &Environment,
) -> anyhow::Result<i32> {
    let config = &backends.config;
    let case = env.resolve(&target.case);
    let bashrc = config.bashrc_path.clone().ok_or_else(|| usage("--bashrc is required"))?;
    if !bashrc.is_file() {
        return Err(usage(format!("bashrc not found: {}", bashrc.display())));
    }
    let partition = partition.or(config.default_partition_override.as_deref());
    let approver = TerminalApprover::new(console.clone());
    let gate = config.session_policy().gate()?;
    let runner = GatedRunner::new(&approver, &gate);
    let plan = plan_job(&case, &bashrc, &runner, config.cells_per_core, partition).map_err(hpc_error)?;
    console.say(format!(
        "{} cells -> partition {}, {} x {} cores, {}",
        plan.mesh.cell_count,
        plan.layout.partition,
        plural(plan.layout.nodes as usize, "node"),
        plan.layout.cores_per_node,
        plural(plan.layout.ntasks as usize, "task"),
    ));
    console.say(format!("wrote {}", plan.decompose_dict.display()));
    console.say(format!("wrote {}", plan.script_path.display()));
    if do_submit {
        let status = submit(&plan.script_path, &runner).map_err(hpc_error)?;
        console.say(format!("job id: {}", status.job_id));
    }
    Ok(0)
}

use std::io::{self, BufRead, BufReader, Write};
use std::sync::{Arc, Mutex};

use foampilot_core::agent::{AgentEvent, EventSink, LoopOutcome};
use foampilot_core::tools::{ApprovalDecision, ApprovalRequest, Approver};

pub type SharedWriter = Arc<Mutex<Box<dyn Write + Send>>>;
pub type SharedReader = Arc<Mutex<Box<dyn BufRead + Send>>>;

/// Terminal streams, swappable for in-memory buffers in tests.
#[derive(Clone)]
pub struct Console {
    pub out: SharedWriter,
    pub err: SharedWriter,
    pub input: SharedReader,
}

/// In-memory writer whose contents can be read back.
#[derive(Clone, Default)]
pub struct Capture(Arc<Mutex<Vec<u8>>>);

impl Capture {
    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.0.lock().unwrap()).into_owned()
    }
}

impl Write for Capture {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

fn shared<W: Write + Send + 'static>(w: W) -> SharedWriter {
    Arc::new(Mutex::new(Box::new(w)))
}

impl Console {
    pub fn stdio() -> Self {
        Self {
            out: shared(io::stdout()),
            err: shared(io::stderr()),
            input: Arc::new(Mutex::new(Box::new(BufReader::new(io::stdin())))),
        }
    }

    /// Console reading `input` and capturing both output streams.
    pub fn captured(input: &str) -> (Self, Capture, Capture) {
        let (out, err) = (Capture::default(), Capture::default());
        let console = Self {
            out: shared(out.clone()),
            err: shared(err.clone()),
            input: Arc::new(Mutex::new(Box::new(io::Cursor::new(input.as_bytes().to_vec())))),
        };
        (console, out, err)
    }

    pub fn say(&self, text: impl AsRef<str>) {
        let mut out = self.out.lock().unwrap();
        let _ = writeln!(out, "{}", text.as_ref());
        let _ = out.flush();
    }

    pub fn warn(&self, text: impl AsRef<str>) {
        let mut err = self.err.lock().unwrap();
        let _ = writeln!(err, "{}", text.as_ref());
        let _ = err.flush();
    }

    /// One line of input without its newline; `None` at end of input.
    pub fn read_line(&self) -> Option<String> {
        let mut line = String::new();
        match self.input.lock().unwrap().read_line(&mut line) {
            Ok(0) | Err(_) => None,
            Ok(_) => Some(line.trim_end_matches(['\n', '\r']).to_string()),
        }
    }

    pub fn prompt(&self, text: &str) {
        let mut err = self.err.lock().unwrap();
        let _ = write!(err, "{text}");
        let _ = err.flush();
    }
}

/// Asks on the terminal before each gated command. End of input aborts.
pub struct TerminalApprover {
    console: Console,
}

impl TerminalApprover {
    pub fn new(console: Console) -> Self {
        Self { console }
    }
}

impl Approver for TerminalApprover {
    fn decide(&self, request: &ApprovalRequest) -> ApprovalDecision {
        self.console.warn(format!(
            "approval needed [{}] {}:\n{}",
            request.approval_id, request.tool, request.rendered_input
        ));
        self.console.prompt("run it? [y]es / [n]o / [a]bort: ");
        match self.console.read_line().map(|l| l.trim().to_ascii_lowercase()) {
            None => ApprovalDecision::Abort,
            Some(answer) => match answer.as_str() {
                "y" | "yes" => ApprovalDecision::Approve,
                "a" | "abort" | "q" | "quit" => ApprovalDecision::Abort,
                _ => ApprovalDecision::Deny,
            },
        }
    }
}

/// Prints tool activity to stderr.
pub struct ProgressSink {
    console: Console,
}

impl ProgressSink {
    pub fn new(console: Console) -> Self {
        Self { console }
    }
}

fn first_line(text: &str, max: usize) -> String {
    let line = text.lines().next().unwrap_or_default();
    if line.chars().count() > max {
        format!("{}…", line.chars().take(max).collect::<String>())
    } else {
        line.to_string()
    }
}

impl EventSink for ProgressSink {
    fn emit(&self, event: &AgentEvent) {
        match event {
            AgentEvent::ToolRequested { tool, input, .. } => {
                self.console.warn(format!("[{tool}] {}", first_line(input, 160)));
            }
            AgentEvent::ToolResult { ok, exit_code, output, .. } => {
                let code = exit_code.map_or_else(String::new, |c| format!(" exit {c}"));
                let verdict = if *ok { "ok" } else { "failed" };
                self.console.warn(format!("  -> {verdict}{code}: {}", first_line(output, 160)));
            }
            _ => {}
        }
    }
}

pub fn status_name(outcome: &LoopOutcome) -> String {
    serde_json::to_value(outcome.status)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// Final text, then a status line.
pub fn print_outcome(console: &Console, outcome: &LoopOutcome) {
    console.say(&outcome.final_text);
    console.say(format!("status: {} ({} tool calls)", status_name(outcome), outcome.loop_count));
}

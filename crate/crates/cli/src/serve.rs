//! HTTP API with a server-sent event stream per session.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::convert::Infallible;
use std::future::Future;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use axum::extract::{Path as UrlPath, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use foampilot_core::agent::{AgentEvent, EventSink, LoopOutcome, Session, SessionStatus};
use foampilot_core::tools::{ApprovalDecision, ApprovalRequest, Approver};
use futures::Stream;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::watch;

use crate::backends::{prepare_session, Backends, PreparedSession, SessionMode, SessionParams};
use crate::console::Console;

pub const DEFAULT_PORT: u16 = 8787;

const INDEX_HTML: &str = include_str!("../assets/index.html");

/// How long shutdown waits for in-flight tool calls.
const SHUTDOWN_GRACE: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, Serialize)]
struct StoredEvent {
    seq: u64,
    name: &'static str,
    data: String,
}

fn event_name(event: &AgentEvent) -> &'static str {
    match event {
        AgentEvent::MessageAppended { .. } => "message",
        AgentEvent::ToolRequested { .. } => "tool_request",
        AgentEvent::ToolResult { .. } => "tool_result",
        AgentEvent::StatusChanged { .. } => "status",
    }
}

struct Pending {
    request: ApprovalRequest,
    reply: Option<mpsc::Sender<ApprovalDecision>>,
    answer: Option<mpsc::Receiver<ApprovalDecision>>,
}

#[derive(Default)]
struct SessionState {
    events: Vec<StoredEvent>,
    status: Option<SessionStatus>,
    outcome: Option<LoopOutcome>,
    error: Option<String>,
    pending: BTreeMap<String, Pending>,
    resolved: HashSet<String>,
    busy: bool,
    /// No further events will be produced.
    closed: bool,
}

struct SessionShared {
    id: String,
    mode: SessionMode,
    state: Mutex<SessionState>,
    seq_tx: watch::Sender<u64>,
    inbox: Mutex<Option<mpsc::Sender<String>>>,
    cancel: Arc<AtomicBool>,
    worker: Mutex<Option<JoinHandle<()>>>,
}

impl SessionShared {
    fn push(&self, event: &AgentEvent) {
        let seq = {
            let mut state = self.state.lock().unwrap();
            match event {
                AgentEvent::StatusChanged { status } => state.status = Some(*status),
                AgentEvent::ToolRequested {
                    approval_id,
                    tool,
                    input,
                    requires_approval: true,
                } => {
                    register(&mut state, approval_id, tool, input);
                }
                // approval requested but the tool failed before asking
                AgentEvent::ToolResult { approval_id, .. } => {
                    state.pending.remove(approval_id);
                }
                _ => {}
            }
            let seq = state.events.len() as u64 + 1;
            let mut data = serde_json::to_value(event).unwrap_or(Value::Null);
            if let Value::Object(map) = &mut data {
                map.insert("seq".into(), json!(seq));
            }
            state.events.push(StoredEvent {
                seq,
                name: event_name(event),
                data: data.to_string(),
            });
            seq
        };
        self.seq_tx.send_replace(seq);
    }

    fn close(&self) {
        self.state.lock().unwrap().closed = true;
        self.seq_tx.send_modify(|_| {});
    }

    fn record(&self) -> Value {
        let state = self.state.lock().unwrap();
        let pending: BTreeMap<&String, &ApprovalRequest> = state.pending.iter().map(|(k, p)| (k, &p.request)).collect();
        json!({
            "session_id": self.id,
            "mode": self.mode,
            "status": state.status,
            "busy": state.busy,
            "closed": state.closed,
            "event_count": state.events.len(),
            "pending_approvals": pending,
            "outcome": state.outcome,
            "error": state.error,
        })
    }
}

/// Open an approval slot; idempotent per id.
fn register(state: &mut SessionState, approval_id: &str, tool: &str, input: &str) {
    if state.pending.contains_key(approval_id) || state.resolved.contains(approval_id) {
        return;
    }
    let (tx, rx) = mpsc::channel();
    state.pending.insert(
        approval_id.to_string(),
        Pending {
            request: ApprovalRequest {
                approval_id: approval_id.to_string(),
                tool: tool.to_string(),
                rendered_input: input.to_string(),
            },
            reply: Some(tx),
            answer: Some(rx),
        },
    );
}

/// Blocks the session thread until an HTTP client answers.
struct ChannelApprover {
    shared: Arc<SessionShared>,
}

impl Approver for ChannelApprover {
    fn decide(&self, request: &ApprovalRequest) -> ApprovalDecision {
        if self.shared.cancel.load(Ordering::SeqCst) {
            return ApprovalDecision::Abort;
        }
        let answer = {
            let mut state = self.shared.state.lock().unwrap();
            register(&mut state, &request.approval_id, &request.tool, &request.rendered_input);
            state.pending.get_mut(&request.approval_id).and_then(|p| p.answer.take())
        };
        match answer.map(|rx| rx.recv()) {
            Some(Ok(decision)) => decision,
            _ => ApprovalDecision::Abort,
        }
    }
}

struct BridgeSink {
    shared: Arc<SessionShared>,
}

impl EventSink for BridgeSink {
    fn emit(&self, event: &AgentEvent) {
        self.shared.push(event);
    }
}

fn worker(shared: Arc<SessionShared>, prepared: PreparedSession, backends: Backends, inbox: mpsc::Receiver<String>) {
    let approver = ChannelApprover { shared: shared.clone() };
    let sink = BridgeSink { shared: shared.clone() };
    let session = Session::new(
        prepared.llm.as_ref(),
        &prepared.tools,
        backends.config.session_policy(),
        &approver,
        &sink,
    );
    let mut session = match session {
        Ok(s) => s.with_cancel(shared.cancel.clone()),
        Err(e) => {
            shared.state.lock().unwrap().error = Some(e.to_string());
            shared.close();
            return;
        }
    };
    let mut turn = |text: &str| {
        let result = session.run(text);
        let mut state = shared.state.lock().unwrap();
        match result {
            Ok(outcome) => state.outcome = Some(outcome),
            Err(e) => state.error = Some(e.to_string()),
        }
        state.busy = false;
    };
    if let Some(prompt) = &prepared.prompt {
        turn(prompt);
    }
    while let Ok(text) = inbox.recv() {
        if shared.cancel.load(Ordering::SeqCst) {
            break;
        }
        turn(&text);
    }
    shared.close();
}

struct AppInner {
    backends: Backends,
    cwd: PathBuf,
    sessions: Mutex<HashMap<String, Arc<SessionShared>>>,
    next_id: AtomicU64,
    shutting_down: AtomicBool,
}

/// Server state shared by all handlers.
#[derive(Clone)]
pub struct App(Arc<AppInner>);

#[derive(Debug, Deserialize)]
struct CreateSession {
    mode: SessionMode,
    #[serde(default)]
    params: SessionParams,
}

#[derive(Debug, Deserialize)]
struct PostMessage {
    text: String,
}

#[derive(Debug, Deserialize)]
struct Resolve {
    decision: ApprovalDecision,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn resolve_path(cwd: &Path, path: &mut Option<PathBuf>) {
    if let Some(p) = path.as_mut() {
        if p.is_relative() {
            *p = cwd.join(&*p);
        }
    }
}

impl App {
    pub fn new(backends: Backends, cwd: PathBuf) -> Self {
        Self(Arc::new(AppInner {
            backends,
            cwd,
            sessions: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
            shutting_down: AtomicBool::new(false),
        }))
    }

    pub fn router(&self) -> Router {
        Router::new()
            .route("/", get(|| async { Html(INDEX_HTML) }))
            .route("/api/sessions", post(create_session))
            .route("/api/sessions/{id}", get(session_record))
            .route("/api/sessions/{id}/messages", post(post_message))
            .route("/api/sessions/{id}/events", get(events))
            .route("/api/sessions/{id}/approvals/{approval_id}", post(resolve_approval))
            .with_state(self.clone())
    }

    fn session(&self, id: &str) -> Option<Arc<SessionShared>> {
        self.0.sessions.lock().unwrap().get(id).cloned()
    }

    fn create(&self, request: CreateSession) -> Result<String, (StatusCode, String)> {
        if self.0.shutting_down.load(Ordering::SeqCst) {
            return Err((StatusCode::SERVICE_UNAVAILABLE, "server is shutting down".into()));
        }
        let mut params = request.params;
        for path in [&mut params.case, &mut params.bashrc, &mut params.index] {
            resolve_path(&self.0.cwd, path);
        }
        params.cwd = Some(self.0.cwd.clone());
        let prepared = prepare_session(request.mode, &params, &self.0.backends)
            .map_err(|e| (StatusCode::BAD_REQUEST, format!("{e:#}")))?;
        let id = format!("s{}", self.0.next_id.fetch_add(1, Ordering::SeqCst));
        let (inbox_tx, inbox_rx) = mpsc::channel();
        let shared = Arc::new(SessionShared {
            id: id.clone(),
            mode: request.mode,
            state: Mutex::new(SessionState {
                busy: prepared.prompt.is_some(),
                ..Default::default()
            }),
            seq_tx: watch::channel(0).0,
            inbox: Mutex::new(Some(inbox_tx)),
            cancel: Arc::new(AtomicBool::new(false)),
            worker: Mutex::new(None),
        });
        let backends = self.0.backends.clone();
        let for_worker = shared.clone();
        let handle = std::thread::Builder::new()
            .name(format!("session-{id}"))
            .spawn(move || worker(for_worker, prepared, backends, inbox_rx))
            .map_err(|e| (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
        *shared.worker.lock().unwrap() = Some(handle);
        self.0.sessions.lock().unwrap().insert(id.clone(), shared);
        Ok(id)
    }

    /// Stop accepting work, abort sessions once their current tool call
    /// finishes, and end every event stream.
    pub fn shutdown(&self) {
        self.0.shutting_down.store(true, Ordering::SeqCst);
        let sessions: Vec<_> = self.0.sessions.lock().unwrap().values().cloned().collect();
        for s in &sessions {
            s.cancel.store(true, Ordering::SeqCst);
            s.inbox.lock().unwrap().take();
            for pending in s.state.lock().unwrap().pending.values_mut() {
                pending.reply.take();
            }
        }
        let deadline = Instant::now() + SHUTDOWN_GRACE;
        for s in &sessions {
            let handle = s.worker.lock().unwrap().take();
            if let Some(handle) = handle {
                while !handle.is_finished() && Instant::now() < deadline {
                    std::thread::sleep(Duration::from_millis(20));
                }
                if handle.is_finished() {
                    let _ = handle.join();
                }
            }
            s.close();
        }
    }
}

async fn create_session(State(app): State<App>, Json(request): Json<CreateSession>) -> Response {
    let app2 = app.clone();
    match tokio::task::spawn_blocking(move || app2.create(request)).await {
        Ok(Ok(id)) => (StatusCode::CREATED, Json(json!({ "session_id": id }))).into_response(),
        Ok(Err((status, message))) => error(status, message),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn session_record(State(app): State<App>, UrlPath(id): UrlPath<String>) -> Response {
    match app.session(&id) {
        Some(s) => Json(s.record()).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("no session {id}")),
    }
}

async fn post_message(State(app): State<App>, UrlPath(id): UrlPath<String>, Json(body): Json<PostMessage>) -> Response {
    let Some(session) = app.session(&id) else {
        return error(StatusCode::NOT_FOUND, format!("no session {id}"));
    };
    if body.text.trim().is_empty() {
        return error(StatusCode::BAD_REQUEST, "text is empty");
    }
    let mut state = session.state.lock().unwrap();
    if state.closed {
        return error(StatusCode::CONFLICT, "session is closed");
    }
    if state.busy {
        return error(StatusCode::CONFLICT, "session is busy");
    }
    let inbox = session.inbox.lock().unwrap();
    match inbox.as_ref().map(|tx| tx.send(body.text)) {
        Some(Ok(())) => {
            state.busy = true;
            (StatusCode::ACCEPTED, Json(json!({ "accepted": true }))).into_response()
        }
        _ => error(StatusCode::CONFLICT, "session is closed"),
    }
}

async fn resolve_approval(
    State(app): State<App>,
    UrlPath((id, approval_id)): UrlPath<(String, String)>,
    Json(body): Json<Resolve>,
) -> Response {
    let Some(session) = app.session(&id) else {
        return error(StatusCode::NOT_FOUND, format!("no session {id}"));
    };
    let mut state = session.state.lock().unwrap();
    if state.resolved.contains(&approval_id) {
        return error(StatusCode::CONFLICT, format!("{approval_id} was already resolved"));
    }
    let Some(mut pending) = state.pending.remove(&approval_id) else {
        return error(StatusCode::NOT_FOUND, format!("no pending approval {approval_id}"));
    };
    state.resolved.insert(approval_id.clone());
    if let Some(reply) = pending.reply.take() {
        let _ = reply.send(body.decision);
    }
    Json(json!({ "approval_id": approval_id, "decision": body.decision })).into_response()
}

fn last_event_id(headers: &HeaderMap) -> u64 {
    headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

fn event_stream(session: Arc<SessionShared>, after: u64) -> impl Stream<Item = Result<Event, Infallible>> {
    let rx = session.seq_tx.subscribe();
    let start = (session, after as usize, rx, VecDeque::<StoredEvent>::new());
    futures::stream::unfold(start, |(session, mut cursor, mut rx, mut buffer)| async move {
        loop {
            if let Some(e) = buffer.pop_front() {
                let event = Event::default().id(e.seq.to_string()).event(e.name).data(e.data);
                return Some((Ok(event), (session, cursor, rx, buffer)));
            }
            rx.borrow_and_update();
            let closed = {
                let state = session.state.lock().unwrap();
                if cursor < state.events.len() {
                    buffer.extend(state.events[cursor..].iter().cloned());
                    cursor = state.events.len();
                }
                state.closed
            };
            if !buffer.is_empty() {
                continue;
            }
            if closed || rx.changed().await.is_err() {
                return None;
            }
        }
    })
}

async fn events(State(app): State<App>, UrlPath(id): UrlPath<String>, headers: HeaderMap) -> Response {
    match app.session(&id) {
        Some(session) => Sse::new(event_stream(session, last_event_id(&headers)))
            .keep_alive(KeepAlive::default())
            .into_response(),
        None => error(StatusCode::NOT_FOUND, format!("no session {id}")),
    }
}

/// Serve `app` on `listener` until `signal` resolves, then shut it down.
pub async fn serve_until<F>(listener: tokio::net::TcpListener, app: App, signal: F) -> std::io::Result<()>
where
    F: Future<Output = ()> + Send + 'static,
{
    let router = app.router();
    let stopping = app.clone();
    axum::serve(listener, router)
        .with_graceful_shutdown(async move {
            signal.await;
            let _ = tokio::task::spawn_blocking(move || stopping.shutdown()).await;
        })
        .await
}

/// Foreground server for the `serve` command; stops on Ctrl-C.
pub fn serve_blocking(addr: SocketAddr, backends: Backends, cwd: PathBuf, console: Console) -> anyhow::Result<()> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        let local = listener.local_addr()?;
        if !local.ip().is_loopback() {
            console.warn(format!("warning: listening on non-loopback address {local}; anyone who can reach it can run commands"));
        }
        console.say(format!("listening on http://{local}"));
        let app = App::new(backends, cwd);
        serve_until(listener, app, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
        console.say("server stopped");
        Ok(())
    })
}

/// A server on a background thread, for tests and embedding.
pub struct ServerHandle {
    pub addr: SocketAddr,
    pub app: App,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<JoinHandle<std::io::Result<()>>>,
}

impl ServerHandle {
    pub fn start(addr: SocketAddr, backends: Backends, cwd: PathBuf) -> anyhow::Result<Self> {
        let runtime = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()?;
        let listener = runtime.block_on(tokio::net::TcpListener::bind(addr))?;
        let addr = listener.local_addr()?;
        let app = App::new(backends, cwd);
        let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
        let served = app.clone();
        let thread = std::thread::spawn(move || {
            runtime.block_on(serve_until(listener, served, async {
                let _ = stopped.await;
            }))
        });
        Ok(Self {
            addr,
            app,
            stop: Some(stop),
            thread: Some(thread),
        })
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    /// Graceful shutdown; waits for the server thread.
    pub fn stop(mut self) -> std::io::Result<()> {
        self.finish()
    }

    fn finish(&mut self) -> std::io::Result<()> {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or(Ok(())),
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.finish();
    }
}

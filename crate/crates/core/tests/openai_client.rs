use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use foampilot_core::agent::Message;
use foampilot_core::llm::{ChatProvider, Embedder, LlmError, OpenAiClient, ProviderConfig};
use serde_json::{json, Value};

struct Recorded {
    path: String,
    authorization: Option<String>,
    body: Value,
}

/// One-connection-per-request HTTP stub replying from a fixed script.
struct Stub {
    url: String,
    requests: Arc<Mutex<Vec<Recorded>>>,
}

impl Stub {
    fn start(replies: Vec<(u16, String)>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let log = requests.clone();
        thread::spawn(move || {
            for (status, body) in replies {
                let Ok((stream, _)) = listener.accept() else { return };
                let mut reader = BufReader::new(stream);
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let path = line.split_whitespace().nth(1).unwrap_or_default().to_string();
                let mut length = 0;
                let mut authorization = None;
                loop {
                    let mut header = String::new();
                    reader.read_line(&mut header).unwrap();
                    let header = header.trim_end();
                    if header.is_empty() {
                        break;
                    }
                    let (name, value) = header.split_once(':').unwrap();
                    match name.to_ascii_lowercase().as_str() {
                        "content-length" => length = value.trim().parse().unwrap(),
                        "authorization" => authorization = Some(value.trim().to_string()),
                        _ => {}
                    }
                }
                let mut raw = vec![0; length];
                reader.read_exact(&mut raw).unwrap();
                log.lock().unwrap().push(Recorded {
                    path,
                    authorization,
                    body: serde_json::from_slice(&raw).unwrap_or(Value::Null),
                });
                let mut stream = reader.into_inner();
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
        });
        Self { url, requests }
    }

    fn count(&self) -> usize {
        self.requests.lock().unwrap().len()
    }
}

fn client(url: &str) -> OpenAiClient {
    OpenAiClient::new(ProviderConfig {
        base_url: url.to_string(),
        api_key: "sk-secret-123".into(),
        request_timeout: 5,
        ..ProviderConfig::default()
    })
    .unwrap()
    .with_backoff_base(Duration::from_millis(5))
}

fn chat_reply(text: &str) -> String {
    json!({"choices": [{"message": {"role": "assistant", "content": text}}], "usage": {"prompt_tokens": 10, "completion_tokens": 2}})
        .to_string()
}

#[test]
fn retries_rate_limit_then_succeeds() {
    let stub = Stub::start(vec![(429, "{\"error\":\"slow down\"}".into()), (200, chat_reply("hello"))]);
    let reply = client(&stub.url).complete(&[Message::system("s"), Message::user("u")]).unwrap();
    assert_eq!(reply.text, "hello");
    assert_eq!(reply.prompt_tokens, Some(10));
    assert_eq!(stub.count(), 2);
    let requests = stub.requests.lock().unwrap();
    assert_eq!(requests[1].path, "/v1/chat/completions");
    assert_eq!(requests[1].authorization.as_deref(), Some("Bearer sk-secret-123"));
    assert_eq!(requests[1].body["model"], "gpt-4o");
    assert_eq!(requests[1].body["temperature"], 0.0);
    assert_eq!(requests[1].body["messages"][1], json!({"role": "user", "content": "u"}));
}

#[test]
fn auth_failure_is_not_retried() {
    let stub = Stub::start(vec![(401, "{}".into()), (200, chat_reply("never"))]);
    let err = client(&stub.url).complete(&[Message::user("u")]).unwrap_err();
    assert_eq!(err, LlmError::Auth { status: 401 });
    assert_eq!(stub.count(), 1);
}

#[test]
fn server_errors_exhaust_retries_without_leaking_key() {
    let replies = (0..4).map(|_| (503, "{\"echo\":\"sk-secret-123\"}".to_string())).collect();
    let stub = Stub::start(replies);
    let err = client(&stub.url).complete(&[Message::user("u")]).unwrap_err();
    assert_eq!(stub.count(), 4);
    let LlmError::Provider { status, body_excerpt } = &err else { panic!("{err:?}") };
    assert_eq!(*status, Some(503));
    assert!(!body_excerpt.contains("sk-secret-123"));
    assert!(!format!("{:?}", client(&stub.url).config()).contains("sk-secret-123"));
}

#[test]
fn embeddings_are_batched() {
    let texts: Vec<String> = (0..130).map(|i| format!("text {i}")).collect();
    let replies = [64usize, 64, 2]
        .iter()
        .map(|n| {
            let data: Vec<Value> = (0..*n)
                .rev()
                .map(|i| json!({"index": i, "embedding": [i as f32, 1.0]}))
                .collect();
            (200, json!({ "data": data }).to_string())
        })
        .collect();
    let stub = Stub::start(replies);
    let vectors = client(&stub.url).embed(&texts).unwrap();
    assert_eq!(vectors.len(), 130);
    assert_eq!(stub.count(), 3);
    // replies arrive reversed; the index field restores order
    assert_eq!(vectors[1], vec![1.0, 1.0]);
    assert_eq!(vectors[64], vec![0.0, 1.0]);
    let requests = stub.requests.lock().unwrap();
    assert_eq!(requests[0].path, "/v1/embeddings");
    assert_eq!(requests[0].body["input"].as_array().unwrap().len(), 64);
    assert_eq!(requests[2].body["input"].as_array().unwrap().len(), 2);
    assert_eq!(requests[0].body["model"], "text-embedding-ada-002");
}

#[test]
fn unreachable_server_is_provider_error() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    drop(listener);
    let cfg = ProviderConfig {
        base_url: url,
        max_retries: 1,
        request_timeout: 2,
        ..ProviderConfig::default()
    };
    let client = OpenAiClient::new(cfg).unwrap().with_backoff_base(Duration::from_millis(1));
    assert!(matches!(
        client.complete(&[Message::user("u")]),
        Err(LlmError::Provider { status: None, .. })
    ));
}

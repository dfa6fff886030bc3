//! The HTTP backends against a scripted local server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde_json::{json, Value};
use swd_core::corpus::{Dataset, LabelVector, Split, Tweet, TweetIndex};
use swd_core::llm::{
    BackendError, BatchError, ChatBackend, ChatRequest, ClassifyErrorKind, Gateway, LlmConfig, OpenAiChatClient,
    ResponseCache,
};
use swd_core::prompting::{render_zero_shot, PromptMode};
use swd_core::retrieval::{EmbedError, EmbeddingProvider, RemoteEmbeddingConfig, RemoteEmbeddingProvider};

#[derive(Debug, Clone)]
struct Seen {
    request_line: String,
    authorization: Option<String>,
    body: Value,
}

struct Server {
    base_url: String,
    seen: Arc<Mutex<Vec<Seen>>>,
    handle: JoinHandle<()>,
}

/// Serve one scripted `(status, body)` per connection, then stop.
fn serve(script: Vec<(u16, String)>) -> Server {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base_url = format!("http://{}/v1", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    let handle = std::thread::spawn(move || {
        for (status, body) in script {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let mut length = 0;
            let mut authorization = None;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let (name, value) = line.split_once(':').unwrap();
                match name.to_ascii_lowercase().as_str() {
                    "content-length" => length = value.trim().parse().unwrap(),
                    "authorization" => authorization = Some(value.trim().to_owned()),
                    _ => {}
                }
            }
            let mut raw = vec![0; length];
            reader.read_exact(&mut raw).unwrap();
            log.lock().unwrap().push(Seen {
                request_line: request_line.trim_end().to_owned(),
                authorization,
                body: serde_json::from_slice(&raw).unwrap_or(Value::Null),
            });
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
            stream.flush().unwrap();
        }
    });
    Server { base_url, seen, handle }
}

fn chat_reply(content: &str) -> (u16, String) {
    (200, json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]}).to_string())
}

fn config(base_url: &str) -> LlmConfig {
    LlmConfig {
        base_url: base_url.to_owned(),
        timeout: Duration::from_secs(10),
        retry_base_delay: Duration::from_millis(1),
        parallelism: 1,
        ..LlmConfig::default()
    }
}

#[test]
fn chat_request_wire_format() {
    let server = serve(vec![chat_reply("Labels: [0, 1, 1]")]);
    let cfg = config(&server.base_url);
    let client = OpenAiChatClient::new(&cfg, Some("sk-test".into())).unwrap();
    let prompt = render_zero_shot(&Tweet::new(3, "New paper on sea ice"));
    let answer = client.complete(&ChatRequest::new(TweetIndex(3), &prompt, &cfg)).unwrap();
    assert_eq!(answer, "Labels: [0, 1, 1]");
    server.handle.join().unwrap();

    let seen = server.seen.lock().unwrap();
    assert_eq!(seen[0].request_line, "POST /v1/chat/completions HTTP/1.1");
    assert_eq!(seen[0].authorization.as_deref(), Some("Bearer sk-test"));
    let body = &seen[0].body;
    assert_eq!(body["model"], "gpt-4o");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["max_tokens"], 128);
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][0]["content"], prompt.system.as_str());
    assert_eq!(body["messages"][1]["role"], "user");
    assert_eq!(body["messages"][1]["content"], prompt.user.as_str());
}

#[test]
fn server_errors_are_retried_then_succeed() {
    let server = serve(vec![
        (503, "{}".into()),
        (500, "{}".into()),
        chat_reply("[1.0, 0.0, 0.0]"),
    ]);
    let cfg = config(&server.base_url);
    let client = Arc::new(OpenAiChatClient::new(&cfg, None).unwrap());
    let gateway = Gateway::new(client, ResponseCache::in_memory(), cfg).unwrap();
    let p = gateway
        .classify_tweet::<f64>(&Tweet::new(1, "x"), PromptMode::ZeroShot, None)
        .unwrap();
    assert_eq!(p.labels, LabelVector::new(true, false, false));
    server.handle.join().unwrap();
    assert_eq!(server.seen.lock().unwrap().len(), 3);
    assert!(server.seen.lock().unwrap()[0].authorization.is_none());
}

#[test]
fn bad_request_is_not_retried() {
    let server = serve(vec![(400, r#"{"error":"bad"}"#.into())]);
    let cfg = config(&server.base_url);
    let client = Arc::new(OpenAiChatClient::new(&cfg, None).unwrap());
    let gateway = Gateway::new(client, ResponseCache::in_memory(), cfg).unwrap();
    let err = gateway
        .classify_tweet::<f64>(&Tweet::new(1, "x"), PromptMode::ZeroShot, None)
        .unwrap_err();
    assert!(matches!(err.kind, ClassifyErrorKind::Transport { attempts: 1, .. }), "{err}");
    server.handle.join().unwrap();
}

#[test]
fn unauthorized_aborts_the_batch() {
    let server = serve(vec![(401, r#"{"error":"invalid key"}"#.into())]);
    let cfg = config(&server.base_url);
    let client = Arc::new(OpenAiChatClient::new(&cfg, Some("sk-wrong".into())).unwrap());
    let gateway = Gateway::new(client, ResponseCache::in_memory(), cfg).unwrap();
    let ds = Dataset::labeled(
        Split::Dev,
        (0..3).map(|i| (Tweet::new(i, format!("tweet {i}")), LabelVector::NONE)),
    )
    .unwrap();
    let err = gateway.classify_batch::<f64>(&ds, PromptMode::ZeroShot, None).unwrap_err();
    assert!(matches!(err, BatchError::Auth { .. }), "{err}");
    assert!(!err.to_string().contains("sk-wrong"));
    server.handle.join().unwrap();
    assert_eq!(server.seen.lock().unwrap().len(), 1);
}

#[test]
fn malformed_chat_body_is_a_protocol_error() {
    let server = serve(vec![(200, r#"{"choices": []}"#.into())]);
    let cfg = config(&server.base_url);
    let client = OpenAiChatClient::new(&cfg, None).unwrap();
    let prompt = render_zero_shot(&Tweet::new(3, "x"));
    let err = client.complete(&ChatRequest::new(TweetIndex(3), &prompt, &cfg)).unwrap_err();
    assert!(matches!(err, BackendError::Protocol(_)));
    server.handle.join().unwrap();
}

fn embedding_config(base_url: &str, dimension: usize, batch_size: usize) -> RemoteEmbeddingConfig {
    RemoteEmbeddingConfig {
        base_url: base_url.to_owned(),
        api_key: Some("sk-emb".into()),
        model: "text-embedding-3-small".into(),
        dimension,
        timeout: Duration::from_secs(10),
        batch_size,
    }
}

#[test]
fn embeddings_wire_format_and_batching() {
    let server = serve(vec![
        (
            200,
            json!({"data": [
                {"index": 1, "embedding": [0.0, 1.0, 0.0]},
                {"index": 0, "embedding": [1.0, 0.0, 0.0]}
            ]})
            .to_string(),
        ),
        (200, json!({"data": [{"index": 0, "embedding": [0.0, 0.0, 2.0]}]}).to_string()),
    ]);
    let provider = RemoteEmbeddingProvider::new(embedding_config(&server.base_url, 3, 2)).unwrap();
    assert_eq!(EmbeddingProvider::<f64>::name(&provider), "openai:text-embedding-3-small");
    let out: Vec<Vec<f64>> = provider.embed_batch(&["a", "b", "c"]).unwrap();
    assert_eq!(out, vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 2.0]]);
    server.handle.join().unwrap();

    let seen = server.seen.lock().unwrap();
    assert_eq!(seen[0].request_line, "POST /v1/embeddings HTTP/1.1");
    assert_eq!(seen[0].authorization.as_deref(), Some("Bearer sk-emb"));
    assert_eq!(seen[0].body, json!({"model": "text-embedding-3-small", "input": ["a", "b"]}));
    assert_eq!(seen[1].body["input"], json!(["c"]));
}

#[test]
fn embedding_dimension_is_checked() {
    let server = serve(vec![(200, json!({"data": [{"index": 0, "embedding": [1.0, 2.0]}]}).to_string())]);
    let provider = RemoteEmbeddingProvider::new(embedding_config(&server.base_url, 3, 8)).unwrap();
    let err = EmbeddingProvider::<f64>::embed(&provider, "a").unwrap_err();
    assert!(matches!(err, EmbedError::Dimension { expected: 3, found: 2 }));
    server.handle.join().unwrap();
}

#[test]
fn embedding_server_error_surfaces() {
    let server = serve(vec![(502, "{}".into())]);
    let provider = RemoteEmbeddingProvider::new(embedding_config(&server.base_url, 3, 8)).unwrap();
    let err = EmbeddingProvider::<f64>::embed(&provider, "a").unwrap_err();
    assert!(matches!(err, EmbedError::Http(ref e) if e.is_transient()), "{err}");
    server.handle.join().unwrap();
}

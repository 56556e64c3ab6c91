use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use cellattr_llm::{ChatBackend, ChatRequest, HttpBackend, HttpConfig, LlmError, RetryPolicy};
use serde_json::Value;

struct Seen {
    path: String,
    auth: Option<String>,
    body: Value,
}

/// Serves the canned `(status, body)` replies in order, one per connection.
fn serve(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Seen>>>, thread::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    let handle = thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let mut len = 0;
            let mut auth = None;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let (k, v) = line.split_once(':').unwrap();
                match k.to_ascii_lowercase().as_str() {
                    "content-length" => len = v.trim().parse().unwrap(),
                    "authorization" => auth = Some(v.trim().to_string()),
                    _ => {}
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(Seen {
                path: request_line.split_whitespace().nth(1).unwrap().to_string(),
                auth,
                body: serde_json::from_slice(&buf).unwrap(),
            });
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, seen, handle)
}

fn ok_body(text: &str) -> String {
    serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": text}}],
        "usage": {"prompt_tokens": 12, "completion_tokens": 3}
    })
    .to_string()
}

fn backend(url: String) -> HttpBackend {
    HttpBackend::new(HttpConfig {
        base_url: url,
        api_key: Some("sk-test".into()),
        timeout: Duration::from_secs(5),
        retry: RetryPolicy {
            max_attempts: 5,
            base_delay: Duration::from_millis(1),
            max_delay: Duration::from_millis(5),
        },
    })
    .unwrap()
}

fn request() -> ChatRequest {
    ChatRequest::new("test-model", "entailment", "You judge.", "Premise: x")
        .with_max_output_tokens(64)
}

#[test]
fn retries_rate_limits_and_server_errors() {
    let (url, seen, h) = serve(vec![
        (429, "{\"error\":\"slow\"}".into()),
        (503, "oops".into()),
        (200, ok_body("{\"entailed\": true}")),
    ]);
    let resp = backend(url).send(&request()).unwrap();
    h.join().unwrap();
    assert_eq!(resp.text, "{\"entailed\": true}");
    assert_eq!((resp.usage.prompt_tokens, resp.usage.completion_tokens), (12, 3));
    assert!(!resp.cached);

    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 3);
    let first = &seen[0];
    assert_eq!(first.path, "/v1/chat/completions");
    assert_eq!(first.auth.as_deref(), Some("Bearer sk-test"));
    assert_eq!(first.body["model"], "test-model");
    assert_eq!(first.body["temperature"], 0.0);
    assert_eq!(first.body["max_tokens"], 64);
    assert_eq!(first.body["messages"][0]["role"], "system");
    assert_eq!(first.body["messages"][1]["content"], "Premise: x");
}

#[test]
fn gives_up_after_five_attempts() {
    let (url, seen, h) = serve(vec![(500, "e".into()); 5]);
    let err = backend(url).send(&request()).unwrap_err();
    h.join().unwrap();
    assert!(matches!(err, LlmError::Transport { attempts: 5, status: Some(500), .. }), "{err}");
    assert_eq!(seen.lock().unwrap().len(), 5);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, seen, h) = serve(vec![(401, "{\"error\":\"bad key\"}".into())]);
    let err = backend(url).send(&request()).unwrap_err();
    h.join().unwrap();
    assert!(matches!(err, LlmError::Transport { attempts: 1, status: Some(401), .. }));
    assert!(err.to_string().contains("bad key"));
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn malformed_success_body_is_an_error() {
    let (url, _, h) = serve(vec![(200, "{\"choices\": []}".into())]);
    let err = backend(url).send(&request()).unwrap_err();
    h.join().unwrap();
    assert!(err.to_string().contains("no message content"), "{err}");
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let err = backend(format!("http://127.0.0.1:{port}/v1"))
        .send(&request())
        .unwrap_err();
    assert!(matches!(err, LlmError::Transport { attempts: 5, status: None, .. }), "{err}");
}

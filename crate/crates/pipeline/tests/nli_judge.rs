use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use cellattr_llm::RetryPolicy;
use cellattr_pipeline::judge::{EntailmentJudge, NliHttpJudge};
use serde_json::Value;

/// Answers each connection with the next `(status, body)` and returns the
/// request bodies it saw.
fn serve(replies: Vec<(u16, &'static str)>) -> (String, thread::JoinHandle<Vec<Value>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/nli", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        let mut bodies = Vec::new();
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line.trim().is_empty() {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        len = v.trim().parse().unwrap();
                    }
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            bodies.push(serde_json::from_slice(&buf).unwrap());
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
        bodies
    });
    (url, handle)
}

fn judge(url: String) -> NliHttpJudge {
    NliHttpJudge::new(url, 0.5, Duration::from_secs(5)).unwrap().with_retry(RetryPolicy {
        max_attempts: 3,
        base_delay: Duration::from_millis(1),
        max_delay: Duration::from_millis(2),
    })
}

#[test]
fn labels_scores_and_retries() {
    let (url, h) = serve(vec![
        (503, "{}"),
        (200, r#"{"label": "entailment", "score": 0.93}"#),
        (200, r#"{"label": "entailment", "score": 0.3}"#),
        (200, r#"{"entailed": false, "score": 0.8}"#),
    ]);
    let j = judge(url);
    let first = j.judge("Wind Power, 30–45% efficiency.", "Wind Power is efficient.").unwrap();
    assert!(first.entailed);
    assert_eq!(first.score, 0.93);
    assert!(!j.judge("p", "h").unwrap().entailed, "below threshold");
    assert!(!j.judge("p", "h").unwrap().entailed);
    let bodies = h.join().unwrap();
    assert_eq!(bodies.len(), 4);
    assert_eq!(bodies[1]["premise"], "Wind Power, 30–45% efficiency.");
    assert_eq!(bodies[1]["hypothesis"], "Wind Power is efficient.");
}

#[test]
fn client_errors_and_bad_bodies_fail() {
    let (url, h) = serve(vec![(400, "{}"), (200, r#"{"verdict": 1}"#)]);
    let j = judge(url);
    assert!(j.judge("p", "h").is_err());
    assert!(j.judge("p", "h").is_err());
    assert_eq!(h.join().unwrap().len(), 2);
}

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use detox_core::scoring::{Attribute, RemoteScorer, Scorer, ScorerConfig};
use detox_core::Error;
use serde_json::{json, Map, Value};

/// A scripted HTTP server: answers each request with the next queued
/// `(status, body)` and records what it received.
struct MockServer {
    url: String,
    seen: Arc<Mutex<Vec<(String, String)>>>,
}

impl MockServer {
    fn start(script: Vec<(u16, String)>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1alpha1/comments:analyze", listener.local_addr().unwrap());
        let seen = Arc::new(Mutex::new(Vec::new()));
        let log = seen.clone();
        let mut script: VecDeque<_> = script.into();
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { break };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut request_line = String::new();
                reader.read_line(&mut request_line).unwrap();
                let mut len = 0;
                loop {
                    let mut h = String::new();
                    reader.read_line(&mut h).unwrap();
                    if h.trim().is_empty() {
                        break;
                    }
                    if let Some((k, v)) = h.split_once(':') {
                        if k.eq_ignore_ascii_case("content-length") {
                            len = v.trim().parse().unwrap();
                        }
                    }
                }
                let mut body = vec![0; len];
                reader.read_exact(&mut body).unwrap();
                log.lock()
                    .unwrap()
                    .push((request_line.trim().to_string(), String::from_utf8(body).unwrap()));
                let (status, reply) = script.pop_front().unwrap_or((500, "script exhausted".into()));
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                    reply.len()
                );
            }
        });
        MockServer { url, seen }
    }

    fn requests(&self) -> usize {
        self.seen.lock().unwrap().len()
    }
}

fn response(toxicity: f64) -> String {
    let mut attrs = Map::new();
    for a in Attribute::ALL {
        let v = if a == Attribute::Toxicity { toxicity } else { 0.1 };
        attrs.insert(a.api_name().into(), json!({"summaryScore": {"value": v, "type": "PROBABILITY"}}));
    }
    json!({ "attributeScores": attrs, "languages": ["en"] }).to_string()
}

fn config(url: &str) -> ScorerConfig {
    ScorerConfig {
        rate_limit: 1000.0,
        backoff_ms: 1,
        timeout_secs: 5,
        ..ScorerConfig::remote(url)
    }
}

#[test]
fn score_passes_through_and_second_call_hits_cache() {
    let server = MockServer::start(vec![(200, response(0.95))]);
    let scorer = RemoteScorer::new(&config(&server.url), Some("secret".into())).unwrap();
    let s = scorer.score("you are awful").unwrap();
    assert_eq!(s.toxicity(), 0.95);
    assert_eq!(s.get(Attribute::Insult), 0.1);
    assert_eq!(scorer.score("you are awful").unwrap(), s);
    assert_eq!(scorer.requests_sent(), 1);
    assert_eq!(server.requests(), 1);

    let (line, body) = server.seen.lock().unwrap()[0].clone();
    assert!(line.starts_with("POST /v1alpha1/comments:analyze?key=secret "), "{line}");
    let body: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(body["comment"]["text"], "you are awful");
    assert_eq!(body["requestedAttributes"].as_object().unwrap().len(), 8);
}

#[test]
fn out_of_range_score_is_clamped() {
    let server = MockServer::start(vec![(200, response(1.2))]);
    let scorer = RemoteScorer::new(&config(&server.url), None).unwrap();
    assert_eq!(scorer.score("x").unwrap().toxicity(), 1.0);
}

#[test]
fn server_errors_are_retried() {
    let server = MockServer::start(vec![
        (500, "oops".into()),
        (429, "slow down".into()),
        (200, response(0.3)),
    ]);
    let scorer = RemoteScorer::new(&config(&server.url), None).unwrap();
    assert_eq!(scorer.score("x").unwrap().toxicity(), 0.3);
    assert_eq!(server.requests(), 3);
}

#[test]
fn gives_up_after_max_attempts() {
    let server = MockServer::start(vec![(503, "down".into()); 5]);
    let scorer = RemoteScorer::new(&config(&server.url), None).unwrap();
    let err = scorer.score("x").unwrap_err();
    assert!(matches!(err, Error::Remote(ref m) if m.contains("3 attempts")), "{err}");
    assert_eq!(server.requests(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let server = MockServer::start(vec![(400, "bad request".into())]);
    let scorer = RemoteScorer::new(&config(&server.url), None).unwrap();
    assert!(matches!(scorer.score("x"), Err(Error::Remote(_))));
    assert_eq!(server.requests(), 1);
}

#[test]
fn malformed_response_reports_raw_body() {
    let server = MockServer::start(vec![(200, "{\"attributeScores\":{\"TOXICITY\":{}}}".into())]);
    let scorer = RemoteScorer::new(&config(&server.url), None).unwrap();
    match scorer.score("x") {
        Err(Error::MalformedResponse { body, .. }) => {
            assert_eq!(body, "{\"attributeScores\":{\"TOXICITY\":{}}}")
        }
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(server.requests(), 1);
}

#[test]
fn cache_file_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let server = MockServer::start(vec![(200, response(0.7))]);
    let cfg = ScorerConfig {
        cache_path: Some(dir.path().join("scores.jsonl")),
        ..config(&server.url)
    };
    let first = RemoteScorer::new(&cfg, None).unwrap().score("cached text").unwrap();
    let second = RemoteScorer::new(&cfg, None).unwrap();
    assert_eq!(second.score("cached text").unwrap(), first);
    assert_eq!(second.requests_sent(), 0);
    assert_eq!(server.requests(), 1);
}

#[test]
fn config_builds_remote_scorer() {
    let server = MockServer::start(vec![(200, response(0.5))]);
    let scorer = config(&server.url).build().unwrap();
    assert_eq!(scorer.score("x").unwrap().toxicity(), 0.5);
}

//! Client for a Perspective-style comment analysis service.
//!
//! Wire contract:
//! request  `{"comment":{"text":...},"requestedAttributes":{"TOXICITY":{},...}}`
//! response `attributeScores.<NAME>.summaryScore.value`

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use super::{Attribute, AttributeScores, Scorer, ScorerConfig};
use crate::error::{Error, Result};

/// SHA-256 over the text and the requested attribute set.
pub fn cache_key(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    h.update([0u8]);
    for a in Attribute::ALL {
        h.update(a.api_name().as_bytes());
        h.update(b",");
    }
    hex::encode(h.finalize())
}

/// One line of the cache file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub hash: String,
    pub scores: [f64; Attribute::COUNT],
}

/// Append-only JSONL score cache. Without a path it only lives in memory.
#[derive(Debug, Default)]
pub struct ScoreCache {
    path: Option<PathBuf>,
    entries: HashMap<String, AttributeScores>,
}

impl ScoreCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut entries = HashMap::new();
        if path.exists() {
            for (i, line) in BufReader::new(File::open(&path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let parsed = serde_json::from_str::<CacheRecord>(&line)
                    .map_err(|e| e.to_string())
                    .and_then(|r| {
                        AttributeScores::new(r.scores)
                            .map(|s| (r.hash, s))
                            .map_err(|e| e.to_string())
                    });
                match parsed {
                    Ok((hash, scores)) => {
                        entries.insert(hash, scores);
                    }
                    Err(e) => log::warn!("{}:{}: skipping cache line: {e}", path.display(), i + 1),
                }
            }
        }
        Ok(ScoreCache {
            path: Some(path),
            entries,
        })
    }

    pub fn get(&self, hash: &str) -> Option<AttributeScores> {
        self.entries.get(hash).copied()
    }

    pub fn insert(&mut self, hash: String, scores: AttributeScores) -> Result<()> {
        if let Some(path) = &self.path {
            let record = CacheRecord {
                hash: hash.clone(),
                scores: *scores.as_array(),
            };
            let mut line = serde_json::to_string(&record)?;
            line.push('\n');
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            f.write_all(line.as_bytes())?;
        }
        self.entries.insert(hash, scores);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Spaces calls at least `1 / rate` seconds apart across all threads.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next_slot: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn new(requests_per_second: f64) -> Self {
        RateLimiter {
            interval: Duration::from_secs_f64(1.0 / requests_per_second),
            next_slot: Mutex::new(None),
        }
    }

    /// Blocks until the caller's reserved slot arrives.
    pub fn acquire(&self) {
        let wait = {
            let mut next = self.next_slot.lock().unwrap();
            let now = Instant::now();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + self.interval);
            slot - now
        };
        if !wait.is_zero() {
            thread::sleep(wait);
        }
    }
}

pub struct RemoteScorer {
    url: String,
    agent: ureq::Agent,
    limiter: RateLimiter,
    cache: Mutex<ScoreCache>,
    max_attempts: u32,
    backoff: Duration,
    requests: AtomicUsize,
}

enum Attempt {
    Done(String),
    Retry(String),
    Fatal(Error),
}

impl RemoteScorer {
    pub fn new(config: &ScorerConfig, api_key: Option<String>) -> Result<Self> {
        config.validate()?;
        let endpoint = config
            .endpoint
            .clone()
            .ok_or_else(|| Error::InvalidArgument("remote scorer requires an endpoint".into()))?;
        let url = match api_key {
            Some(key) if !key.is_empty() => {
                let sep = if endpoint.contains('?') { '&' } else { '?' };
                format!("{endpoint}{sep}key={key}")
            }
            _ => endpoint,
        };
        let agent_config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(config.timeout_secs.max(1))))
            .build();
        let cache = match &config.cache_path {
            Some(p) => ScoreCache::open(p)?,
            None => ScoreCache::in_memory(),
        };
        Ok(RemoteScorer {
            url,
            agent: ureq::Agent::new_with_config(agent_config),
            limiter: RateLimiter::new(config.rate_limit),
            cache: Mutex::new(cache),
            max_attempts: config.max_attempts,
            backoff: config.backoff(),
            requests: AtomicUsize::new(0),
        })
    }

    /// HTTP requests issued so far, retries included.
    pub fn requests_sent(&self) -> usize {
        self.requests.load(Ordering::Relaxed)
    }

    pub fn request_body(text: &str) -> Value {
        let requested: Map<String, Value> = Attribute::ALL
            .iter()
            .map(|a| (a.api_name().to_string(), json!({})))
            .collect();
        json!({
            "comment": { "text": text },
            "requestedAttributes": requested,
        })
    }

    fn attempt(&self, body: &[u8]) -> Attempt {
        self.limiter.acquire();
        self.requests.fetch_add(1, Ordering::Relaxed);
        let resp = self
            .agent
            .post(&self.url)
            .header("Content-Type", "application/json")
            .send(body);
        let mut resp = match resp {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        match status {
            200..=299 => Attempt::Done(text),
            429 | 500..=599 => Attempt::Retry(format!("HTTP {status}: {text}")),
            _ => Attempt::Fatal(Error::Remote(format!("HTTP {status}: {text}"))),
        }
    }
}

/// Extracts the eight summary scores; values outside `[0,1]` are clamped.
pub(crate) fn parse_response(body: &str) -> Result<AttributeScores> {
    let malformed = |reason: String| Error::MalformedResponse {
        reason,
        body: body.to_string(),
    };
    let v: Value = serde_json::from_str(body).map_err(|e| malformed(e.to_string()))?;
    let mut scores = [0.0; Attribute::COUNT];
    for a in Attribute::ALL {
        let raw = v
            .pointer(&format!("/attributeScores/{}/summaryScore/value", a.api_name()))
            .and_then(Value::as_f64)
            .ok_or_else(|| malformed(format!("missing {} summary score", a.api_name())))?;
        if !raw.is_finite() {
            return Err(malformed(format!("non-finite {} score", a.api_name())));
        }
        let clamped = raw.clamp(0.0, 1.0);
        if clamped != raw {
            log::warn!("{} score {raw} out of range, clamped to {clamped}", a.api_name());
        }
        scores[a.index()] = clamped;
    }
    AttributeScores::new(scores)
}

impl Scorer for RemoteScorer {
    fn score(&self, text: &str) -> Result<AttributeScores> {
        let key = cache_key(text);
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return Ok(hit);
        }
        let body = serde_json::to_vec(&Self::request_body(text))?;
        let mut last_err = String::new();
        for attempt in 0..self.max_attempts {
            match self.attempt(&body) {
                Attempt::Done(resp) => {
                    let scores = parse_response(&resp)?;
                    self.cache.lock().unwrap().insert(key, scores)?;
                    return Ok(scores);
                }
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(e) => {
                    log::debug!("scorer attempt {} failed: {e}", attempt + 1);
                    last_err = e;
                    if attempt + 1 < self.max_attempts {
                        thread::sleep(self.backoff * 2u32.pow(attempt));
                    }
                }
            }
        }
        Err(Error::Remote(format!(
            "giving up after {} attempts: {last_err}",
            self.max_attempts
        )))
    }
}

use std::fmt;
use std::sync::{Condvar, Mutex};

use serde::Serialize;

use crate::backend::ChatBackend;
use crate::cache::ResponseCache;
use crate::error::LlmError;
use crate::request::{ChatRequest, ChatResponse};
use crate::transcript::{Transcript, TranscriptRecord, TranscriptWriter};

pub const DEFAULT_CONCURRENCY: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GatewayMode {
    /// Every request goes to the backend.
    Live,
    /// Disk cache first, backend on a miss.
    Cache,
    /// Recorded transcript only; a miss is an error.
    Replay,
}

impl fmt::Display for GatewayMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GatewayMode::Live => "live",
            GatewayMode::Cache => "cache",
            GatewayMode::Replay => "replay",
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct GatewayStats {
    pub requests: u64,
    pub live_calls: u64,
    pub cache_hits: u64,
    pub replay_hits: u64,
    pub failures: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

struct Semaphore {
    permits: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(n: usize) -> Self {
        Semaphore {
            permits: Mutex::new(n.max(1)),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.permits.lock().expect("semaphore poisoned");
        while *n == 0 {
            n = self.freed.wait(n).expect("semaphore poisoned");
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().expect("semaphore poisoned") += 1;
        self.0.freed.notify_one();
    }
}

/// Shared entry point for all model calls.
pub struct Gateway {
    mode: GatewayMode,
    backend: Option<Box<dyn ChatBackend>>,
    cache: Option<ResponseCache>,
    transcript: Option<Transcript>,
    recorder: Option<TranscriptWriter>,
    limiter: Semaphore,
    stats: Mutex<GatewayStats>,
}

impl Gateway {
    pub fn live(backend: impl ChatBackend + 'static) -> Self {
        Self::build(GatewayMode::Live, Some(Box::new(backend)), None, None)
    }

    pub fn cached(backend: impl ChatBackend + 'static, cache: ResponseCache) -> Self {
        Self::build(GatewayMode::Cache, Some(Box::new(backend)), Some(cache), None)
    }

    pub fn replay(transcript: Transcript) -> Self {
        Self::build(GatewayMode::Replay, None, None, Some(transcript))
    }

    fn build(
        mode: GatewayMode,
        backend: Option<Box<dyn ChatBackend>>,
        cache: Option<ResponseCache>,
        transcript: Option<Transcript>,
    ) -> Self {
        Gateway {
            mode,
            backend,
            cache,
            transcript,
            recorder: None,
            limiter: Semaphore::new(DEFAULT_CONCURRENCY),
            stats: Mutex::new(GatewayStats::default()),
        }
    }

    /// Appends every answered request to a transcript file.
    pub fn with_recorder(mut self, recorder: TranscriptWriter) -> Self {
        self.recorder = Some(recorder);
        self
    }

    /// Bounds the number of in-flight backend calls.
    pub fn with_concurrency(mut self, n: usize) -> Self {
        self.limiter = Semaphore::new(n);
        self
    }

    pub fn mode(&self) -> GatewayMode {
        self.mode
    }

    pub fn stats(&self) -> GatewayStats {
        *self.stats.lock().expect("stats poisoned")
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let result = self.dispatch(request);
        let mut s = self.stats.lock().expect("stats poisoned");
        s.requests += 1;
        match &result {
            Ok(r) => {
                s.prompt_tokens += r.usage.prompt_tokens;
                s.completion_tokens += r.usage.completion_tokens;
            }
            Err(_) => s.failures += 1,
        }
        result
    }

    fn dispatch(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        request.validate()?;
        let needs_hash = self.mode != GatewayMode::Live || self.recorder.is_some();
        let hash = needs_hash.then(|| request.hash());
        match self.mode {
            GatewayMode::Replay => {
                let hash = hash.expect("hash computed for replay");
                let rec = self
                    .transcript
                    .as_ref()
                    .and_then(|t| t.get(&hash))
                    .ok_or_else(|| LlmError::MissingTranscript {
                        tag: request.tag.clone(),
                        hash: hash.clone(),
                    })?;
                self.bump(|s| s.replay_hits += 1);
                let resp = rec.to_response();
                self.record(&hash, request, &resp)?;
                Ok(resp)
            }
            GatewayMode::Cache => {
                let hash = hash.expect("hash computed for cache");
                let cache = self.cache.as_ref().expect("cache mode has a cache");
                if let Some(rec) = cache.get(&hash) {
                    self.bump(|s| s.cache_hits += 1);
                    let resp = rec.to_response();
                    self.record(&hash, request, &resp)?;
                    return Ok(resp);
                }
                let resp = self.call_backend(request)?;
                cache.put(&TranscriptRecord::new(hash.clone(), request, &resp))?;
                self.record(&hash, request, &resp)?;
                Ok(resp)
            }
            GatewayMode::Live => {
                let resp = self.call_backend(request)?;
                if let Some(hash) = &hash {
                    self.record(hash, request, &resp)?;
                }
                Ok(resp)
            }
        }
    }

    fn call_backend(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let backend = self
            .backend
            .as_ref()
            .ok_or_else(|| LlmError::Config(format!("{} mode has no backend", self.mode)))?;
        let _permit = self.limiter.acquire();
        self.bump(|s| s.live_calls += 1);
        let mut resp = backend.send(request)?;
        resp.cached = false;
        Ok(resp)
    }

    fn record(&self, hash: &str, request: &ChatRequest, resp: &ChatResponse) -> Result<(), LlmError> {
        match &self.recorder {
            Some(w) => w.write(&TranscriptRecord::new(hash.to_string(), request, resp)),
            None => Ok(()),
        }
    }

    fn bump(&self, f: impl FnOnce(&mut GatewayStats)) {
        f(&mut self.stats.lock().expect("stats poisoned"));
    }
}

//! Runs rendered prompts against a chat-completions backend or an offline
//! mock, with a content-addressed response cache, retries with exponential
//! backoff, a token-bucket rate limit and bounded parallelism. Results come
//! back in input order whatever order the requests finish in.

mod cache;
mod http;
mod mock;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use cache::{CacheEntry, ResponseCache};
pub use http::{parse_completion, HttpBackend};
pub use mock::{MockBackend, MockPolicy};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::prompting::ChatMessage;
use crate::seed::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            initial_backoff_ms: 1000,
            multiplier: 2.0,
        }
    }
}

impl RetryPolicy {
    /// Sleep before each retry; one entry fewer than `max_attempts`.
    pub fn backoff_schedule(&self) -> Vec<Duration> {
        let factor = self.multiplier.max(1.0);
        (0..self.max_attempts.saturating_sub(1))
            .map(|i| Duration::from_millis((self.initial_backoff_ms as f64 * factor.powi(i as i32)) as u64))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendProfile {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_new_tokens: u32,
    /// Environment variable holding the bearer token.
    pub auth_env: Option<String>,
    pub timeout_secs: u64,
    pub retry: RetryPolicy,
    pub requests_per_minute: Option<u32>,
}

impl Default for BackendProfile {
    fn default() -> Self {
        BackendProfile {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-3.5-turbo".into(),
            temperature: 0.3,
            max_new_tokens: 1000,
            auth_env: None,
            timeout_secs: 60,
            retry: RetryPolicy::default(),
            requests_per_minute: None,
        }
    }
}

impl BackendProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature >= 0.0) {
            return Err(Error::invalid("backend", format!("temperature {} is negative", self.temperature)));
        }
        if self.max_new_tokens == 0 {
            return Err(Error::invalid("backend", "max_new_tokens must be at least 1"));
        }
        if self.retry.max_attempts == 0 {
            return Err(Error::invalid("backend", "retry.max_attempts must be at least 1"));
        }
        Ok(())
    }

    /// Reads the token named by `auth_env`, failing early when it is unset.
    pub fn resolve_token(&self) -> Result<Option<String>> {
        match &self.auth_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .ok()
                .filter(|v| !v.is_empty())
                .map(Some)
                .ok_or_else(|| Error::Backend(format!("auth variable {var} is not set"))),
        }
    }

    pub fn request(&self, messages: Vec<ChatMessage>) -> ChatRequest {
        ChatRequest {
            model: self.model.clone(),
            messages,
            temperature: self.temperature,
            max_tokens: self.max_new_tokens,
        }
    }
}

/// Chat-completions request body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn body(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("request serializes")
    }

    pub fn hash(&self) -> String {
        sha256_hex(&self.body())
    }
}

/// One example to send. `gold` and `hypothesis` are only read by mocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub example_id: String,
    pub gold: Label,
    pub hypothesis: String,
    pub messages: Vec<ChatMessage>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    /// Backends that report their own latency set this; otherwise it is timed.
    pub latency_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendError {
    pub message: String,
    pub status: Option<u16>,
    pub retryable: bool,
}

pub trait Backend: Send + Sync {
    fn name(&self) -> String;
    fn uses_network(&self) -> bool;
    fn complete(&self, job: &Job, request: &ChatRequest) -> Result<Completion, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawResponse {
    pub example_id: String,
    pub request_hash: String,
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<u16>,
    pub latency_ms: u64,
    pub attempts: u32,
    pub backend: String,
}

/// Token bucket: `per_minute` requests, bursting up to the same amount.
#[derive(Debug)]
pub struct RateLimiter {
    capacity: f64,
    per_sec: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    pub fn new(per_minute: u32) -> Self {
        let capacity = per_minute.max(1) as f64;
        RateLimiter {
            capacity,
            per_sec: capacity / 60.0,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut state = self.state.lock().unwrap_or_else(|e| e.into_inner());
                let now = Instant::now();
                let refilled = (state.0 + now.duration_since(state.1).as_secs_f64() * self.per_sec).min(self.capacity);
                *state = (refilled, now);
                if refilled >= 1.0 {
                    state.0 -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - refilled) / self.per_sec)
            };
            thread::sleep(wait);
        }
    }
}

pub struct RunOptions<'a> {
    pub parallelism: usize,
    pub cache: Option<&'a ResponseCache>,
    /// Refuse network backends; misses become error records.
    pub offline: bool,
}

/// Cache key: the prompt spec digest plus the exact request body.
pub fn cache_key(spec_hash: &str, request: &ChatRequest) -> String {
    let mut buf = spec_hash.as_bytes().to_vec();
    buf.push(0);
    buf.extend_from_slice(&request.body());
    sha256_hex(&buf)
}

fn run_one(
    job: &Job,
    spec_hash: &str,
    profile: &BackendProfile,
    backend: &dyn Backend,
    options: &RunOptions<'_>,
    limiter: Option<&RateLimiter>,
) -> RawResponse {
    let request = profile.request(job.messages.clone());
    let request_hash = request.hash();
    let key = cache_key(spec_hash, &request);
    let mut response = RawResponse {
        example_id: job.example_id.clone(),
        request_hash,
        text: None,
        error: None,
        status: None,
        latency_ms: 0,
        attempts: 0,
        backend: backend.name(),
    };
    if let Some(hit) = options.cache.and_then(|c| c.get(&key)) {
        response.text = Some(hit.text);
        return response;
    }
    if options.offline && backend.uses_network() {
        response.error = Some("offline and no cached response".into());
        return response;
    }
    let backoff = profile.retry.backoff_schedule();
    for attempt in 0..profile.retry.max_attempts {
        if let Some(l) = limiter {
            l.acquire();
        }
        response.attempts = attempt + 1;
        let started = Instant::now();
        match backend.complete(job, &request) {
            Ok(done) => {
                response.latency_ms = done.latency_ms.unwrap_or(started.elapsed().as_millis() as u64);
                if let Some(cache) = options.cache {
                    let entry = CacheEntry {
                        request_hash: response.request_hash.clone(),
                        text: done.text.clone(),
                        backend: response.backend.clone(),
                    };
                    if let Err(e) = cache.put(&key, &entry) {
                        log::warn!("could not cache response for {}: {e}", job.example_id);
                    }
                }
                response.text = Some(done.text);
                response.error = None;
                response.status = None;
                return response;
            }
            Err(e) => {
                log::debug!("{} attempt {} failed: {}", job.example_id, attempt + 1, e.message);
                response.error = Some(e.message);
                response.status = e.status;
                if !e.retryable {
                    break;
                }
                if let Some(wait) = backoff.get(attempt as usize) {
                    thread::sleep(*wait);
                }
            }
        }
    }
    response
}

/// One response per job, in job order. Failures after retries are kept as
/// error records rather than dropped.
pub fn run_eval(
    jobs: &[Job],
    spec_hash: &str,
    profile: &BackendProfile,
    backend: &dyn Backend,
    options: &RunOptions<'_>,
) -> Result<Vec<RawResponse>> {
    profile.validate()?;
    let limiter = profile.requests_per_minute.map(RateLimiter::new);
    let workers = options.parallelism.max(1).min(jobs.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<RawResponse>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let r = run_one(&jobs[i], spec_hash, profile, backend, options, limiter.as_ref());
                *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(r);
            });
        }
    });
    Ok(slots
        .into_iter()
        .map(|s| s.into_inner().unwrap_or_else(|e| e.into_inner()).expect("every job ran"))
        .collect())
}

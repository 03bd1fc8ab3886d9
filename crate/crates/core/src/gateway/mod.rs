//! Model gateway: one entry point for every prompt the pipeline sends.
//!
//! Three modes:
//! - `live`: call the provider, never touch the cache;
//! - `record`: serve from the cache when the key is present, otherwise call the
//!   provider and store the answer (so interrupted runs resume);
//! - `replay`: cache only. A miss is an error and the transport is never used.

mod cache;
mod transport;

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::{CacheEntry, ResponseCache};
pub use transport::{chat_payload, completion_text, FailureKind, HttpTransport, Transport, TransportError};

pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 8192;
pub const DEFAULT_TEMPERATURE: f64 = 0.7;
pub const DEFAULT_TOP_P: f64 = 0.7;
pub const DEFAULT_TOP_K: u32 = 50;
pub const DEFAULT_API_KEY_ENV: &str = "LLULL_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodingParams {
    pub max_output_tokens: u32,
    pub temperature: f64,
    pub top_p: f64,
    pub top_k: u32,
}

impl Default for DecodingParams {
    fn default() -> Self {
        DecodingParams {
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            temperature: DEFAULT_TEMPERATURE,
            top_p: DEFAULT_TOP_P,
            top_k: DEFAULT_TOP_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRequest {
    pub prompt: String,
    pub max_output_tokens: u32,
    pub temperature: f64,
    pub top_p: f64,
    pub top_k: u32,
    pub model_name: String,
}

impl ModelRequest {
    /// Request with the default decoding parameters.
    pub fn new(prompt: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self::with_params(prompt, model_name, &DecodingParams::default())
    }

    pub fn with_params(prompt: impl Into<String>, model_name: impl Into<String>, params: &DecodingParams) -> Self {
        ModelRequest {
            prompt: prompt.into(),
            max_output_tokens: params.max_output_tokens,
            temperature: params.temperature,
            top_p: params.top_p,
            top_k: params.top_k,
            model_name: model_name.into(),
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |m: &str| Err(GatewayError::InvalidRequest(m.to_owned()));
        if self.prompt.is_empty() {
            return bad("prompt is empty");
        }
        if !(0.0..=1.0).contains(&self.temperature) {
            return bad("temperature outside [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.top_p) {
            return bad("top_p outside [0, 1]");
        }
        if self.top_k < 1 {
            return bad("top_k must be at least 1");
        }
        Ok(())
    }

    /// SHA-256 over a sorted-key JSON rendering of every field, hex encoded.
    /// Field order in any serialized form does not matter; every field does.
    pub fn canonical_key(&self) -> String {
        canonical_key(self)
    }
}

pub fn canonical_key(request: &ModelRequest) -> String {
    // serde_json::Map is a BTreeMap here, so keys come out sorted.
    let value = serde_json::to_value(request).expect("ModelRequest always serializes");
    let canonical = serde_json::to_string(&value).expect("Value always serializes");
    let mut hasher = Sha256::new();
    hasher.update(b"llull-request-v1\n");
    hasher.update(canonical.as_bytes());
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelResponse {
    pub text: String,
    pub cached: bool,
    pub latency: Duration,
    pub key: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Live,
    Record,
    Replay,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(Mode::Live),
            "record" => Ok(Mode::Record),
            "replay" => Ok(Mode::Replay),
            other => Err(format!("unknown gateway mode {other:?} (expected live, record or replay)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("cache miss in replay mode for key {key}")]
    CacheMiss { key: String },
    #[error("provider failed after {attempts} attempt(s): {message}")]
    ProviderFailed { attempts: u32, message: String },
    #[error("malformed provider payload: {0}")]
    MalformedPayload(String),
    #[error("gateway has no provider transport configured for {0:?} mode")]
    NoTransport(Mode),
    #[error("gateway in {0:?} mode needs a cache directory")]
    NoCache(Mode),
    #[error("cache I/O: {0}")]
    Cache(#[from] std::io::Error),
    #[error("invalid gateway config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 3, initial_backoff_ms: 500, max_backoff_ms: 8_000 }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        RetryPolicy { max_retries: 0, initial_backoff_ms: 0, max_backoff_ms: 0 }
    }

    fn backoff(&self, retry: u32) -> Duration {
        let factor = 1u64 << retry.min(20);
        Duration::from_millis(self.initial_backoff_ms.saturating_mul(factor).min(self.max_backoff_ms))
    }
}

/// File-level gateway configuration (TOML). Credentials never live here: the
/// API key is read from the environment variable named by `api_key_env`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub endpoint: String,
    pub model_name: String,
    pub api_key_env: String,
    pub parallelism: usize,
    pub timeout_secs: u64,
    pub decoding: DecodingParams,
    pub retry: RetryPolicy,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            endpoint: String::new(),
            model_name: "default".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            parallelism: 4,
            timeout_secs: 120,
            decoding: DecodingParams::default(),
            retry: RetryPolicy::default(),
        }
    }
}

impl GatewayConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, GatewayError> {
        let cfg: GatewayConfig = toml::from_str(s).map_err(|e| GatewayError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.parallelism == 0 {
            return Err(GatewayError::Config("parallelism must be at least 1".into()));
        }
        ModelRequest::with_params("x", &self.model_name, &self.decoding)
            .validate()
            .map_err(|e| GatewayError::Config(e.to_string()))
    }

    /// Build the HTTP transport, reading the API key from the environment.
    pub fn http_transport(&self) -> Result<HttpTransport, GatewayError> {
        if self.endpoint.is_empty() {
            return Err(GatewayError::Config("endpoint is not set".into()));
        }
        let key = std::env::var(&self.api_key_env).ok();
        HttpTransport::new(&self.endpoint, key, Duration::from_secs(self.timeout_secs))
            .map_err(|e| GatewayError::Config(e.message))
    }
}

struct Semaphore {
    available: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(n: usize) -> Self {
        Semaphore { available: Mutex::new(n), cv: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().expect("semaphore poisoned");
        while *n == 0 {
            n = self.cv.wait(n).expect("semaphore poisoned");
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().expect("semaphore poisoned") += 1;
        self.0.cv.notify_one();
    }
}

pub struct Gateway {
    mode: Mode,
    model_name: String,
    decoding: DecodingParams,
    retry: RetryPolicy,
    parallelism: usize,
    cache: Option<ResponseCache>,
    transport: Option<Arc<dyn Transport>>,
    limiter: Semaphore,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("mode", &self.mode)
            .field("model_name", &self.model_name)
            .field("parallelism", &self.parallelism)
            .field("cache", &self.cache.as_ref().map(ResponseCache::dir))
            .finish_non_exhaustive()
    }
}

pub struct GatewayBuilder {
    mode: Mode,
    model_name: String,
    decoding: DecodingParams,
    retry: RetryPolicy,
    parallelism: usize,
    cache_dir: Option<PathBuf>,
    transport: Option<Arc<dyn Transport>>,
}

impl GatewayBuilder {
    pub fn model_name(mut self, name: impl Into<String>) -> Self {
        self.model_name = name.into();
        self
    }

    pub fn decoding(mut self, params: DecodingParams) -> Self {
        self.decoding = params;
        self
    }

    pub fn retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn parallelism(mut self, n: usize) -> Self {
        self.parallelism = n.max(1);
        self
    }

    pub fn cache_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache_dir = Some(dir.into());
        self
    }

    pub fn transport(mut self, transport: Arc<dyn Transport>) -> Self {
        self.transport = Some(transport);
        self
    }

    /// Apply everything from a config file except the transport itself.
    pub fn config(mut self, cfg: &GatewayConfig) -> Self {
        self.model_name = cfg.model_name.clone();
        self.decoding = cfg.decoding.clone();
        self.retry = cfg.retry.clone();
        self.parallelism = cfg.parallelism.max(1);
        self
    }

    pub fn build(self) -> Result<Gateway, GatewayError> {
        if self.mode != Mode::Live && self.cache_dir.is_none() {
            return Err(GatewayError::NoCache(self.mode));
        }
        if self.mode != Mode::Replay && self.transport.is_none() {
            return Err(GatewayError::NoTransport(self.mode));
        }
        let cache = match (&self.mode, self.cache_dir) {
            (Mode::Live, _) | (_, None) => None,
            (_, Some(dir)) => Some(ResponseCache::open(dir)?),
        };
        Ok(Gateway {
            mode: self.mode,
            model_name: self.model_name,
            decoding: self.decoding,
            retry: self.retry,
            parallelism: self.parallelism,
            cache,
            // replay never needs it; dropping it makes "no network in replay" structural
            transport: if self.mode == Mode::Replay { None } else { self.transport },
            limiter: Semaphore::new(self.parallelism),
        })
    }
}

impl Gateway {
    pub fn builder(mode: Mode) -> GatewayBuilder {
        GatewayBuilder {
            mode,
            model_name: GatewayConfig::default().model_name,
            decoding: DecodingParams::default(),
            retry: RetryPolicy::default(),
            parallelism: 4,
            cache_dir: None,
            transport: None,
        }
    }

    /// Cache-only gateway.
    pub fn replay(cache_dir: impl Into<PathBuf>, model_name: impl Into<String>) -> Result<Gateway, GatewayError> {
        Gateway::builder(Mode::Replay).cache_dir(cache_dir).model_name(model_name).build()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn model_name(&self) -> &str {
        &self.model_name
    }

    pub fn parallelism(&self) -> usize {
        self.parallelism
    }

    pub fn cache(&self) -> Option<&ResponseCache> {
        self.cache.as_ref()
    }

    /// Request for `prompt` using this gateway's model and decoding defaults.
    pub fn request(&self, prompt: impl Into<String>) -> ModelRequest {
        ModelRequest::with_params(prompt, &self.model_name, &self.decoding)
    }

    pub fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, GatewayError> {
        request.validate()?;
        let key = request.canonical_key();
        let started = Instant::now();

        if self.mode != Mode::Live {
            let cache = self.cache.as_ref().ok_or(GatewayError::NoCache(self.mode))?;
            if let Some(text) = cache.get(&key)? {
                return Ok(ModelResponse { text, cached: true, latency: started.elapsed(), key });
            }
            if self.mode == Mode::Replay {
                return Err(GatewayError::CacheMiss { key });
            }
        }

        let text = self.call_provider(request)?;
        if self.mode == Mode::Record {
            let cache = self.cache.as_ref().ok_or(GatewayError::NoCache(self.mode))?;
            cache.put(&key, &text)?;
        }
        Ok(ModelResponse { text, cached: false, latency: started.elapsed(), key })
    }

    fn call_provider(&self, request: &ModelRequest) -> Result<String, GatewayError> {
        let transport = self.transport.as_ref().ok_or(GatewayError::NoTransport(self.mode))?;
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            let outcome = {
                let _permit = self.limiter.acquire();
                transport.send(request)
            };
            match outcome {
                Ok(text) => return Ok(text),
                Err(e) if e.kind == FailureKind::Malformed => return Err(GatewayError::MalformedPayload(e.message)),
                Err(e) if e.kind == FailureKind::Fatal || attempt > self.retry.max_retries => {
                    return Err(GatewayError::ProviderFailed { attempts: attempt, message: e.message });
                }
                Err(e) => {
                    log::warn!("provider attempt {attempt} failed: {}; retrying", e.message);
                    thread::sleep(self.retry.backoff(attempt - 1));
                }
            }
        }
    }

    /// Complete many requests with at most `parallelism` in flight; results
    /// come back in input order.
    pub fn complete_many(&self, requests: &[ModelRequest]) -> Vec<Result<ModelResponse, GatewayError>> {
        let n = requests.len();
        let slots: Vec<Mutex<Option<Result<ModelResponse, GatewayError>>>> = (0..n).map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = self.parallelism.min(n);
        thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= n {
                        break;
                    }
                    let result = self.complete(&requests[i]);
                    *slots[i].lock().expect("result slot poisoned") = Some(result);
                });
            }
        });
        slots
            .into_iter()
            .map(|s| s.into_inner().expect("result slot poisoned").expect("every slot is filled"))
            .collect()
    }
}

//! Chat-completion client for OpenAI-compatible endpoints, with bounded
//! retries and an on-disk response cache.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::{ChatBackend, Prompt};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 5,
            initial_backoff_ms: 1000,
            max_backoff_ms: 30_000,
        }
    }
}

impl RetryPolicy {
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u64.checked_shl(attempt).unwrap_or(u64::MAX);
        Duration::from_millis(self.initial_backoff_ms.saturating_mul(factor).min(self.max_backoff_ms))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClientConfig {
    /// Base URL; `/chat/completions` is appended.
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub retry: RetryPolicy,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1".into(),
            model: "gpt-4o-2024-05-13".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_secs: 120,
            retry: RetryPolicy::default(),
        }
    }
}

/// Request body for a chat completion.
pub fn request_body(model: &str, prompt: &Prompt) -> Value {
    json!({
        "model": model,
        "messages": prompt.messages,
        "temperature": prompt.decoding.temperature,
        "seed": prompt.decoding.seed,
    })
}

pub struct OpenAiClient {
    config: ClientConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl std::fmt::Debug for OpenAiClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OpenAiClient")
            .field("config", &self.config)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

enum Attempt {
    Done(String),
    Retry(String),
    Fail(String),
}

impl OpenAiClient {
    /// Reads the API key from the configured environment variable. A missing
    /// key is allowed for endpoints that do not check it.
    pub fn new(config: ClientConfig) -> Self {
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Self::with_key(config, api_key)
    }

    pub fn with_key(config: ClientConfig, api_key: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, api_key, agent }
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.endpoint.trim_end_matches('/'))
    }

    fn attempt(&self, body: &Value) -> Attempt {
        let mut request = self.agent.post(&self.url()).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = match request.send(body.to_string()) {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = response.status().as_u16();
        let text = match response.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        match status {
            200..=299 => match extract_content(&text) {
                Some(content) => Attempt::Done(content),
                None => Attempt::Fail(format!("response has no message content: {text}")),
            },
            429 | 500..=599 => Attempt::Retry(format!("HTTP {status}: {text}")),
            _ => Attempt::Fail(format!("HTTP {status}: {text}")),
        }
    }
}

fn extract_content(body: &str) -> Option<String> {
    let v: Value = serde_json::from_str(body).ok()?;
    v.get("choices")?
        .get(0)?
        .get("message")?
        .get("content")?
        .as_str()
        .map(str::to_string)
}

impl ChatBackend for OpenAiClient {
    fn model_id(&self) -> &str {
        &self.config.model
    }

    fn complete(&self, prompt: &Prompt) -> Result<String> {
        let body = request_body(&self.config.model, prompt);
        let policy = self.config.retry;
        let mut last = String::new();
        for attempt in 0..=policy.max_retries {
            if attempt > 0 {
                let wait = policy.backoff(attempt - 1);
                log::warn!("chat completion failed ({last}); retrying in {wait:?}");
                std::thread::sleep(wait);
            }
            match self.attempt(&body) {
                Attempt::Done(content) => return Ok(content),
                Attempt::Fail(msg) => return Err(Error::Transport(msg)),
                Attempt::Retry(msg) => last = msg,
            }
        }
        Err(Error::Transport(format!(
            "giving up after {} attempts: {last}",
            policy.max_retries + 1
        )))
    }
}

/// Replies stored one file per request, keyed by a hash of the model id,
/// messages, temperature and seed. Writes go through a temporary file and a
/// rename, so concurrent readers never see partial entries.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    model: String,
    content: String,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { dir })
    }

    pub fn key(model: &str, prompt: &Prompt) -> String {
        let body = request_body(model, prompt);
        hex::encode(Sha256::digest(body.to_string().as_bytes()))
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let text = std::fs::read_to_string(self.path(key)).ok()?;
        serde_json::from_str::<CacheEntry>(&text).ok().map(|e| e.content)
    }

    pub fn put(&self, key: &str, model: &str, content: &str) -> Result<()> {
        let entry = CacheEntry {
            model: model.to_string(),
            content: content.to_string(),
        };
        write_atomic(
            &self.path(key),
            serde_json::to_string(&entry).expect("serializable").as_bytes(),
        )
    }
}

fn write_atomic(path: &Path, data: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(data).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Wraps a backend with a [`ResponseCache`].
#[derive(Debug)]
pub struct CachedBackend<B> {
    inner: B,
    cache: ResponseCache,
}

impl<B: ChatBackend> CachedBackend<B> {
    pub fn new(inner: B, cache: ResponseCache) -> Self {
        Self { inner, cache }
    }
}

impl<B: ChatBackend> ChatBackend for CachedBackend<B> {
    fn model_id(&self) -> &str {
        self.inner.model_id()
    }

    fn complete(&self, prompt: &Prompt) -> Result<String> {
        let key = ResponseCache::key(self.inner.model_id(), prompt);
        if let Some(hit) = self.cache.get(&key) {
            return Ok(hit);
        }
        let content = self.inner.complete(prompt)?;
        self.cache.put(&key, self.inner.model_id(), &content)?;
        Ok(content)
    }
}

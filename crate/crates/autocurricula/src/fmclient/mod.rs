//! Completion backends with a persistent prompt cache.
//!
//! [`FmClient`] fronts any [`CompletionBackend`] (HTTP or scripted mock) with
//! a cache keyed by a digest of the canonicalized request, so identical
//! requests — within a run or across runs — never hit the backend twice.
//! Cache storage is an append-only line-delimited file: crash-safe, diffable,
//! and reloaded into an in-memory index at startup.

mod http;
mod mock;

pub use http::{model_from_env, HttpBackend, ENV_API_KEY, ENV_BASE_URL, ENV_MODEL};
pub use mock::{Matcher, MockBackend, Responder};

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// One completion call. Field order is fixed; the canonical serialization
/// (and therefore the cache key) covers every field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model_name: String,
    pub system_text: Option<String>,
    pub user_text: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl CompletionRequest {
    /// A request with temperature 0 (deterministic sampling) and a roomy
    /// token budget.
    pub fn new(model_name: impl Into<String>, user_text: impl Into<String>) -> Self {
        CompletionRequest {
            model_name: model_name.into(),
            system_text: None,
            user_text: user_text.into(),
            temperature: 0.0,
            max_tokens: 2048,
        }
    }

    pub fn with_system(mut self, system_text: impl Into<String>) -> Self {
        self.system_text = Some(system_text.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.user_text.is_empty() {
            return Err(Error::Config("completion request needs non-empty user text".into()));
        }
        Ok(())
    }
}

/// Canonical request text: compact JSON with fixed field order. No
/// inter-field whitespace, so formatting can never perturb the digest.
pub fn canonical_request_text(request: &CompletionRequest) -> String {
    serde_json::to_string(request).expect("request serializes")
}

/// Stable 256-bit hex digest of the canonical request text.
pub fn cache_key(request: &CompletionRequest) -> String {
    let mut hasher = Sha256::new();
    hasher.update(canonical_request_text(request).as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// One persisted cache record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    /// Canonical request text; `key` is recomputable from it.
    pub request: String,
    pub response_text: String,
    /// Unix seconds at store time.
    pub created_at: u64,
}

/// Anything that can turn a request into response text.
///
/// `call_count` exposes how many times the backend was actually invoked, so
/// tests can assert that cached completions never touch it.
pub trait CompletionBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String>;
    fn call_count(&self) -> u64;
}

/// Caching completion client.
///
/// Callable from multiple threads: lookups take a shared lock on the
/// in-memory index; file appends are serialized behind a single writer lock.
pub struct FmClient {
    backend: Box<dyn CompletionBackend>,
    index: RwLock<HashMap<String, String>>,
    writer: Mutex<Option<File>>,
    cache_path: Option<PathBuf>,
    cache_hits: AtomicU64,
}

impl std::fmt::Debug for FmClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FmClient")
            .field("cache_path", &self.cache_path)
            .field("cache_len", &self.cache_len())
            .finish_non_exhaustive()
    }
}

impl FmClient {
    /// In-memory cache only: nothing persists across processes.
    pub fn new(backend: Box<dyn CompletionBackend>) -> Self {
        FmClient {
            backend,
            index: RwLock::new(HashMap::new()),
            writer: Mutex::new(None),
            cache_path: None,
            cache_hits: AtomicU64::new(0),
        }
    }

    /// Cache backed by an append-only file. Existing entries are loaded into
    /// the index (on duplicate keys the last line wins, matching append
    /// order); every line is integrity-checked against its recomputed key.
    pub fn with_cache_file(backend: Box<dyn CompletionBackend>, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut index = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for (idx, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: CacheEntry = serde_json::from_str(&line).map_err(|e| {
                    Error::Config(format!("cache line {} is not a valid entry: {e}", idx + 1))
                })?;
                let request: CompletionRequest =
                    serde_json::from_str(&entry.request).map_err(|e| {
                        Error::Config(format!("cache line {} has malformed request text: {e}", idx + 1))
                    })?;
                if cache_key(&request) != entry.key {
                    return Err(Error::Config(format!(
                        "cache line {} fails integrity check: key does not match request",
                        idx + 1
                    )));
                }
                index.insert(entry.key, entry.response_text);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(FmClient {
            backend,
            index: RwLock::new(index),
            writer: Mutex::new(Some(file)),
            cache_path: Some(path),
            cache_hits: AtomicU64::new(0),
        })
    }

    pub fn cache_path(&self) -> Option<&Path> {
        self.cache_path.as_deref()
    }

    pub fn cache_len(&self) -> usize {
        self.index.read().expect("index lock").len()
    }

    pub fn cache_hits(&self) -> u64 {
        self.cache_hits.load(Ordering::Relaxed)
    }

    pub fn backend_calls(&self) -> u64 {
        self.backend.call_count()
    }

    /// Complete a request, consulting the cache first. On a miss the backend
    /// is invoked and the result persisted, so the same request — in this
    /// process or a later one — is served from the cache.
    pub fn complete(&self, request: &CompletionRequest) -> Result<String> {
        self.complete_tracked(request).map(|(text, _)| text)
    }

    /// Like [`FmClient::complete`], also reporting whether the answer came
    /// from the cache.
    pub fn complete_tracked(&self, request: &CompletionRequest) -> Result<(String, bool)> {
        request.validate()?;
        let key = cache_key(request);
        if let Some(hit) = self.index.read().expect("index lock").get(&key) {
            self.cache_hits.fetch_add(1, Ordering::Relaxed);
            return Ok((hit.clone(), true));
        }
        Ok((self.fetch_and_store(request, key)?, false))
    }

    /// Complete without consulting the cache (the result still replaces any
    /// stored entry). Lets callers regenerate a response when the cached one
    /// turned out to be malformed — e.g. a reply that fails verdict parsing.
    pub fn complete_fresh(&self, request: &CompletionRequest) -> Result<String> {
        request.validate()?;
        let key = cache_key(request);
        self.fetch_and_store(request, key)
    }

    fn fetch_and_store(&self, request: &CompletionRequest, key: String) -> Result<String> {
        let response = self.backend.complete(request)?;
        let entry = CacheEntry {
            key: key.clone(),
            request: canonical_request_text(request),
            response_text: response.clone(),
            created_at: SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default().as_secs(),
        };
        {
            let mut writer = self.writer.lock().expect("writer lock");
            if let Some(file) = writer.as_mut() {
                let line = serde_json::to_string(&entry).expect("entry serializes");
                writeln!(file, "{line}")?;
                file.flush()?;
            }
        }
        self.index.write().expect("index lock").insert(key, response.clone());
        Ok(response)
    }
}

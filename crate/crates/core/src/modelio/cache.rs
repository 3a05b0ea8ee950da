//! Append-only JSONL response cache keyed by a hash of the canonical request.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::ModelError;
use crate::model::LabelDistribution;
use crate::modelio::protocol::{
    ClassifyRequest, ClassifyResponse, Classifier, GenerateRequest, GenerateResponse, Generator,
};

pub const CACHE_FILE: &str = "cache.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub request: Value,
    pub response: Value,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
}

/// Compact JSON with object keys sorted at every level.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_canonical(value, &mut out);
    out
}

fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_canonical(&map[k], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        other => out.push_str(&other.to_string()),
    }
}

/// Hex SHA-256 of the canonical form of `{"endpoint": ..., "request": ...}`.
pub fn cache_key(endpoint: &str, request: &Value) -> String {
    let wrapped = serde_json::json!({ "endpoint": endpoint, "request": request });
    hex::encode(Sha256::digest(canonical_json(&wrapped).as_bytes()))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub skipped_lines: u64,
}

/// Concurrent readers, single appender. Last entry wins on duplicate keys.
#[derive(Debug)]
pub struct ResponseCache {
    path: Option<PathBuf>,
    entries: RwLock<HashMap<String, Value>>,
    writer: Mutex<Option<File>>,
    hits: AtomicU64,
    misses: AtomicU64,
    skipped_lines: u64,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        ResponseCache {
            path: None,
            entries: RwLock::new(HashMap::new()),
            writer: Mutex::new(None),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
            skipped_lines: 0,
        }
    }

    /// Opens (creating if needed) `dir/cache.jsonl`. Corrupt lines are skipped with a warning.
    pub fn open(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(CACHE_FILE);
        let mut entries = HashMap::new();
        let mut skipped = 0;
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheEntry>(&line) {
                    Ok(entry) => {
                        entries.insert(entry.key, entry.response);
                    }
                    Err(e) => {
                        log::warn!("{}:{}: skipping corrupt cache line: {e}", path.display(), i + 1);
                        skipped += 1;
                    }
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(ResponseCache {
            path: Some(path),
            entries: RwLock::new(entries),
            writer: Mutex::new(Some(file)),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
            skipped_lines: skipped,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            skipped_lines: self.skipped_lines,
        }
    }

    pub fn lookup(&self, key: &str) -> Option<Value> {
        self.entries.read().expect("cache lock").get(key).cloned()
    }

    fn store(&self, key: String, request: Value, response: Value) -> Result<(), ModelError> {
        let mut writer = self.writer.lock().expect("cache writer lock");
        if let Some(file) = writer.as_mut() {
            let entry = CacheEntry { key: key.clone(), request, response: response.clone(), created_at: now_secs() };
            let mut line = serde_json::to_string(&entry).expect("cache entry serializes");
            line.push('\n');
            // One write per entry keeps appends whole.
            file.write_all(line.as_bytes())
                .and_then(|_| file.flush())
                .map_err(|e| ModelError::Transport(format!("cache append failed: {e}")))?;
        }
        self.entries.write().expect("cache lock").insert(key, response);
        Ok(())
    }

    /// Returns the cached response for `request`, or computes, stores and returns it.
    pub fn call<F>(&self, endpoint: &str, request: &Value, compute: F) -> Result<Value, ModelError>
    where
        F: FnOnce() -> Result<Value, ModelError>,
    {
        let key = cache_key(endpoint, request);
        if let Some(hit) = self.lookup(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(hit);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let response = compute()?;
        self.store(key, request.clone(), response.clone())?;
        Ok(response)
    }
}

fn now_secs() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Wraps a classifier with the response cache.
pub struct CachedClassifier<'c, C> {
    pub inner: C,
    pub cache: &'c ResponseCache,
}

impl<C: Classifier> Classifier for CachedClassifier<'_, C> {
    fn classify(&self, request: &ClassifyRequest) -> Result<LabelDistribution, ModelError> {
        let req = serde_json::to_value(request).expect("request serializes");
        let resp = self.cache.call("classify", &req, || {
            let probs = self.inner.classify(request)?;
            Ok(serde_json::to_value(ClassifyResponse { probs }).expect("response serializes"))
        })?;
        let parsed: ClassifyResponse = serde_json::from_value(resp)
            .map_err(|e| ModelError::protocol("bad_cache_entry", e.to_string()))?;
        Ok(parsed.probs)
    }
}

pub struct CachedGenerator<'c, G> {
    pub inner: G,
    pub cache: &'c ResponseCache,
}

impl<G: Generator> Generator for CachedGenerator<'_, G> {
    fn generate(&self, request: &GenerateRequest) -> Result<String, ModelError> {
        let req = serde_json::to_value(request).expect("request serializes");
        let resp = self.cache.call("generate", &req, || {
            let text = self.inner.generate(request)?;
            Ok(serde_json::to_value(GenerateResponse { text }).expect("response serializes"))
        })?;
        let parsed: GenerateResponse = serde_json::from_value(resp)
            .map_err(|e| ModelError::protocol("bad_cache_entry", e.to_string()))?;
        Ok(parsed.text)
    }
}

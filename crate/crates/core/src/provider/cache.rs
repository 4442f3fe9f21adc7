use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{ChatBackend, CompletionRequest, CompletionResult, ProviderError, Usage};

/// One line of the append-only cache file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub digest: String,
    pub request: CompletionRequest,
    pub response_text: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    #[serde(default)]
    pub usage: Usage,
}

struct CacheState {
    entries: HashMap<String, CacheRecord>,
    file: Option<File>,
}

/// Digest-keyed response store backed by a JSONL file. Appends are atomic
/// with respect to other threads of the same process; the first record for
/// a digest wins.
pub struct ResponseCache {
    path: Option<PathBuf>,
    state: Mutex<CacheState>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            state: Mutex::new(CacheState {
                entries: HashMap::new(),
                file: None,
            }),
        }
    }

    /// Loads `path` if it exists and opens it for appending.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, ProviderError> {
        let path = path.as_ref().to_path_buf();
        let io = |e: std::io::Error| ProviderError::Io(format!("{}: {e}", path.display()));
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path).map_err(io)?);
            for (n, line) in reader.lines().enumerate() {
                let line = line.map_err(io)?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: CacheRecord = serde_json::from_str(&line).map_err(|e| {
                    ProviderError::Io(format!("{}:{}: {e}", path.display(), n + 1))
                })?;
                entries.entry(record.digest.clone()).or_insert(record);
            }
        } else if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io)?;
        Ok(Self {
            path: Some(path),
            state: Mutex::new(CacheState {
                entries,
                file: Some(file),
            }),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, digest: &str) -> Option<CacheRecord> {
        self.state.lock().unwrap().entries.get(digest).cloned()
    }

    pub fn len(&self) -> usize {
        self.state.lock().unwrap().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stores `record` unless its digest is already present. Returns the
    /// record now associated with the digest.
    pub fn append(&self, record: CacheRecord) -> Result<CacheRecord, ProviderError> {
        let mut state = self.state.lock().unwrap();
        if let Some(existing) = state.entries.get(&record.digest) {
            return Ok(existing.clone());
        }
        if let Some(file) = state.file.as_mut() {
            let mut line = serde_json::to_string(&record)
                .map_err(|e| ProviderError::Io(e.to_string()))?;
            line.push('\n');
            file.write_all(line.as_bytes())
                .and_then(|_| file.flush())
                .map_err(|e| ProviderError::Io(e.to_string()))?;
        }
        state.entries.insert(record.digest.clone(), record.clone());
        Ok(record)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CacheMode {
    /// Serve hits from the cache, forward misses and record them.
    Record,
    /// Serve hits only; a miss is an error.
    Replay,
}

pub struct CachingBackend {
    inner: Option<Arc<dyn ChatBackend>>,
    cache: Arc<ResponseCache>,
    mode: CacheMode,
    name: String,
}

impl CachingBackend {
    pub fn record(inner: Arc<dyn ChatBackend>, cache: Arc<ResponseCache>) -> Self {
        let name = format!("cache+{}", inner.name());
        Self {
            inner: Some(inner),
            cache,
            mode: CacheMode::Record,
            name,
        }
    }

    pub fn replay(cache: Arc<ResponseCache>) -> Self {
        Self {
            inner: None,
            cache,
            mode: CacheMode::Replay,
            name: "replay".into(),
        }
    }

    pub fn mode(&self) -> CacheMode {
        self.mode
    }

    pub fn cache(&self) -> &Arc<ResponseCache> {
        &self.cache
    }
}

impl ChatBackend for CachingBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, ProviderError> {
        let digest = request.digest();
        if let Some(hit) = self.cache.get(&digest) {
            return Ok(CompletionResult {
                text: hit.response_text,
                usage: hit.usage,
                backend: self.name.clone(),
                cache_hit: true,
            });
        }
        let inner = match (&self.inner, self.mode) {
            (Some(inner), CacheMode::Record) => inner,
            _ => return Err(ProviderError::CacheMiss(digest)),
        };
        let result = inner.complete(request)?;
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let stored = self.cache.append(CacheRecord {
            digest,
            request: request.clone(),
            response_text: result.text.clone(),
            timestamp,
            usage: result.usage,
        })?;
        Ok(CompletionResult {
            text: stored.response_text,
            usage: stored.usage,
            backend: result.backend,
            cache_hit: false,
        })
    }

    fn name(&self) -> &str {
        &self.name
    }
}

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use crate::prompting::sha256_hex;

/// One persisted model exchange (a line of the cache file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub model: String,
    pub temperature: f64,
    pub prompt_hash: String,
    pub response: String,
    pub created_at: String,
}

/// Cache key over model, temperature and prompt content hash.
pub fn cache_key(model: &str, temperature: f64, prompt_hash: &str) -> String {
    let temperature = serde_json::to_string(&temperature).expect("finite temperature");
    sha256_hex(&format!("{model}\u{0}{temperature}\u{0}{prompt_hash}"))
}

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed cache entry: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: usize,
    pub misses: usize,
    pub writes: usize,
}

/// Append-only JSON-lines response cache.
///
/// The first entry stored for a key is authoritative; later inserts for the
/// same key return it unchanged.
pub struct ResponseCache {
    path: Option<PathBuf>,
    entries: Mutex<HashMap<String, CacheEntry>>,
    writer: Mutex<Option<File>>,
    hits: AtomicUsize,
    misses: AtomicUsize,
    writes: AtomicUsize,
}

impl ResponseCache {
    /// A cache that lives only in memory.
    pub fn in_memory() -> Self {
        ResponseCache {
            path: None,
            entries: Mutex::new(HashMap::new()),
            writer: Mutex::new(None),
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
            writes: AtomicUsize::new(0),
        }
    }

    /// Open (creating if needed) a cache file and load its entries.
    ///
    /// A truncated final line, as left by a crash mid-write, is dropped.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, CacheError> {
        let path = path.as_ref().to_owned();
        let io = |source| CacheError::Io {
            path: path.clone(),
            source,
        };
        let mut entries = HashMap::new();
        let mut complete_len = None;
        if path.exists() {
            let content = std::fs::read(&path).map_err(io)?;
            let truncated_tail = !content.is_empty() && !content.ends_with(b"\n");
            if truncated_tail {
                complete_len = Some(content.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1));
            }
            let lines: Vec<_> = BufReader::new(content.as_slice()).lines().collect::<Result<_, _>>().map_err(io)?;
            let count = lines.len();
            for (i, line) in lines.into_iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheEntry>(&line) {
                    Ok(entry) => {
                        entries.entry(entry.key.clone()).or_insert(entry);
                    }
                    Err(e) if i + 1 == count && truncated_tail => {
                        warn!(path = %path.display(), "dropping truncated final cache line: {e}");
                    }
                    Err(e) => {
                        return Err(CacheError::Corrupt {
                            path: path.clone(),
                            line: i + 1,
                            message: e.to_string(),
                        })
                    }
                }
            }
        }
        if let Some(len) = complete_len {
            let file = OpenOptions::new().write(true).open(&path).map_err(io)?;
            file.set_len(len as u64).map_err(io)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io)?;
        Ok(ResponseCache {
            path: Some(path),
            entries: Mutex::new(entries),
            writer: Mutex::new(Some(file)),
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
            writes: AtomicUsize::new(0),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Look up a key, counting a hit or miss.
    pub fn get(&self, key: &str) -> Option<CacheEntry> {
        let found = self.entries.lock().expect("cache lock").get(key).cloned();
        let counter = if found.is_some() { &self.hits } else { &self.misses };
        counter.fetch_add(1, Ordering::Relaxed);
        found
    }

    /// Store a response unless the key is already present; returns the
    /// authoritative entry.
    pub fn insert(
        &self,
        model: &str,
        temperature: f64,
        prompt_hash: &str,
        response: String,
    ) -> Result<CacheEntry, CacheError> {
        let key = cache_key(model, temperature, prompt_hash);
        let mut entries = self.entries.lock().expect("cache lock");
        if let Some(existing) = entries.get(&key) {
            return Ok(existing.clone());
        }
        let entry = CacheEntry {
            key: key.clone(),
            model: model.to_owned(),
            temperature,
            prompt_hash: prompt_hash.to_owned(),
            response,
            created_at: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
        };
        if let Some(file) = self.writer.lock().expect("writer lock").as_mut() {
            let mut line = serde_json::to_string(&entry).expect("cache entries serialise");
            line.push('\n');
            file.write_all(line.as_bytes())
                .and_then(|_| file.flush())
                .map_err(|source| CacheError::Io {
                    path: self.path.clone().unwrap_or_default(),
                    source,
                })?;
        }
        self.writes.fetch_add(1, Ordering::Relaxed);
        entries.insert(key, entry.clone());
        Ok(entry)
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            writes: self.writes.load(Ordering::Relaxed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_depends_on_every_component() {
        let base = cache_key("gpt-4o", 0.0, "abc");
        assert_eq!(base, cache_key("gpt-4o", 0.0, "abc"));
        assert_ne!(base, cache_key("gpt-4o-mini", 0.0, "abc"));
        assert_ne!(base, cache_key("gpt-4o", 0.7, "abc"));
        assert_ne!(base, cache_key("gpt-4o", 0.0, "abd"));
    }

    #[test]
    fn persists_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        {
            let cache = ResponseCache::open(&path).unwrap();
            cache.insert("m", 0.0, "h1", "[1, 0, 0]".into()).unwrap();
            cache.insert("m", 0.0, "h2", "[0, 1, 1]".into()).unwrap();
        }
        let cache = ResponseCache::open(&path).unwrap();
        assert_eq!(cache.len(), 2);
        let hit = cache.get(&cache_key("m", 0.0, "h2")).unwrap();
        assert_eq!(hit.response, "[0, 1, 1]");
        assert!(cache.get(&cache_key("m", 0.0, "zz")).is_none());
        assert_eq!(cache.stats(), CacheStats { hits: 1, misses: 1, writes: 0 });

        let line: serde_json::Value =
            serde_json::from_str(std::fs::read_to_string(&path).unwrap().lines().next().unwrap()).unwrap();
        for field in ["key", "model", "temperature", "prompt_hash", "response", "created_at"] {
            assert!(line.get(field).is_some(), "missing {field}");
        }
    }

    #[test]
    fn first_entry_wins() {
        let cache = ResponseCache::in_memory();
        let a = cache.insert("m", 0.0, "h", "first".into()).unwrap();
        let b = cache.insert("m", 0.0, "h", "second".into()).unwrap();
        assert_eq!(a.response, "first");
        assert_eq!(b.response, "first");
        assert_eq!(cache.stats().writes, 1);
    }

    #[test]
    fn truncated_tail_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        {
            let cache = ResponseCache::open(&path).unwrap();
            cache.insert("m", 0.0, "h1", "ok".into()).unwrap();
        }
        let mut content = std::fs::read_to_string(&path).unwrap();
        content.push_str("{\"key\": \"trunc");
        std::fs::write(&path, &content).unwrap();
        {
            let cache = ResponseCache::open(&path).unwrap();
            assert_eq!(cache.len(), 1);
            cache.insert("m", 0.0, "h2", "ok2".into()).unwrap();
        }
        let cache = ResponseCache::open(&path).unwrap();
        assert_eq!(cache.len(), 2);
        assert!(!std::fs::read_to_string(&path).unwrap().contains("trunc"));
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        std::fs::write(&path, "not json\n").unwrap();
        assert!(matches!(ResponseCache::open(&path), Err(CacheError::Corrupt { line: 1, .. })));
    }
}

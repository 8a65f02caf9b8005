//! Content-addressed response cache: one JSON object per line, keyed by
//! (prompt content hash, annotator id, request index, decoding fingerprint).
//! Concurrent readers, serialized writers; duplicate puts for the same key
//! are idempotent.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::providers::ProviderError;
use crate::types::DecodingParams;

/// One stored annotator response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawResponse {
    /// sha256 of the originating prompt text
    pub content_hash: String,
    pub annotator_id: String,
    /// request index: sample slot for first attempts, slot + attempt*n for
    /// retries, so a regenerated response never collides with the failed one
    pub sample_index: u32,
    pub decoding: DecodingParams,
    pub text: String,
    pub timestamp_ms: u64,
}

impl RawResponse {
    pub fn key(&self) -> String {
        cache_key(
            &self.content_hash,
            &self.annotator_id,
            self.sample_index,
            &self.decoding,
        )
    }
}

pub fn cache_key(
    content_hash: &str,
    annotator_id: &str,
    sample_index: u32,
    decoding: &DecodingParams,
) -> String {
    format!(
        "{content_hash}|{annotator_id}|{sample_index}|{}",
        decoding.fingerprint()
    )
}

/// Append-friendly response store. With no path it is memory-only
/// (`--no-cache` still records responses for the run archive).
pub struct ResponseCache {
    entries: RwLock<HashMap<String, RawResponse>>,
    file: Mutex<Option<File>>,
    path: Option<PathBuf>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl ResponseCache {
    /// Opens (creating if needed) a JSONL-backed cache.
    pub fn open(path: &Path) -> Result<Self, ProviderError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|e| ProviderError::Io(format!("{}: {e}", parent.display())))?;
        }
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(
                File::open(path).map_err(|e| ProviderError::Io(format!("{}: {e}", path.display())))?,
            );
            for (lineno, line) in reader.lines().enumerate() {
                let line = line.map_err(|e| ProviderError::Io(e.to_string()))?;
                if line.trim().is_empty() {
                    continue;
                }
                let response: RawResponse = serde_json::from_str(&line).map_err(|e| {
                    ProviderError::Format {
                        path: path.display().to_string(),
                        line: lineno + 1,
                        message: e.to_string(),
                    }
                })?;
                entries.insert(response.key(), response);
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| ProviderError::Io(format!("{}: {e}", path.display())))?;
        Ok(ResponseCache {
            entries: RwLock::new(entries),
            file: Mutex::new(Some(file)),
            path: Some(path.to_path_buf()),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        })
    }

    /// Memory-only cache; nothing persisted.
    pub fn memory() -> Self {
        ResponseCache {
            entries: RwLock::new(HashMap::new()),
            file: Mutex::new(None),
            path: None,
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(
        &self,
        content_hash: &str,
        annotator_id: &str,
        sample_index: u32,
        decoding: &DecodingParams,
    ) -> Option<RawResponse> {
        let key = cache_key(content_hash, annotator_id, sample_index, decoding);
        let found = self.entries.read().expect("cache lock").get(&key).cloned();
        match &found {
            Some(_) => self.hits.fetch_add(1, Ordering::Relaxed),
            None => self.misses.fetch_add(1, Ordering::Relaxed),
        };
        found
    }

    /// Inserts and persists a response. A concurrent duplicate put for the
    /// same key keeps the first entry.
    pub fn put(&self, response: RawResponse) -> Result<(), ProviderError> {
        let key = response.key();
        {
            let mut entries = self.entries.write().expect("cache lock");
            if entries.contains_key(&key) {
                return Ok(());
            }
            entries.insert(key, response.clone());
        }
        let mut file = self.file.lock().expect("cache file lock");
        if let Some(f) = file.as_mut() {
            let line = serde_json::to_string(&response)
                .map_err(|e| ProviderError::Io(e.to_string()))?;
            writeln!(f, "{line}").map_err(|e| ProviderError::Io(e.to_string()))?;
        }
        Ok(())
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

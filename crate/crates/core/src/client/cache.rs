use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Usage;
use crate::error::Result;

/// SHA-256 over the length-prefixed model name followed by the prompt text.
pub fn cache_key(model: &str, prompt: &str) -> String {
    let mut h = Sha256::new();
    h.update((model.len() as u64).to_le_bytes());
    h.update(model.as_bytes());
    h.update(prompt.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub model: String,
    pub response: String,
    /// RFC 3339 write time.
    pub timestamp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
}

struct Inner {
    index: HashMap<String, CacheEntry>,
    file: File,
}

/// Append-only JSON Lines cache with an in-memory index. Every write is
/// flushed before returning, so an interrupted sweep loses nothing it has
/// already received.
pub struct ResponseCache {
    path: PathBuf,
    inner: Mutex<Inner>,
}

impl ResponseCache {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut index = HashMap::new();
        if path.exists() {
            for (i, line) in BufReader::new(File::open(&path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheEntry>(&line) {
                    Ok(e) => {
                        index.entry(e.key.clone()).or_insert(e);
                    }
                    Err(e) => log::warn!("{}:{}: skipping unreadable cache line: {e}", path.display(), i + 1),
                }
            }
        }
        let mut file = OpenOptions::new().create(true).append(true).open(&path)?;
        // terminate a torn final line so the next append starts cleanly
        let bytes = std::fs::read(&path)?;
        if bytes.last().is_some_and(|&b| b != b'\n') {
            file.write_all(b"\n")?;
        }
        Ok(Self {
            path,
            inner: Mutex::new(Inner { index, file }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("cache lock").index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, model: &str, prompt: &str) -> Option<CacheEntry> {
        let key = cache_key(model, prompt);
        self.inner.lock().expect("cache lock").index.get(&key).cloned()
    }

    /// Stores a response. An existing entry for the same key is never
    /// replaced; the stored entry is returned either way.
    pub fn put(&self, model: &str, prompt: &str, response: &str, usage: Option<Usage>) -> Result<CacheEntry> {
        let key = cache_key(model, prompt);
        let mut inner = self.inner.lock().expect("cache lock");
        if let Some(e) = inner.index.get(&key) {
            return Ok(e.clone());
        }
        let entry = CacheEntry {
            key: key.clone(),
            model: model.to_string(),
            response: response.to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            usage,
        };
        let mut line = serde_json::to_string(&entry)?;
        line.push('\n');
        inner.file.write_all(line.as_bytes())?;
        inner.file.flush()?;
        inner.index.insert(key, entry.clone());
        Ok(entry)
    }
}

//! Persistent pair-level logit cache.
//!
//! The cache stores raw logits keyed by a content hash of the ordered
//! (premise, hypothesis) pair. Temperatures are applied after lookup, so a
//! temperature sweep re-uses one network pass. Writes go to a temp file that
//! is renamed over the cache, never appended in place.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{NliError, NliLogits};

const CACHE_FILE: &str = "nli_cache.jsonl";

/// Location of the cache file inside a cache directory.
pub fn cache_file_path(dir: &Path) -> PathBuf {
    dir.join(CACHE_FILE)
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheLine {
    key: String,
    premise: String,
    hypothesis: String,
    logits: [f64; 3],
}

/// Content hash of an ordered pair. Length framing keeps ("ab", "c") and
/// ("a", "bc") distinct.
pub fn cache_key(premise: &str, hypothesis: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update((premise.len() as u64).to_le_bytes());
    hasher.update(premise.as_bytes());
    hasher.update((hypothesis.len() as u64).to_le_bytes());
    hasher.update(hypothesis.as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// In-memory view of the cache file, loaded once at open.
#[derive(Debug, Default)]
pub struct NliCache {
    path: Option<PathBuf>,
    entries: HashMap<String, CacheLine>,
    dirty: bool,
}

impl NliCache {
    /// Purely in-memory cache (no persistence).
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Open (or create) the cache under `dir`.
    pub fn open(dir: &Path) -> Result<Self, NliError> {
        let path = cache_file_path(dir);
        let mut entries = HashMap::new();
        if path.exists() {
            let file = fs::File::open(&path).map_err(|source| NliError::CacheIo {
                path: path.display().to_string(),
                source,
            })?;
            for (idx, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|source| NliError::CacheIo {
                    path: path.display().to_string(),
                    source,
                })?;
                if line.trim().is_empty() {
                    continue;
                }
                let parsed: CacheLine =
                    serde_json::from_str(&line).map_err(|_| NliError::CacheCorrupt {
                        path: path.display().to_string(),
                        line: idx + 1,
                    })?;
                if parsed.key != cache_key(&parsed.premise, &parsed.hypothesis) {
                    return Err(NliError::CacheCorrupt {
                        path: path.display().to_string(),
                        line: idx + 1,
                    });
                }
                entries.insert(parsed.key.clone(), parsed);
            }
        }
        Ok(Self {
            path: Some(path),
            entries,
            dirty: false,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, premise: &str, hypothesis: &str) -> Option<NliLogits> {
        self.entries
            .get(&cache_key(premise, hypothesis))
            .map(|e| NliLogits::new(e.logits[0], e.logits[1], e.logits[2]))
    }

    pub fn insert(&mut self, premise: &str, hypothesis: &str, logits: NliLogits) {
        let key = cache_key(premise, hypothesis);
        self.entries.insert(
            key.clone(),
            CacheLine {
                key,
                premise: premise.to_string(),
                hypothesis: hypothesis.to_string(),
                logits: [logits.entail, logits.neutral, logits.contra],
            },
        );
        self.dirty = true;
    }

    /// Write the whole cache to a temp file and rename it into place.
    /// No-op when nothing changed or the cache is in-memory only.
    pub fn flush(&mut self) -> Result<(), NliError> {
        let Some(path) = self.path.clone() else {
            return Ok(());
        };
        if !self.dirty {
            return Ok(());
        }
        let io_err = |source| NliError::CacheIo {
            path: path.display().to_string(),
            source,
        };
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err)?;
        }
        // Sorted by key so the file is byte-stable for a given content set.
        let mut keys: Vec<&String> = self.entries.keys().collect();
        keys.sort();
        let tmp = path.with_extension("jsonl.tmp");
        {
            let mut file = fs::File::create(&tmp).map_err(io_err)?;
            for key in keys {
                let line = serde_json::to_string(&self.entries[key]).expect("cache line");
                writeln!(file, "{line}").map_err(io_err)?;
            }
            file.sync_all().map_err(io_err)?;
        }
        fs::rename(&tmp, &path).map_err(io_err)?;
        self.dirty = false;
        Ok(())
    }
}

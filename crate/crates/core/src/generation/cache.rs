//! Content-addressed store of completion responses.
//!
//! Each entry lives at `<root>/<key[..2]>/<key>.json` where `key` is the
//! SHA-256 of the model id and the serialized request. Entries are written
//! to a temporary file and renamed into place, so a reader never observes a
//! partial entry.

use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::client::{CompletionRequest, CompletionResponse};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    key: String,
    model_id: String,
    request: CompletionRequest,
    response: CompletionResponse,
}

#[derive(Debug)]
pub struct ResponseCache {
    root: PathBuf,
    tmp_counter: AtomicU64,
}

pub fn request_key(model_id: &str, request: &CompletionRequest) -> String {
    let mut h = Sha256::new();
    h.update(model_id.as_bytes());
    h.update([0u8]);
    h.update(request.prompt.as_bytes());
    h.update([0u8]);
    h.update(request.max_new_tokens.to_le_bytes());
    h.update([request.greedy as u8]);
    hex::encode(h.finalize())
}

impl ResponseCache {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(Self {
            root,
            tmp_counter: AtomicU64::new(0),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.root.join(&key[..2]).join(format!("{key}.json"))
    }

    /// Looks up a response. A missing entry is `Ok(None)`; an unreadable or
    /// mismatched entry is `Error::CacheCorrupt`.
    pub fn get(&self, model_id: &str, request: &CompletionRequest) -> Result<Option<CompletionResponse>> {
        let key = request_key(model_id, request);
        let path = self.path_for(&key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(&path, e)),
        };
        let corrupt = |reason: String| Error::CacheCorrupt {
            key: key.clone(),
            reason,
        };
        let entry: Entry = serde_json::from_slice(&bytes).map_err(|e| corrupt(e.to_string()))?;
        if entry.key != key || entry.model_id != model_id || &entry.request != request {
            return Err(corrupt("entry does not match its request".into()));
        }
        Ok(Some(entry.response))
    }

    pub fn put(&self, model_id: &str, request: &CompletionRequest, response: &CompletionResponse) -> Result<()> {
        let key = request_key(model_id, request);
        let path = self.path_for(&key);
        let dir = path.parent().expect("cache path has a parent");
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let entry = Entry {
            key: key.clone(),
            model_id: model_id.to_string(),
            request: request.clone(),
            response: response.clone(),
        };
        let n = self.tmp_counter.fetch_add(1, Ordering::Relaxed);
        let tmp = dir.join(format!(".{key}.{}.{n}.tmp", std::process::id()));
        fs::write(&tmp, serde_json::to_vec_pretty(&entry)?).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    /// Number of stored entries.
    pub fn len(&self) -> usize {
        let Ok(dirs) = fs::read_dir(&self.root) else {
            return 0;
        };
        dirs.flatten()
            .filter(|d| d.path().is_dir())
            .flat_map(|d| fs::read_dir(d.path()).into_iter().flatten().flatten())
            .filter(|f| f.path().extension().is_some_and(|e| e == "json"))
            .count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Iterates stored (request, response) pairs. Corrupt entries are skipped.
    pub fn entries(&self) -> Vec<(CompletionRequest, CompletionResponse)> {
        let mut out = Vec::new();
        let Ok(dirs) = fs::read_dir(&self.root) else {
            return out;
        };
        let mut files: Vec<PathBuf> = dirs
            .flatten()
            .filter(|d| d.path().is_dir())
            .flat_map(|d| fs::read_dir(d.path()).into_iter().flatten().flatten())
            .map(|f| f.path())
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        files.sort();
        for f in files {
            if let Ok(bytes) = fs::read(&f) {
                if let Ok(e) = serde_json::from_slice::<Entry>(&bytes) {
                    out.push((e.request, e.response));
                }
            }
        }
        out
    }
}

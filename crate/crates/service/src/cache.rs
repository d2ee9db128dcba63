//! Disk cache for on-the-fly model results.
//!
//! Entries live at `<data_dir>/<story>/cache/<op>-<hash>.json` and hold the
//! full key next to the response, so a hash collision or a damaged file is
//! detected and treated as a miss.

use std::collections::HashMap;
use std::future::Future;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::ApiError;

#[derive(Serialize, Deserialize)]
struct Entry {
    key: Value,
    response: Value,
}

#[derive(Debug, Default)]
pub struct Cache {
    /// Skip reads (writes still happen).
    bypass_reads: bool,
    locks: Mutex<HashMap<PathBuf, Arc<tokio::sync::Mutex<()>>>>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Cache {
    pub fn new(bypass_reads: bool) -> Self {
        Cache {
            bypass_reads,
            locks: Mutex::default(),
        }
    }

    pub fn entry_path(dir: &Path, op: &str, key: &Value) -> PathBuf {
        let hash = sha256_hex(key.to_string().as_bytes());
        dir.join(format!("{op}-{}.json", &hash[..16]))
    }

    fn lock_for(&self, path: &Path) -> Arc<tokio::sync::Mutex<()>> {
        self.locks
            .lock()
            .expect("cache lock table poisoned")
            .entry(path.to_path_buf())
            .or_default()
            .clone()
    }

    async fn read(path: &Path, key: &Value) -> Option<Value> {
        let bytes = tokio::fs::read(path).await.ok()?;
        match serde_json::from_slice::<Entry>(&bytes) {
            Ok(entry) if &entry.key == key => Some(entry.response),
            Ok(_) => {
                tracing::warn!(path = %path.display(), "cache key mismatch; recomputing");
                None
            }
            Err(e) => {
                tracing::warn!(path = %path.display(), "corrupt cache entry ({e}); recomputing");
                None
            }
        }
    }

    async fn write(path: &Path, key: Value, response: &Value) {
        let entry = Entry {
            key,
            response: response.clone(),
        };
        let bytes = match serde_json::to_vec_pretty(&entry) {
            Ok(b) => b,
            Err(e) => {
                tracing::warn!("cache entry not serializable: {e}");
                return;
            }
        };
        let result = async {
            if let Some(parent) = path.parent() {
                tokio::fs::create_dir_all(parent).await?;
            }
            let tmp = path.with_extension("tmp");
            tokio::fs::write(&tmp, bytes).await?;
            tokio::fs::rename(&tmp, path).await
        }
        .await;
        if let Err(e) = result {
            tracing::warn!(path = %path.display(), "cache write failed: {e}");
        }
    }

    /// Returns the cached response for `key`, or runs `compute` and stores
    /// its result. Concurrent calls for the same key wait for the first.
    pub async fn get_or_compute<F, Fut>(&self, dir: &Path, op: &str, key: Value, compute: F) -> Result<Value, ApiError>
    where
        F: FnOnce() -> Fut,
        Fut: Future<Output = Result<Value, ApiError>>,
    {
        let path = Self::entry_path(dir, op, &key);
        let lock = self.lock_for(&path);
        let _guard = lock.lock().await;
        if !self.bypass_reads {
            if let Some(hit) = Self::read(&path, &key).await {
                return Ok(hit);
            }
        }
        let value = compute().await?;
        Self::write(&path, key, &value).await;
        Ok(value)
    }
}

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use crate::error::GatewayError;

/// Content-addressed response cache: an in-memory map backed by one file
/// per key under an optional directory. Disk writes go to a temp file in
/// the same directory and are renamed into place.
#[derive(Debug)]
pub struct ResponseCache {
    dir: Option<PathBuf>,
    memory: Mutex<HashMap<String, String>>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        ResponseCache {
            dir: None,
            memory: Mutex::new(HashMap::new()),
        }
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|source| GatewayError::Cache {
            path: dir.clone(),
            source,
        })?;
        Ok(ResponseCache {
            dir: Some(dir),
            memory: Mutex::new(HashMap::new()),
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn path_for(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{key}.json")))
    }

    pub fn get(&self, key: &str) -> Option<String> {
        if let Some(v) = self.memory.lock().expect("cache poisoned").get(key) {
            return Some(v.clone());
        }
        let value = fs::read_to_string(self.path_for(key)?).ok()?;
        self.memory
            .lock()
            .expect("cache poisoned")
            .insert(key.to_string(), value.clone());
        Some(value)
    }

    pub fn put(&self, key: &str, value: &str) -> Result<(), GatewayError> {
        if let (Some(dir), Some(path)) = (self.dir.as_ref(), self.path_for(key)) {
            let cache_err = |source| GatewayError::Cache {
                path: path.clone(),
                source,
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(cache_err)?;
            tmp.write_all(value.as_bytes()).map_err(cache_err)?;
            tmp.persist(&path).map_err(|e| cache_err(e.error))?;
        }
        self.memory
            .lock()
            .expect("cache poisoned")
            .insert(key.to_string(), value.to_string());
        Ok(())
    }
}

/// Hex SHA-256 over length-prefixed parts, so part boundaries cannot
/// collide.
pub fn content_key(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    hex::encode(h.finalize())
}

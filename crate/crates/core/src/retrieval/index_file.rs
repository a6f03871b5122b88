//! Binary index layout (little-endian):
//!
//! ```text
//! magic    [u8; 8]  "RRVIDX\0\0"
//! version  u32
//! dims     u32
//! id_len   u32, then id_len bytes of backend id (UTF-8)
//! count    u64
//! count × record:
//!     pair hash     [u8; 16]
//!     problem hash  [u8; 16]
//!     h_cw, h_cr, h_p   3 × dims × f64
//! ```
//!
//! The sidecar JSON manifest maps hex hashes back to pair and problem ids.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EditVectorRecord, VectorIndex};
use crate::error::RetrievalError;
use crate::modelgateway::EmbeddingVector;

pub const INDEX_MAGIC: &[u8; 8] = b"RRVIDX\0\0";
pub const INDEX_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    backend_id: String,
    dims: usize,
    pairs: BTreeMap<String, String>,
    problems: BTreeMap<String, String>,
}

fn id_hash(id: &str) -> [u8; 16] {
    let digest = Sha256::digest(id.as_bytes());
    let mut out = [0u8; 16];
    out.copy_from_slice(&digest[..16]);
    out
}

pub fn manifest_path(index_path: &Path) -> PathBuf {
    let mut name = index_path.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn io_err(path: &Path, e: std::io::Error) -> RetrievalError {
    RetrievalError::IndexFormat(format!("{}: {e}", path.display()))
}

/// Writes `index` to `path` plus `<path>.manifest.json`.
pub fn write_index(index: &VectorIndex, path: &Path) -> Result<(), RetrievalError> {
    let mut manifest = Manifest {
        version: INDEX_VERSION,
        backend_id: index.backend_id().to_string(),
        dims: index.dims(),
        pairs: BTreeMap::new(),
        problems: BTreeMap::new(),
    };
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| io_err(path, e));
    put(INDEX_MAGIC)?;
    put(&INDEX_VERSION.to_le_bytes())?;
    put(&(index.dims() as u32).to_le_bytes())?;
    let id = index.backend_id().as_bytes();
    put(&(id.len() as u32).to_le_bytes())?;
    put(id)?;
    put(&(index.len() as u64).to_le_bytes())?;
    for r in index.all_records() {
        let ph = id_hash(&r.pair_id);
        let qh = id_hash(&r.problem_id);
        if let Some(prev) = manifest.pairs.insert(hex::encode(ph), r.pair_id.clone()) {
            if prev != r.pair_id {
                return Err(RetrievalError::IndexFormat(format!(
                    "pair id hash collision: `{prev}` vs `{}`",
                    r.pair_id
                )));
            }
        }
        manifest.problems.insert(hex::encode(qh), r.problem_id.clone());
        put(&ph)?;
        put(&qh)?;
        for v in [&r.h_cw, &r.h_cr, &r.h_p] {
            for x in &v.values {
                put(&x.to_le_bytes())?;
            }
        }
    }
    w.flush().map_err(|e| io_err(path, e))?;
    let mpath = manifest_path(path);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&mpath, json).map_err(|e| io_err(&mpath, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], RetrievalError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| RetrievalError::IndexFormat("truncated index file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, RetrievalError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, RetrievalError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn vector(&mut self, dims: usize) -> Result<EmbeddingVector, RetrievalError> {
        let raw = self.take(dims * 8)?;
        Ok(EmbeddingVector::new(
            raw.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect(),
        ))
    }
}

pub fn read_index(path: &Path) -> Result<VectorIndex, RetrievalError> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| io_err(path, e))?;
    let mpath = manifest_path(path);
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(&mpath).map_err(|e| io_err(&mpath, e))?)
        .map_err(|e| RetrievalError::IndexFormat(format!("{}: {e}", mpath.display())))?;

    let mut r = Reader { bytes: &bytes, pos: 0 };
    if r.take(8)? != INDEX_MAGIC {
        return Err(RetrievalError::IndexFormat("bad magic".into()));
    }
    let version = r.u32()?;
    if version != INDEX_VERSION {
        return Err(RetrievalError::IndexFormat(format!("unsupported version {version}")));
    }
    let dims = r.u32()? as usize;
    let id_len = r.u32()? as usize;
    let backend_id = String::from_utf8(r.take(id_len)?.to_vec())
        .map_err(|_| RetrievalError::IndexFormat("backend id is not UTF-8".into()))?;
    if dims != manifest.dims || backend_id != manifest.backend_id {
        return Err(RetrievalError::IndexFormat("manifest does not match index header".into()));
    }
    let count = r.u64()? as usize;
    let mut records = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let ph = hex::encode(r.take(16)?);
        let qh = hex::encode(r.take(16)?);
        let lookup = |map: &BTreeMap<String, String>, h: &str| {
            map.get(h)
                .cloned()
                .ok_or_else(|| RetrievalError::IndexFormat(format!("hash {h} missing from manifest")))
        };
        let pair_id = lookup(&manifest.pairs, &ph)?;
        let problem_id = lookup(&manifest.problems, &qh)?;
        let h_cw = r.vector(dims)?;
        let h_cr = r.vector(dims)?;
        let h_p = r.vector(dims)?;
        records.push(EditVectorRecord {
            pair_id,
            problem_id,
            h_cw,
            h_cr,
            h_p,
        });
    }
    if r.pos != bytes.len() {
        return Err(RetrievalError::IndexFormat("trailing bytes after records".into()));
    }
    VectorIndex::new(dims, backend_id, records)
}

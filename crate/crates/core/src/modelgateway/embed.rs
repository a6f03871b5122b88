use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::cache::{content_key, ResponseCache};
use super::CallRecord;
use crate::error::GatewayError;
use crate::sync::Semaphore;

/// Dense embedding. Values produced by the gateway are finite, L2-normalized
/// and rounded to `f32` precision, so differences of two embeddings are
/// exact in `f64` and `a + (b - a) == b` holds componentwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        EmbeddingVector { values }
    }

    pub fn zeros(dims: usize) -> Self {
        EmbeddingVector {
            values: vec![0.0; dims],
        }
    }

    pub fn dims(&self) -> usize {
        self.values.len()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Unit-length copy snapped to the `f32` grid. Zero vectors stay zero.
    pub fn normalized(&self) -> EmbeddingVector {
        let norm = self.norm();
        if norm == 0.0 {
            return self.clone();
        }
        EmbeddingVector {
            values: self.values.iter().map(|v| f64::from((v / norm) as f32)).collect(),
        }
    }
}

/// A service (or mock) that turns texts into raw vectors.
pub trait EmbeddingBackend: Send + Sync {
    fn id(&self) -> &str;
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError>;
    /// Calls made before giving up on the last request (1 for local mocks).
    fn last_attempts(&self) -> u32 {
        1
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Splits on non-alphanumeric characters.
pub fn mock_tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty())
}

/// Raw hashed token-bag counts: each token adds 1 to bucket
/// `fnv1a64(token) % dims`.
pub fn mock_token_counts(text: &str, dims: usize) -> Vec<f64> {
    let mut v = vec![0.0; dims];
    for tok in mock_tokens(text) {
        v[(fnv1a64(tok.as_bytes()) % dims as u64) as usize] += 1.0;
    }
    v
}

/// Deterministic offline embedding: hashed token bag, L2-normalized. The
/// second field is true when the text has no tokens (zero vector).
pub fn mock_embed(text: &str, dims: usize) -> (EmbeddingVector, bool) {
    let raw = EmbeddingVector::new(mock_token_counts(text, dims));
    let degenerate = raw.is_zero();
    (raw.normalized(), degenerate)
}

pub const DEFAULT_MOCK_DIMS: usize = 64;

#[derive(Debug, Clone)]
pub struct MockEmbedder {
    dims: usize,
    id: String,
}

impl MockEmbedder {
    pub fn new(dims: usize) -> Self {
        MockEmbedder {
            dims,
            id: format!("mock-hashbag-{dims}"),
        }
    }
}

impl Default for MockEmbedder {
    fn default() -> Self {
        MockEmbedder::new(DEFAULT_MOCK_DIMS)
    }
}

impl EmbeddingBackend for MockEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        Ok(texts.iter().map(|t| mock_token_counts(t, self.dims)).collect())
    }
}

#[derive(Serialize, Deserialize)]
struct CachedEmbedding {
    raw: Vec<f64>,
}

/// Caching, dimension-checking front of an [`EmbeddingBackend`].
pub struct EmbeddingClient {
    backend: Box<dyn EmbeddingBackend>,
    dims: usize,
    cache: ResponseCache,
    in_flight: Semaphore,
    max_batch: usize,
    calls: Mutex<Vec<CallRecord>>,
}

impl EmbeddingClient {
    pub fn new(backend: Box<dyn EmbeddingBackend>, dims: usize, cache: ResponseCache) -> Self {
        EmbeddingClient {
            backend,
            dims,
            cache,
            in_flight: Semaphore::new(4),
            max_batch: 32,
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn with_in_flight_limit(mut self, limit: usize) -> Self {
        self.in_flight = Semaphore::new(limit);
        self
    }

    pub fn backend_id(&self) -> &str {
        self.backend.id()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn cache_key(&self, text: &str) -> String {
        content_key(&["embed", self.backend.id(), text])
    }

    /// Backend invocations so far (cache hits are not recorded).
    pub fn calls(&self) -> Vec<CallRecord> {
        self.calls.lock().expect("call log poisoned").clone()
    }

    pub fn embed(&self, text: &str) -> Result<EmbeddingVector, GatewayError> {
        Ok(self.embed_texts(&[text.to_string()])?.remove(0))
    }

    /// One normalized vector per input text, in input order.
    pub fn embed_texts(&self, batch: &[String]) -> Result<Vec<EmbeddingVector>, GatewayError> {
        if batch.is_empty() {
            return Err(GatewayError::InvalidRequest("empty embedding batch".into()));
        }
        if let Some(i) = batch.iter().position(|t| t.is_empty()) {
            return Err(GatewayError::InvalidRequest(format!("text #{i} is empty")));
        }
        let keys: Vec<String> = batch.iter().map(|t| self.cache_key(t)).collect();
        let mut raw: Vec<Option<Vec<f64>>> = keys
            .iter()
            .map(|k| {
                self.cache
                    .get(k)
                    .and_then(|s| serde_json::from_str::<CachedEmbedding>(&s).ok())
                    .map(|c| c.raw)
            })
            .collect();

        let mut missing: Vec<usize> = (0..batch.len()).filter(|&i| raw[i].is_none()).collect();
        // Duplicate texts inside one batch are fetched once.
        missing.dedup_by(|a, b| keys[*a] == keys[*b]);
        for chunk in missing.chunks(self.max_batch) {
            let texts: Vec<String> = chunk.iter().map(|&i| batch[i].clone()).collect();
            let vectors = {
                let _permit = self.in_flight.acquire();
                let result = self.backend.embed_batch(&texts);
                self.calls.lock().expect("call log poisoned").push(CallRecord {
                    backend_id: self.backend.id().to_string(),
                    cache_keys: chunk.iter().map(|&i| keys[i].clone()).collect(),
                    attempts: self.backend.last_attempts(),
                });
                result?
            };
            if vectors.len() != texts.len() {
                return Err(GatewayError::Payload(format!(
                    "asked for {} embeddings, got {}",
                    texts.len(),
                    vectors.len()
                )));
            }
            for (&i, v) in chunk.iter().zip(vectors) {
                if v.len() != self.dims {
                    return Err(GatewayError::Config(format!(
                        "backend `{}` returned {} dims, configured {}",
                        self.backend.id(),
                        v.len(),
                        self.dims
                    )));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(GatewayError::Payload("non-finite embedding value".into()));
                }
                let payload = serde_json::to_string(&CachedEmbedding { raw: v.clone() }).expect("serializes");
                self.cache.put(&keys[i], &payload)?;
                raw[i] = Some(v);
            }
        }
        batch
            .iter()
            .enumerate()
            .map(|(i, _)| {
                let v = match raw[i].take() {
                    Some(v) => v,
                    // Duplicate of an earlier text in this batch.
                    None => self
                        .cache
                        .get(&keys[i])
                        .and_then(|s| serde_json::from_str::<CachedEmbedding>(&s).ok())
                        .map(|c| c.raw)
                        .ok_or_else(|| GatewayError::Payload("embedding missing after fetch".into()))?,
                };
                Ok(EmbeddingVector::new(v).normalized())
            })
            .collect()
    }
}

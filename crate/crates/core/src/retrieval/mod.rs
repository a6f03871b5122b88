//! Edit-vector retrieval.
//!
//! Each repair pair is stored as the embeddings of its incorrect and
//! correct code plus their difference, the edit vector `h_p = h_cr - h_cw`.
//! A buggy program `c` is matched against the pairs of its own problem:
//!
//! * base retrieval scores a pair by how close the "virtually repaired"
//!   embedding `h_c + h_p` lands to the pair's `h_cr`;
//! * iterative retrieval, after a failed attempt `y_w`, adds a deviation
//!   term `1 - sim(h_cw + (h_yw - h_c), h_cr)` that rewards pairs whose
//!   repair direction differs from the one that just failed.
//!
//! Similarities are the cosine mapped affinely onto `[0, 1]`. Scans are
//! exhaustive per problem; ties are broken by ascending pair id.

mod index_file;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use index_file::{manifest_path, read_index, write_index, INDEX_MAGIC, INDEX_VERSION};

use crate::corpus::RepairDb;
use crate::error::{GatewayError, RetrievalError};
use crate::modelgateway::{EmbeddingClient, EmbeddingVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditVectorRecord {
    pub pair_id: String,
    pub problem_id: String,
    pub h_cw: EmbeddingVector,
    pub h_cr: EmbeddingVector,
    pub h_p: EmbeddingVector,
}

impl EditVectorRecord {
    pub fn new(
        pair_id: impl Into<String>,
        problem_id: impl Into<String>,
        h_cw: EmbeddingVector,
        h_cr: EmbeddingVector,
    ) -> Result<Self, RetrievalError> {
        let h_p = edit_vector(&h_cw, &h_cr)?;
        Ok(EditVectorRecord {
            pair_id: pair_id.into(),
            problem_id: problem_id.into(),
            h_cw,
            h_cr,
            h_p,
        })
    }
}

fn check_dims(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<(), RetrievalError> {
    if a.dims() == b.dims() {
        Ok(())
    } else {
        Err(RetrievalError::DimsMismatch {
            left: a.dims(),
            right: b.dims(),
        })
    }
}

/// Componentwise `h_cr - h_cw`.
pub fn edit_vector(h_cw: &EmbeddingVector, h_cr: &EmbeddingVector) -> Result<EmbeddingVector, RetrievalError> {
    check_dims(h_cw, h_cr)?;
    Ok(EmbeddingVector::new(
        h_cr.values.iter().zip(&h_cw.values).map(|(r, w)| r - w).collect(),
    ))
}

pub fn add(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<EmbeddingVector, RetrievalError> {
    check_dims(a, b)?;
    Ok(EmbeddingVector::new(
        a.values.iter().zip(&b.values).map(|(x, y)| x + y).collect(),
    ))
}

/// A similarity value; `degenerate` is set when either side was the zero
/// vector, in which case `value` is 0.5.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub value: f64,
    pub degenerate: bool,
}

/// `(1 + cos(u, v)) / 2`.
pub fn similarity(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<Similarity, RetrievalError> {
    check_dims(u, v)?;
    Ok(similarity_of(&u.values, &v.values))
}

fn similarity_of(u: &[f64], v: &[f64]) -> Similarity {
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Similarity {
            value: 0.5,
            degenerate: true,
        };
    }
    let cos = (dot / (nu * nv).sqrt()).clamp(-1.0, 1.0);
    Similarity {
        value: (1.0 + cos) / 2.0,
        degenerate: false,
    }
}

/// Per-problem buckets of edit-vector records. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    dims: usize,
    backend_id: String,
    buckets: BTreeMap<String, Vec<EditVectorRecord>>,
}

impl VectorIndex {
    /// Records are bucketed by problem and sorted by pair id.
    pub fn new(dims: usize, backend_id: impl Into<String>, records: Vec<EditVectorRecord>) -> Result<Self, RetrievalError> {
        let mut buckets: BTreeMap<String, Vec<EditVectorRecord>> = BTreeMap::new();
        for r in records {
            for v in [&r.h_cw, &r.h_cr, &r.h_p] {
                if v.dims() != dims {
                    return Err(RetrievalError::DimsMismatch {
                        left: dims,
                        right: v.dims(),
                    });
                }
            }
            buckets.entry(r.problem_id.clone()).or_default().push(r);
        }
        for b in buckets.values_mut() {
            b.sort_by(|x, y| x.pair_id.cmp(&y.pair_id));
        }
        Ok(VectorIndex {
            dims,
            backend_id: backend_id.into(),
            buckets,
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn backend_id(&self) -> &str {
        &self.backend_id
    }

    pub fn records(&self, problem_id: &str) -> &[EditVectorRecord] {
        self.buckets.get(problem_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn record(&self, problem_id: &str, pair_id: &str) -> Option<&EditVectorRecord> {
        self.records(problem_id).iter().find(|r| r.pair_id == pair_id)
    }

    pub fn problems(&self) -> impl Iterator<Item = &str> {
        self.buckets.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.buckets.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all_records(&self) -> impl Iterator<Item = &EditVectorRecord> {
        self.buckets.values().flatten()
    }

    fn bucket(&self, problem_id: &str) -> Result<&[EditVectorRecord], RetrievalError> {
        match self.buckets.get(problem_id) {
            Some(b) if !b.is_empty() => Ok(b),
            _ => Err(RetrievalError::NoCandidates(problem_id.to_string())),
        }
    }

    fn check_query(&self, v: &EmbeddingVector) -> Result<(), RetrievalError> {
        if v.dims() == self.dims {
            Ok(())
        } else {
            Err(RetrievalError::DimsMismatch {
                left: self.dims,
                right: v.dims(),
            })
        }
    }
}

/// Embeds every pair's codes and builds the index.
pub fn build_index(db: &RepairDb, embeddings: &EmbeddingClient) -> Result<VectorIndex, IndexBuildError> {
    let mut texts = Vec::with_capacity(db.len() * 2);
    for p in &db.pairs {
        texts.push(p.c_w.clone());
        texts.push(p.c_r.clone());
    }
    let vectors = if texts.is_empty() {
        Vec::new()
    } else {
        embeddings.embed_texts(&texts)?
    };
    let mut records = Vec::with_capacity(db.len());
    for (p, pair) in db.pairs.iter().zip(vectors.chunks(2)) {
        records.push(EditVectorRecord::new(
            &p.pair_id,
            &p.problem_id,
            pair[0].clone(),
            pair[1].clone(),
        )?);
    }
    Ok(VectorIndex::new(embeddings.dims(), embeddings.backend_id(), records)?)
}

#[derive(Debug, thiserror::Error)]
pub enum IndexBuildError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

impl From<IndexBuildError> for crate::Error {
    fn from(e: IndexBuildError) -> Self {
        match e {
            IndexBuildError::Gateway(g) => crate::Error::Gateway(g),
            IndexBuildError::Retrieval(r) => crate::Error::Retrieval(r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub pair_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Retrieval {
    pub hits: Vec<Hit>,
    /// How many fewer than `k` records the problem had, if any.
    pub shortage: Option<usize>,
    /// True if any similarity involved a zero vector.
    pub degenerate: bool,
}

fn top_k(mut scored: Vec<Hit>, k: usize, degenerate: bool) -> Retrieval {
    scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.pair_id.cmp(&b.pair_id)));
    let shortage = (scored.len() < k).then(|| k - scored.len());
    scored.truncate(k);
    Retrieval {
        hits: scored,
        shortage,
        degenerate,
    }
}

/// Base score of one record: `sim(h_c + h_p, h_cr)`.
pub fn base_score(h_c: &EmbeddingVector, record: &EditVectorRecord) -> Result<Similarity, RetrievalError> {
    similarity(&add(h_c, &record.h_p)?, &record.h_cr)
}

/// `1 - sim(h_cw + (h_yw - h_c), h_cr)`.
pub fn deviation(
    h_c: &EmbeddingVector,
    h_yw: &EmbeddingVector,
    record: &EditVectorRecord,
) -> Result<Similarity, RetrievalError> {
    let failed_edit = edit_vector(h_c, h_yw)?;
    let s = similarity(&add(&record.h_cw, &failed_edit)?, &record.h_cr)?;
    Ok(Similarity {
        value: 1.0 - s.value,
        degenerate: s.degenerate,
    })
}

/// Deviation plus base score; lies in `[0, 2]`.
pub fn iterative_score(
    h_c: &EmbeddingVector,
    h_yw: &EmbeddingVector,
    record: &EditVectorRecord,
) -> Result<Similarity, RetrievalError> {
    let dev = deviation(h_c, h_yw, record)?;
    let base = base_score(h_c, record)?;
    Ok(Similarity {
        value: dev.value + base.value,
        degenerate: dev.degenerate || base.degenerate,
    })
}

/// Top-k pairs of `problem_id` by base score.
pub fn base_retrieve(
    index: &VectorIndex,
    h_c: &EmbeddingVector,
    problem_id: &str,
    k: usize,
) -> Result<Retrieval, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::ZeroK);
    }
    index.check_query(h_c)?;
    let mut degenerate = false;
    let mut scored = Vec::new();
    for r in index.bucket(problem_id)? {
        let s = base_score(h_c, r)?;
        degenerate |= s.degenerate;
        scored.push(Hit {
            pair_id: r.pair_id.clone(),
            score: s.value,
        });
    }
    Ok(top_k(scored, k, degenerate))
}

/// Top-k pairs of `problem_id` by [`iterative_score`] against the failed
/// attempt embedding `h_yw`.
pub fn iterative_retrieve(
    index: &VectorIndex,
    h_c: &EmbeddingVector,
    h_yw: &EmbeddingVector,
    problem_id: &str,
    k: usize,
) -> Result<Retrieval, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::ZeroK);
    }
    index.check_query(h_c)?;
    index.check_query(h_yw)?;
    let mut degenerate = false;
    let mut scored = Vec::new();
    for r in index.bucket(problem_id)? {
        let s = iterative_score(h_c, h_yw, r)?;
        degenerate |= s.degenerate;
        scored.push(Hit {
            pair_id: r.pair_id.clone(),
            score: s.value,
        });
    }
    Ok(top_k(scored, k, degenerate))
}

mod common;

use proptest::prelude::*;

use refrepair::corpus::{build_retrieval_db, ingest_corpus, CorpusSource, DbOptions};
use refrepair::modelgateway::{EmbeddingClient, EmbeddingVector, MockEmbedder, ResponseCache};
use refrepair::retrieval::{
    base_retrieve, build_index, iterative_retrieve, manifest_path, read_index, similarity, write_index,
    EditVectorRecord, VectorIndex,
};

use common::{oracle_base_score, oracle_sim, toy_dir};

fn toy_index() -> (VectorIndex, EmbeddingClient) {
    let store = ingest_corpus(&CorpusSource::Directory(toy_dir())).unwrap();
    let db = build_retrieval_db(&store, &DbOptions::default()).unwrap();
    let client = EmbeddingClient::new(Box::new(MockEmbedder::new(64)), 64, ResponseCache::in_memory());
    (build_index(&db, &client).unwrap(), client)
}

#[test]
fn index_file_round_trip() {
    let (index, client) = toy_index();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.idx");
    write_index(&index, &path).unwrap();
    let back = read_index(&path).unwrap();
    assert_eq!(back, index);
    let h_c = client.embed("a = int(input())\nprint(a)\n").unwrap();
    for problem in index.problems() {
        assert_eq!(
            base_retrieve(&back, &h_c, problem, 3).unwrap(),
            base_retrieve(&index, &h_c, problem, 3).unwrap()
        );
    }
}

#[test]
fn corrupt_index_files_are_rejected() {
    let (index, _) = toy_index();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.idx");
    write_index(&index, &path).unwrap();
    let good = std::fs::read(&path).unwrap();

    let mut bad_magic = good.clone();
    bad_magic[0] ^= 0xff;
    std::fs::write(&path, &bad_magic).unwrap();
    assert!(read_index(&path).is_err());

    std::fs::write(&path, &good[..good.len() - 3]).unwrap();
    assert!(read_index(&path).is_err());

    let mut trailing = good.clone();
    trailing.push(0);
    std::fs::write(&path, &trailing).unwrap();
    assert!(read_index(&path).is_err());

    std::fs::write(&path, &good).unwrap();
    std::fs::remove_file(manifest_path(&path)).unwrap();
    assert!(read_index(&path).is_err());
}

#[test]
fn unknown_problem_and_zero_k() {
    let (index, client) = toy_index();
    let h = client.embed("x = 1\n").unwrap();
    assert!(base_retrieve(&index, &h, "no_such_problem", 3).is_err());
    assert!(base_retrieve(&index, &h, "sum_two", 0).is_err());
    let wrong_dims = EmbeddingVector::new(vec![1.0; 5]);
    assert!(base_retrieve(&index, &wrong_dims, "sum_two", 3).is_err());
}

#[test]
fn zero_vector_is_flagged() {
    let z = EmbeddingVector::zeros(4);
    let u = EmbeddingVector::new(vec![1.0, 0.0, 0.0, 0.0]);
    let s = similarity(&z, &u).unwrap();
    assert_eq!(s.value, 0.5);
    assert!(s.degenerate);
    assert!(similarity(&u, &EmbeddingVector::zeros(3)).is_err());
}

fn vector(dims: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..1.0, dims)
}

proptest! {
    #[test]
    fn similarity_is_symmetric_and_bounded(u in vector(8), v in vector(8)) {
        let a = similarity(&EmbeddingVector::new(u.clone()), &EmbeddingVector::new(v.clone())).unwrap().value;
        let b = similarity(&EmbeddingVector::new(v.clone()), &EmbeddingVector::new(u.clone())).unwrap().value;
        prop_assert_eq!(a, b);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert_eq!(a, oracle_sim(&u, &v));
    }

    #[test]
    fn base_hits_are_sorted_and_exact(
        records in proptest::collection::vec((vector(6), vector(6)), 1..40),
        query in vector(6),
        k in 1usize..10,
    ) {
        let recs: Vec<EditVectorRecord> = records
            .iter()
            .enumerate()
            .map(|(i, (w, r))| {
                EditVectorRecord::new(format!("p{i:03}"), "q", EmbeddingVector::new(w.clone()), EmbeddingVector::new(r.clone())).unwrap()
            })
            .collect();
        let index = VectorIndex::new(6, "t", recs).unwrap();
        let h_c = EmbeddingVector::new(query.clone());
        let got = base_retrieve(&index, &h_c, "q", k).unwrap();
        prop_assert_eq!(got.hits.len(), k.min(records.len()));
        for w in got.hits.windows(2) {
            prop_assert!(w[0].score > w[1].score || (w[0].score == w[1].score && w[0].pair_id < w[1].pair_id));
        }
        for h in &got.hits {
            let r = index.record("q", &h.pair_id).unwrap();
            prop_assert_eq!(h.score, oracle_base_score(&query, &r.h_cw.values, &r.h_cr.values));
        }
        // Iterative scores add a non-negative deviation term to the base score.
        let it = iterative_retrieve(&index, &h_c, &h_c, "q", k).unwrap();
        for h in &it.hits {
            let r = index.record("q", &h.pair_id).unwrap();
            let base = oracle_base_score(&query, &r.h_cw.values, &r.h_cr.values);
            prop_assert!(h.score >= base && h.score <= base + 1.0);
        }
    }
}

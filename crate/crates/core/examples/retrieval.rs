//! Base and iterative retrieval over the toy corpus with mock embeddings.
//!
//! ```text
//! cargo run --example retrieval
//! ```

use std::path::Path;

use refrepair::corpus::{build_retrieval_db, ingest_corpus, CorpusSource, DbOptions};
use refrepair::modelgateway::{EmbeddingClient, MockEmbedder, ResponseCache};
use refrepair::retrieval::{base_retrieve, build_index, iterative_retrieve, Retrieval};

fn show(label: &str, r: &Retrieval) {
    println!("{label}:");
    for h in &r.hits {
        println!("  {}  {:.6}", h.pair_id, h.score);
    }
}

fn main() -> refrepair::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/toy");
    let store = ingest_corpus(&CorpusSource::Directory(dir))?;
    let db = build_retrieval_db(&store, &DbOptions::default())?;
    let embeddings = EmbeddingClient::new(Box::new(MockEmbedder::new(64)), 64, ResponseCache::in_memory());
    let index = build_index(&db, &embeddings)?;

    let buggy = "line = input()\nparts = line.split()\na = parts[0]\nb = parts[1]\nprint(a + b)\n";
    let failed_fix = "line = input()\nparts = line.split()\na = parts[0]\nb = parts[1]\nprint(int(a) + b)\n";
    let h_c = embeddings.embed(buggy)?;
    let h_yw = embeddings.embed(failed_fix)?;

    show("base", &base_retrieve(&index, &h_c, "sum_two", 3)?);
    show("iterative (guided by the failed fix)", &iterative_retrieve(&index, &h_c, &h_yw, "sum_two", 3)?);
    Ok(())
}

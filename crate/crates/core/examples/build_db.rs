//! Mines repair pairs from the bundled toy corpus.
//!
//! ```text
//! cargo run --example build_db
//! ```

use std::path::Path;

use refrepair::corpus::{build_retrieval_db, ingest_corpus, CorpusSource, DbOptions};

fn main() -> refrepair::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/toy");
    let store = ingest_corpus(&CorpusSource::Directory(dir))?;
    println!(
        "{} problems, {} submissions, {} skipped records",
        store.problems.len(),
        store.submissions.len(),
        store.skipped
    );

    let db = build_retrieval_db(&store, &DbOptions::default())?;
    println!("{} repair pairs\n", db.len());
    println!("{:<18} {:<14} {:<5} {:>6}", "pair", "problem", "user", "score");
    for p in &db.pairs {
        println!("{:<18} {:<14} {:<5} {:>6.3}", p.pair_id, p.problem_id, p.user_id, p.consistency);
    }
    Ok(())
}

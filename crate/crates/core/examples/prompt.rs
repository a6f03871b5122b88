//! Builds the repair prompt for one toy sample from its retrieved
//! references, using the scripted chat backend for pair descriptions.
//!
//! ```text
//! cargo run --example prompt
//! ```

use std::path::Path;

use refrepair::corpus::{build_retrieval_db, ingest_corpus, CorpusSource, DbOptions};
use refrepair::generation::{build_contexts, build_repair_prompt, DescriptionCache, GenerationSettings, PromptInputs};
use refrepair::modelgateway::{ChatClient, EmbeddingClient, MockEmbedder, ResponseCache, ScriptedChat};
use refrepair::retrieval::{base_retrieve, build_index};

fn main() -> refrepair::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/toy");
    let store = ingest_corpus(&CorpusSource::Directory(dir.clone()))?;
    let db = build_retrieval_db(&store, &DbOptions::default())?;
    let embeddings = EmbeddingClient::new(Box::new(MockEmbedder::new(64)), 64, ResponseCache::in_memory());
    let index = build_index(&db, &embeddings)?;
    let chat = ChatClient::new(
        Box::new(ScriptedChat::from_file(&dir.join("chat_script.json"))?),
        ResponseCache::in_memory(),
    );

    let problem = store.problem("factorial").expect("toy problem");
    let buggy = "n = int(input())\nresult = 0\nfor i in range(1, n + 1):\n    result *= i\nprint(result)\n";
    let settings = GenerationSettings {
        k: 2,
        ..Default::default()
    };
    let hits = base_retrieve(&index, &embeddings.embed(buggy)?, &problem.id, settings.k)?.hits;
    let pairs: Vec<_> = hits.iter().filter_map(|h| db.get(&h.pair_id)).collect();
    let contexts = build_contexts(&chat, &DescriptionCache::new(), &settings, problem, &pairs)?;
    let prompt = build_repair_prompt(
        &PromptInputs {
            problem_statement: &problem.statement,
            buggy_code: buggy,
            language: "python",
            k: settings.k,
            token_budget: 16_000,
            templates: &settings.templates,
        },
        &contexts,
    )?;
    println!("{}", prompt.text);
    Ok(())
}

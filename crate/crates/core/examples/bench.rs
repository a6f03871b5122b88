//! Full offline benchmark on the toy fixtures: retrieval, scripted repair,
//! sandboxed judging and description scoring.
//!
//! ```text
//! cargo run --example bench
//! ```

use std::path::Path;

use refrepair::orchestrator::{load_dataset, render_table, run_benchmark, Pipeline, RunConfig};

fn main() -> refrepair::Result<()> {
    let config = RunConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/toy/config.toml"))?;
    let samples = load_dataset(config.dataset.as_deref().expect("toy config names a dataset"))?;
    let pipeline = Pipeline::from_config(config)?;
    let report = run_benchmark(&pipeline, &samples)?;
    print!("{}", render_table(&report));
    Ok(())
}

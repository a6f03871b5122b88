//! Runs a correct and a buggy program against a toy problem in the sandbox
//! and reports the improvement between them.
//!
//! ```text
//! cargo run --example judge
//! ```

use std::path::Path;

use refrepair::corpus::{ingest_corpus, CorpusSource};
use refrepair::judge::{improvement, Judge, JudgeSettings, RunnerTable};

fn main() -> refrepair::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/toy");
    let store = ingest_corpus(&CorpusSource::Directory(dir))?;
    let problem = store.problem("max_list").expect("toy problem");
    let judge = Judge::new(RunnerTable::default(), JudgeSettings::default());

    let buggy = "n = int(input())\nnums = list(map(int, input().split()))\nbest = 0\nfor x in nums:\n    if x > best:\n        best = x\nprint(best)\n";
    let fixed = "n = int(input())\nnums = list(map(int, input().split()))\nprint(max(nums))\n";

    let before = judge.evaluate_code(buggy, "python", problem)?;
    let after = judge.evaluate_code(fixed, "python", problem)?;
    for (label, eval) in [("buggy", &before), ("fixed", &after)] {
        let outcomes: Vec<_> = eval.verdicts.iter().map(|v| format!("{:?}", v.outcome)).collect();
        println!("{label}: {}/{} passed  {}", eval.pass_vector.passed(), eval.pass_vector.len(), outcomes.join(" "));
    }
    let imp = improvement(&before.pass_vector, &after.pass_vector)?;
    println!("improvement {:.3}", imp.value);
    Ok(())
}

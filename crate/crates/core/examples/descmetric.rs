//! Matches generated bug descriptions against ground truth with the
//! exact-match judge and prints the matrix and per-sample metrics.
//!
//! ```text
//! cargo run --example descmetric
//! ```

use refrepair::descmetric::{match_sets, sample_score, DescMetricSettings, ExactMatchJudge, JudgeContext};
use refrepair::modelgateway::{ChatClient, ResponseCache};

fn main() -> refrepair::Result<()> {
    let judge = ChatClient::new(Box::new(ExactMatchJudge), ResponseCache::in_memory());
    let settings = DescMetricSettings::default();
    let ctx = JudgeContext {
        problem: "Read n and print n factorial.",
        code: "n = int(input())\nr = 0\nfor i in range(1, n + 1):\n    r += i\nprint(r)\n",
        language: "python",
    };
    let truth = vec![
        "The product starts at 0 instead of 1.".to_string(),
        "The loop adds instead of multiplying.".to_string(),
    ];
    let generated = vec![
        "The loop adds instead of multiplying.".to_string(),
        "The output is missing a newline.".to_string(),
        "The product starts at 0 instead of 1.".to_string(),
    ];

    let matrix = match_sets(&judge, &settings, &ctx, &truth, &generated)?;
    for row in &matrix.entries {
        println!("{row:?}");
    }
    println!("matching {:?}", matrix.matching);
    for all_pass in [true, false] {
        let s = sample_score(&matrix, truth.len(), generated.len(), all_pass);
        println!(
            "all_pass={all_pass}: TP {} FP {} FN {}  P {:.3} R {:.3} F1 {:.3}",
            s.tp, s.fp, s.fn_, s.precision, s.recall, s.f1
        );
    }
    Ok(())
}

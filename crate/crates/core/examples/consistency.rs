//! Consistency score and unified diff between an incorrect and a correct
//! submission.
//!
//! ```text
//! cargo run --example consistency
//! ```

use refrepair::corpus::DEFAULT_THRESHOLD;
use refrepair::diffing::{consistency_score, render_unified_diff};

fn main() {
    let incorrect = "n = int(input())\ntotal = 0\nfor i in range(n):\n    total += i\nprint(total)\n";
    let correct = "n = int(input())\ntotal = 0\nfor i in range(n + 1):\n    total += i\nprint(total)\n";

    print!("{}", render_unified_diff(incorrect, correct, 3));
    let score = consistency_score(incorrect, correct).expect("correct code is non-empty");
    println!("\nconsistency {score:.3} (admitted: {})", score >= DEFAULT_THRESHOLD);

    let rewrite = "import sys\nprint(sum(range(int(sys.stdin.read()) + 1)))\n";
    let score = consistency_score(rewrite, correct).unwrap();
    println!("rewrite consistency {score:.3} (admitted: {})", score >= DEFAULT_THRESHOLD);
}

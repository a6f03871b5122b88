#![allow(dead_code)]

//! Slow, obviously-correct reference computations shared by the
//! integration tests.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn toy_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/toy")
}

/// Lines with trailing whitespace removed; blank lines dropped unless
/// `keep_blank`.
pub fn oracle_canonical(text: &str, keep_blank: bool) -> Vec<String> {
    let mut out = Vec::new();
    if text.is_empty() {
        return out;
    }
    for raw in text.split('\n') {
        let line = raw.trim_end();
        if line.is_empty() && !keep_blank {
            continue;
        }
        out.push(line.to_string());
    }
    // A trailing newline does not start another line.
    if keep_blank && text.ends_with('\n') {
        out.pop();
    }
    out
}

/// Quadratic dynamic-programming LCS length.
pub fn oracle_lcs(a: &[String], b: &[String]) -> usize {
    let mut dp = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            dp[i][j] = if a[i - 1] == b[j - 1] {
                dp[i - 1][j - 1] + 1
            } else {
                dp[i - 1][j].max(dp[i][j - 1])
            };
        }
    }
    dp[a.len()][b.len()]
}

/// R/K, or `None` when the correct code has no canonical lines.
pub fn oracle_consistency(incorrect: &str, correct: &str) -> Option<f64> {
    let w = oracle_canonical(incorrect, false);
    let r = oracle_canonical(correct, false);
    if r.is_empty() {
        return None;
    }
    Some(oracle_lcs(&w, &r) as f64 / r.len() as f64)
}

/// Random program-like text drawn from a small line vocabulary, so pairs
/// share many lines.
pub fn random_program(rng: &mut ChaCha8Rng, max_lines: usize) -> String {
    const VOCAB: &[&str] = &[
        "x = 1",
        "y = x + 2",
        "print(x)",
        "for i in range(n):",
        "    total += i",
        "if x > y:",
        "    x, y = y, x",
        "",
        "return total",
        "n = int(input())",
        "total = 0   ",
        "\t",
        "while n > 0:",
        "    n -= 1",
    ];
    let n = rng.gen_range(0..=max_lines);
    let mut s = String::new();
    for _ in 0..n {
        s.push_str(VOCAB[rng.gen_range(0..VOCAB.len())]);
        s.push('\n');
    }
    if rng.gen_bool(0.2) && s.ends_with('\n') {
        s.pop();
    }
    s
}

/// Mutates a program by substituting, inserting and deleting some lines.
pub fn mutate_program(rng: &mut ChaCha8Rng, base: &str) -> String {
    let mut lines: Vec<String> = base.lines().map(str::to_string).collect();
    for _ in 0..rng.gen_range(0..4) {
        match rng.gen_range(0..3) {
            0 if !lines.is_empty() => {
                let i = rng.gen_range(0..lines.len());
                lines[i] = format!("z{} = {}", rng.gen_range(0..5), rng.gen_range(0..5));
            }
            1 => {
                let i = rng.gen_range(0..=lines.len());
                lines.insert(i, format!("print({})", rng.gen_range(0..5)));
            }
            _ if !lines.is_empty() => {
                let i = rng.gen_range(0..lines.len());
                lines.remove(i);
            }
            _ => {}
        }
    }
    let mut s = lines.join("\n");
    s.push('\n');
    s
}

/// Plain-loop version of the retrieval similarity `(1 + cos) / 2`, with
/// 0.5 for a zero vector.
pub fn oracle_sim(u: &[f64], v: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for i in 0..u.len() {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if nu == 0.0 || nv == 0.0 {
        return 0.5;
    }
    let cos = (dot / (nu * nv).sqrt()).clamp(-1.0, 1.0);
    (1.0 + cos) / 2.0
}

pub fn oracle_base_score(h_c: &[f64], h_cw: &[f64], h_cr: &[f64]) -> f64 {
    let shifted: Vec<f64> = (0..h_c.len()).map(|i| h_c[i] + (h_cr[i] - h_cw[i])).collect();
    oracle_sim(&shifted, h_cr)
}

pub fn oracle_iterative_score(h_c: &[f64], h_yw: &[f64], h_cw: &[f64], h_cr: &[f64]) -> f64 {
    let shifted: Vec<f64> = (0..h_c.len()).map(|i| h_cw[i] + (h_yw[i] - h_c[i])).collect();
    (1.0 - oracle_sim(&shifted, h_cr)) + oracle_base_score(h_c, h_cw, h_cr)
}

/// Full sort of (pair id, score) by score descending, pair id ascending,
/// cut to `k`.
pub fn oracle_rank(mut scored: Vec<(String, f64)>, k: usize) -> Vec<(String, f64)> {
    scored.sort_by(|a, b| {
        if a.1 > b.1 {
            std::cmp::Ordering::Less
        } else if a.1 < b.1 {
            std::cmp::Ordering::Greater
        } else {
            a.0.cmp(&b.0)
        }
    });
    scored.truncate(k);
    scored
}

/// Largest matching size by trying every injective assignment of rows.
pub fn oracle_max_matching(m: &[Vec<u8>]) -> usize {
    fn go(m: &[Vec<u8>], row: usize, used: &mut Vec<bool>) -> usize {
        if row == m.len() {
            return 0;
        }
        let mut best = go(m, row + 1, used);
        for c in 0..m[row].len() {
            if m[row][c] == 1 && !used[c] {
                used[c] = true;
                best = best.max(1 + go(m, row + 1, used));
                used[c] = false;
            }
        }
        best
    }
    let cols = m.first().map_or(0, Vec::len);
    go(m, 0, &mut vec![false; cols])
}

/// One synthetic submission for corpus oracles.
#[derive(Debug, Clone)]
pub struct SynthSub {
    pub user: String,
    pub problem: String,
    pub ts: i64,
    pub correct: bool,
    pub code: String,
}

/// Brute-force repair-pair selection keyed by (user, problem): every
/// (incorrect, strictly later correct) pair is scored; the best is kept if
/// it reaches `threshold`. Ties go to the earlier correct, then the earlier
/// incorrect submission. Returns (w_ts, r_ts, score).
pub fn oracle_db(subs: &[SynthSub], threshold: f64) -> BTreeMap<(String, String), (i64, i64, f64)> {
    let mut groups: BTreeMap<(String, String), Vec<&SynthSub>> = BTreeMap::new();
    for s in subs {
        groups.entry((s.user.clone(), s.problem.clone())).or_default().push(s);
    }
    let mut out = BTreeMap::new();
    for (key, group) in groups {
        let mut best: Option<(f64, i64, i64)> = None;
        for w in group.iter().filter(|s| !s.correct) {
            for r in group.iter().filter(|s| s.correct && s.ts > w.ts) {
                let Some(score) = oracle_consistency(&w.code, &r.code) else {
                    continue;
                };
                let replace = match best {
                    None => true,
                    Some((bs, bw, br)) => score > bs || (score == bs && (r.ts, w.ts) < (br, bw)),
                };
                if replace {
                    best = Some((score, w.ts, r.ts));
                }
            }
        }
        if let Some((score, w, r)) = best {
            if score >= threshold {
                out.insert(key, (w, r, score));
            }
        }
    }
    out
}

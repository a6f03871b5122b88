//! Line-based diffing.
//!
//! [`line_diff`] computes a minimal line edit script with Myers' O(ND)
//! algorithm, so the keep operations form a longest common subsequence of
//! the two line sequences. The script backs two things: the consistency
//! score used to admit repair pairs into the database, and the unified diff
//! rendered into repair prompts.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::DiffError;

/// Sentinel returned by [`render_unified_diff`] when both sides are equal.
pub const NO_CHANGES: &str = "no changes\n";

const NO_NEWLINE_MARKER: &str = "\\ No newline at end of file";

/// One line operation of an edit script.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LineOp {
    Keep(String),
    Delete(String),
    Insert(String),
}

impl LineOp {
    pub fn line(&self) -> &str {
        match self {
            LineOp::Keep(l) | LineOp::Delete(l) | LineOp::Insert(l) => l,
        }
    }
}

/// A contiguous run of operations together with the 1-based line numbers
/// where it starts on each side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    pub before_start: usize,
    pub after_start: usize,
    pub ops: Vec<LineOp>,
}

impl Hunk {
    pub fn before_len(&self) -> usize {
        self.ops.iter().filter(|op| !matches!(op, LineOp::Insert(_))).count()
    }

    pub fn after_len(&self) -> usize {
        self.ops.iter().filter(|op| !matches!(op, LineOp::Delete(_))).count()
    }
}

/// Edit script between two texts, split into hunks.
///
/// The hunks produced by [`line_diff`] cover every line of both inputs, so
/// replaying keeps and deletes yields the before-lines and replaying keeps
/// and inserts yields the after-lines. Each hunk is a run of keeps followed
/// by a run of changes.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DiffScript {
    pub hunks: Vec<Hunk>,
}

impl DiffScript {
    pub fn ops(&self) -> impl Iterator<Item = &LineOp> {
        self.hunks.iter().flat_map(|h| h.ops.iter())
    }

    pub fn before_lines(&self) -> Vec<&str> {
        self.ops()
            .filter(|op| !matches!(op, LineOp::Insert(_)))
            .map(LineOp::line)
            .collect()
    }

    pub fn after_lines(&self) -> Vec<&str> {
        self.ops()
            .filter(|op| !matches!(op, LineOp::Delete(_)))
            .map(LineOp::line)
            .collect()
    }

    pub fn is_identity(&self) -> bool {
        self.ops().all(|op| matches!(op, LineOp::Keep(_)))
    }

    fn from_ops(ops: Vec<LineOp>) -> Self {
        let mut hunks: Vec<Hunk> = Vec::new();
        let (mut before, mut after) = (1usize, 1usize);
        let mut current: Option<Hunk> = None;
        let mut in_changes = false;
        for op in ops {
            let is_keep = matches!(op, LineOp::Keep(_));
            if current.is_none() || (is_keep && in_changes) {
                if let Some(h) = current.take() {
                    hunks.push(h);
                }
                current = Some(Hunk {
                    before_start: before,
                    after_start: after,
                    ops: Vec::new(),
                });
                in_changes = false;
            }
            if !is_keep {
                in_changes = true;
            }
            match &op {
                LineOp::Keep(_) => {
                    before += 1;
                    after += 1;
                }
                LineOp::Delete(_) => before += 1,
                LineOp::Insert(_) => after += 1,
            }
            current.as_mut().expect("hunk opened above").ops.push(op);
        }
        hunks.extend(current);
        DiffScript { hunks }
    }
}

/// Splits text into lines without their terminators. A trailing newline
/// does not produce an extra empty line.
pub fn split_lines(text: &str) -> Vec<&str> {
    if text.is_empty() {
        return Vec::new();
    }
    let body = text.strip_suffix('\n').unwrap_or(text);
    body.split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .collect()
}

/// Line diff of two texts.
pub fn line_diff(before: &str, after: &str) -> DiffScript {
    let a = split_lines(before);
    let b = split_lines(after);
    DiffScript::from_ops(diff_lines(&a, &b))
}

/// Minimal edit script between two line slices.
pub fn diff_lines(a: &[&str], b: &[&str]) -> Vec<LineOp> {
    let (ia, ib) = intern(a, b);
    let mut ops = Vec::with_capacity(a.len().max(b.len()));

    let prefix = ia.iter().zip(&ib).take_while(|(x, y)| x == y).count();
    let suffix = ia[prefix..]
        .iter()
        .rev()
        .zip(ib[prefix..].iter().rev())
        .take_while(|(x, y)| x == y)
        .count();

    for line in &a[..prefix] {
        ops.push(LineOp::Keep((*line).to_string()));
    }
    let mid_a = &ia[prefix..ia.len() - suffix];
    let mid_b = &ib[prefix..ib.len() - suffix];
    for step in myers(mid_a, mid_b) {
        match step {
            Step::Keep(i) => ops.push(LineOp::Keep(a[prefix + i].to_string())),
            Step::Delete(i) => ops.push(LineOp::Delete(a[prefix + i].to_string())),
            Step::Insert(j) => ops.push(LineOp::Insert(b[prefix + j].to_string())),
        }
    }
    for line in &a[a.len() - suffix..] {
        ops.push(LineOp::Keep((*line).to_string()));
    }
    ops
}

fn intern<'s>(a: &[&'s str], b: &[&'s str]) -> (Vec<u32>, Vec<u32>) {
    let mut ids: HashMap<&'s str, u32> = HashMap::new();
    let mut lookup = |s: &'s str| -> u32 {
        let next = ids.len() as u32;
        *ids.entry(s).or_insert(next)
    };
    let ia = a.iter().map(|s| lookup(s)).collect();
    let ib = b.iter().map(|s| lookup(s)).collect();
    (ia, ib)
}

#[derive(Debug, Clone, Copy)]
enum Step {
    Keep(usize),
    Delete(usize),
    Insert(usize),
}

/// Greedy forward Myers with per-step frontier snapshots for backtracking.
/// Deletions are preferred over insertions when both reach the same
/// diagonal, which puts `-` lines before `+` lines in a change group.
fn myers(a: &[u32], b: &[u32]) -> Vec<Step> {
    let n = a.len() as isize;
    let m = b.len() as isize;
    if n == 0 {
        return (0..m as usize).map(Step::Insert).collect();
    }
    if m == 0 {
        return (0..n as usize).map(Step::Delete).collect();
    }
    let max = (n + m) as usize;
    let offset = max as isize;
    let mut v = vec![0isize; 2 * max + 2];
    let mut trace: Vec<Vec<isize>> = Vec::new();

    'outer: for d in 0..=max as isize {
        // Snapshot of the frontier before step d (only diagonals -d..=d matter).
        trace.push(v[(offset - d) as usize..=(offset + d) as usize].to_vec());
        let mut k = -d;
        while k <= d {
            let idx = (offset + k) as usize;
            let mut x = if k == -d || (k != d && v[idx - 1] < v[idx + 1]) {
                v[idx + 1]
            } else {
                v[idx - 1] + 1
            };
            let mut y = x - k;
            while x < n && y < m && a[x as usize] == b[y as usize] {
                x += 1;
                y += 1;
            }
            v[idx] = x;
            if x >= n && y >= m {
                break 'outer;
            }
            k += 2;
        }
    }

    // Backtrack from (n, m).
    let mut steps = Vec::new();
    let (mut x, mut y) = (n, m);
    for d in (0..trace.len() as isize).rev() {
        let snap = &trace[d as usize];
        let get = |k: isize| -> isize { snap[(k + d) as usize] };
        let k = x - y;
        let prev_k = if k == -d || (k != d && get(k - 1) < get(k + 1)) {
            k + 1
        } else {
            k - 1
        };
        let prev_x = if d == 0 { 0 } else { get(prev_k) };
        let prev_y = prev_x - prev_k;
        let (start_x, start_y) = if d == 0 {
            (0, 0)
        } else if prev_k == k + 1 {
            (prev_x, prev_y + 1)
        } else {
            (prev_x + 1, prev_y)
        };
        while x > start_x && y > start_y {
            x -= 1;
            y -= 1;
            steps.push(Step::Keep(x as usize));
        }
        if d > 0 {
            if prev_k == k + 1 {
                steps.push(Step::Insert(prev_y as usize));
            } else {
                steps.push(Step::Delete(prev_x as usize));
            }
        }
        x = prev_x;
        y = prev_y;
        if d == 0 {
            break;
        }
    }
    steps.reverse();
    steps
}

/// Number of keep operations in a script.
pub fn preserved_line_count(script: &DiffScript) -> usize {
    script.ops().filter(|op| matches!(op, LineOp::Keep(_))).count()
}

/// How lines are canonicalized before consistency scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreOptions {
    /// When true, blank lines are dropped before counting (default).
    pub drop_blank_lines: bool,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions {
            drop_blank_lines: true,
        }
    }
}

/// Trailing whitespace stripped, blank lines optionally removed.
pub fn canonical_lines(text: &str, options: ScoreOptions) -> Vec<&str> {
    split_lines(text)
        .into_iter()
        .map(str::trim_end)
        .filter(|l| !options.drop_blank_lines || !l.is_empty())
        .collect()
}

/// Share of the correct code's lines that survive from the incorrect code:
/// preserved lines over total lines of `correct`, both counted on
/// canonicalized text.
pub fn consistency_score(incorrect: &str, correct: &str) -> Result<f64, DiffError> {
    consistency_score_with(incorrect, correct, ScoreOptions::default())
}

pub fn consistency_score_with(
    incorrect: &str,
    correct: &str,
    options: ScoreOptions,
) -> Result<f64, DiffError> {
    let after = canonical_lines(correct, options);
    if after.is_empty() {
        return Err(DiffError::EmptyTarget);
    }
    let before = canonical_lines(incorrect, options);
    let preserved = diff_lines(&before, &after)
        .iter()
        .filter(|op| matches!(op, LineOp::Keep(_)))
        .count();
    Ok(preserved as f64 / after.len() as f64)
}

/// Labels for the `---`/`+++` header lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffLabels<'a> {
    pub before: &'a str,
    pub after: &'a str,
}

impl Default for DiffLabels<'_> {
    fn default() -> Self {
        DiffLabels {
            before: "buggy",
            after: "fixed",
        }
    }
}

/// Renders a unified diff with `context_lines` lines of context, following
/// GNU diff conventions for hunk merging and range syntax.
pub fn render_unified_diff(before: &str, after: &str, context_lines: usize) -> String {
    render_unified_diff_labeled(before, after, context_lines, &DiffLabels::default())
}

pub fn render_unified_diff_labeled(
    before: &str,
    after: &str,
    context_lines: usize,
    labels: &DiffLabels<'_>,
) -> String {
    // An unterminated last line is a different line from the same text with
    // a newline, so it carries a trailing '\n' (never part of a split line)
    // while diffing.
    let a = marked_lines(before);
    let b = marked_lines(after);
    let a: Vec<&str> = a.iter().map(String::as_str).collect();
    let b: Vec<&str> = b.iter().map(String::as_str).collect();

    let ops = diff_lines(&a, &b);
    if ops.iter().all(|op| matches!(op, LineOp::Keep(_))) {
        return NO_CHANGES.to_string();
    }

    let mut out = String::new();
    let _ = writeln!(out, "--- {}", labels.before);
    let _ = writeln!(out, "+++ {}", labels.after);

    // Position of each op on both sides (0-based).
    let mut pos = Vec::with_capacity(ops.len());
    let (mut i, mut j) = (0usize, 0usize);
    for op in &ops {
        pos.push((i, j));
        match op {
            LineOp::Keep(_) => {
                i += 1;
                j += 1;
            }
            LineOp::Delete(_) => i += 1,
            LineOp::Insert(_) => j += 1,
        }
    }

    let changes: Vec<usize> = ops
        .iter()
        .enumerate()
        .filter(|(_, op)| !matches!(op, LineOp::Keep(_)))
        .map(|(idx, _)| idx)
        .collect();

    // Group changes whose separating keep-run is at most 2 * context.
    let mut groups: Vec<(usize, usize)> = Vec::new();
    for &c in &changes {
        match groups.last_mut() {
            Some((_, end)) if c - *end - 1 <= 2 * context_lines => *end = c,
            _ => groups.push((c, c)),
        }
    }

    for (first, last) in groups {
        let start = first.saturating_sub(context_lines);
        let end = (last + context_lines).min(ops.len() - 1);
        let slice = &ops[start..=end];
        let before_len = slice.iter().filter(|op| !matches!(op, LineOp::Insert(_))).count();
        let after_len = slice.iter().filter(|op| !matches!(op, LineOp::Delete(_))).count();
        let (bi, bj) = pos[start];
        let _ = writeln!(
            out,
            "@@ -{} +{} @@",
            hunk_range(bi, before_len),
            hunk_range(bj, after_len)
        );
        for op in slice {
            let (sigil, line) = match op {
                LineOp::Keep(l) => (' ', l),
                LineOp::Delete(l) => ('-', l),
                LineOp::Insert(l) => ('+', l),
            };
            match line.strip_suffix('\n') {
                Some(text) => {
                    let _ = writeln!(out, "{sigil}{text}\n{NO_NEWLINE_MARKER}");
                }
                None => {
                    let _ = writeln!(out, "{sigil}{line}");
                }
            }
        }
    }
    out
}

fn marked_lines(text: &str) -> Vec<String> {
    let mut lines: Vec<String> = split_lines(text).into_iter().map(str::to_string).collect();
    if !text.is_empty() && !text.ends_with('\n') {
        if let Some(last) = lines.last_mut() {
            last.push('\n');
        }
    }
    lines
}

fn hunk_range(start0: usize, len: usize) -> String {
    match len {
        0 => format!("{start0},0"),
        1 => format!("{}", start0 + 1),
        _ => format!("{},{}", start0 + 1, len),
    }
}

/// Applies a unified diff (as produced by [`render_unified_diff`]) to
/// `original`. Hunks must apply at their stated offsets exactly.
pub fn apply_unified_diff(original: &str, patch: &str) -> Result<String, DiffError> {
    if patch == NO_CHANGES {
        return Ok(original.to_string());
    }
    let src = marked_lines(original);
    let mut out: Vec<String> = Vec::new();
    let mut cursor = 0usize;

    let mut lines = patch.lines().peekable();
    while let Some(line) = lines.next() {
        if line.starts_with("--- ") || line.starts_with("+++ ") || line.starts_with("# ") {
            continue;
        }
        let Some(header) = line.strip_prefix("@@ -") else {
            return Err(DiffError::MalformedPatch(format!("unexpected line `{line}`")));
        };
        let before_spec = header
            .split_whitespace()
            .next()
            .ok_or_else(|| DiffError::MalformedPatch(line.to_string()))?;
        let (start, len) = parse_range(before_spec)?;
        let hunk_start = if len == 0 { start } else { start.saturating_sub(1) };
        if hunk_start < cursor || hunk_start > src.len() {
            return Err(DiffError::PatchMismatch(hunk_start + 1));
        }
        out.extend_from_slice(&src[cursor..hunk_start]);
        cursor = hunk_start;
        while let Some(body) = lines.peek() {
            if body.starts_with("@@ ") {
                break;
            }
            let body = lines.next().expect("peeked");
            let (kind, text) = body.split_at(body.chars().next().map_or(0, char::len_utf8));
            let mut text = text.to_string();
            if lines.peek() == Some(&NO_NEWLINE_MARKER) {
                lines.next();
                text.push('\n');
            }
            match kind {
                " " | "-" => {
                    if src.get(cursor) != Some(&text) {
                        return Err(DiffError::PatchMismatch(cursor + 1));
                    }
                    cursor += 1;
                    if kind == " " {
                        out.push(text);
                    }
                }
                "+" => out.push(text),
                _ => return Err(DiffError::MalformedPatch(body.to_string())),
            }
        }
    }
    out.extend_from_slice(&src[cursor..]);
    let mut text = String::new();
    for line in &out {
        match line.strip_suffix('\n') {
            Some(last) => text.push_str(last),
            None => {
                text.push_str(line);
                text.push('\n');
            }
        }
    }
    Ok(text)
}

fn parse_range(spec: &str) -> Result<(usize, usize), DiffError> {
    let bad = || DiffError::MalformedPatch(spec.to_string());
    match spec.split_once(',') {
        Some((s, l)) => Ok((s.parse().map_err(|_| bad())?, l.parse().map_err(|_| bad())?)),
        None => Ok((spec.parse().map_err(|_| bad())?, 1)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ops_of(before: &str, after: &str) -> Vec<LineOp> {
        line_diff(before, after).ops().cloned().collect()
    }

    #[test]
    fn identity_is_all_keep() {
        let script = line_diff("a\nb", "a\nb");
        assert!(script.is_identity());
        assert_eq!(preserved_line_count(&script), 2);
    }

    #[test]
    fn single_substitution() {
        assert_eq!(
            ops_of("a\nb\nc", "a\nx\nc"),
            vec![
                LineOp::Keep("a".into()),
                LineOp::Delete("b".into()),
                LineOp::Insert("x".into()),
                LineOp::Keep("c".into()),
            ]
        );
        assert_eq!(preserved_line_count(&line_diff("a\nb\nc", "a\nx\nc")), 2);
    }

    #[test]
    fn disjoint_and_empty_sides() {
        assert_eq!(preserved_line_count(&line_diff("a\nb\nc", "x\ny")), 0);
        assert_eq!(preserved_line_count(&line_diff("", "x\ny")), 0);
        assert_eq!(preserved_line_count(&line_diff("a", "")), 0);
        assert!(line_diff("", "").hunks.is_empty());
    }

    #[test]
    fn identity_on_five_lines() {
        let t = "1\n2\n3\n4\n5\n";
        assert_eq!(preserved_line_count(&line_diff(t, t)), 5);
    }

    #[test]
    fn script_replays_both_sides() {
        let before = "a\nb\nc\nd\ne\nf";
        let after = "a\nc\nd\nx\ne\ny\nf\nz";
        let script = line_diff(before, after);
        assert_eq!(script.before_lines(), split_lines(before));
        assert_eq!(script.after_lines(), split_lines(after));
        for h in &script.hunks {
            assert!(!h.ops.is_empty());
        }
    }

    #[test]
    fn consistency_examples() {
        let five = "a\nb\nc\nd\ne\n";
        assert_eq!(consistency_score(five, five).unwrap(), 1.0);
        assert_eq!(consistency_score("p\nq\n", five).unwrap(), 0.0);
        assert!(matches!(
            consistency_score("a", "\n  \n"),
            Err(DiffError::EmptyTarget)
        ));
        // Blank lines and trailing whitespace do not count.
        assert_eq!(consistency_score("a  \n\nb\n", "a\nb\n\n").unwrap(), 1.0);
        let with_blanks = ScoreOptions {
            drop_blank_lines: false,
        };
        assert_eq!(
            consistency_score_with("a\nb\n", "a\n\nb\n", with_blanks).unwrap(),
            2.0 / 3.0
        );
    }

    #[test]
    fn consistency_is_not_symmetric() {
        let a = "x\ny\n";
        let b = "x\ny\nz\nw\n";
        assert_eq!(consistency_score(a, b).unwrap(), 0.5);
        assert_eq!(consistency_score(b, a).unwrap(), 1.0);
    }

    #[test]
    fn unified_identity_sentinel() {
        assert_eq!(render_unified_diff("a\nb\n", "a\nb\n", 3), NO_CHANGES);
    }

    #[test]
    fn unified_single_substitution() {
        let d = render_unified_diff("a\nb\nc\n", "a\nx\nc\n", 3);
        assert_eq!(d, "--- buggy\n+++ fixed\n@@ -1,3 +1,3 @@\n a\n-b\n+x\n c\n");
    }

    #[test]
    fn unified_separate_hunks() {
        let before: String = (1..=20).map(|i| format!("l{i}\n")).collect();
        let after = before.replace("l2\n", "L2\n").replace("l18\n", "L18\n");
        let d = render_unified_diff(&before, &after, 3);
        assert_eq!(d.matches("@@ -").count(), 2);
        assert_eq!(apply_unified_diff(&before, &d).unwrap(), after);
    }

    #[test]
    fn unified_missing_newline_round_trip() {
        for (a, b) in [("a\nb", "a\nb\n"), ("a\nb\n", "a\nc"), ("x", "y"), ("", "a"), ("a\n", "")] {
            let d = render_unified_diff(a, b, 3);
            assert_ne!(d, NO_CHANGES, "{a:?} -> {b:?}");
            assert_eq!(apply_unified_diff(a, &d).unwrap(), b, "{d}");
        }
    }

    #[test]
    fn apply_rejects_mismatched_context() {
        let d = render_unified_diff("a\nb\nc\n", "a\nx\nc\n", 1);
        assert!(matches!(
            apply_unified_diff("a\nq\nc\n", &d),
            Err(DiffError::PatchMismatch(_))
        ));
    }
}

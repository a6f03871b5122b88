//! Submission corpora and the repair-pair database.
//!
//! A corpus directory holds `problems.jsonl` and `submissions.jsonl`. For
//! every (user, problem) submission sequence, each incorrect submission is
//! paired with every later correct one; the single best-scoring candidate
//! under [`consistency_score`] is kept when it reaches the threshold.

mod strip;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use strip::{strip_comments, CommentStyle};

use crate::diffing::{consistency_score_with, ScoreOptions};
use crate::error::CorpusError;

/// Default admission threshold for repair pairs.
pub const DEFAULT_THRESHOLD: f64 = 0.65;

/// Byte-string serde helper: bytes travel as (lossy) UTF-8 text in JSON.
mod text_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&String::from_utf8_lossy(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        Ok(String::deserialize(d)?.into_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    #[serde(with = "text_bytes")]
    pub input: Vec<u8>,
    #[serde(rename = "output", with = "text_bytes")]
    pub expected_output: Vec<u8>,
}

impl TestCase {
    pub fn new(input: impl Into<Vec<u8>>, expected_output: impl Into<Vec<u8>>) -> Self {
        TestCase {
            input: input.into(),
            expected_output: expected_output.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    #[serde(default)]
    pub statement: String,
    #[serde(default)]
    pub test_cases: Vec<TestCase>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Correct,
    Incorrect,
}

/// Submission time as a totally ordered integer. Integer timestamps are used
/// as-is; ISO-8601/RFC 3339 instants become microseconds since the epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn parse(value: &serde_json::Value) -> Option<Timestamp> {
        match value {
            serde_json::Value::Number(n) => n.as_i64().map(Timestamp),
            serde_json::Value::String(s) => s.trim().parse::<i64>().ok().map(Timestamp).or_else(|| {
                chrono::DateTime::parse_from_rfc3339(s.trim())
                    .ok()
                    .map(|t| Timestamp(t.timestamp_micros()))
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub user_id: String,
    pub problem_id: String,
    pub timestamp: Timestamp,
    pub verdict: Verdict,
    pub code: String,
    pub language_tag: String,
    /// Position of the record in `submissions.jsonl`; breaks timestamp ties.
    pub ordinal: usize,
}

/// One admitted (incorrect, correct) pair from a user's history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairPair {
    pub pair_id: String,
    pub user_id: String,
    pub problem_id: String,
    pub language_tag: String,
    /// Incorrect code, comment-stripped.
    pub c_w: String,
    /// Correct code, comment-stripped.
    pub c_r: String,
    pub consistency: f64,
    pub w_timestamp: Timestamp,
    pub r_timestamp: Timestamp,
}

/// Deterministic pair id from the user, problem and both timestamps.
pub fn pair_id(user_id: &str, problem_id: &str, w: Timestamp, r: Timestamp) -> String {
    let mut hasher = Sha256::new();
    for part in [user_id, problem_id, &w.0.to_string(), &r.0.to_string()] {
        hasher.update(part.as_bytes());
        hasher.update([0x1f]);
    }
    hex::encode(&hasher.finalize()[..8])
}

/// Where to ingest a corpus from.
#[derive(Debug, Clone)]
pub enum CorpusSource {
    /// Directory containing `problems.jsonl` and `submissions.jsonl`.
    Directory(PathBuf),
}

impl From<&Path> for CorpusSource {
    fn from(p: &Path) -> Self {
        CorpusSource::Directory(p.to_path_buf())
    }
}

/// Ingested corpus: problems, submissions, and per-(user, problem)
/// sequences sorted by time.
#[derive(Debug, Clone, Default)]
pub struct CorpusStore {
    pub problems: BTreeMap<String, Problem>,
    pub submissions: Vec<Submission>,
    /// (user_id, problem_id) → indices into `submissions`, ascending by
    /// (timestamp, ordinal).
    pub sequences: BTreeMap<(String, String), Vec<usize>>,
    pub skipped: usize,
}

impl CorpusStore {
    pub fn from_parts(problems: Vec<Problem>, submissions: Vec<Submission>) -> Result<Self, CorpusError> {
        let mut store = CorpusStore::default();
        for p in problems {
            if store.problems.contains_key(&p.id) {
                return Err(CorpusError::DuplicateProblem(p.id));
            }
            store.problems.insert(p.id.clone(), p);
        }
        store.submissions = submissions;
        store.rebuild_sequences();
        Ok(store)
    }

    pub fn rebuild_sequences(&mut self) {
        self.sequences.clear();
        for (idx, s) in self.submissions.iter().enumerate() {
            self.sequences
                .entry((s.user_id.clone(), s.problem_id.clone()))
                .or_default()
                .push(idx);
        }
        let subs = &self.submissions;
        for seq in self.sequences.values_mut() {
            seq.sort_by_key(|&i| (subs[i].timestamp, subs[i].ordinal));
        }
    }

    pub fn sequence(&self, user_id: &str, problem_id: &str) -> Vec<&Submission> {
        self.sequences
            .get(&(user_id.to_string(), problem_id.to_string()))
            .map(|idx| idx.iter().map(|&i| &self.submissions[i]).collect())
            .unwrap_or_default()
    }

    pub fn problem(&self, id: &str) -> Option<&Problem> {
        self.problems.get(id)
    }
}

#[derive(Deserialize)]
struct RawProblem {
    id: Option<String>,
    #[serde(default)]
    statement: String,
    #[serde(default, alias = "test_cases")]
    testcases: Option<serde_json::Value>,
}

#[derive(Deserialize)]
struct RawSubmission {
    user_id: Option<String>,
    problem_id: Option<String>,
    timestamp: Option<serde_json::Value>,
    verdict: Option<String>,
    code: Option<String>,
    #[serde(alias = "language_tag")]
    language: Option<String>,
}

/// Loads a corpus. Missing files count as empty; malformed records are
/// skipped and counted in [`CorpusStore::skipped`].
pub fn ingest_corpus(source: &CorpusSource) -> Result<CorpusStore, CorpusError> {
    let CorpusSource::Directory(dir) = source;
    fs::read_dir(dir).map_err(|source| CorpusError::Unreadable {
        path: dir.clone(),
        source,
    })?;

    let mut skipped = 0usize;
    let mut problems = Vec::new();
    let mut seen = HashSet::new();
    let problems_path = dir.join("problems.jsonl");
    for (line_no, line) in read_jsonl_lines(&problems_path)? {
        let raw: RawProblem = match serde_json::from_str(&line) {
            Ok(raw) => raw,
            Err(e) => {
                log::warn!("{}:{line_no}: skipping malformed problem: {e}", problems_path.display());
                skipped += 1;
                continue;
            }
        };
        let Some(id) = raw.id.filter(|id| !id.is_empty()) else {
            log::warn!("{}:{line_no}: skipping problem without id", problems_path.display());
            skipped += 1;
            continue;
        };
        if !seen.insert(id.clone()) {
            return Err(CorpusError::DuplicateProblem(id));
        }
        let test_cases = match raw.testcases {
            None | Some(serde_json::Value::Null) => Vec::new(),
            Some(v) => load_test_cases(&id, &v, dir)?,
        };
        problems.push(Problem {
            id,
            statement: raw.statement,
            test_cases,
        });
    }

    let mut submissions = Vec::new();
    let submissions_path = dir.join("submissions.jsonl");
    for (line_no, line) in read_jsonl_lines(&submissions_path)? {
        match parse_submission(&line, submissions.len()) {
            Ok(s) => submissions.push(s),
            Err(reason) => {
                log::warn!("{}:{line_no}: skipping submission: {reason}", submissions_path.display());
                skipped += 1;
            }
        }
    }

    let mut store = CorpusStore::from_parts(problems, submissions)?;
    store.skipped = skipped;
    log::info!(
        "ingested {} problems, {} submissions ({} skipped)",
        store.problems.len(),
        store.submissions.len(),
        skipped
    );
    Ok(store)
}

fn parse_submission(line: &str, ordinal: usize) -> Result<Submission, String> {
    let raw: RawSubmission = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let missing = |field: &str| format!("missing `{field}`");
    let verdict = match raw.verdict.ok_or_else(|| missing("verdict"))?.to_ascii_lowercase().as_str() {
        "correct" | "accepted" => Verdict::Correct,
        "incorrect" => Verdict::Incorrect,
        other => return Err(format!("unknown verdict `{other}`")),
    };
    let timestamp = raw
        .timestamp
        .as_ref()
        .ok_or_else(|| missing("timestamp"))
        .and_then(|v| Timestamp::parse(v).ok_or_else(|| format!("bad timestamp {v}")))?;
    Ok(Submission {
        user_id: raw.user_id.ok_or_else(|| missing("user_id"))?,
        problem_id: raw.problem_id.ok_or_else(|| missing("problem_id"))?,
        timestamp,
        verdict,
        code: raw.code.ok_or_else(|| missing("code"))?,
        language_tag: raw.language.ok_or_else(|| missing("language"))?,
        ordinal,
    })
}

fn read_jsonl_lines(path: &Path) -> Result<Vec<(usize, String)>, CorpusError> {
    let file = match fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(source) => {
            return Err(CorpusError::Unreadable {
                path: path.to_path_buf(),
                source,
            })
        }
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Unreadable {
            path: path.to_path_buf(),
            source,
        })?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

/// Test cases given inline (`[{input, output}]`) or as a directory of
/// `NN.in` / `NN.out` files (a string path, or `{"dir": path}`), relative
/// to the corpus directory.
fn load_test_cases(problem: &str, value: &serde_json::Value, base: &Path) -> Result<Vec<TestCase>, CorpusError> {
    let err = |path: &Path, reason: String| CorpusError::TestCases {
        problem: problem.to_string(),
        path: path.to_path_buf(),
        reason,
    };
    match value {
        serde_json::Value::Array(_) => {
            serde_json::from_value(value.clone()).map_err(|e| err(base, e.to_string()))
        }
        serde_json::Value::String(dir) => load_test_case_dir(&base.join(dir)).map_err(|r| err(&base.join(dir), r)),
        serde_json::Value::Object(map) => match map.get("dir").and_then(|d| d.as_str()) {
            Some(dir) => load_test_case_dir(&base.join(dir)).map_err(|r| err(&base.join(dir), r)),
            None => Err(err(base, "expected `dir` key".into())),
        },
        other => Err(err(base, format!("unsupported testcases value {other}"))),
    }
}

/// Reads paired `NN.in` / `NN.out` files sorted by file name.
pub fn load_test_case_dir(dir: &Path) -> Result<Vec<TestCase>, String> {
    let mut inputs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "in"))
        .collect();
    inputs.sort();
    inputs
        .into_iter()
        .map(|input| {
            let output = input.with_extension("out");
            let read = |p: &Path| fs::read(p).map_err(|e| format!("{}: {e}", p.display()));
            Ok(TestCase::new(read(&input)?, read(&output)?))
        })
        .collect()
}

/// All (incorrect, later correct) pairs in a time-ordered sequence.
pub fn candidate_pairs<'a>(seq: &[&'a Submission]) -> Vec<(&'a Submission, &'a Submission)> {
    let mut out = Vec::new();
    for (i, w) in seq.iter().enumerate() {
        if w.verdict != Verdict::Incorrect {
            continue;
        }
        for r in &seq[i + 1..] {
            if r.verdict == Verdict::Correct && r.timestamp > w.timestamp {
                out.push((*w, *r));
            }
        }
    }
    out
}

/// Options for [`build_retrieval_db`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbOptions {
    pub threshold: f64,
    pub score: ScoreOptions,
}

impl Default for DbOptions {
    fn default() -> Self {
        DbOptions {
            threshold: DEFAULT_THRESHOLD,
            score: ScoreOptions::default(),
        }
    }
}

/// The admitted repair pairs, sorted by (problem_id, user_id).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RepairDb {
    pub pairs: Vec<RepairPair>,
}

impl RepairDb {
    pub fn for_problem<'a>(&'a self, problem_id: &'a str) -> impl Iterator<Item = &'a RepairPair> + 'a {
        self.pairs.iter().filter(move |p| p.problem_id == problem_id)
    }

    pub fn get(&self, pair_id: &str) -> Option<&RepairPair> {
        self.pairs.iter().find(|p| p.pair_id == pair_id)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), CorpusError> {
        let werr = |source| CorpusError::Write {
            path: path.to_path_buf(),
            source,
        };
        let file = fs::File::create(path).map_err(werr)?;
        let mut w = BufWriter::new(file);
        for p in &self.pairs {
            let line = serde_json::to_string(p).expect("RepairPair serializes");
            writeln!(w, "{line}").map_err(werr)?;
        }
        w.flush().map_err(werr)
    }

    pub fn read_jsonl(path: &Path) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path).map_err(|source| CorpusError::Unreadable {
            path: path.to_path_buf(),
            source,
        })?;
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            pairs.push(serde_json::from_str(line).map_err(|e| CorpusError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                reason: e.to_string(),
            })?);
        }
        Ok(RepairDb { pairs })
    }
}

/// Builds the repair-pair database: per (user, problem), the single
/// candidate with the highest consistency score, kept only if the score is
/// at least `options.threshold`. Codes are comment-stripped before scoring.
///
/// Ties on the score go to the earliest correct submission, then the
/// earliest incorrect one.
pub fn build_retrieval_db(store: &CorpusStore, options: &DbOptions) -> Result<RepairDb, CorpusError> {
    if !(0.0..=1.0).contains(&options.threshold) {
        return Err(CorpusError::InvalidThreshold(options.threshold));
    }
    let mut pairs: Vec<RepairPair> = store
        .sequences
        .par_iter()
        .filter_map(|((user, problem), idx)| {
            let seq: Vec<&Submission> = idx.iter().map(|&i| &store.submissions[i]).collect();
            best_pair(user, problem, &seq, options)
        })
        .collect();
    pairs.sort_by(|a, b| (&a.problem_id, &a.user_id).cmp(&(&b.problem_id, &b.user_id)));
    Ok(RepairDb { pairs })
}

fn best_pair(user: &str, problem: &str, seq: &[&Submission], options: &DbOptions) -> Option<RepairPair> {
    let stripped: BTreeMap<usize, String> = seq
        .iter()
        .map(|s| (s.ordinal, strip_comments(&s.code, &s.language_tag)))
        .collect();
    let mut best: Option<(f64, &Submission, &Submission)> = None;
    for (w, r) in candidate_pairs(seq) {
        let Ok(score) = consistency_score_with(&stripped[&w.ordinal], &stripped[&r.ordinal], options.score) else {
            continue;
        };
        let better = match best {
            None => true,
            Some((bs, bw, br)) => {
                score > bs
                    || (score == bs
                        && (r.timestamp, r.ordinal, w.timestamp, w.ordinal)
                            < (br.timestamp, br.ordinal, bw.timestamp, bw.ordinal))
            }
        };
        if better {
            best = Some((score, w, r));
        }
    }
    let (score, w, r) = best?;
    (score >= options.threshold).then(|| RepairPair {
        pair_id: pair_id(user, problem, w.timestamp, r.timestamp),
        user_id: user.to_string(),
        problem_id: problem.to_string(),
        language_tag: r.language_tag.clone(),
        c_w: stripped[&w.ordinal].clone(),
        c_r: stripped[&r.ordinal].clone(),
        consistency: score,
        w_timestamp: w.timestamp,
        r_timestamp: r.timestamp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sub(user: &str, ts: i64, verdict: Verdict, code: &str, ordinal: usize) -> Submission {
        Submission {
            user_id: user.into(),
            problem_id: "p1".into(),
            timestamp: Timestamp(ts),
            verdict,
            code: code.into(),
            language_tag: "python".into(),
            ordinal,
        }
    }

    fn times(pairs: &[(&Submission, &Submission)]) -> Vec<(i64, i64)> {
        pairs.iter().map(|(w, r)| (w.timestamp.0, r.timestamp.0)).collect()
    }

    #[test]
    fn candidate_pairs_examples() {
        use Verdict::*;
        let a = sub("u", 1, Incorrect, "x", 0);
        let b = sub("u", 2, Correct, "y", 1);
        assert_eq!(times(&candidate_pairs(&[&a, &b])), vec![(1, 2)]);

        let c = sub("u", 2, Incorrect, "x", 1);
        let d = sub("u", 3, Correct, "y", 2);
        assert_eq!(times(&candidate_pairs(&[&a, &c, &d])), vec![(1, 3), (2, 3)]);

        let e = sub("u", 1, Correct, "y", 0);
        let f = sub("u", 2, Incorrect, "x", 1);
        assert!(candidate_pairs(&[&e, &f]).is_empty());
        assert!(candidate_pairs(&[]).is_empty());
    }

    #[test]
    fn equal_timestamps_never_pair() {
        let a = sub("u", 5, Verdict::Incorrect, "x", 0);
        let b = sub("u", 5, Verdict::Correct, "y", 1);
        assert!(candidate_pairs(&[&a, &b]).is_empty());
    }

    // Correct code has 10 lines; `keep` of them are shared with the wrong one.
    fn pair_with_score(keep: usize) -> (String, String) {
        let correct: String = (0..10).map(|i| format!("line{i}\n")).collect();
        let wrong: String = (0..10)
            .map(|i| if i < keep { format!("line{i}\n") } else { format!("bad{i}\n") })
            .collect();
        (wrong, correct)
    }

    fn store_with(subs: Vec<Submission>) -> CorpusStore {
        CorpusStore::from_parts(Vec::new(), subs).unwrap()
    }

    #[test]
    fn argmax_and_threshold() {
        use Verdict::*;
        let (w5, r) = pair_with_score(5);
        let (w9, _) = pair_with_score(9);
        let store = store_with(vec![
            sub("u", 1, Incorrect, &w5, 0),
            sub("u", 2, Incorrect, &w9, 1),
            sub("u", 3, Correct, &r, 2),
        ]);
        let db = build_retrieval_db(&store, &DbOptions::default()).unwrap();
        assert_eq!(db.len(), 1);
        assert_eq!(db.pairs[0].consistency, 0.9);
        assert_eq!(db.pairs[0].w_timestamp, Timestamp(2));

        let (w6, _) = pair_with_score(6);
        let store = store_with(vec![
            sub("u", 1, Incorrect, &w5, 0),
            sub("u", 2, Incorrect, &w6, 1),
            sub("u", 3, Correct, &r, 2),
        ]);
        assert!(build_retrieval_db(&store, &DbOptions::default()).unwrap().is_empty());
    }

    #[test]
    fn ties_prefer_earliest_correct_then_earliest_incorrect() {
        use Verdict::*;
        let (w, r) = pair_with_score(8);
        let store = store_with(vec![
            sub("u", 1, Incorrect, &w, 0),
            sub("u", 2, Incorrect, &w, 1),
            sub("u", 3, Correct, &r, 2),
            sub("u", 4, Correct, &r, 3),
        ]);
        let db = build_retrieval_db(&store, &DbOptions::default()).unwrap();
        assert_eq!(db.pairs[0].w_timestamp, Timestamp(1));
        assert_eq!(db.pairs[0].r_timestamp, Timestamp(3));
        assert_eq!(db.pairs[0].pair_id, pair_id("u", "p1", Timestamp(1), Timestamp(3)));
    }

    #[test]
    fn comments_are_stripped_before_scoring() {
        use Verdict::*;
        let store = store_with(vec![
            sub("u", 1, Incorrect, "a = 1  # old\nb = 2\n", 0),
            sub("u", 2, Correct, "a = 1\nb = 3  # fixed\n", 1),
        ]);
        let db = build_retrieval_db(
            &store,
            &DbOptions {
                threshold: 0.0,
                ..DbOptions::default()
            },
        )
        .unwrap();
        assert_eq!(db.pairs[0].c_w, "a = 1\nb = 2\n");
        assert_eq!(db.pairs[0].c_r, "a = 1\nb = 3\n");
        assert_eq!(db.pairs[0].consistency, 0.5);
    }

    #[test]
    fn invalid_threshold_rejected() {
        let store = CorpusStore::default();
        let opts = DbOptions {
            threshold: 1.5,
            ..DbOptions::default()
        };
        assert!(matches!(build_retrieval_db(&store, &opts), Err(CorpusError::InvalidThreshold(_))));
    }

    #[test]
    fn timestamps_parse_integers_and_instants() {
        use serde_json::json;
        assert_eq!(Timestamp::parse(&json!(17)), Some(Timestamp(17)));
        assert_eq!(Timestamp::parse(&json!("42")), Some(Timestamp(42)));
        let a = Timestamp::parse(&json!("2024-01-01T00:00:00Z")).unwrap();
        let b = Timestamp::parse(&json!("2024-01-01T00:00:01+00:00")).unwrap();
        assert_eq!(b.0 - a.0, 1_000_000);
        assert_eq!(Timestamp::parse(&json!(true)), None);
    }
}

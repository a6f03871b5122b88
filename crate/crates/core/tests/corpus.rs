mod common;

use std::io::Write as _;
use std::process::{Command, Stdio};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use refrepair::corpus::{
    build_retrieval_db, ingest_corpus, strip_comments, CorpusSource, CorpusStore, DbOptions, RepairDb, Submission,
    Timestamp, Verdict,
};

use common::{mutate_program, random_program, toy_dir};

/// Python's own tokenizer decides what is a comment: each COMMENT token is
/// cut from its line and the line is right-trimmed.
const TOKENIZE_ORACLE: &str = r#"
import io, json, sys, tokenize
out = []
for src in json.load(sys.stdin):
    lines = src.split("\n")
    cuts = {}
    for tok in tokenize.generate_tokens(io.StringIO(src).readline):
        if tok.type == tokenize.COMMENT:
            cuts[tok.start[0] - 1] = tok.start[1]
    for row, col in cuts.items():
        lines[row] = lines[row][:col].rstrip(" \t")
    out.append("\n".join(lines))
json.dump(out, sys.stdout)
"#;

fn python_strip(sources: &[String]) -> Vec<String> {
    let mut child = Command::new("python3")
        .args(["-c", TOKENIZE_ORACLE])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .expect("python3");
    child
        .stdin
        .take()
        .unwrap()
        .write_all(serde_json::to_string(sources).unwrap().as_bytes())
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    serde_json::from_slice(&out.stdout).unwrap()
}

fn random_python(rng: &mut ChaCha8Rng) -> String {
    const PIECES: &[&str] = &[
        "x = 1",
        "x = 1  # set x",
        "s = \"a # not a comment\"",
        "t = 'it''s' # two literals",
        "u = \"escaped \\\" # still string\"",
        "# whole-line comment",
        "    # indented comment",
        "doc = \"\"\"triple\n# inside triple\nend\"\"\"",
        "r = '''single # triple'''  # after",
        "print(f\"{x}#\")",
        "y = [1,  # first\n     2]",
        "",
        "if x:\n    pass # trailing\t",
        "z = '#'#",
    ];
    let n = rng.gen_range(0..12);
    let mut s: String = (0..n)
        .map(|_| PIECES[rng.gen_range(0..PIECES.len())])
        .collect::<Vec<_>>()
        .join("\n");
    if rng.gen_bool(0.5) {
        s.push('\n');
    }
    s
}

#[test]
fn hash_stripping_agrees_with_python_tokenizer() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let sources: Vec<String> = (0..300).map(|_| random_python(&mut rng)).collect();
    let expected = python_strip(&sources);
    for (src, want) in sources.iter().zip(&expected) {
        assert_eq!(&strip_comments(src, "Python3"), want, "source:\n{src}");
    }
}

#[test]
fn clike_stripping_examples() {
    let cases = [
        ("int x; // note\n", "int x;\n"),
        ("a /* b */ c\n", "a  c\n"),
        ("/* multi\nline */ int y;\n", "\n int y;\n"),
        ("s = \"// kept\"; // gone\n", "s = \"// kept\";\n"),
        ("char c = '\"'; // q\n", "char c = '\"';\n"),
        ("x = \"a\\\"/*\"; /*z*/\n", "x = \"a\\\"/*\";\n"),
    ];
    for (src, want) in cases {
        assert_eq!(strip_comments(src, "C++ (GCC 9.2.1)"), want, "{src:?}");
    }
    assert_eq!(strip_comments("x # y\n", "brainfuck"), "x # y\n");
}

#[test]
fn toy_corpus_ingests() {
    let store = ingest_corpus(&CorpusSource::Directory(toy_dir())).unwrap();
    assert_eq!(store.problems.len(), 6);
    assert!(store.problems.values().all(|p| p.test_cases.len() == 3));
    // One record has no code field.
    assert_eq!(store.skipped, 1);
    assert_eq!(store.submissions.len(), 54);
    let rw = store.problem("reverse_words").unwrap();
    assert_eq!(rw.test_cases[0].input, std::fs::read(toy_dir().join("tests/reverse_words/01.in")).unwrap());
    for seq in store.sequences.values() {
        let ts: Vec<_> = seq.iter().map(|&i| store.submissions[i].timestamp).collect();
        assert!(ts.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn malformed_records_are_skipped() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("problems.jsonl"),
        "{\"id\": \"p\", \"statement\": \"s\", \"testcases\": [{\"input\": \"1\\n\", \"output\": \"1\\n\"}]}\nnot json\n{\"statement\": \"no id\"}\n",
    )
    .unwrap();
    std::fs::write(
        dir.path().join("submissions.jsonl"),
        concat!(
            "{\"user_id\":\"u\",\"problem_id\":\"p\",\"timestamp\":5,\"verdict\":\"incorrect\",\"code\":\"a\\n\",\"language\":\"python\"}\n",
            "{\"user_id\":\"u\",\"problem_id\":\"p\",\"timestamp\":\"2024-01-01T00:00:00+02:00\",\"verdict\":\"Accepted\",\"code\":\"a\\n\",\"language\":\"python\"}\n",
            "{\"user_id\":\"u\",\"problem_id\":\"p\",\"timestamp\":\"yesterday\",\"verdict\":\"correct\",\"code\":\"a\\n\",\"language\":\"python\"}\n",
            "{\"user_id\":\"u\",\"problem_id\":\"p\",\"timestamp\":6,\"verdict\":\"pending\",\"code\":\"a\\n\",\"language\":\"python\"}\n",
            "\n",
        ),
    )
    .unwrap();
    let store = ingest_corpus(&CorpusSource::Directory(dir.path().to_path_buf())).unwrap();
    assert_eq!(store.problems.len(), 1);
    assert_eq!(store.submissions.len(), 2);
    assert_eq!(store.skipped, 4);
    assert_eq!(store.submissions[1].verdict, Verdict::Correct);
    assert_eq!(store.submissions[1].timestamp, Timestamp(1_704_060_000_000_000));
}

#[test]
fn duplicate_problem_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("problems.jsonl"), "{\"id\": \"p\"}\n{\"id\": \"p\"}\n").unwrap();
    assert!(ingest_corpus(&CorpusSource::Directory(dir.path().to_path_buf())).is_err());
    assert!(ingest_corpus(&CorpusSource::Directory(dir.path().join("missing"))).is_err());
}

#[test]
fn database_round_trips_through_jsonl() {
    let store = ingest_corpus(&CorpusSource::Directory(toy_dir())).unwrap();
    let db = build_retrieval_db(&store, &DbOptions::default()).unwrap();
    assert_eq!(db.len(), 25);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("db.jsonl");
    db.write_jsonl(&path).unwrap();
    assert_eq!(RepairDb::read_jsonl(&path).unwrap(), db);
    assert!(db.pairs.iter().all(|p| p.consistency >= 0.65 && p.w_timestamp < p.r_timestamp));
}

#[test]
fn threshold_out_of_range_is_rejected() {
    let store = CorpusStore::default();
    for t in [-0.1, 1.5, f64::NAN] {
        let options = DbOptions {
            threshold: t,
            ..Default::default()
        };
        assert!(build_retrieval_db(&store, &options).is_err());
    }
}

fn synthetic_store(seed: u64) -> CorpusStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut subs = Vec::new();
    for u in 0..4 {
        let base = random_program(&mut rng, 10);
        for _ in 0..rng.gen_range(0..6) {
            let correct = rng.gen_bool(0.5);
            subs.push(Submission {
                user_id: format!("u{u}"),
                problem_id: "p".into(),
                timestamp: Timestamp(rng.gen_range(0..8)),
                verdict: if correct { Verdict::Correct } else { Verdict::Incorrect },
                code: if correct { base.clone() } else { mutate_program(&mut rng, &base) + "# note\n" },
                language_tag: "python".into(),
                ordinal: subs.len(),
            });
        }
    }
    CorpusStore::from_parts(Vec::new(), subs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn raising_threshold_only_removes_pairs(seed in any::<u64>(), lo in 0.0f64..1.0, hi in 0.0f64..1.0) {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let store = synthetic_store(seed);
        let loose = build_retrieval_db(&store, &DbOptions { threshold: lo, ..Default::default() }).unwrap();
        let strict = build_retrieval_db(&store, &DbOptions { threshold: hi, ..Default::default() }).unwrap();
        for p in &strict.pairs {
            prop_assert_eq!(loose.get(&p.pair_id), Some(p));
        }
        for p in &loose.pairs {
            prop_assert!(!p.c_w.contains('#') && !p.c_r.contains('#'));
        }
    }

    #[test]
    fn input_order_does_not_matter(seed in any::<u64>()) {
        let store = synthetic_store(seed);
        let mut reversed = store.submissions.clone();
        reversed.reverse();
        let shuffled = CorpusStore::from_parts(Vec::new(), reversed).unwrap();
        let a = build_retrieval_db(&store, &DbOptions::default()).unwrap();
        let b = build_retrieval_db(&shuffled, &DbOptions::default()).unwrap();
        prop_assert_eq!(a, b);
    }
}

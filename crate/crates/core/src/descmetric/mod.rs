//! Scoring generated bug descriptions against ground truth: pairwise
//! same-bug judgements from a chat judge, a one-to-one matching over them,
//! and macro-averaged precision / recall / F1.

mod matching;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use matching::{greedy_matching, maximum_matching};

use crate::error::{GatewayError, MetricError};
use crate::generation::fill_template;
use crate::modelgateway::{ChatBackend, ChatClient, ChatRequest};

pub const DEFAULT_JUDGE_TEMPLATE: &str = "\
Two descriptions of bugs in a learner's program are shown below.

Programming Task:
{problem}

Program:
```{language}
{code}```

Description A:
<<<A
{a}
A>>>

Description B:
<<<B
{b}
B>>>

Do Description A and Description B refer to the same logical bug in the program? \
Answer with a single word: YES or NO.
";

pub const STRICT_REPROMPT: &str =
    "\n\nYour previous reply was not a valid answer. Reply with exactly one word, YES or NO, and nothing else.";

pub const DEFAULT_JUDGE_SYSTEM: &str = "You are a strict grader of bug reports.";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchingMode {
    #[default]
    Maximum,
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescMetricSettings {
    pub temperature: f64,
    pub system: String,
    pub template: String,
    pub matching: MatchingMode,
}

impl Default for DescMetricSettings {
    fn default() -> Self {
        DescMetricSettings {
            temperature: 0.0,
            system: DEFAULT_JUDGE_SYSTEM.to_string(),
            template: DEFAULT_JUDGE_TEMPLATE.to_string(),
            matching: MatchingMode::Maximum,
        }
    }
}

/// Context shared by every pairwise judgement of one sample.
#[derive(Debug, Clone, Copy)]
pub struct JudgeContext<'a> {
    pub problem: &'a str,
    pub code: &'a str,
    pub language: &'a str,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairJudgement {
    pub matched: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
    pub cache_keys: Vec<String>,
}

/// Reads a YES/NO verdict, tolerating case, quotes, markdown emphasis and
/// trailing punctuation.
pub fn parse_yes_no(reply: &str) -> Option<bool> {
    let word = reply
        .split_whitespace()
        .next()?
        .trim_matches(|c: char| !c.is_ascii_alphanumeric())
        .to_ascii_uppercase();
    match word.as_str() {
        "YES" => Some(true),
        "NO" => Some(false),
        _ => None,
    }
}

pub fn build_judge_prompt(template: &str, ctx: &JudgeContext<'_>, a: &str, b: &str) -> Result<String, String> {
    let code = if ctx.code.ends_with('\n') || ctx.code.is_empty() {
        ctx.code.to_string()
    } else {
        format!("{}\n", ctx.code)
    };
    let values: BTreeMap<&str, &str> = [
        ("problem", ctx.problem),
        ("language", ctx.language),
        ("code", code.as_str()),
        ("a", a.trim()),
        ("b", b.trim()),
    ]
    .into_iter()
    .collect();
    fill_template(template, &values).map_err(|e| e.to_string())
}

/// Asks the judge whether `a` and `b` describe the same bug. A reply that
/// is neither YES nor NO gets one stricter reprompt; failures score 0 and
/// are flagged.
pub fn match_pair(
    client: &ChatClient,
    settings: &DescMetricSettings,
    ctx: &JudgeContext<'_>,
    a: &str,
    b: &str,
) -> PairJudgement {
    let flagged = |flag: String, cache_keys| PairJudgement {
        matched: false,
        flag: Some(flag),
        cache_keys,
    };
    if a.trim().is_empty() || b.trim().is_empty() {
        return flagged("empty description".into(), Vec::new());
    }
    let prompt = match build_judge_prompt(&settings.template, ctx, a, b) {
        Ok(p) => p,
        Err(e) => return flagged(e, Vec::new()),
    };
    let mut keys = Vec::new();
    let first = ChatRequest::new(settings.system.clone(), prompt.clone(), settings.temperature);
    let reply = client.chat(&first);
    let first_text = match reply {
        Ok(r) => {
            keys.push(r.cache_key);
            Some(r.text)
        }
        Err(GatewayError::EmptyResponse) => None,
        Err(e) => return flagged(format!("judge call failed: {e}"), keys),
    };
    if let Some(v) = first_text.as_deref().and_then(parse_yes_no) {
        return PairJudgement {
            matched: v,
            flag: None,
            cache_keys: keys,
        };
    }
    let strict = ChatRequest::new(settings.system.clone(), format!("{prompt}{STRICT_REPROMPT}"), settings.temperature)
        .with_attempt(1);
    match client.chat(&strict) {
        Ok(r) => {
            keys.push(r.cache_key);
            match parse_yes_no(&r.text) {
                Some(v) => PairJudgement {
                    matched: v,
                    flag: None,
                    cache_keys: keys,
                },
                None => flagged(format!("judge format error: {:?}", r.text.chars().take(80).collect::<String>()), keys),
            }
        }
        Err(e) => flagged(format!("judge call failed: {e}"), keys),
    }
}

/// The u×v judgement matrix and the chosen one-to-one matching.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchMatrix {
    pub entries: Vec<Vec<u8>>,
    pub matching: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flagged: Vec<FlaggedEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cache_keys: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlaggedEntry {
    pub row: usize,
    pub col: usize,
    pub reason: String,
}

impl MatchMatrix {
    pub fn from_entries(entries: Vec<Vec<u8>>, mode: MatchingMode) -> Self {
        let ones: Vec<Vec<bool>> = entries.iter().map(|r| r.iter().map(|e| *e == 1).collect()).collect();
        let matching = match mode {
            MatchingMode::Maximum => maximum_matching(&ones),
            MatchingMode::Greedy => greedy_matching(&ones),
        };
        MatchMatrix {
            entries,
            matching,
            flagged: Vec::new(),
            cache_keys: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.entries.len()
    }

    pub fn cols(&self) -> usize {
        self.entries.first().map_or(0, Vec::len)
    }

    pub fn true_positives(&self) -> usize {
        self.matching.len()
    }
}

/// Judges every (ground truth, generated) pair and matches them.
pub fn match_sets(
    client: &ChatClient,
    settings: &DescMetricSettings,
    ctx: &JudgeContext<'_>,
    ground_truth: &[String],
    generated: &[String],
) -> Result<MatchMatrix, MetricError> {
    if ground_truth.is_empty() {
        return Err(MetricError::EmptyGroundTruth);
    }
    let v = generated.len();
    let cells: Vec<(usize, usize)> = (0..ground_truth.len()).flat_map(|i| (0..v).map(move |j| (i, j))).collect();
    let judged: Vec<PairJudgement> = cells
        .par_iter()
        .map(|&(i, j)| match_pair(client, settings, ctx, &ground_truth[i], &generated[j]))
        .collect();
    let mut entries = vec![vec![0u8; v]; ground_truth.len()];
    let mut flagged = Vec::new();
    let mut cache_keys = Vec::new();
    for (&(i, j), pj) in cells.iter().zip(judged) {
        entries[i][j] = u8::from(pj.matched);
        if let Some(reason) = pj.flag {
            flagged.push(FlaggedEntry { row: i, col: j, reason });
        }
        cache_keys.extend(pj.cache_keys);
    }
    let mut m = MatchMatrix::from_entries(entries, settings.matching);
    m.flagged = flagged;
    m.cache_keys = cache_keys;
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub gated: bool,
}

/// Per-sample precision / recall / F1. A sample whose repair does not pass
/// every test scores zero, while still recording FP = v and FN = u.
pub fn sample_score(matrix: &MatchMatrix, u: usize, v: usize, repaired_all_pass: bool) -> SampleScore {
    if !repaired_all_pass {
        return SampleScore {
            tp: 0,
            fp: v,
            fn_: u,
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
            gated: true,
        };
    }
    let tp = matrix.true_positives().min(u).min(v);
    let (fp, fn_) = (v - tp, u - tp);
    let precision = if v == 0 {
        if u == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        tp as f64 / v as f64
    };
    let recall = if u == 0 { 1.0 } else { tp as f64 / u as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    SampleScore {
        tp,
        fp,
        fn_,
        precision,
        recall,
        f1,
        gated: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescAggregate {
    pub b_precision: f64,
    pub b_recall: f64,
    pub b_f1: f64,
}

/// Macro averages over all samples, gated ones included as zeros.
pub fn aggregate(scores: &[SampleScore]) -> Result<DescAggregate, MetricError> {
    if scores.is_empty() {
        return Err(MetricError::NoSamples);
    }
    let n = scores.len() as f64;
    let mean = |f: fn(&SampleScore) -> f64| scores.iter().map(f).sum::<f64>() / n;
    Ok(DescAggregate {
        b_precision: mean(|s| s.precision),
        b_recall: mean(|s| s.recall),
        b_f1: mean(|s| s.f1),
    })
}

/// Offline judge: YES exactly when the A and B blocks of a judge prompt
/// hold the same text after trimming.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactMatchJudge;

fn marked<'t>(text: &'t str, open: &str, close: &str) -> Option<&'t str> {
    let start = text.find(open)? + open.len();
    let end = start + text[start..].find(close)?;
    Some(text[start..end].trim())
}

impl ChatBackend for ExactMatchJudge {
    fn id(&self) -> &str {
        "exact-match-judge"
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        let a = marked(&request.user, "<<<A\n", "\nA>>>");
        let b = marked(&request.user, "<<<B\n", "\nB>>>");
        Ok(match (a, b) {
            (Some(a), Some(b)) if a == b => "YES".into(),
            _ => "NO".into(),
        })
    }
}

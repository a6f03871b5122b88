use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BenchSample, Pipeline, RepairStatus, RepairTrace, RunConfig};
use crate::descmetric::{aggregate, match_sets, sample_score, JudgeContext, MatchMatrix, SampleScore};
use crate::error::{Error, Result};
use crate::judge::{accuracy, improvement, PassVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub sample_id: String,
    pub problem_id: String,
    pub status: RepairStatus,
    pub generations: usize,
    pub final_pass_vector: PassVector,
    pub all_pass: bool,
    pub improvement: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub improvement_degenerate: bool,
    pub description_score: SampleScore,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub match_matrix: Option<MatchMatrix>,
    pub generated_descriptions: Vec<String>,
    pub ground_truth_descriptions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub trace: RepairTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub samples: usize,
    pub repaired: usize,
    pub exhausted: usize,
    pub errored: usize,
    pub accuracy: f64,
    pub mean_improvement: f64,
    pub degenerate_improvement: usize,
    pub b_precision: f64,
    pub b_recall: f64,
    pub b_f1: f64,
    pub gated: usize,
    pub generations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub summary: Summary,
    pub config: RunConfig,
    pub samples: Vec<SampleRow>,
}

/// Scores one repaired sample: improvement over the buggy program and the
/// description metric on the final solution.
pub fn score_sample(pipeline: &Pipeline, sample: &BenchSample, trace: RepairTrace) -> SampleRow {
    let n_cases = pipeline
        .store
        .problem(&sample.problem_id)
        .map_or(0, |p| p.test_cases.len());
    let final_pv = trace
        .final_pass_vector()
        .cloned()
        .unwrap_or_else(|| PassVector(vec![false; n_cases]));
    let all_pass = final_pv.all_pass();
    let mut error = trace.error.clone();
    let (imp, degenerate) = match &trace.buggy_pass_vector {
        Some(buggy) => match improvement(buggy, &final_pv) {
            Ok(i) => (i.value, i.degenerate),
            Err(e) => {
                error.get_or_insert_with(|| format!("judge: {e}"));
                (0.0, false)
            }
        },
        None => (0.0, false),
    };
    let generated: Vec<String> = trace
        .final_solution()
        .map(|s| s.descriptions.clone())
        .unwrap_or_default();
    let u = sample.ground_truth_descriptions.len();
    let v = generated.len();
    let mut matrix = None;
    if all_pass {
        let statement = pipeline
            .store
            .problem(&sample.problem_id)
            .map_or("", |p| p.statement.as_str());
        let ctx = JudgeContext {
            problem: statement,
            code: &sample.buggy_code,
            language: &trace.language_tag,
        };
        match match_sets(
            &pipeline.gateway.judge,
            pipeline.desc_settings(),
            &ctx,
            &sample.ground_truth_descriptions,
            &generated,
        ) {
            Ok(m) => matrix = Some(m),
            Err(e) => {
                error.get_or_insert_with(|| format!("metric: {e}"));
            }
        }
    }
    let empty = MatchMatrix::from_entries(vec![vec![0; v]; u], pipeline.desc_settings().matching);
    let score = sample_score(matrix.as_ref().unwrap_or(&empty), u, v, all_pass && matrix.is_some());
    SampleRow {
        sample_id: sample.sample_id.clone(),
        problem_id: sample.problem_id.clone(),
        status: trace.status,
        generations: trace.generations(),
        final_pass_vector: final_pv,
        all_pass,
        improvement: imp,
        improvement_degenerate: degenerate,
        description_score: score,
        match_matrix: matrix,
        generated_descriptions: generated,
        ground_truth_descriptions: sample.ground_truth_descriptions.clone(),
        error,
        trace,
    }
}

fn summarize(rows: &[SampleRow]) -> Result<Summary> {
    let vectors: Vec<PassVector> = rows.iter().map(|r| r.final_pass_vector.clone()).collect();
    let scores: Vec<SampleScore> = rows.iter().map(|r| r.description_score).collect();
    let b = aggregate(&scores)?;
    let count = |s: RepairStatus| rows.iter().filter(|r| r.status == s).count();
    Ok(Summary {
        samples: rows.len(),
        repaired: count(RepairStatus::Repaired),
        exhausted: count(RepairStatus::Exhausted),
        errored: count(RepairStatus::Error),
        accuracy: accuracy(&vectors)?,
        mean_improvement: rows.iter().map(|r| r.improvement).sum::<f64>() / rows.len() as f64,
        degenerate_improvement: rows.iter().filter(|r| r.improvement_degenerate).count(),
        b_precision: b.b_precision,
        b_recall: b.b_recall,
        b_f1: b.b_f1,
        gated: rows.iter().filter(|r| r.description_score.gated).count(),
        generations: rows.iter().map(|r| r.generations).sum(),
    })
}

/// Repairs and scores every sample on a pool of `config.workers` threads.
/// Rows keep dataset order.
pub fn run_benchmark(pipeline: &Pipeline, samples: &[BenchSample]) -> Result<Report> {
    if samples.is_empty() {
        return Err(Error::Config("dataset has no samples".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(pipeline.config.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let rows: Vec<SampleRow> = pool.install(|| {
        samples
            .par_iter()
            .map(|s| score_sample(pipeline, s, pipeline.repair_sample(s)))
            .collect()
    });
    Ok(Report {
        summary: summarize(&rows)?,
        config: pipeline.config.clone(),
        samples: rows,
    })
}

pub fn write_report(report: &Report, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: &Path) -> Result<Report> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Plain-text per-sample table followed by the summary metrics.
pub fn render_table(report: &Report) -> String {
    let mut out = String::new();
    let status = |s: RepairStatus| match s {
        RepairStatus::Repaired => "repaired",
        RepairStatus::Exhausted => "exhausted",
        RepairStatus::Error => "error",
    };
    let _ = writeln!(
        out,
        "{:<16} {:<14} {:<9} {:>4} {:>7} {:>7} {:>6} {:>6} {:>6}",
        "sample", "problem", "status", "gens", "passed", "improve", "P", "R", "F1"
    );
    for r in &report.samples {
        let s = &r.description_score;
        let _ = writeln!(
            out,
            "{:<16} {:<14} {:<9} {:>4} {:>7} {:>7.3} {:>6.3} {:>6.3} {:>6.3}",
            r.sample_id,
            r.problem_id,
            status(r.status),
            r.generations,
            format!("{}/{}", r.final_pass_vector.passed(), r.final_pass_vector.len()),
            r.improvement,
            s.precision,
            s.recall,
            s.f1
        );
    }
    let m = &report.summary;
    let _ = writeln!(
        out,
        "\nsamples {}  repaired {}  exhausted {}  errors {}  generations {}",
        m.samples, m.repaired, m.exhausted, m.errored, m.generations
    );
    let _ = writeln!(
        out,
        "Acc {:.4}  Improve {:.4}  B-Precision {:.4}  B-Recall {:.4}  B-F1 {:.4}",
        m.accuracy, m.mean_improvement, m.b_precision, m.b_recall, m.b_f1
    );
    out
}

//! End-to-end pipeline: database and index construction, the iterative
//! repair loop, and benchmark reports.

mod config;
mod report;

use std::collections::HashMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{RunConfig, TemplatePaths};
pub use report::{render_table, run_benchmark, read_report, score_sample, write_report, Report, SampleRow, Summary};

use crate::corpus::{
    build_retrieval_db, ingest_corpus, strip_comments, CorpusSource, CorpusStore, DbOptions, Problem, RepairDb,
    RepairPair,
};
use crate::descmetric::DescMetricSettings;
use crate::diffing::ScoreOptions;
use crate::error::{Error, GenerationError, JudgeError, Result};
use crate::generation::{
    build_contexts, build_repair_prompt, generate_solution, DescriptionCache, GeneratedSolution, GenerationSettings,
    PromptInputs, PromptTemplates,
};
use crate::judge::{Judge, JudgeSettings, Outcome, PassVector, RunnerTable};
use crate::modelgateway::{content_key, open_cache, ChatClient, EmbeddingVector, Gateway};
use crate::retrieval::{base_retrieve, build_index, iterative_retrieve, read_index, Hit, VectorIndex};

/// One benchmark row: a buggy program and its ground-truth bug descriptions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchSample {
    pub sample_id: String,
    pub problem_id: String,
    pub buggy_code: String,
    pub ground_truth_descriptions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language_tag: Option<String>,
}

pub fn load_dataset(path: &Path) -> Result<Vec<BenchSample>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row: BenchSample = serde_json::from_str(line)
            .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), i + 1)))?;
        if row.ground_truth_descriptions.is_empty() || row.ground_truth_descriptions.iter().any(|d| d.trim().is_empty())
        {
            return Err(Error::Config(format!(
                "{}:{}: sample `{}` needs non-empty ground-truth descriptions",
                path.display(),
                i + 1,
                row.sample_id
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairStatus {
    Repaired,
    Exhausted,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalMode {
    Base,
    Iterative,
}

/// The failed attempt steering an iterative retrieval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Guide {
    /// Iteration whose fixed code was embedded; `None` means the buggy code
    /// itself (no attempt had parsed yet).
    pub from_iteration: Option<usize>,
    pub embedding_key: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalRecord {
    pub mode: RetrievalMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guide: Option<Guide>,
    pub hits: Vec<Hit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shortage: Option<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub retrieval: RetrievalRecord,
    pub contexts_used: usize,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub contexts_dropped: usize,
    pub description_keys: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation_key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<GeneratedSolution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pass_vector: Option<PassVector>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outcomes: Vec<Outcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<u64>,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairTrace {
    pub sample_id: String,
    pub problem_id: String,
    pub language_tag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buggy_embedding_key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buggy_pass_vector: Option<PassVector>,
    pub iterations: Vec<IterationRecord>,
    pub status: RepairStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<u64>,
}

impl RepairTrace {
    pub fn generations(&self) -> usize {
        self.iterations.iter().filter(|r| r.generation_key.is_some()).count()
    }

    /// Pass vector of the last judged attempt.
    pub fn final_pass_vector(&self) -> Option<&PassVector> {
        self.iterations.iter().rev().find_map(|r| r.pass_vector.as_ref())
    }

    /// The last parsed solution.
    pub fn final_solution(&self) -> Option<&GeneratedSolution> {
        self.iterations.iter().rev().find_map(|r| r.solution.as_ref())
    }
}

/// Builds the three model clients from a config, with caches under
/// `cache_dir` when set.
pub fn build_gateway(config: &RunConfig) -> Result<Gateway> {
    let dir = config.cache_dir.as_deref();
    let embeddings = config
        .embedding
        .build(open_cache(dir, "embeddings")?)?
        .with_in_flight_limit(config.gateway_in_flight);
    let generator_config = config
        .generator
        .as_ref()
        .ok_or_else(|| Error::Config("no generator backend configured".into()))?;
    let generator = ChatClient::new(generator_config.build_backend()?, open_cache(dir, "chat")?)
        .with_token_budget(config.token_budget)
        .with_in_flight_limit(config.gateway_in_flight);
    let judge = ChatClient::new(config.judge_model.build_backend()?, open_cache(dir, "judge")?)
        .with_token_budget(config.token_budget)
        .with_in_flight_limit(config.gateway_in_flight);
    Ok(Gateway::new(embeddings, generator, judge))
}

pub fn build_judge(config: &RunConfig) -> Result<Judge> {
    let runners = match &config.runners {
        Some(p) => RunnerTable::from_file(p)?,
        None => RunnerTable::default(),
    };
    Ok(Judge::new(
        runners,
        JudgeSettings {
            limits: config.limits,
            strict_output: config.strict_output,
            workers: config.judge_workers,
        },
    ))
}

pub fn db_options(config: &RunConfig) -> DbOptions {
    DbOptions {
        threshold: config.threshold,
        score: ScoreOptions {
            drop_blank_lines: !config.keep_blank_lines,
        },
    }
}

pub fn load_store(config: &RunConfig) -> Result<CorpusStore> {
    let dir = config
        .corpus
        .as_ref()
        .ok_or_else(|| Error::Config("no corpus directory configured".into()))?;
    Ok(ingest_corpus(&CorpusSource::Directory(dir.clone()))?)
}

/// Shared read-only state of a run plus the model and judge clients.
pub struct Pipeline {
    pub config: RunConfig,
    pub store: CorpusStore,
    pub db: RepairDb,
    pub index: VectorIndex,
    pub gateway: Gateway,
    pub judge: Judge,
    pair_lookup: HashMap<String, usize>,
    descriptions: DescriptionCache,
    generation: GenerationSettings,
    desc_settings: DescMetricSettings,
}

impl Pipeline {
    /// Loads the corpus and builds (or loads, when configured paths exist)
    /// the database and index.
    pub fn from_config(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let store = load_store(&config)?;
        let db = match &config.db {
            Some(p) if p.exists() => RepairDb::read_jsonl(p)?,
            _ => build_retrieval_db(&store, &db_options(&config))?,
        };
        let gateway = build_gateway(&config)?;
        let index = match &config.index {
            Some(p) if p.exists() => {
                let index = read_index(p)?;
                if index.dims() != gateway.embeddings.dims() || index.backend_id() != gateway.embeddings.backend_id() {
                    return Err(Error::Config(format!(
                        "index {} was built with {} ({} dims), not the configured {} ({} dims)",
                        p.display(),
                        index.backend_id(),
                        index.dims(),
                        gateway.embeddings.backend_id(),
                        gateway.embeddings.dims()
                    )));
                }
                index
            }
            _ => build_index(&db, &gateway.embeddings)?,
        };
        let judge = build_judge(&config)?;
        Self::assemble(config, store, db, index, gateway, judge)
    }

    /// Assembles a pipeline from already-built parts.
    pub fn assemble(
        config: RunConfig,
        store: CorpusStore,
        db: RepairDb,
        index: VectorIndex,
        gateway: Gateway,
        judge: Judge,
    ) -> Result<Self> {
        let t = &config.templates;
        let templates =
            PromptTemplates::with_overrides(t.repair.as_deref(), t.describe.as_deref(), t.system.as_deref())?;
        let mut desc_settings = DescMetricSettings {
            temperature: config.judge_temperature,
            matching: config.matching,
            ..DescMetricSettings::default()
        };
        if let Some(p) = &t.judge {
            desc_settings.template = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        }
        let generation = GenerationSettings {
            k: config.k,
            temperature: config.gen_temperature,
            context_lines: config.context_lines,
            templates,
        };
        let pair_lookup = db.pairs.iter().enumerate().map(|(i, p)| (p.pair_id.clone(), i)).collect();
        Ok(Pipeline {
            config,
            store,
            db,
            index,
            gateway,
            judge,
            pair_lookup,
            descriptions: DescriptionCache::new(),
            generation,
            desc_settings,
        })
    }

    pub fn desc_settings(&self) -> &DescMetricSettings {
        &self.desc_settings
    }

    fn pair(&self, pair_id: &str) -> Option<&RepairPair> {
        self.pair_lookup.get(pair_id).map(|&i| &self.db.pairs[i])
    }

    fn embed_code(&self, code: &str, language: &str) -> Result<(EmbeddingVector, String)> {
        let stripped = strip_comments(code, language);
        let key = self.gateway.embeddings.cache_key(&stripped);
        Ok((self.gateway.embeddings.embed(&stripped)?, key))
    }

    /// Repairs one sample: a base-retrieval attempt, then up to
    /// `max_iterations` further attempts, each retrieving against the most
    /// recent failed fix. Stops at the first attempt passing every test.
    pub fn repair_sample(&self, sample: &BenchSample) -> RepairTrace {
        let started = Instant::now();
        let language = sample
            .language_tag
            .clone()
            .unwrap_or_else(|| self.config.default_language.clone());
        let mut trace = RepairTrace {
            sample_id: sample.sample_id.clone(),
            problem_id: sample.problem_id.clone(),
            language_tag: language.clone(),
            buggy_embedding_key: None,
            buggy_pass_vector: None,
            iterations: Vec::new(),
            status: RepairStatus::Error,
            error: None,
            timing_ms: None,
        };
        if let Err(e) = self.repair_into(sample, &language, &mut trace) {
            trace.status = RepairStatus::Error;
            trace.error = Some(format!("{}: {e}", e.category()));
        }
        if !self.config.deterministic {
            trace.timing_ms = Some(started.elapsed().as_millis() as u64);
        }
        trace
    }

    fn repair_into(&self, sample: &BenchSample, language: &str, trace: &mut RepairTrace) -> Result<()> {
        let problem = self
            .store
            .problem(&sample.problem_id)
            .ok_or_else(|| Error::Config(format!("unknown problem `{}`", sample.problem_id)))?;
        if sample.buggy_code.trim().is_empty() {
            return Err(Error::Config("buggy code is empty".into()));
        }
        let buggy_eval = self.judge.evaluate_code(&sample.buggy_code, language, problem)?;
        trace.buggy_pass_vector = Some(buggy_eval.pass_vector);
        let (h_c, h_c_key) = self.embed_code(&sample.buggy_code, language)?;
        trace.buggy_embedding_key = Some(h_c_key.clone());

        // The most recent failed attempt: (iteration, embedding, key).
        let mut failed: Option<(Option<usize>, EmbeddingVector, String)> = None;
        for t in 0..=self.config.max_iterations {
            let started = Instant::now();
            let (retrieval, guide) = if t == 0 {
                (base_retrieve(&self.index, &h_c, &problem.id, self.config.k)?, None)
            } else {
                let (from, h_yw, key) = failed.clone().unwrap_or((None, h_c.clone(), h_c_key.clone()));
                let r = iterative_retrieve(&self.index, &h_c, &h_yw, &problem.id, self.config.k)?;
                (
                    r,
                    Some(Guide {
                        from_iteration: from,
                        embedding_key: key,
                    }),
                )
            };
            let mut record = IterationRecord {
                iteration: t,
                retrieval: RetrievalRecord {
                    mode: if t == 0 { RetrievalMode::Base } else { RetrievalMode::Iterative },
                    guide,
                    hits: retrieval.hits.clone(),
                    shortage: retrieval.shortage,
                    degenerate: retrieval.degenerate,
                },
                contexts_used: 0,
                contexts_dropped: 0,
                description_keys: Vec::new(),
                prompt_hash: None,
                generation_key: None,
                solution: None,
                pass_vector: None,
                outcomes: Vec::new(),
                error: None,
                timing_ms: None,
            };
            let outcome = self.attempt(problem, sample, language, &retrieval.hits, t, &mut record);
            if !self.config.deterministic {
                record.timing_ms = Some(started.elapsed().as_millis() as u64);
            }
            match outcome {
                Ok(Some(true)) => {
                    trace.iterations.push(record);
                    trace.status = RepairStatus::Repaired;
                    return Ok(());
                }
                Ok(Some(false)) => {
                    let code = &record.solution.as_ref().expect("judged attempt has a solution").fixed_code;
                    match self.embed_code(code, language) {
                        Ok((h, key)) => failed = Some((Some(t), h, key)),
                        Err(e) => record.error = Some(format!("{}: {e}", e.category())),
                    }
                }
                Ok(None) => {}
                Err(e @ Error::Judge(JudgeError::Infrastructure(_))) => {
                    record.error = Some(format!("{}: {e}", e.category()));
                    trace.iterations.push(record);
                    return Err(e);
                }
                Err(e) => record.error = Some(format!("{}: {e}", e.category())),
            }
            trace.iterations.push(record);
        }
        trace.status = RepairStatus::Exhausted;
        Ok(())
    }

    /// One generation plus judging. `Ok(None)` means the reply did not
    /// parse; the iteration is consumed.
    fn attempt(
        &self,
        problem: &Problem,
        sample: &BenchSample,
        language: &str,
        hits: &[Hit],
        t: usize,
        record: &mut IterationRecord,
    ) -> Result<Option<bool>> {
        let pairs: Vec<&RepairPair> = hits.iter().filter_map(|h| self.pair(&h.pair_id)).collect();
        let contexts = build_contexts(&self.gateway.generator, &self.descriptions, &self.generation, problem, &pairs)?;
        record.description_keys = contexts.iter().map(|c| c.description_key.clone()).collect();
        let prompt = build_repair_prompt(
            &PromptInputs {
                problem_statement: &problem.statement,
                buggy_code: &sample.buggy_code,
                language,
                k: self.config.k,
                token_budget: self.config.token_budget,
                templates: &self.generation.templates,
            },
            &contexts,
        )?;
        record.contexts_used = prompt.contexts_used;
        record.contexts_dropped = prompt.dropped;
        record.prompt_hash = Some(content_key(&[&prompt.text]));
        let solution = match generate_solution(&self.gateway.generator, &self.generation, &prompt, t as u32) {
            Ok(s) => s,
            Err(GenerationError::Parse { cache_key, .. }) => {
                record.generation_key = Some(cache_key);
                record.error = Some("generation: response has no fenced code block".into());
                return Ok(None);
            }
            Err(e) => return Err(e.into()),
        };
        record.generation_key = Some(solution.cache_key.clone());
        let eval = self.judge.evaluate_code(&solution.fixed_code, language, problem);
        record.solution = Some(solution);
        let eval = eval?;
        record.outcomes = eval.verdicts.iter().map(|v| v.outcome).collect();
        let all_pass = eval.pass_vector.all_pass();
        record.pass_vector = Some(eval.pass_vector);
        Ok(Some(all_pass))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_rows_need_ground_truth() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        std::fs::write(
            &p,
            "{\"sample_id\":\"s\",\"problem_id\":\"p\",\"buggy_code\":\"x\",\"ground_truth_descriptions\":[\"bug\"]}\n",
        )
        .unwrap();
        assert_eq!(load_dataset(&p).unwrap().len(), 1);
        std::fs::write(
            &p,
            "{\"sample_id\":\"s\",\"problem_id\":\"p\",\"buggy_code\":\"x\",\"ground_truth_descriptions\":[]}\n",
        )
        .unwrap();
        assert!(matches!(load_dataset(&p), Err(Error::Config(_))));
    }
}

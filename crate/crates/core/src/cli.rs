//! Command-line front end. Every subcommand reads a [`RunConfig`] from
//! `--config` (or defaults) and applies flag overrides on top.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::corpus::{build_retrieval_db, RepairDb};
use crate::descmetric::{aggregate, match_sets, sample_score, JudgeContext, MatchMatrix};
use crate::error::{Error, Result};
use crate::modelgateway::{open_cache, ChatClient};
use crate::orchestrator::{
    build_judge, db_options, load_dataset, load_store, read_report, render_table, run_benchmark, write_report,
    BenchSample, Pipeline, RunConfig,
};
use crate::retrieval::{build_index, write_index};

#[derive(Debug, Parser)]
#[command(name = "refrepair", version, about = "Retrieval-augmented program repair with bug descriptions")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML or JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Consistency threshold for admitting repair pairs.
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    /// Reference repairs per prompt.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Iterative-retrieval rounds after the first attempt (0 = base only).
    #[arg(long, global = true)]
    pub iterations: Option<usize>,
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Include wall-clock timings in traces and reports.
    #[arg(long, global = true)]
    pub timings: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mine repair pairs from the corpus and write them as JSONL.
    BuildDb {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Embed a repair-pair database into a binary index.
    EmbedIndex {
        #[arg(long)]
        db: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repair one program and print its trace as JSON.
    Repair {
        /// Sample id from the dataset.
        #[arg(long, conflicts_with_all = ["problem", "code"])]
        sample: Option<String>,
        #[arg(long, requires = "code")]
        problem: Option<String>,
        /// File holding the buggy program.
        #[arg(long, requires = "problem")]
        code: Option<PathBuf>,
        #[arg(long)]
        language: Option<String>,
    },
    /// Run a program against a problem's test cases.
    Judge {
        #[arg(long)]
        problem: String,
        #[arg(long)]
        code: PathBuf,
        #[arg(long)]
        language: Option<String>,
    },
    /// Score descriptions: recompute B-metrics for a report, or match one
    /// pair of JSON description lists.
    EvalDesc {
        #[arg(long, conflicts_with_all = ["gold", "pred"])]
        report: Option<PathBuf>,
        #[arg(long, requires = "pred")]
        gold: Option<PathBuf>,
        #[arg(long, requires = "gold")]
        pred: Option<PathBuf>,
        /// Problem statement used as judge context.
        #[arg(long, default_value = "")]
        problem_text: String,
        /// Treat the repair as failing (gated).
        #[arg(long)]
        gated: bool,
    },
    /// Repair and score a whole dataset.
    Bench {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the table of a saved report.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
}

/// Usage problems exit with 2, other failures with 1.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 {
                write!(stdout, "{}", e.render())
            } else {
                write!(stderr, "{}", e.render())
            };
            return code;
        }
    };
    let config = match load_config(&cli.common) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(stderr, "usage error: {e}");
            return 2;
        }
    };
    match dispatch(&cli.command, config, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error [{}]: {e}", e.category());
            1
        }
    }
}

pub fn load_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut config = match &common.config {
        Some(p) if !p.exists() => return Err(Error::Config(format!("config file {} not found", p.display()))),
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = common.threshold {
        config.threshold = v;
    }
    if let Some(v) = common.k {
        config.k = v;
    }
    if let Some(v) = common.iterations {
        config.max_iterations = v;
    }
    if let Some(v) = &common.cache_dir {
        config.cache_dir = Some(v.clone());
    }
    if let Some(v) = &common.corpus {
        config.corpus = Some(v.clone());
    }
    if let Some(v) = &common.dataset {
        config.dataset = Some(v.clone());
    }
    if let Some(v) = common.workers {
        config.workers = v;
    }
    if common.timings {
        config.deterministic = false;
    }
    config.validate()?;
    Ok(config)
}

fn required<'a>(value: Option<&'a PathBuf>, what: &str) -> Result<&'a Path> {
    value
        .map(PathBuf::as_path)
        .ok_or_else(|| Error::Config(format!("no {what} given (flag or config)")))
}

fn dataset(config: &RunConfig) -> Result<Vec<BenchSample>> {
    load_dataset(required(config.dataset.as_ref(), "dataset")?)
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable value")
}

fn dispatch(command: &Command, config: RunConfig, out: &mut dyn Write) -> Result<()> {
    let w = |out: &mut dyn Write, text: &str| writeln!(out, "{text}").map_err(|e| Error::io("<stdout>", e));
    match command {
        Command::BuildDb { out: path } => {
            let store = load_store(&config)?;
            let db = build_retrieval_db(&store, &db_options(&config))?;
            let path = required(path.as_ref().or(config.db.as_ref()), "output path")?;
            db.write_jsonl(path)?;
            w(
                out,
                &format!(
                    "{} repair pairs from {} submissions ({} skipped records) -> {}",
                    db.len(),
                    store.submissions.len(),
                    store.skipped,
                    path.display()
                ),
            )
        }
        Command::EmbedIndex { db, out: path } => {
            let db_path = required(db.as_ref().or(config.db.as_ref()), "database path")?;
            let db = RepairDb::read_jsonl(db_path)?;
            let embeddings = config.embedding.build(open_cache(config.cache_dir.as_deref(), "embeddings")?)?;
            let index = build_index(&db, &embeddings)?;
            let path = required(path.as_ref().or(config.index.as_ref()), "output path")?;
            write_index(&index, path)?;
            w(out, &format!("{} records ({} dims) -> {}", index.len(), index.dims(), path.display()))
        }
        Command::Repair {
            sample,
            problem,
            code,
            language,
        } => {
            let target = match (sample, problem, code) {
                (Some(id), _, _) => dataset(&config)?
                    .into_iter()
                    .find(|s| &s.sample_id == id)
                    .ok_or_else(|| Error::Config(format!("sample `{id}` not in dataset")))?,
                (None, Some(p), Some(c)) => BenchSample {
                    sample_id: "cli".into(),
                    problem_id: p.clone(),
                    buggy_code: std::fs::read_to_string(c).map_err(|e| Error::io(c, e))?,
                    ground_truth_descriptions: Vec::new(),
                    language_tag: language.clone(),
                },
                _ => return Err(Error::Config("give --sample, or --problem with --code".into())),
            };
            let pipeline = Pipeline::from_config(config)?;
            let trace = pipeline.repair_sample(&target);
            w(out, &to_json(&trace))
        }
        Command::Judge {
            problem,
            code,
            language,
        } => {
            let store = load_store(&config)?;
            let p = store
                .problem(problem)
                .ok_or_else(|| Error::Config(format!("unknown problem `{problem}`")))?;
            let source = std::fs::read_to_string(code).map_err(|e| Error::io(code, e))?;
            let language = language.clone().unwrap_or_else(|| config.default_language.clone());
            let eval = build_judge(&config)?.evaluate_code(&source, &language, p)?;
            if config.deterministic {
                let outcomes: Vec<_> = eval.verdicts.iter().map(|v| v.outcome).collect();
                w(out, &to_json(&serde_json::json!({"pass_vector": eval.pass_vector, "outcomes": outcomes})))
            } else {
                w(out, &to_json(&eval))
            }
        }
        Command::EvalDesc {
            report,
            gold,
            pred,
            problem_text,
            gated,
        } => {
            let judge = ChatClient::new(
                config.judge_model.build_backend()?,
                open_cache(config.cache_dir.as_deref(), "judge")?,
            );
            let settings = crate::descmetric::DescMetricSettings {
                temperature: config.judge_temperature,
                matching: config.matching,
                ..Default::default()
            };
            if let Some(path) = report {
                let report = read_report(path)?;
                let mut scores = Vec::new();
                for row in &report.samples {
                    let ctx = JudgeContext {
                        problem: problem_text,
                        code: "",
                        language: &row.trace.language_tag,
                    };
                    let (u, v) = (row.ground_truth_descriptions.len(), row.generated_descriptions.len());
                    let matrix = if row.all_pass {
                        match_sets(&judge, &settings, &ctx, &row.ground_truth_descriptions, &row.generated_descriptions)?
                    } else {
                        MatchMatrix::from_entries(vec![vec![0; v]; u], settings.matching)
                    };
                    scores.push(sample_score(&matrix, u, v, row.all_pass));
                }
                return w(out, &to_json(&aggregate(&scores)?));
            }
            let (Some(gold), Some(pred)) = (gold, pred) else {
                return Err(Error::Config("give --report, or --gold with --pred".into()));
            };
            let read_list = |p: &Path| -> Result<Vec<String>> {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
            };
            let (a, b) = (read_list(gold)?, read_list(pred)?);
            let ctx = JudgeContext {
                problem: problem_text,
                code: "",
                language: &config.default_language,
            };
            let matrix = match_sets(&judge, &settings, &ctx, &a, &b)?;
            let score = sample_score(&matrix, a.len(), b.len(), !gated);
            w(out, &to_json(&serde_json::json!({"match_matrix": matrix, "score": score})))
        }
        Command::Bench { out: path } => {
            let samples = dataset(&config)?;
            let destination = path.clone().or_else(|| config.report.clone());
            let pipeline = Pipeline::from_config(config)?;
            let report = run_benchmark(&pipeline, &samples)?;
            if let Some(p) = &destination {
                write_report(&report, p)?;
            }
            w(out, render_table(&report).trim_end())
        }
        Command::Report { input } => {
            let report = read_report(input)?;
            w(out, render_table(&report).trim_end())
        }
    }
}

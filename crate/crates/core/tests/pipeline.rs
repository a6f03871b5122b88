mod common;

use std::path::{Path, PathBuf};

use refrepair::corpus::build_retrieval_db;
use refrepair::descmetric::ExactMatchJudge;
use refrepair::judge::{Judge, JudgeSettings, RunnerTable};
use refrepair::modelgateway::{ChatBackend, ChatScript, Gateway, ScriptRule, ScriptedChat};
use refrepair::orchestrator::{
    build_judge, db_options, load_dataset, load_store, read_report, run_benchmark, BenchSample, Pipeline,
    RepairStatus, RetrievalMode, RunConfig,
};
use refrepair::retrieval::build_index;

use common::toy_dir;

fn toy_config() -> RunConfig {
    RunConfig::load(&toy_dir().join("config.toml")).unwrap()
}

fn toy_script() -> ChatScript {
    serde_json::from_str(&std::fs::read_to_string(toy_dir().join("chat_script.json")).unwrap()).unwrap()
}

fn samples(config: &RunConfig) -> Vec<BenchSample> {
    load_dataset(config.dataset.as_ref().unwrap()).unwrap()
}

fn pipeline_with(config: RunConfig, generator: Box<dyn ChatBackend>, judge: Option<Judge>) -> Pipeline {
    let store = load_store(&config).unwrap();
    let db = build_retrieval_db(&store, &db_options(&config)).unwrap();
    let gateway = Gateway::offline(config.embedding.dims(), generator, Box::new(ExactMatchJudge));
    let index = build_index(&db, &gateway.embeddings).unwrap();
    let judge = judge.unwrap_or_else(|| build_judge(&config).unwrap());
    Pipeline::assemble(config, store, db, index, gateway, judge).unwrap()
}

fn sample(config: &RunConfig, id: &str) -> BenchSample {
    samples(config).into_iter().find(|s| s.sample_id == id).unwrap()
}

#[test]
fn unparseable_reply_consumes_an_iteration() {
    let config = toy_config();
    let mut script = toy_script();
    script.rules.insert(
        0,
        ScriptRule {
            contains: vec!["Buggy Code:".into()],
            attempt: Some(0),
            response: "Sorry, I only have prose today.".into(),
        },
    );
    let pipeline = pipeline_with(config.clone(), Box::new(ScriptedChat::new(script)), None);
    let trace = pipeline.repair_sample(&sample(&config, "s01"));
    assert_eq!(trace.status, RepairStatus::Repaired);
    assert_eq!(trace.generations(), 2);
    let first = &trace.iterations[0];
    assert!(first.solution.is_none() && first.pass_vector.is_none());
    assert!(first.error.as_deref().unwrap().contains("no fenced code block"));
    assert!(first.generation_key.is_some());
    let second = &trace.iterations[1];
    assert_eq!(second.retrieval.mode, RetrievalMode::Iterative);
    // No attempt parsed yet, so the buggy program guides retrieval.
    let guide = second.retrieval.guide.as_ref().unwrap();
    assert_eq!(guide.from_iteration, None);
    assert_eq!(Some(&guide.embedding_key), trace.buggy_embedding_key.as_ref());
}

#[test]
fn zero_iterations_means_one_generation() {
    let mut config = toy_config();
    config.max_iterations = 0;
    let failing = ScriptedChat::new(ChatScript {
        rules: vec![],
        default: Some("```python\nprint(0)\n```\nBug Descriptions:\n1. Unknown.\n".into()),
    });
    let pipeline = pipeline_with(config.clone(), Box::new(failing), None);
    let report = run_benchmark(&pipeline, &samples(&config)).unwrap();
    for row in &report.samples {
        assert_eq!(row.generations, 1);
        assert_eq!(row.trace.iterations[0].retrieval.mode, RetrievalMode::Base);
        assert!(row.trace.iterations[0].retrieval.guide.is_none());
    }
}

#[test]
fn failing_repairs_are_gated_out_of_description_metrics() {
    let mut config = toy_config();
    config.max_iterations = 0;
    let failing = ScriptedChat::new(ChatScript {
        rules: vec![],
        default: Some("```python\nprint(0)\n```\nBug Descriptions:\n1. Off by one.\n2. Wrong sign.\n".into()),
    });
    let pipeline = pipeline_with(config.clone(), Box::new(failing), None);
    let report = run_benchmark(&pipeline, &samples(&config)).unwrap();
    assert_eq!(report.summary.accuracy, 0.0);
    assert_eq!(report.summary.gated, report.samples.len());
    assert_eq!((report.summary.b_precision, report.summary.b_recall, report.summary.b_f1), (0.0, 0.0, 0.0));
    for row in &report.samples {
        let s = row.description_score;
        assert!(s.gated);
        assert_eq!((s.tp, s.fp, s.fn_), (0, 2, row.ground_truth_descriptions.len()));
        assert!(row.match_matrix.is_none());
        assert_eq!(row.status, RepairStatus::Exhausted);
    }
}

#[test]
fn toy_run_scores_descriptions_of_repaired_samples() {
    let config = toy_config();
    let pipeline = pipeline_with(config.clone(), Box::new(ScriptedChat::new(toy_script())), None);
    let report = run_benchmark(&pipeline, &samples(&config)).unwrap();
    assert_eq!(report.summary.accuracy, 1.0);
    assert_eq!(report.summary.repaired, 10);
    assert_eq!(report.summary.mean_improvement, 1.0);
    for row in &report.samples {
        let m = row.match_matrix.as_ref().unwrap();
        assert_eq!(m.rows(), row.ground_truth_descriptions.len());
        assert_eq!(m.cols(), row.generated_descriptions.len());
        assert_eq!(row.description_score.tp, m.true_positives());
    }
    // s06 matches one of two descriptions; s07 and s10 add one unmatched
    // description each. The other seven match exactly.
    let f1_extra = 2.0 * 0.5 / 1.5;
    assert!((report.summary.b_precision - 8.5 / 10.0).abs() < 1e-12);
    assert!((report.summary.b_recall - 9.5 / 10.0).abs() < 1e-12);
    assert!((report.summary.b_f1 - (7.5 + 2.0 * f1_extra) / 10.0).abs() < 1e-12);
}

#[test]
fn sandbox_failure_marks_the_sample_errored() {
    let config = toy_config();
    let broken = RunnerTable::from_toml(
        "[runners.python]\nfile_name = \"main.py\"\nrun = \"/nonexistent/interpreter {src}\"\n",
    )
    .unwrap();
    let judge = Judge::new(broken, JudgeSettings::default());
    let pipeline = pipeline_with(config.clone(), Box::new(ScriptedChat::new(toy_script())), Some(judge));
    let trace = pipeline.repair_sample(&sample(&config, "s03"));
    assert_eq!(trace.status, RepairStatus::Error);
    assert!(trace.error.as_deref().unwrap().contains("sandbox"));
}

#[test]
fn unknown_problem_is_an_error_trace() {
    let config = toy_config();
    let pipeline = pipeline_with(config.clone(), Box::new(ScriptedChat::new(toy_script())), None);
    let mut s = sample(&config, "s01");
    s.problem_id = "missing_problem".into();
    let trace = pipeline.repair_sample(&s);
    assert_eq!(trace.status, RepairStatus::Error);
    assert_eq!(trace.generations(), 0);
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut argv = vec!["refrepair"];
    argv.extend_from_slice(args);
    let code = refrepair::cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn toy_config_path() -> PathBuf {
    toy_dir().join("config.toml")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn cli_exit_codes() {
    assert_eq!(cli(&[]).0, 2);
    assert_eq!(cli(&["no-such-command"]).0, 2);
    assert_eq!(cli(&["bench", "--k", "many"]).0, 2);
    assert_eq!(cli(&["--help"]).0, 0);
    let (code, _, err) = cli(&["--config", "/definitely/missing.toml", "bench"]);
    assert_eq!(code, 2, "{err}");
    let (code, _, err) = cli(&["--config", s(&toy_config_path()), "--threshold", "1.5", "bench"]);
    assert_eq!(code, 2, "{err}");

    let dir = tempfile::tempdir().unwrap();
    let code_file = dir.path().join("x.py");
    std::fs::write(&code_file, "print(1)\n").unwrap();
    let (code, _, err) = cli(&["--config", s(&toy_config_path()), "judge", "--problem", "nope", "--code", s(&code_file)]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error [config]:"), "{err}");
}

#[test]
fn cli_judge_prints_pass_vector() {
    let dir = tempfile::tempdir().unwrap();
    let code_file = dir.path().join("x.py");
    std::fs::write(&code_file, "a, b = map(int, input().split())\nprint(a + b)\n").unwrap();
    let (code, out, err) = cli(&["--config", s(&toy_config_path()), "judge", "--problem", "sum_two", "--code", s(&code_file)]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["pass_vector"], serde_json::json!([true, true, true]));
}

#[test]
fn cli_build_db_embed_index_and_reuse() {
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("db.jsonl");
    let idx = dir.path().join("db.idx");
    let cfg = s(&toy_config_path()).to_string();
    let (code, out, err) = cli(&["--config", &cfg, "build-db", "--out", s(&db)]);
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("25 repair pairs"), "{out}");
    assert_eq!(std::fs::read_to_string(&db).unwrap().lines().count(), 25);
    let (code, out, err) = cli(&["--config", &cfg, "embed-index", "--db", s(&db), "--out", s(&idx)]);
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("25 records (64 dims)"), "{out}");

    // A config that points at the saved artifacts loads them instead of rebuilding.
    let mut config = toy_config();
    config.db = Some(db);
    config.index = Some(idx);
    let pipeline = Pipeline::from_config(config).unwrap();
    assert_eq!(pipeline.db.len(), 25);
    assert_eq!(pipeline.index.len(), 25);
}

#[test]
fn cli_repair_bench_report_and_eval_desc() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = s(&toy_config_path()).to_string();
    let (code, out, err) = cli(&["--config", &cfg, "repair", "--sample", "s02"]);
    assert_eq!(code, 0, "{err}");
    let trace: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(trace["status"], "repaired");
    assert_eq!(trace["iterations"].as_array().unwrap().len(), 2);
    assert_eq!(cli(&["--config", &cfg, "repair", "--sample", "s99"]).0, 1);

    let report = dir.path().join("report.json");
    let (code, out, err) = cli(&["--config", &cfg, "bench", "--out", s(&report)]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("Acc 1.0000"), "{out}");
    let (code, table, _) = cli(&["report", "--input", s(&report)]);
    assert_eq!(code, 0);
    assert_eq!(table, out);
    assert_eq!(read_report(&report).unwrap().samples.len(), 10);

    let (code, agg, err) = cli(&["--config", &cfg, "eval-desc", "--report", s(&report)]);
    assert_eq!(code, 0, "{err}");
    let agg: serde_json::Value = serde_json::from_str(&agg).unwrap();
    let bench = read_report(&report).unwrap().summary;
    assert_eq!(agg["b_f1"].as_f64().unwrap(), bench.b_f1);
    assert_eq!(agg["b_precision"].as_f64().unwrap(), bench.b_precision);

    let gold = dir.path().join("gold.json");
    let pred = dir.path().join("pred.json");
    std::fs::write(&gold, r#"["Loop bound off by one.", "Wrong operator."]"#).unwrap();
    std::fs::write(&pred, r#"["Wrong operator.", "Prints extra space.", "Loop bound off by one."]"#).unwrap();
    let (code, out, err) = cli(&["--config", &cfg, "eval-desc", "--gold", s(&gold), "--pred", s(&pred)]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["score"]["tp"], 2);
    assert_eq!(v["score"]["fp"], 1);
    assert_eq!(v["score"]["fn"], 0);
    let (_, out, _) = cli(&["--config", &cfg, "eval-desc", "--gold", s(&gold), "--pred", s(&pred), "--gated"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["score"]["f1"], 0.0);
}

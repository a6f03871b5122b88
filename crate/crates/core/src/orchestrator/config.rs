use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::descmetric::MatchingMode;
use crate::error::{Error, Result};
use crate::judge::Limits;
use crate::modelgateway::{ChatConfig, EmbeddingConfig, DEFAULT_TOKEN_BUDGET};

/// Optional template files replacing the built-in prompts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplatePaths {
    pub system: Option<PathBuf>,
    pub repair: Option<PathBuf>,
    pub describe: Option<PathBuf>,
    pub judge: Option<PathBuf>,
}

/// Every knob of a run. Loaded from TOML or JSON, overridden by CLI flags,
/// and echoed verbatim into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Minimum consistency score for admitting a repair pair.
    pub threshold: f64,
    pub keep_blank_lines: bool,
    pub k: usize,
    pub max_iterations: usize,
    pub gen_temperature: f64,
    pub judge_temperature: f64,
    pub context_lines: usize,
    pub token_budget: usize,
    /// Language of dataset rows that do not name one.
    pub default_language: String,
    pub embedding: EmbeddingConfig,
    pub generator: Option<ChatConfig>,
    pub judge_model: ChatConfig,
    pub matching: MatchingMode,
    pub limits: Limits,
    pub strict_output: bool,
    /// TOML runner table; built-in runners when absent.
    pub runners: Option<PathBuf>,
    pub templates: TemplatePaths,
    pub corpus: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub db: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    /// Leave wall-clock timings out of traces and reports.
    pub deterministic: bool,
    pub workers: usize,
    pub judge_workers: usize,
    pub gateway_in_flight: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            threshold: crate::corpus::DEFAULT_THRESHOLD,
            keep_blank_lines: false,
            k: crate::generation::DEFAULT_TOP_K,
            max_iterations: 3,
            gen_temperature: crate::generation::DEFAULT_GENERATION_TEMPERATURE,
            judge_temperature: 0.0,
            context_lines: 3,
            token_budget: DEFAULT_TOKEN_BUDGET,
            default_language: "python".into(),
            embedding: EmbeddingConfig::default(),
            generator: None,
            judge_model: ChatConfig::Exact,
            matching: MatchingMode::Maximum,
            limits: Limits::default(),
            strict_output: false,
            runners: None,
            templates: TemplatePaths::default(),
            corpus: None,
            dataset: None,
            db: None,
            index: None,
            report: None,
            cache_dir: None,
            deterministic: true,
            workers: 4,
            judge_workers: 4,
            gateway_in_flight: 4,
        }
    }
}

impl RunConfig {
    /// Parses a `.json` file as JSON and anything else as TOML. Relative
    /// paths are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let mut config: RunConfig = if is_json {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        for p in [
            &mut self.runners,
            &mut self.corpus,
            &mut self.dataset,
            &mut self.db,
            &mut self.index,
            &mut self.report,
            &mut self.cache_dir,
            &mut self.templates.system,
            &mut self.templates.repair,
            &mut self.templates.describe,
            &mut self.templates.judge,
        ] {
            fix(p);
        }
        if let Some(g) = &mut self.generator {
            g.resolve_paths(base);
        }
        self.judge_model.resolve_paths(base);
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold {} outside [0, 1]", self.threshold));
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        for (name, t) in [("gen_temperature", self.gen_temperature), ("judge_temperature", self.judge_temperature)] {
            if !(0.0..=2.0).contains(&t) {
                return bad(format!("{name} {t} outside [0, 2]"));
            }
        }
        if self.workers == 0 || self.judge_workers == 0 || self.gateway_in_flight == 0 {
            return bad("worker counts must be at least 1".into());
        }
        if self.embedding.dims() == 0 {
            return bad("embedding dims must be at least 1".into());
        }
        Ok(())
    }
}

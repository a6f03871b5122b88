//! Reference contexts, repair prompts and solution generation.

mod parse;
mod prompt;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

pub use parse::{parse_solution, render_solution, NoCodeBlock, ParsedSolution, DESCRIPTIONS_HEADING};
pub use prompt::{
    annotate_diff, build_describe_prompt, build_repair_prompt, fill_template, render_references, PromptInputs,
    PromptTemplates, RepairPrompt, DEFAULT_DESCRIBE_TEMPLATE, DEFAULT_REPAIR_TEMPLATE, DEFAULT_SYSTEM_PROMPT,
};

use crate::corpus::{Problem, RepairPair};
use crate::diffing::render_unified_diff;
use crate::error::{GatewayError, GenerationError};
use crate::modelgateway::{ChatClient, ChatRequest};

/// Default repair temperature.
pub const DEFAULT_GENERATION_TEMPERATURE: f64 = 0.2;
/// Default number of reference repairs per prompt.
pub const DEFAULT_TOP_K: usize = 5;

/// One retrieved reference: the pair's unified diff and its bug description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionContext {
    pub pair_id: String,
    pub diff_text: String,
    pub description: String,
    /// Cache key of the chat exchange that produced `description`.
    pub description_key: String,
}

/// Fixed code and bug descriptions parsed from one model reply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedSolution {
    pub fixed_code: String,
    pub descriptions: Vec<String>,
    pub raw_response: String,
    pub parse_warnings: Vec<String>,
    pub cache_key: String,
}

/// A pair's description and the cache key of the exchange behind it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairDescription {
    pub text: String,
    pub cache_key: String,
}

/// Memo of pair descriptions shared across samples. Concurrent requests
/// for the same pair wait on one another, so each pair costs at most one
/// successful chat exchange per run.
#[derive(Default)]
pub struct DescriptionCache {
    slots: Mutex<HashMap<String, Arc<Mutex<Option<PairDescription>>>>>,
}

impl DescriptionCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn slot(&self, pair_id: &str) -> Arc<Mutex<Option<PairDescription>>> {
        self.slots
            .lock()
            .expect("description cache poisoned")
            .entry(pair_id.to_string())
            .or_default()
            .clone()
    }
}

/// Settings shared by description and repair calls.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationSettings {
    pub k: usize,
    pub temperature: f64,
    pub context_lines: usize,
    pub templates: PromptTemplates,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        GenerationSettings {
            k: DEFAULT_TOP_K,
            temperature: DEFAULT_GENERATION_TEMPERATURE,
            context_lines: 3,
            templates: PromptTemplates::default(),
        }
    }
}

/// Bug description of a repair pair, produced by the chat backend. An empty
/// reply is retried once.
pub fn describe_pair(
    client: &ChatClient,
    cache: &DescriptionCache,
    settings: &GenerationSettings,
    problem: &Problem,
    pair: &RepairPair,
) -> Result<PairDescription, GenerationError> {
    let slot = cache.slot(&pair.pair_id);
    let mut guard = slot.lock().expect("description slot poisoned");
    if let Some(d) = guard.as_ref() {
        return Ok(d.clone());
    }
    let user = build_describe_prompt(&settings.templates, &problem.statement, &pair.language_tag, &pair.c_w, &pair.c_r)?;
    let request = ChatRequest::new(settings.templates.system.clone(), user, settings.temperature);
    let response = match client.chat(&request) {
        Err(GatewayError::EmptyResponse) => client.chat(&request.clone().with_attempt(1))?,
        other => other?,
    };
    let d = PairDescription {
        text: response.text.trim().to_string(),
        cache_key: response.cache_key,
    };
    *guard = Some(d.clone());
    Ok(d)
}

/// Diff plus description for each retrieved pair.
pub fn build_contexts(
    client: &ChatClient,
    cache: &DescriptionCache,
    settings: &GenerationSettings,
    problem: &Problem,
    pairs: &[&RepairPair],
) -> Result<Vec<SolutionContext>, GenerationError> {
    pairs
        .iter()
        .map(|pair| {
            let d = describe_pair(client, cache, settings, problem, pair)?;
            Ok(SolutionContext {
                pair_id: pair.pair_id.clone(),
                diff_text: render_unified_diff(&pair.c_w, &pair.c_r, settings.context_lines),
                description: d.text,
                description_key: d.cache_key,
            })
        })
        .collect()
}

/// Sends a repair prompt and parses the reply. `attempt` distinguishes
/// repeated iterations of the same sample.
pub fn generate_solution(
    client: &ChatClient,
    settings: &GenerationSettings,
    prompt: &RepairPrompt,
    attempt: u32,
) -> Result<GeneratedSolution, GenerationError> {
    let request =
        ChatRequest::new(settings.templates.system.clone(), prompt.text.clone(), settings.temperature).with_attempt(attempt);
    let response = client.chat(&request)?;
    match parse_solution(&response.text) {
        Ok(parsed) => Ok(GeneratedSolution {
            fixed_code: parsed.fixed_code,
            descriptions: parsed.descriptions,
            raw_response: response.text,
            parse_warnings: parsed.warnings,
            cache_key: response.cache_key,
        }),
        Err(NoCodeBlock) => Err(GenerationError::Parse {
            raw: response.text,
            cache_key: response.cache_key,
        }),
    }
}

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SolutionContext;
use crate::error::GenerationError;
use crate::modelgateway::estimate_tokens;

pub const DEFAULT_REPAIR_TEMPLATE: &str = "\
Instruction: You are an experienced programmer who debugs code and proposes minimal, correct fixes. \
Given a programming problem and a piece of buggy code, complete the following tasks:
1. Fix the Buggy Code: repair the buggy code so that it meets the problem's requirements. \
Keep the changes minimal and preserve the original structure and logic as much as possible.
2. Provide Bug Descriptions: describe every bug present in the buggy code, point by point, clearly and completely.

Output format: reply with exactly one fenced code block containing the complete fixed program, \
then a line `Bug Descriptions:`, then a numbered list with one bug per item.
----
Programming Task:
{problem}

The top-{k} program repairs for reference (unified diffs from incorrect to correct code; \
`# bug:` lines describe the bugs that were fixed):
{references}
Buggy Code:
```{language}
{buggy_code}```
";

pub const DEFAULT_DESCRIBE_TEMPLATE: &str = "\
A learner submitted the incorrect program below and later fixed it with the correct program.

Programming Task:
{problem}

Incorrect Code:
```{language}
{incorrect_code}```

Correct Code:
```{language}
{correct_code}```

List the bugs in the incorrect code as a numbered list, one bug per item. \
State the cause of each bug only, without describing how to fix it.
";

pub const DEFAULT_SYSTEM_PROMPT: &str = "You are a careful programming tutor.";

/// Plain-text templates with `{placeholder}` substitution. `{{` and `}}`
/// produce literal braces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplates {
    pub system: String,
    pub repair: String,
    pub describe: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            system: DEFAULT_SYSTEM_PROMPT.to_string(),
            repair: DEFAULT_REPAIR_TEMPLATE.to_string(),
            describe: DEFAULT_DESCRIBE_TEMPLATE.to_string(),
        }
    }
}

impl PromptTemplates {
    /// Defaults with any of the given template files substituted in.
    pub fn with_overrides(
        repair: Option<&Path>,
        describe: Option<&Path>,
        system: Option<&Path>,
    ) -> Result<Self, GenerationError> {
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|e| GenerationError::Template(format!("{}: {e}", p.display())))
        };
        let mut t = PromptTemplates::default();
        if let Some(p) = repair {
            t.repair = read(p)?;
        }
        if let Some(p) = describe {
            t.describe = read(p)?;
        }
        if let Some(p) = system {
            t.system = read(p)?;
        }
        Ok(t)
    }
}

/// Fills `{name}` placeholders. Values are inserted verbatim and never
/// re-scanned. Unknown placeholders are an error.
pub fn fill_template(template: &str, values: &BTreeMap<&str, &str>) -> Result<String, GenerationError> {
    let mut out = String::with_capacity(template.len() + values.values().map(|v| v.len()).sum::<usize>());
    let mut rest = template;
    while let Some(pos) = rest.find(['{', '}']) {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        if tail.starts_with("{{") || tail.starts_with("}}") {
            out.push_str(&tail[..1]);
            rest = &tail[2..];
            continue;
        }
        if let Some(after) = tail.strip_prefix('}') {
            out.push('}');
            rest = after;
            continue;
        }
        let close = tail.find('}');
        let name = close.map(|c| &tail[1..c]);
        match name {
            Some(n) if !n.is_empty() && n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') => {
                let value = values
                    .get(n)
                    .ok_or_else(|| GenerationError::Template(format!("unknown placeholder `{{{n}}}`")))?;
                out.push_str(value);
                rest = &tail[n.len() + 2..];
            }
            _ => {
                out.push('{');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// A diff with the pair's description placed as `# bug:` comment lines
/// above the first hunk header.
pub fn annotate_diff(diff_text: &str, description: &str) -> String {
    let comments: String = description
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| format!("# bug: {l}\n"))
        .collect();
    match diff_text.find("\n@@") {
        Some(pos) => format!("{}{}{}", &diff_text[..pos + 1], comments, &diff_text[pos + 1..]),
        None => format!("{comments}{diff_text}"),
    }
}

pub fn render_references(contexts: &[SolutionContext]) -> String {
    let mut out = String::new();
    for (i, c) in contexts.iter().enumerate() {
        out.push_str(&format!("Reference {}:\n```diff\n", i + 1));
        let body = annotate_diff(&c.diff_text, &c.description);
        out.push_str(&body);
        if !body.ends_with('\n') {
            out.push('\n');
        }
        out.push_str("```\n\n");
    }
    out
}

/// An assembled repair prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairPrompt {
    pub text: String,
    pub contexts_used: usize,
    /// Trailing contexts dropped to fit the token budget.
    pub dropped: usize,
}

/// Inputs of [`build_repair_prompt`] besides the contexts.
pub struct PromptInputs<'a> {
    pub problem_statement: &'a str,
    pub buggy_code: &'a str,
    pub language: &'a str,
    pub k: usize,
    /// Token budget for the whole request (system + user).
    pub token_budget: usize,
    pub templates: &'a PromptTemplates,
}

pub fn build_repair_prompt(inputs: &PromptInputs<'_>, contexts: &[SolutionContext]) -> Result<RepairPrompt, GenerationError> {
    if contexts.is_empty() {
        return Err(GenerationError::NoContexts);
    }
    if contexts.len() > inputs.k {
        return Err(GenerationError::TooManyContexts {
            given: contexts.len(),
            k: inputs.k,
        });
    }
    let k = inputs.k.to_string();
    let mut code = inputs.buggy_code.to_string();
    if !code.ends_with('\n') {
        code.push('\n');
    }
    let system_tokens = estimate_tokens(&inputs.templates.system);
    let mut used = contexts.len();
    loop {
        let references = render_references(&contexts[..used]);
        let values: BTreeMap<&str, &str> = [
            ("problem", inputs.problem_statement),
            ("k", k.as_str()),
            ("references", references.as_str()),
            ("language", inputs.language),
            ("buggy_code", code.as_str()),
        ]
        .into_iter()
        .collect();
        let text = fill_template(&inputs.templates.repair, &values)?;
        let estimated = system_tokens + estimate_tokens(&text);
        if estimated <= inputs.token_budget {
            return Ok(RepairPrompt {
                text,
                contexts_used: used,
                dropped: contexts.len() - used,
            });
        }
        if used == 1 {
            return Err(GenerationError::Budget {
                estimated,
                budget: inputs.token_budget,
            });
        }
        used -= 1;
    }
}

/// Prompt asking for the bug description of one repair pair.
pub fn build_describe_prompt(
    templates: &PromptTemplates,
    problem_statement: &str,
    language: &str,
    incorrect_code: &str,
    correct_code: &str,
) -> Result<String, GenerationError> {
    let with_nl = |s: &str| if s.ends_with('\n') { s.to_string() } else { format!("{s}\n") };
    let (w, r) = (with_nl(incorrect_code), with_nl(correct_code));
    let values: BTreeMap<&str, &str> = [
        ("problem", problem_statement),
        ("language", language),
        ("incorrect_code", w.as_str()),
        ("correct_code", r.as_str()),
    ]
    .into_iter()
    .collect();
    fill_template(&templates.describe, &values)
}

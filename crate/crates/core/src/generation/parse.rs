//! Model output parsing.
//!
//! The canonical reply is one fenced code block, a `Bug Descriptions:`
//! heading and a numbered list. The parser tolerates common drift (extra
//! fences, a missing heading, bullets instead of numbers) and records a
//! warning for each fallback it takes.

use serde::{Deserialize, Serialize};

pub const DESCRIPTIONS_HEADING: &str = "Bug Descriptions:";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedSolution {
    pub fixed_code: String,
    pub descriptions: Vec<String>,
    pub warnings: Vec<String>,
}

/// The response contained no fenced code block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoCodeBlock;

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

fn list_item(line: &str) -> Option<&str> {
    let t = line.trim_start();
    let rest = if let Some(r) = t.strip_prefix(['-', '*', '•']) {
        r
    } else {
        let digits = t.len() - t.trim_start_matches(|c: char| c.is_ascii_digit()).len();
        if digits == 0 {
            return None;
        }
        t[digits..].strip_prefix(['.', ')'])?
    };
    if !rest.starts_with([' ', '\t']) {
        return None;
    }
    let item = rest.trim();
    (!item.is_empty()).then_some(item)
}

fn is_heading(line: &str) -> bool {
    list_item(line).is_none() && line.to_lowercase().contains("description")
}

pub fn parse_solution(response: &str) -> Result<ParsedSolution, NoCodeBlock> {
    let lines: Vec<&str> = response.lines().collect();
    let mut warnings = Vec::new();

    let open = lines.iter().position(|l| is_fence(l)).ok_or(NoCodeBlock)?;
    let close = lines[open + 1..].iter().position(|l| is_fence(l)).map(|p| open + 1 + p);
    let body_end = close.unwrap_or_else(|| {
        warnings.push("unterminated code block; took the rest of the response".to_string());
        lines.len()
    });
    let mut fixed_code: String = lines[open + 1..body_end].iter().map(|l| format!("{l}\n")).collect();
    if fixed_code.trim().is_empty() {
        fixed_code.clear();
        warnings.push("code block is empty".to_string());
    }
    let after = (body_end + 1).min(lines.len());

    // Regions outside fenced blocks after the first block.
    let mut outside: Vec<(usize, &str)> = Vec::new();
    let mut in_fence = false;
    let mut extra_blocks = 0;
    for (i, l) in lines.iter().enumerate().skip(after) {
        if is_fence(l) {
            if !in_fence {
                extra_blocks += 1;
            }
            in_fence = !in_fence;
            continue;
        }
        if !in_fence {
            outside.push((i, l));
        }
    }
    if extra_blocks > 0 {
        warnings.push(format!("{} extra code block(s) ignored; used the first", extra_blocks));
    }

    let start = match outside.iter().position(|(_, l)| is_heading(l)) {
        Some(h) => h + 1,
        None => {
            warnings.push("no description heading; used list items after the code block".to_string());
            0
        }
    };

    let mut descriptions: Vec<String> = Vec::new();
    let mut prev_line: Option<usize> = None;
    let mut continuing = false;
    for &(i, l) in &outside[start..] {
        let adjacent = prev_line.is_some_and(|p| p + 1 == i);
        prev_line = Some(i);
        if let Some(item) = list_item(l) {
            descriptions.push(item.to_string());
            continuing = true;
        } else if l.trim().is_empty() {
            continuing = false;
        } else if continuing && adjacent && !descriptions.is_empty() {
            let last = descriptions.last_mut().expect("non-empty");
            last.push(' ');
            last.push_str(l.trim());
        } else {
            continuing = false;
        }
    }
    if descriptions.is_empty() {
        warnings.push("no descriptions found".to_string());
    }
    Ok(ParsedSolution {
        fixed_code,
        descriptions,
        warnings,
    })
}

/// Canonical reply text for `code` and `descriptions`.
pub fn render_solution(code: &str, descriptions: &[String], language: &str) -> String {
    let mut out = format!("```{language}\n{code}");
    if !code.ends_with('\n') {
        out.push('\n');
    }
    out.push_str("```\n\n");
    out.push_str(DESCRIPTIONS_HEADING);
    out.push('\n');
    for (i, d) in descriptions.iter().enumerate() {
        out.push_str(&format!("{}. {}\n", i + 1, d));
    }
    out
}

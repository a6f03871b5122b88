//! Lexical comment removal.
//!
//! String and character literals are scanned so comment delimiters inside
//! them survive. Newlines are never removed, which keeps the line structure
//! of the code intact; lines that lose a comment are trimmed on the right.

/// Comment syntax family of a language tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommentStyle {
    /// `#` line comments, `'`/`"` strings, triple-quoted strings.
    Hash,
    /// `//` line comments, `/* */` block comments, `"` strings, `'c'` literals.
    CLike,
}

impl CommentStyle {
    /// Maps a corpus language tag (e.g. `Python`, `C++ (GCC 9.2.1)`, `rust`)
    /// to its comment style. `None` for unsupported languages.
    pub fn for_language(tag: &str) -> Option<Self> {
        let lowered = tag.trim().to_ascii_lowercase();
        let base = lowered.split(['(', ' ']).next().unwrap_or("");
        if base.starts_with("python") || base.starts_with("pypy") || base == "py" {
            return Some(CommentStyle::Hash);
        }
        match base {
            "ruby" | "rb" | "shell" | "bash" | "sh" | "r" | "perl" => Some(CommentStyle::Hash),
            "c" | "c++" | "cpp" | "cc" | "c++11" | "c++14" | "c++17" | "c++20" | "java" | "javascript"
            | "js" | "typescript" | "ts" | "rust" | "rs" | "go" | "c#" | "csharp" | "kotlin"
            | "swift" | "scala" | "d" => Some(CommentStyle::CLike),
            _ => None,
        }
    }
}

/// Removes comments from `code`. Unsupported language tags pass the code
/// through unchanged (with a logged warning).
pub fn strip_comments(code: &str, language_tag: &str) -> String {
    match CommentStyle::for_language(language_tag) {
        Some(CommentStyle::Hash) => strip_hash(code),
        Some(CommentStyle::CLike) => strip_clike(code),
        None => {
            log::warn!("comment stripping not supported for `{language_tag}`; code left unchanged");
            code.to_string()
        }
    }
}

struct Output {
    text: String,
    // Set once a comment was dropped on the current line.
    line_touched: bool,
}

impl Output {
    fn new(capacity: usize) -> Self {
        Output {
            text: String::with_capacity(capacity),
            line_touched: false,
        }
    }

    fn push(&mut self, c: char) {
        if c == '\n' {
            self.end_line();
        }
        self.text.push(c);
    }

    fn push_str(&mut self, s: &str) {
        for c in s.chars() {
            self.push(c);
        }
    }

    fn end_line(&mut self) {
        if self.line_touched {
            let keep = self.text.trim_end_matches([' ', '\t']).len();
            self.text.truncate(keep);
            self.line_touched = false;
        }
    }

    fn finish(mut self) -> String {
        self.end_line();
        self.text
    }
}

fn strip_hash(code: &str) -> String {
    let chars: Vec<char> = code.chars().collect();
    let mut out = Output::new(code.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                out.line_touched = true;
            }
            '\'' | '"' => {
                let triple = i + 2 < chars.len() && chars[i + 1] == c && chars[i + 2] == c;
                let end = if triple {
                    scan_triple(&chars, i + 3, c)
                } else {
                    scan_quoted(&chars, i + 1, c, true)
                };
                out.push_str(&chars[i..end].iter().collect::<String>());
                i = end;
            }
            _ => {
                out.push(c);
                i += 1;
            }
        }
    }
    out.finish()
}

fn strip_clike(code: &str) -> String {
    let chars: Vec<char> = code.chars().collect();
    let mut out = Output::new(code.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let next = chars.get(i + 1).copied();
        match (c, next) {
            ('/', Some('/')) => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                out.line_touched = true;
            }
            ('/', Some('*')) => {
                i += 2;
                out.line_touched = true;
                while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                    if chars[i] == '\n' {
                        out.push('\n');
                        out.line_touched = true;
                    }
                    i += 1;
                }
                i = (i + 2).min(chars.len());
            }
            ('"', _) => {
                let end = scan_quoted(&chars, i + 1, '"', true);
                out.push_str(&chars[i..end].iter().collect::<String>());
                i = end;
            }
            ('\'', _) => {
                // Only treat `'` as a char literal when it is one: `'x'` or an
                // escape. Rust lifetimes and similar stay plain characters.
                let is_literal = match next {
                    Some('\\') => true,
                    Some(_) => chars.get(i + 2) == Some(&'\''),
                    None => false,
                };
                if is_literal {
                    let end = scan_quoted(&chars, i + 1, '\'', false);
                    out.push_str(&chars[i..end].iter().collect::<String>());
                    i = end;
                } else {
                    out.push(c);
                    i += 1;
                }
            }
            _ => {
                out.push(c);
                i += 1;
            }
        }
    }
    out.finish()
}

/// Index just past the closing quote (or the end of line / input for an
/// unterminated literal).
fn scan_quoted(chars: &[char], mut i: usize, quote: char, stop_at_newline: bool) -> usize {
    while i < chars.len() {
        match chars[i] {
            '\\' => i += 2,
            '\n' if stop_at_newline => return i,
            ch if ch == quote => return i + 1,
            _ => i += 1,
        }
    }
    chars.len()
}

fn scan_triple(chars: &[char], mut i: usize, quote: char) -> usize {
    while i < chars.len() {
        if chars[i] == '\\' {
            i += 2;
            continue;
        }
        if chars[i] == quote && chars.get(i + 1) == Some(&quote) && chars.get(i + 2) == Some(&quote) {
            return i + 3;
        }
        i += 1;
    }
    chars.len()
}

//! Line-oriented edit scripts.
//!
//! ```text
//! node <name>
//! insert <offset> "<text>"
//! remove <offset> <length>
//! await-quiescent
//! snapshot <start> <stop>
//! ```
//!
//! Quoted strings understand `\n`, `\t`, `\\` and `\"`. Blank lines and
//! lines starting with `#` are ignored. Edits before the first `node` line
//! go to node `main`.

use std::fmt::Write;

use thiserror::Error;

use super::edit::TextEdit;

pub const DEFAULT_NODE: &str = "main";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Node(String),
    Edit(TextEdit),
    AwaitQuiescent,
    Snapshot { start: usize, stop: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptLine {
    pub line: usize,
    pub step: Step,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Script {
    pub lines: Vec<ScriptLine>,
}

impl Script {
    pub fn parse(src: &str) -> Result<Script, ScriptError> {
        let mut lines = Vec::new();
        for (i, raw) in src.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let err = |message: String| ScriptError { line, message };
            let (word, rest) = trimmed
                .split_once(char::is_whitespace)
                .map_or((trimmed, ""), |(w, r)| (w, r.trim_start()));
            let step = match word {
                "node" if !rest.is_empty() && !rest.contains(char::is_whitespace) => {
                    Step::Node(rest.to_string())
                }
                "node" => return Err(err("expected `node <name>`".into())),
                "insert" => {
                    let (offset, quoted) = rest
                        .split_once(char::is_whitespace)
                        .ok_or_else(|| err("expected `insert <offset> \"text\"`".into()))?;
                    Step::Edit(TextEdit::Insert {
                        offset: number(offset).map_err(err)?,
                        text: unquote(quoted.trim()).map_err(err)?,
                    })
                }
                "remove" => {
                    let [offset, length] = two_numbers(rest).map_err(err)?;
                    if length == 0 {
                        return Err(err("remove length must be positive".into()));
                    }
                    Step::Edit(TextEdit::Remove { offset, length })
                }
                "await-quiescent" if rest.is_empty() => Step::AwaitQuiescent,
                "snapshot" => {
                    let [start, stop] = two_numbers(rest).map_err(err)?;
                    if start > stop {
                        return Err(err(format!("inverted range {start}..{stop}")));
                    }
                    Step::Snapshot { start, stop }
                }
                other => return Err(err(format!("unknown directive `{other}`"))),
            };
            lines.push(ScriptLine { line, step });
        }
        Ok(Script { lines })
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for l in &self.lines {
            match &l.step {
                Step::Node(n) => writeln!(out, "node {n}"),
                Step::Edit(TextEdit::Insert { offset, text }) => {
                    writeln!(out, "insert {offset} {}", quote(text))
                }
                Step::Edit(TextEdit::Remove { offset, length }) => {
                    writeln!(out, "remove {offset} {length}")
                }
                Step::AwaitQuiescent => writeln!(out, "await-quiescent"),
                Step::Snapshot { start, stop } => writeln!(out, "snapshot {start} {stop}"),
            }
            .expect("write to string");
        }
        out
    }
}

fn number(s: &str) -> Result<usize, String> {
    s.parse().map_err(|_| format!("expected a number, found `{s}`"))
}

fn two_numbers(s: &str) -> Result<[usize; 2], String> {
    let parts: Vec<&str> = s.split_whitespace().collect();
    match parts[..] {
        [a, b] => Ok([number(a)?, number(b)?]),
        _ => Err(format!("expected two numbers, found `{s}`")),
    }
}

pub fn quote(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        match c {
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub fn unquote(s: &str) -> Result<String, String> {
    let inner = s
        .strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .filter(|_| s.len() >= 2)
        .ok_or_else(|| format!("expected a quoted string, found `{s}`"))?;
    let mut out = String::with_capacity(inner.len());
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some('n') => out.push('\n'),
                Some('t') => out.push('\t'),
                Some('\\') => out.push('\\'),
                Some('"') => out.push('"'),
                Some(other) => return Err(format!("unknown escape `\\{other}`")),
                None => return Err("dangling backslash".into()),
            },
            '"' => return Err("unescaped quote inside string".into()),
            c => out.push(c),
        }
    }
    Ok(out)
}

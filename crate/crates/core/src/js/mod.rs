//! JavaScript function discovery, probe instrumentation and body elimination.
//!
//! Every function is named by a [`FunctionId`]: the file it lives in and the
//! first and last line it occupies in the *original* source. Instrumentation
//! never adds or removes line terminators, so an id computed before
//! instrumentation is still valid when the probe reports it back.

mod eliminate;
mod html;
mod instrument;
mod lexer;
mod probe;
mod scanner;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use eliminate::{diff_eliminated, eliminate, Elimination, SurvivingSpan};
pub use html::{inline_script_ranges, is_javascript_type};
pub use instrument::{
    instrument, probe_payload, strip_probes, validate_probe_token, InstrumentedSource,
    DEFAULT_PROBE_TOKEN,
};
pub use probe::{classify_console_line, parse_probe_log, ConsoleLine, UsedSet};
pub use scanner::{scan_functions, scan_html, scan_source};

/// A tokenization or structure failure, positioned in the scanned file.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: u32,
    pub column: u32,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum InstrumentError {
    #[error("instrumenting {file} changed its line count from {before} to {after}")]
    LineCountChanged {
        file: String,
        before: usize,
        after: usize,
    },
    #[error("invalid probe token {0:?}: use [A-Za-z0-9_:.$-] only")]
    InvalidToken(String),
    #[error("span {0} does not belong to this source")]
    ForeignSpan(FunctionId),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EliminateError {
    #[error("used set names {0}, which was not produced by the scanner for this file")]
    UnknownSpan(FunctionId),
    #[error("used function {used} is nested inside unused function {outer}")]
    UsedInsideUnused { used: FunctionId, outer: FunctionId },
    #[error("file sets differ between runs: {0}")]
    Mismatch(String),
}

/// Whether a file is plain script or an HTML document with inline scripts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Script,
    Html,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionKind {
    Declaration,
    Expression,
    ArrowBlock,
    ArrowExpression,
    Method,
    GetterSetter,
    Generator,
    AsyncVariant,
}

/// Byte offsets of a function within its file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanOffsets {
    /// First byte of the function header.
    pub start: usize,
    /// The opening `{` of a block body, or the first byte of an expression body.
    pub body_start: usize,
    /// One past the closing `}` (or the last byte of an expression body).
    pub body_end: usize,
    /// Where a probe statement goes for block bodies.
    pub probe_at: usize,
    pub expression_body: bool,
}

/// One function found in a source file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionSpan {
    pub file: String,
    pub start_line: u32,
    pub end_line: u32,
    pub kind: FunctionKind,
    /// Non-zero when several functions share the same file and line range
    /// (minified code); numbers them 1.. in source order.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub collision: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub offsets: SpanOffsets,
}

fn is_zero(n: &u32) -> bool {
    *n == 0
}

impl FunctionSpan {
    pub fn id(&self) -> FunctionId {
        FunctionId {
            file: self.file.clone(),
            start_line: self.start_line,
            end_line: self.end_line,
            collision: self.collision,
        }
    }

    /// Byte range of the whole function, header included.
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offsets.start..self.offsets.body_end
    }

    /// Byte range replaced when the function is eliminated.
    pub fn body_range(&self) -> std::ops::Range<usize> {
        self.offsets.body_start..self.offsets.body_end
    }
}

/// The identity of a function: `file|start|end`, plus a collision ordinal
/// when the line range alone is ambiguous.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FunctionId {
    pub file: String,
    pub start_line: u32,
    pub end_line: u32,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub collision: u32,
}

impl FunctionId {
    pub fn new(file: impl Into<String>, start_line: u32, end_line: u32) -> Self {
        FunctionId {
            file: file.into(),
            start_line,
            end_line,
            collision: 0,
        }
    }
}

fn escape_file(file: &str) -> String {
    let mut out = String::with_capacity(file.len());
    for c in file.chars() {
        match c {
            '%' => out.push_str("%25"),
            '|' => out.push_str("%7C"),
            _ => out.push(c),
        }
    }
    out
}

fn unescape_file(s: &str) -> Option<String> {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(i) = rest.find('%') {
        out.push_str(&rest[..i]);
        match rest.get(i..i + 3) {
            Some("%25") => out.push('%'),
            Some("%7C") | Some("%7c") => out.push('|'),
            _ => return None,
        }
        rest = &rest[i + 3..];
    }
    out.push_str(rest);
    Some(out)
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}|{}|{}",
            escape_file(&self.file),
            self.start_line,
            self.end_line
        )?;
        if self.collision > 0 {
            write!(f, "|{}", self.collision)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed function id {0:?}")]
pub struct MalformedId(pub String);

impl FromStr for FunctionId {
    type Err = MalformedId;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || MalformedId(s.to_string());
        let parts: Vec<&str> = s.split('|').collect();
        if parts.len() != 3 && parts.len() != 4 {
            return Err(bad());
        }
        let num = |p: &str| -> Option<u32> {
            if p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            p.parse().ok()
        };
        let file = unescape_file(parts[0]).filter(|f| !f.is_empty()).ok_or_else(bad)?;
        let start_line = num(parts[1]).filter(|n| *n >= 1).ok_or_else(bad)?;
        let end_line = num(parts[2]).filter(|n| *n >= start_line).ok_or_else(bad)?;
        let collision = match parts.get(3) {
            Some(p) => num(p).filter(|n| *n >= 1).ok_or_else(bad)?,
            None => 0,
        };
        Ok(FunctionId {
            file,
            start_line,
            end_line,
            collision,
        })
    }
}

/// Line starts of a text, counting `\n`, `\r\n`, `\r`, U+2028 and U+2029.
#[derive(Debug, Clone)]
pub struct LineIndex {
    starts: Vec<usize>,
}

impl LineIndex {
    pub fn new(text: &str) -> Self {
        let mut starts = vec![0];
        let bytes = text.as_bytes();
        let mut iter = text.char_indices().peekable();
        while let Some((i, c)) = iter.next() {
            match c {
                '\r' if bytes.get(i + 1) == Some(&b'\n') => {}
                '\n' | '\r' | '\u{2028}' | '\u{2029}' => starts.push(i + c.len_utf8()),
                _ => {}
            }
        }
        LineIndex { starts }
    }

    pub fn line_count(&self) -> usize {
        self.starts.len()
    }

    /// 1-based line containing byte `offset`.
    pub fn line_of(&self, offset: usize) -> u32 {
        (self.starts.partition_point(|&s| s <= offset)) as u32
    }

    /// 1-based line and character column of byte `offset`.
    pub fn line_col(&self, text: &str, offset: usize) -> (u32, u32) {
        let line = self.line_of(offset);
        let start = self.starts[line as usize - 1];
        let end = offset.min(text.len());
        let column = text.get(start..end).map(|s| s.chars().count()).unwrap_or(0) as u32 + 1;
        (line, column)
    }
}

/// Number of lines in `text` under the ECMAScript definition of a line terminator.
pub fn line_count(text: &str) -> usize {
    LineIndex::new(text).line_count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_index_counts_all_terminators() {
        let text = "a\nb\r\nc\rd\u{2028}e";
        let idx = LineIndex::new(text);
        assert_eq!(idx.line_count(), 5);
        assert_eq!(idx.line_of(0), 1);
        assert_eq!(idx.line_of(text.find('c').unwrap()), 3);
        assert_eq!(idx.line_of(text.find('e').unwrap()), 5);
        assert_eq!(line_count(""), 1);
    }

    #[test]
    fn function_id_text_form() {
        let id = FunctionId::new("f.js", 1, 1);
        assert_eq!(id.to_string(), "f.js|1|1");
        assert_eq!("f.js|1|1".parse::<FunctionId>().unwrap(), id);

        let odd = FunctionId {
            file: "a|b%c.js".into(),
            start_line: 3,
            end_line: 9,
            collision: 2,
        };
        assert_eq!(odd.to_string(), "a%7Cb%25c.js|3|9|2");
        assert_eq!(odd.to_string().parse::<FunctionId>().unwrap(), odd);

        for bad in ["f.js|9|x", "f.js|2|1", "f.js|0|1", "|1|2", "f.js|1", "f.js|1|2|0", "a%zz|1|1"] {
            assert!(bad.parse::<FunctionId>().is_err(), "{bad}");
        }
    }
}

//! Shared domain types: log records, templates and tokenized logs.
//!
//! A template is a string in which every variable slot is the literal token
//! `<*>`, e.g. `session closed for user <*>`. The constant text between
//! wildcards forms the template's *segments*.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The wildcard marking a variable slot inside a template.
pub const WILDCARD: &str = "<*>";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("template text is empty")]
    EmptyTemplate,
    #[error("log content is empty (line {0})")]
    EmptyContent(u64),
}

/// One raw log line with its header already stripped.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LogRecord {
    /// 1-based position in the source file.
    pub line_id: u64,
    pub content: String,
    pub dataset: String,
}

impl LogRecord {
    pub fn new(line_id: u64, content: impl Into<String>, dataset: impl Into<String>) -> Result<Self, ModelError> {
        let content = content.into();
        if content.trim().is_empty() {
            return Err(ModelError::EmptyContent(line_id));
        }
        Ok(Self {
            line_id,
            content,
            dataset: dataset.into(),
        })
    }

    pub fn normalized(&self) -> String {
        normalize(&self.content)
    }
}

/// A parsed log template.
///
/// `segments` holds the non-empty constant pieces in order, `gaps` the number
/// of wildcards before each segment plus a trailing entry for the wildcards
/// after the last one, so `gaps.len() == segments.len() + 1` always holds.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Template {
    text: String,
    segments: Vec<String>,
    gaps: Vec<usize>,
}

impl Template {
    pub fn new(text: impl Into<String>) -> Result<Self, ModelError> {
        split_template(&text.into())
    }

    /// Builds a template whose text is `normalize(text)`.
    pub fn normalized(text: &str) -> Result<Self, ModelError> {
        split_template(&normalize(text))
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn segments(&self) -> &[String] {
        &self.segments
    }

    /// Wildcard counts surrounding the segments (see type docs).
    pub fn gaps(&self) -> &[usize] {
        &self.gaps
    }

    pub fn wildcard_count(&self) -> usize {
        self.gaps.iter().sum()
    }

    pub fn starts_with_wildcard(&self) -> bool {
        self.gaps[0] > 0
    }

    pub fn ends_with_wildcard(&self) -> bool {
        self.gaps[self.gaps.len() - 1] > 0
    }

    /// Rebuilds the template text from segments and wildcard gaps.
    pub fn reassemble(&self) -> String {
        let mut out = String::with_capacity(self.text.len());
        for (gap, segment) in self.gaps.iter().zip(&self.segments) {
            out.push_str(&WILDCARD.repeat(*gap));
            out.push_str(segment);
        }
        out.push_str(&WILDCARD.repeat(self.gaps[self.gaps.len() - 1]));
        out
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl Serialize for Template {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.text)
    }
}

impl<'de> Deserialize<'de> for Template {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Template::new(text).map_err(serde::de::Error::custom)
    }
}

/// How a line's template was resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Lru,
    Pattern,
    Llm,
    /// The backend failed or answered unusably; the raw log stands in as an
    /// all-constant template.
    Fallback,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Lru => "lru",
            Source::Pattern => "pattern",
            Source::Llm => "llm",
            Source::Fallback => "fallback",
        }
    }
}

impl std::str::FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lru" => Ok(Source::Lru),
            "pattern" => Ok(Source::Pattern),
            "llm" => Ok(Source::Llm),
            "fallback" => Ok(Source::Fallback),
            other => Err(format!("unknown source {other:?}")),
        }
    }
}

/// One parsed line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseResult {
    pub line_id: u64,
    pub content: String,
    pub template: Template,
    pub source: Source,
}

/// Whitespace tokenization of a log body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedLog {
    pub tokens: Vec<String>,
    pub token_count: usize,
    /// Number of characters (not bytes) in the originating content.
    pub char_length: usize,
}

pub fn tokenize(content: &str) -> TokenizedLog {
    let tokens: Vec<String> = content.split_whitespace().map(str::to_owned).collect();
    TokenizedLog {
        token_count: tokens.len(),
        tokens,
        char_length: content.chars().count(),
    }
}

/// Trims and collapses every internal whitespace run to a single space.
/// Case is preserved.
pub fn normalize(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for token in raw.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(token);
    }
    out
}

pub fn split_template(text: &str) -> Result<Template, ModelError> {
    if text.is_empty() {
        return Err(ModelError::EmptyTemplate);
    }
    let mut segments = Vec::new();
    let mut gaps = Vec::new();
    let mut pending = 0usize;
    for (i, piece) in text.split(WILDCARD).enumerate() {
        if i > 0 {
            pending += 1;
        }
        if !piece.is_empty() {
            gaps.push(pending);
            segments.push(piece.to_owned());
            pending = 0;
        }
    }
    gaps.push(pending);
    Ok(Template {
        text: text.to_owned(),
        segments,
        gaps,
    })
}

//! Dataset ingestion: header stripping, ground-truth loading, deduplication.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{normalize, LogRecord, Template};

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad header pattern: {0}")]
    BadPattern(String),
    #[error("bad ground-truth file {path}: {message}")]
    GroundTruth { path: PathBuf, message: String },
}

/// Where a dataset lives and how to strip its line headers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub name: String,
    pub log_file_path: String,
    /// Regex with a named capture group `content`.
    pub header_pattern: String,
    #[serde(default)]
    pub ground_truth_path: Option<String>,
}

impl DatasetConfig {
    pub fn compile_pattern(&self) -> Result<Regex, PreprocessError> {
        let re = Regex::new(&self.header_pattern).map_err(|e| PreprocessError::BadPattern(e.to_string()))?;
        if !re.capture_names().flatten().any(|n| n == "content") {
            return Err(PreprocessError::BadPattern(format!(
                "pattern {:?} has no capture group named `content`",
                self.header_pattern
            )));
        }
        Ok(re)
    }
}

/// Reads a log file into records, one per non-blank line.
///
/// The `content` capture is used when the header pattern matches, otherwise
/// the whole trimmed line. Invalid UTF-8 is replaced, never fatal. Blank lines
/// keep their position in the `line_id` numbering but produce no record.
pub fn load_dataset(config: &DatasetConfig) -> Result<Vec<LogRecord>, PreprocessError> {
    let pattern = config.compile_pattern()?;
    let path = Path::new(&config.log_file_path);
    let bytes = fs::read(path).map_err(|source| PreprocessError::Io {
        path: path.to_owned(),
        source,
    })?;
    let text = String::from_utf8_lossy(&bytes);
    Ok(parse_lines(&text, &pattern, &config.name))
}

pub fn parse_lines(text: &str, pattern: &Regex, dataset: &str) -> Vec<LogRecord> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_id = i as u64 + 1;
        let content = match pattern.captures(line).and_then(|c| c.name("content")) {
            Some(m) if !m.as_str().trim().is_empty() => m.as_str().trim(),
            _ => line.trim(),
        };
        if let Ok(record) = LogRecord::new(line_id, content, dataset) {
            out.push(record);
        }
    }
    out
}

/// Keeps the first occurrence of each distinct normalized content, in order.
pub fn deduplicate(records: &[LogRecord]) -> Vec<LogRecord> {
    let mut seen = HashSet::with_capacity(records.len());
    records
        .iter()
        .filter(|r| seen.insert(normalize(&r.content)))
        .cloned()
        .collect()
}

/// One row of a structured ground-truth file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthRow {
    pub line_id: u64,
    pub content: String,
    pub template: Template,
}

#[derive(Deserialize)]
struct RawTruthRow {
    #[serde(rename = "LineId")]
    line_id: u64,
    #[serde(rename = "Content")]
    content: String,
    #[serde(rename = "EventTemplate")]
    template: String,
}

/// Loads a `LineId,Content,EventTemplate` CSV. Extra columns are ignored.
pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<Vec<TruthRow>, PreprocessError> {
    let path = path.as_ref();
    let bad = |message: String| PreprocessError::GroundTruth {
        path: path.to_owned(),
        message,
    };
    let file = fs::File::open(path).map_err(|source| PreprocessError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(file);
    let mut rows = Vec::new();
    for row in reader.deserialize::<RawTruthRow>() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let template = Template::normalized(&row.template).map_err(|e| bad(format!("line {}: {e}", row.line_id)))?;
        rows.push(TruthRow {
            line_id: row.line_id,
            content: row.content,
            template,
        });
    }
    Ok(rows)
}

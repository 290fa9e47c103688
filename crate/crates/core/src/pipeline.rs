//! Online parsing: cache first, then retrieval + prompt + model on a miss.

use std::path::Path;
use std::time::Instant;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cache::{CacheStats, Lookup, PreQueryCache};
use crate::evaluator::Timings;
use crate::llm::{extract_template, LlmBackend, LlmError, PromptSpec, DEFAULT_INSTRUCTION};
use crate::model::{tokenize, LogRecord, ParseResult, Source, Template};
use crate::selector::{Bm25Index, PromptOrder};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("structured file {path}: {message}")]
    File { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParserConfig {
    pub k1: f64,
    pub b: f64,
    /// Demonstrations per prompt.
    pub shots: usize,
    pub order: PromptOrder,
    pub instruction: String,
}

impl Default for ParserConfig {
    fn default() -> Self {
        Self {
            k1: Bm25Index::DEFAULT_K1,
            b: Bm25Index::DEFAULT_B,
            shots: 5,
            order: PromptOrder::Ascending,
            instruction: DEFAULT_INSTRUCTION.to_owned(),
        }
    }
}

/// Result of a full parse run.
#[derive(Debug, Clone)]
pub struct ParseRun {
    pub results: Vec<ParseResult>,
    pub timings: Timings,
    pub stats: CacheStats,
    /// Backend errors for lines that fell back to their raw text.
    pub failures: Vec<(u64, LlmError)>,
}

impl ParseRun {
    pub fn count(&self, source: Source) -> usize {
        self.results.iter().filter(|r| r.source == source).count()
    }
}

pub struct LogParser<'a> {
    cache: PreQueryCache,
    index: Option<Bm25Index>,
    backend: &'a dyn LlmBackend,
    config: ParserConfig,
    timings: Timings,
}

impl<'a> LogParser<'a> {
    /// `index` is the labeled inference pool; without one every prompt is
    /// zero-shot.
    pub fn new(
        cache: PreQueryCache,
        index: Option<Bm25Index>,
        backend: &'a dyn LlmBackend,
        config: ParserConfig,
    ) -> Self {
        Self {
            cache,
            index,
            backend,
            config,
            timings: Timings::default(),
        }
    }

    pub fn cache(&self) -> &PreQueryCache {
        &self.cache
    }

    pub fn into_cache(self) -> PreQueryCache {
        self.cache
    }

    pub fn timings(&self) -> Timings {
        self.timings
    }

    pub fn prompt_for(&self, content: &str) -> PromptSpec {
        let demos = match &self.index {
            Some(index) if self.config.shots > 0 => index
                .top_k_with(
                    &tokenize(content),
                    self.config.shots,
                    self.config.order,
                    Default::default(),
                )
                .into_iter()
                .map(|c| (c.record.content, c.template.text().to_owned()))
                .collect(),
            _ => Vec::new(),
        };
        PromptSpec::new(self.config.instruction.clone(), demos, content)
    }

    /// Resolves one line. Backend failures are returned alongside the
    /// fallback result rather than aborting.
    pub fn parse_record(&mut self, record: &LogRecord) -> (ParseResult, Option<LlmError>) {
        let started = Instant::now();
        let lookup = self.cache.lookup(&record.content);
        self.timings.cache_s += started.elapsed().as_secs_f64();

        let result = |template: Template, source| ParseResult {
            line_id: record.line_id,
            content: record.content.clone(),
            template,
            source,
        };
        match lookup {
            Lookup::LruHit(t) => return (result(t, Source::Lru), None),
            Lookup::PatternHit(t) => return (result(t, Source::Pattern), None),
            Lookup::Miss => {}
        }

        let started = Instant::now();
        let prompt = self.prompt_for(&record.content);
        let answer = self.backend.complete(&prompt).and_then(|r| extract_template(&r));
        self.timings.llm_s += started.elapsed().as_secs_f64();

        match answer {
            Ok(template) => {
                let started = Instant::now();
                self.cache.insert(&record.content, &template);
                self.timings.cache_s += started.elapsed().as_secs_f64();
                (result(template, Source::Llm), None)
            }
            Err(e) => {
                warn!("line {}: {e}; using the raw log as its template", record.line_id);
                let raw = Template::normalized(&record.content).expect("record content is non-empty");
                (result(raw, Source::Fallback), Some(e))
            }
        }
    }

    pub fn parse_all(&mut self, records: &[LogRecord]) -> ParseRun {
        let started = Instant::now();
        let mut results = Vec::with_capacity(records.len());
        let mut failures = Vec::new();
        for record in records {
            let (r, err) = self.parse_record(record);
            if let Some(e) = err {
                failures.push((r.line_id, e));
            }
            results.push(r);
        }
        self.timings.total_s += started.elapsed().as_secs_f64();
        ParseRun {
            results,
            timings: self.timings,
            stats: self.cache.stats(),
            failures,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct StructuredRow {
    #[serde(rename = "LineId")]
    line_id: u64,
    #[serde(rename = "Content")]
    content: String,
    #[serde(rename = "EventTemplate")]
    template: String,
    #[serde(rename = "Source", default)]
    source: Option<String>,
}

/// Writes `LineId,Content,EventTemplate,Source`.
pub fn write_structured_csv(path: impl AsRef<Path>, results: &[ParseResult]) -> Result<(), PipelineError> {
    let path = path.as_ref();
    let err = |m: String| PipelineError::File {
        path: path.display().to_string(),
        message: m,
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| err(e.to_string()))?;
    for r in results {
        w.serialize(StructuredRow {
            line_id: r.line_id,
            content: r.content.clone(),
            template: r.template.text().to_owned(),
            source: Some(r.source.as_str().to_owned()),
        })
        .map_err(|e| err(e.to_string()))?;
    }
    w.flush().map_err(|e| err(e.to_string()))
}

/// Reads a structured CSV. A missing `Source` column reads as `llm`.
pub fn read_structured_csv(path: impl AsRef<Path>) -> Result<Vec<ParseResult>, PipelineError> {
    let path = path.as_ref();
    let err = |m: String| PipelineError::File {
        path: path.display().to_string(),
        message: m,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
    let mut out = Vec::new();
    for row in reader.deserialize::<StructuredRow>() {
        let row = row.map_err(|e| err(e.to_string()))?;
        let template = Template::new(row.template).map_err(|e| err(format!("line {}: {e}", row.line_id)))?;
        let source = match row.source.as_deref() {
            None | Some("") => Source::Llm,
            Some(s) => s.parse().map_err(err)?,
        };
        out.push(ParseResult {
            line_id: row.line_id,
            content: row.content,
            template,
            source,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache::CacheConfig;
    use crate::llm::OracleBackend;
    use std::collections::HashMap;

    struct Failing;
    impl LlmBackend for Failing {
        fn complete(&self, _: &PromptSpec) -> Result<String, LlmError> {
            Err(LlmError::NetworkError {
                attempts: 1,
                message: "down".into(),
            })
        }
    }

    fn recs(lines: &[&str]) -> Vec<LogRecord> {
        lines
            .iter()
            .enumerate()
            .map(|(i, l)| LogRecord::new(i as u64 + 1, *l, "t").unwrap())
            .collect()
    }

    fn oracle(pairs: &[(&str, &str)]) -> OracleBackend {
        OracleBackend::new(
            pairs
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect::<HashMap<_, _>>(),
        )
    }

    fn parser(backend: &dyn LlmBackend) -> LogParser<'_> {
        LogParser::new(
            PreQueryCache::new(CacheConfig::default()).unwrap(),
            None,
            backend,
            ParserConfig::default(),
        )
    }

    #[test]
    fn identical_lines_hit_lru() {
        let backend = oracle(&[("job 1 done", "job <*> done")]);
        let run = parser(&backend).parse_all(&recs(&["job 1 done"; 100]));
        assert_eq!(run.count(Source::Llm), 1);
        assert_eq!(run.count(Source::Lru), 99);
    }

    #[test]
    fn variable_change_hits_pattern() {
        let backend = oracle(&[
            ("session closed for user cyrus", "session closed for user <*>"),
            ("session closed for user root", "session closed for user <*>"),
        ]);
        let run = parser(&backend).parse_all(&recs(&[
            "session closed for user cyrus",
            "session closed for user root",
        ]));
        assert_eq!(run.results[0].source, Source::Llm);
        assert_eq!(run.results[1].source, Source::Pattern);
        assert_eq!(run.results[1].template.text(), "session closed for user <*>");
    }

    #[test]
    fn failures_fall_back_and_continue() {
        let run = parser(&Failing).parse_all(&recs(&["a  1", "b 2"]));
        assert_eq!(run.count(Source::Fallback), 2);
        assert_eq!(run.results[0].template.text(), "a 1");
        assert_eq!(run.failures.len(), 2);
        // Fallbacks are not cached.
        assert_eq!(run.stats.misses, 2);
    }

    #[test]
    fn prompts_use_retrieved_demos() {
        let backend = oracle(&[]);
        let pool = vec![
            (
                LogRecord::new(10, "disk sda full", "t").unwrap(),
                Template::new("disk <*> full").unwrap(),
            ),
            (
                LogRecord::new(11, "user bob login", "t").unwrap(),
                Template::new("user <*> login").unwrap(),
            ),
        ];
        let index = Bm25Index::build(pool, 1.2, 0.75).unwrap();
        let p = LogParser::new(
            PreQueryCache::new(CacheConfig::default()).unwrap(),
            Some(index),
            &backend,
            ParserConfig {
                shots: 2,
                ..ParserConfig::default()
            },
        );
        let prompt = p.prompt_for("disk sdb full");
        assert_eq!(prompt.shot_count, 2);
        // Ascending similarity: the best match is last.
        assert_eq!(prompt.demonstrations[1].0, "disk sda full");
    }

    #[test]
    fn structured_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let backend = oracle(&[("a, \"b\" 1", "a, \"b\" <*>")]);
        let run = parser(&backend).parse_all(&recs(&["a, \"b\" 1", "a, \"b\" 1"]));
        write_structured_csv(&path, &run.results).unwrap();
        assert_eq!(read_structured_csv(&path).unwrap(), run.results);
    }
}

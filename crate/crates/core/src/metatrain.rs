//! Progressive 0-shot..K-shot training data for meta in-context tuning.
//!
//! For every shot level `s` in `0..=K` (ascending), `per_shot_count` examples
//! are drawn: a random query from the meta set plus `s` distinct other
//! members as demonstrations. The model update itself happens in an external
//! trainer that consumes the JSON-lines output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{PromptSpec, DEFAULT_INSTRUCTION};
use crate::model::{LogRecord, Template};

#[derive(Debug, Error)]
pub enum MetaTrainError {
    #[error("meta set has {have} labeled logs; more than max_shot = {max_shot} are needed")]
    TooFewExamples { have: usize, max_shot: usize },
    #[error("writing training file: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingExample {
    #[serde(rename = "prompt")]
    pub prompt_text: String,
    #[serde(rename = "completion")]
    pub completion_text: String,
    pub shot: usize,
    pub task_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmitConfig {
    pub max_shot: usize,
    /// Examples per shot level; `None` uses the meta-set size.
    pub per_shot_count: Option<usize>,
    pub seed: u64,
    pub instruction: String,
}

impl Default for EmitConfig {
    fn default() -> Self {
        Self {
            max_shot: 5,
            per_shot_count: None,
            seed: 0,
            instruction: DEFAULT_INSTRUCTION.to_owned(),
        }
    }
}

pub fn emit(
    meta_set: &[(LogRecord, Template)],
    max_shot: usize,
    per_shot_count: usize,
    seed: u64,
) -> Result<Vec<TrainingExample>, MetaTrainError> {
    emit_with(
        meta_set,
        &EmitConfig {
            max_shot,
            per_shot_count: Some(per_shot_count),
            seed,
            ..EmitConfig::default()
        },
    )
}

pub fn emit_with(
    meta_set: &[(LogRecord, Template)],
    config: &EmitConfig,
) -> Result<Vec<TrainingExample>, MetaTrainError> {
    let n = meta_set.len();
    if n <= config.max_shot {
        return Err(MetaTrainError::TooFewExamples {
            have: n,
            max_shot: config.max_shot,
        });
    }
    let per_shot = config.per_shot_count.unwrap_or(n);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::with_capacity(per_shot * (config.max_shot + 1));
    for shot in 0..=config.max_shot {
        for _ in 0..per_shot {
            let q = rng.gen_range(0..n);
            // Draw from the n - 1 other members, skipping over the query.
            let demos: Vec<(String, String)> = index::sample(&mut rng, n - 1, shot)
                .into_iter()
                .map(|j| if j >= q { j + 1 } else { j })
                .map(|j| {
                    let (record, template) = &meta_set[j];
                    (record.content.clone(), template.text().to_owned())
                })
                .collect();
            let (query, answer) = &meta_set[q];
            let prompt = PromptSpec::new(config.instruction.clone(), demos, query.content.clone());
            out.push(TrainingExample {
                prompt_text: prompt.render(),
                completion_text: answer.text().to_owned(),
                shot,
                task_id: query.dataset.clone(),
            });
        }
    }
    Ok(out)
}

pub fn write_jsonl(path: impl AsRef<Path>, examples: &[TrainingExample]) -> Result<(), MetaTrainError> {
    let mut w = BufWriter::new(File::create(path)?);
    for ex in examples {
        serde_json::to_writer(&mut w, ex).map_err(std::io::Error::other)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(n: usize) -> Vec<(LogRecord, Template)> {
        (0..n)
            .map(|i| {
                (
                    LogRecord::new(i as u64 + 1, format!("event {i} took {i}ms"), "HDFS").unwrap(),
                    Template::new(format!("event {i} took <*>ms")).unwrap(),
                )
            })
            .collect()
    }

    #[test]
    fn six_levels_for_k5() {
        let ex = emit(&meta(8), 5, 3, 1).unwrap();
        let mut levels: Vec<usize> = ex.iter().map(|e| e.shot).collect();
        assert!(levels.windows(2).all(|w| w[0] <= w[1]));
        levels.dedup();
        assert_eq!(levels, [0, 1, 2, 3, 4, 5]);
        assert_eq!(ex.len(), 18);
    }

    #[test]
    fn zero_shot_has_no_demos() {
        let ex = emit(&meta(3), 2, 4, 9).unwrap();
        for e in ex.iter().filter(|e| e.shot == 0) {
            assert_eq!(e.prompt_text.matches("Log: ").count(), 1);
            assert_eq!(e.prompt_text.matches("Template:").count(), 1);
        }
        for e in &ex {
            assert_eq!(e.prompt_text.matches("Log: ").count(), e.shot + 1);
        }
    }

    #[test]
    fn too_few() {
        assert!(matches!(
            emit(&meta(5), 5, 1, 0),
            Err(MetaTrainError::TooFewExamples { have: 5, max_shot: 5 })
        ));
    }

    #[test]
    fn deterministic() {
        assert_eq!(emit(&meta(10), 5, 4, 7).unwrap(), emit(&meta(10), 5, 4, 7).unwrap());
        assert_ne!(emit(&meta(10), 5, 4, 7).unwrap(), emit(&meta(10), 5, 4, 8).unwrap());
    }

    #[test]
    fn jsonl_field_names() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        write_jsonl(&path, &emit(&meta(2), 1, 1, 0).unwrap()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        let keys: Vec<&str> = first.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys.len(), 4);
        for k in ["prompt", "completion", "shot", "task_id"] {
            assert!(keys.contains(&k));
        }
        assert_eq!(first["task_id"], "HDFS");
    }
}

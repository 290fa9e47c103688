//! Prompt construction, model backends and response post-processing.

mod extract;
mod http;
mod prompt;
pub mod stub;

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::extract_template;
pub use http::{ChatRequest, HttpChatBackend};
pub use prompt::{build_prompt, PromptSpec, DEFAULT_INSTRUCTION};

use crate::model::normalize;
use crate::preprocess::TruthRow;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("network error after {attempts} attempt(s): {message}")]
    NetworkError { attempts: u32, message: String },
    #[error("authentication rejected: {0}")]
    AuthError(String),
    #[error("oracle has no answer for log {0:?}")]
    OracleMiss(String),
    #[error("unparseable model response: {0:?}")]
    UnparseableResponse(String),
    #[error("malformed chat-completion response: {0}")]
    MalformedResponse(String),
    #[error("invalid backend config: {0}")]
    InvalidConfig(String),
}

/// Anything that turns a prompt into raw response text.
pub trait LlmBackend: Send + Sync {
    fn complete(&self, prompt: &PromptSpec) -> Result<String, LlmError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    HttpChat,
    #[default]
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Server base URL; `/v1/chat/completions` is appended unless present.
    pub endpoint_url: String,
    pub model_name: String,
    /// Environment variable holding the API key. Empty disables auth.
    pub api_key_env_var: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub timeout_ms: u64,
    /// First retry delay; doubles on every further retry.
    pub backoff_ms: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Oracle,
            endpoint_url: "http://127.0.0.1:8000".into(),
            model_name: "qwen2.5-3b-instruct".into(),
            api_key_env_var: "OPENAI_API_KEY".into(),
            temperature: 0.0,
            max_retries: 3,
            timeout_ms: 60_000,
            backoff_ms: 500,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        if self.temperature != 0.0 {
            return Err(LlmError::InvalidConfig(format!(
                "temperature must be 0.0, got {}",
                self.temperature
            )));
        }
        if self.kind == BackendKind::HttpChat && self.endpoint_url.trim().is_empty() {
            return Err(LlmError::InvalidConfig("endpoint_url is empty".into()));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn chat_completions_url(&self) -> String {
        let base = self.endpoint_url.trim_end_matches('/');
        if base.ends_with("/v1/chat/completions") {
            base.to_owned()
        } else if base.ends_with("/v1") {
            format!("{base}/chat/completions")
        } else {
            format!("{base}/v1/chat/completions")
        }
    }
}

/// Answers every query with its ground-truth template. Keys are normalized
/// log contents.
#[derive(Debug, Clone, Default)]
pub struct OracleBackend {
    answers: HashMap<String, String>,
}

impl OracleBackend {
    pub fn new(answers: HashMap<String, String>) -> Self {
        Self {
            answers: answers.into_iter().map(|(k, v)| (normalize(&k), v)).collect(),
        }
    }

    pub fn from_truth(rows: &[TruthRow]) -> Self {
        Self {
            answers: rows
                .iter()
                .map(|r| (normalize(&r.content), r.template.text().to_owned()))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }
}

impl LlmBackend for OracleBackend {
    fn complete(&self, prompt: &PromptSpec) -> Result<String, LlmError> {
        self.answers
            .get(&normalize(&prompt.query))
            .cloned()
            .ok_or_else(|| LlmError::OracleMiss(prompt.query.clone()))
    }
}

/// Sends the prompt and extracts a template from the answer.
pub fn query(backend: &dyn LlmBackend, prompt: &PromptSpec) -> Result<String, LlmError> {
    backend.complete(prompt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_answers_and_misses() {
        let mut table = HashMap::new();
        table.insert(
            "session closed for user cyrus".to_string(),
            "session closed for user <*>".to_string(),
        );
        let oracle = OracleBackend::new(table);
        let p = build_prompt(vec![], "session  closed for user cyrus");
        assert_eq!(query(&oracle, &p).unwrap(), "session closed for user <*>");
        let p = build_prompt(vec![], "unknown");
        assert_eq!(oracle.complete(&p), Err(LlmError::OracleMiss("unknown".into())));
    }

    #[test]
    fn config_checks() {
        let cfg = BackendConfig {
            temperature: 0.7,
            ..BackendConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(BackendConfig::default().validate().is_ok());
    }

    #[test]
    fn url_building() {
        for base in ["http://h:1/", "http://h:1/v1", "http://h:1/v1/chat/completions"] {
            let cfg = BackendConfig {
                endpoint_url: base.into(),
                ..BackendConfig::default()
            };
            assert_eq!(cfg.chat_completions_url(), "http://h:1/v1/chat/completions");
        }
    }
}

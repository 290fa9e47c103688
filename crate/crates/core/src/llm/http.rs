//! OpenAI-compatible chat-completions client with retry and backoff.

use std::thread;
use std::time::Duration;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::{BackendConfig, LlmBackend, LlmError, PromptSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Request body for `POST /v1/chat/completions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

enum Attempt {
    Done(String),
    Retry(String),
    Fail(LlmError),
}

pub struct HttpChatBackend {
    agent: ureq::Agent,
    url: String,
    model: String,
    api_key: Option<String>,
    temperature: f64,
    max_retries: u32,
    backoff: Duration,
}

impl std::fmt::Debug for HttpChatBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // The key is never printed.
        f.debug_struct("HttpChatBackend")
            .field("url", &self.url)
            .field("model", &self.model)
            .field("has_api_key", &self.api_key.is_some())
            .field("max_retries", &self.max_retries)
            .finish()
    }
}

impl HttpChatBackend {
    /// Reads the API key from the configured environment variable. A named
    /// but unset variable is an [`LlmError::AuthError`].
    pub fn new(config: &BackendConfig) -> Result<Self, LlmError> {
        config.validate()?;
        let api_key = if config.api_key_env_var.is_empty() {
            None
        } else {
            match std::env::var(&config.api_key_env_var) {
                Ok(k) if !k.is_empty() => Some(k),
                _ => {
                    return Err(LlmError::AuthError(format!(
                        "environment variable {} is not set",
                        config.api_key_env_var
                    )))
                }
            }
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout()))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            agent,
            url: config.chat_completions_url(),
            model: config.model_name.clone(),
            api_key,
            temperature: config.temperature,
            max_retries: config.max_retries,
            backoff: Duration::from_millis(config.backoff_ms),
        })
    }

    pub fn request_body(&self, prompt: &PromptSpec) -> ChatRequest {
        ChatRequest {
            model: self.model.clone(),
            messages: vec![ChatMessage {
                role: "user".into(),
                content: prompt.render(),
            }],
            temperature: self.temperature,
        }
    }

    fn attempt(&self, body: &str) -> Attempt {
        let mut request = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = match request.send(body) {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = response.status().as_u16();
        let text = match response.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(format!("reading body: {e}")),
        };
        match status {
            200..=299 => match parse_content(&text) {
                Ok(content) => Attempt::Done(content),
                Err(e) => Attempt::Fail(e),
            },
            401 | 403 => Attempt::Fail(LlmError::AuthError(format!("HTTP {status}"))),
            408 | 429 | 500..=599 => Attempt::Retry(format!("HTTP {status}")),
            _ => Attempt::Fail(LlmError::NetworkError {
                attempts: 1,
                message: format!("HTTP {status}: {}", text.chars().take(200).collect::<String>()),
            }),
        }
    }
}

fn parse_content(text: &str) -> Result<String, LlmError> {
    let parsed: ChatResponse = serde_json::from_str(text).map_err(|e| LlmError::MalformedResponse(e.to_string()))?;
    parsed
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| LlmError::MalformedResponse("no choices[0].message.content".into()))
}

impl LlmBackend for HttpChatBackend {
    fn complete(&self, prompt: &PromptSpec) -> Result<String, LlmError> {
        let body = serde_json::to_string(&self.request_body(prompt)).expect("request serializes");
        let mut last = String::new();
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                let delay = self.backoff.saturating_mul(1 << (attempt - 1).min(16));
                debug!("retry {attempt} after {delay:?}: {last}");
                thread::sleep(delay);
            }
            match self.attempt(&body) {
                Attempt::Done(content) => return Ok(content),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(msg) => last = msg,
            }
        }
        warn!(
            "giving up on {} after {} attempts: {last}",
            self.url,
            self.max_retries + 1
        );
        Err(LlmError::NetworkError {
            attempts: self.max_retries + 1,
            message: last,
        })
    }
}

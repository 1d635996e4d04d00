//! LLM backend abstraction: a deterministic mock for tests and offline
//! runs, and a remote client speaking the chat-completion convention.

use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("backend returned HTTP {status}: {message}")]
    Api { status: u16, message: String },
    #[error("no mock rule matches request tagged {0:?}")]
    NoRuleMatch(String),
    #[error("environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("bad fixture file: {0}")]
    BadFixture(String),
}

impl BackendError {
    /// Transport failures and server-side errors are worth retrying;
    /// everything else is not.
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Transport(_) => true,
            BackendError::Api { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

/// One completion request. `tag` identifies the call for mock matching:
/// the review id for extraction calls, `induce:<category>` for induction.
#[derive(Debug, Clone, Copy)]
pub struct LlmRequest<'a> {
    pub prompt: &'a str,
    pub tag: Option<&'a str>,
}

/// A completion backend. Sampling temperature is fixed at zero so responses
/// are reproducible per backend snapshot.
pub trait LlmBackend: Send + Sync {
    fn model(&self) -> &str;
    fn complete(&self, request: &LlmRequest<'_>) -> Result<String, BackendError>;

    /// Stable description used in stage input hashes.
    fn fingerprint(&self) -> String;
}

/// One mock rule: `match` is either an exact request tag or a regex applied
/// to the prompt text; the first matching rule wins.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MockRule {
    #[serde(rename = "match")]
    pub match_expr: String,
    pub response: String,
}

/// Fully deterministic backend driven by a rule table, loadable from a
/// line-delimited JSON fixture file.
pub struct MockBackend {
    model: String,
    rules: Vec<(MockRule, regex::Regex)>,
}

impl MockBackend {
    pub fn from_rules(model: impl Into<String>, rules: Vec<MockRule>) -> Result<Self, BackendError> {
        let compiled = rules
            .into_iter()
            .map(|rule| {
                let regex = regex::Regex::new(&rule.match_expr).map_err(|e| {
                    BackendError::BadFixture(format!(
                        "rule {:?} is not a valid regex: {e}",
                        rule.match_expr
                    ))
                })?;
                Ok((rule, regex))
            })
            .collect::<Result<Vec<_>, BackendError>>()?;
        Ok(MockBackend {
            model: model.into(),
            rules: compiled,
        })
    }

    pub fn from_rules_file(model: impl Into<String>, path: &Path) -> Result<Self, BackendError> {
        let file = std::fs::File::open(path)
            .map_err(|e| BackendError::BadFixture(format!("{}: {e}", path.display())))?;
        let mut rules = Vec::new();
        for (number, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line
                .map_err(|e| BackendError::BadFixture(format!("{}: {e}", path.display())))?;
            if line.trim().is_empty() {
                continue;
            }
            let rule: MockRule = serde_json::from_str(&line).map_err(|e| {
                BackendError::BadFixture(format!("{} line {}: {e}", path.display(), number + 1))
            })?;
            rules.push(rule);
        }
        Self::from_rules(model, rules)
    }
}

impl LlmBackend for MockBackend {
    fn model(&self) -> &str {
        &self.model
    }

    fn complete(&self, request: &LlmRequest<'_>) -> Result<String, BackendError> {
        for (rule, regex) in &self.rules {
            let tag_match = request.tag == Some(rule.match_expr.as_str());
            if tag_match || regex.is_match(request.prompt) {
                return Ok(rule.response.clone());
            }
        }
        Err(BackendError::NoRuleMatch(
            request.tag.unwrap_or("<untagged>").to_owned(),
        ))
    }

    fn fingerprint(&self) -> String {
        format!("mock/{}/{} rules", self.model, self.rules.len())
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    content: String,
}

const SYSTEM_PROMPT: &str =
    "You extract structured data from product reviews. Follow the instructions exactly.";

/// Chat-completion client: POSTs `{model, messages, temperature}` and reads
/// the first choice's message content. The API key comes from the
/// environment variable named in the configuration.
pub struct RemoteBackend {
    endpoint: String,
    model: String,
    api_key_env: String,
    client: reqwest::blocking::Client,
}

impl RemoteBackend {
    pub fn new(
        endpoint: String,
        model: String,
        api_key_env: String,
        timeout: std::time::Duration,
    ) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(RemoteBackend {
            endpoint,
            model,
            api_key_env,
            client,
        })
    }
}

impl LlmBackend for RemoteBackend {
    fn model(&self) -> &str {
        &self.model
    }

    fn complete(&self, request: &LlmRequest<'_>) -> Result<String, BackendError> {
        let key = std::env::var(&self.api_key_env)
            .map_err(|_| BackendError::MissingApiKey(self.api_key_env.clone()))?;
        let body = ChatRequest {
            model: &self.model,
            messages: vec![
                ChatMessage {
                    role: "system",
                    content: SYSTEM_PROMPT,
                },
                ChatMessage {
                    role: "user",
                    content: request.prompt,
                },
            ],
            temperature: 0.0,
        };
        let response = self
            .client
            .post(&self.endpoint)
            .bearer_auth(key)
            .json(&body)
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(BackendError::Api {
                status: status.as_u16(),
                message: response.text().unwrap_or_default(),
            });
        }
        let parsed: ChatResponse = response
            .json()
            .map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|choice| choice.message.content)
            .ok_or_else(|| BackendError::MalformedResponse("response has no choices".to_owned()))
    }

    fn fingerprint(&self) -> String {
        format!("remote/{}@{}", self.model, self.endpoint)
    }
}

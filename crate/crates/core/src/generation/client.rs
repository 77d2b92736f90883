use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{GenerationError, PromptBundle};
use crate::http::{HttpFailure, JsonClient, RetryPolicy};

/// Environment variable holding the LLM API key.
pub const API_KEY_ENV: &str = "STAR_RAG_LLM_KEY";

/// Anything that turns a prompt into assistant text. Implemented by the HTTP
/// client and by test doubles.
pub trait ChatModel: Send + Sync {
    fn complete(&self, prompt: &PromptBundle) -> Result<String, GenerationError>;
}

#[derive(Clone, PartialEq)]
pub struct LlmClientConfig {
    /// Base URL; requests go to `{endpoint}/chat/completions`.
    pub endpoint: String,
    pub model: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub timeout: Duration,
    pub retries: u32,
    pub initial_backoff: Duration,
    pub api_key: Option<String>,
}

impl fmt::Debug for LlmClientConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LlmClientConfig")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .field("max_tokens", &self.max_tokens)
            .field("temperature", &self.temperature)
            .field("timeout", &self.timeout)
            .field("retries", &self.retries)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl LlmClientConfig {
    pub fn new(endpoint: &str, model: &str) -> Self {
        LlmClientConfig {
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            max_tokens: 512,
            temperature: 0.0,
            timeout: Duration::from_secs(60),
            retries: 3,
            initial_backoff: Duration::from_millis(250),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
        }
    }
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [Message<'a>; 2],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ChatClient {
    config: LlmClientConfig,
    url: String,
    http: JsonClient,
}

impl ChatClient {
    pub fn new(config: LlmClientConfig) -> Self {
        let url = format!("{}/chat/completions", config.endpoint.trim_end_matches('/'));
        let http = JsonClient::new(RetryPolicy {
            retries: config.retries,
            initial_backoff: config.initial_backoff,
            timeout: config.timeout,
        });
        ChatClient { config, url, http }
    }

    pub fn config(&self) -> &LlmClientConfig {
        &self.config
    }
}

impl ChatModel for ChatClient {
    fn complete(&self, prompt: &PromptBundle) -> Result<String, GenerationError> {
        let user = prompt.user_message();
        let req = ChatRequest {
            model: &self.config.model,
            messages: [
                Message {
                    role: "system",
                    content: &prompt.system_instruction,
                },
                Message {
                    role: "user",
                    content: &user,
                },
            ],
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens,
        };
        let resp: ChatResponse = self
            .http
            .post(&self.url, &req, self.config.api_key.as_deref())
            .map_err(|e| match e {
                HttpFailure::Timeout => GenerationError::Timeout,
                other => GenerationError::Llm(format!("{other} (retries: {})", self.config.retries)),
            })?;
        resp.choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| GenerationError::Llm("response has no choices[0].message.content".into()))
    }
}

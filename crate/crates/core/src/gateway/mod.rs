//! Chat-completion backends.
//!
//! [`HttpBackend`] talks to an external chat endpoint with retries;
//! [`MockBackend`] answers from a canned corpus with seeded randomness so
//! whole experiments run offline and reproducibly.

mod config;
mod http;
mod mock;
mod retry;

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::dialogue::{SocialDimension, StubbornnessLevel};

pub use config::BackendConfig;
pub use http::HttpBackend;
pub use mock::{mock_complete, MockBackend, MockBehavior, MockCorpus};
pub use retry::RetryPolicy;

/// A chat-completion backend. Implementations must be safe to call from
/// many dialogue workers at once.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError>;

    /// Key-value description of the backend (model id, decoding params),
    /// copied into every transcript.
    fn metadata(&self) -> BTreeMap<String, String>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// Where in the protocol a request sits. The mock backend answers from this;
/// networked backends ignore it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RequestContext {
    pub stage: u8,
    pub dimension: SocialDimension,
    pub stubbornness: StubbornnessLevel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionRequest {
    /// Prompt rendered in the chat wire format.
    pub prompt: String,
    /// The same conversation as role-tagged messages.
    pub messages: Vec<ChatMessage>,
    pub seed: u64,
    pub context: Option<RequestContext>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionResponse {
    pub text: String,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
    pub latency: Duration,
}

impl CompletionResponse {
    pub fn text_only(text: impl Into<String>, latency: Duration) -> Self {
        CompletionResponse {
            text: text.into(),
            prompt_tokens: None,
            completion_tokens: None,
            latency,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("request timed out")]
    Timeout,
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("endpoint returned HTTP {status}: {body}")]
    RemoteError { status: u16, body: String },
    #[error("giving up after {attempts} attempts: {last}")]
    ExhaustedRetries {
        attempts: u32,
        last: Box<GatewayError>,
    },
    #[error("invalid response: {0}")]
    InvalidResponse(String),
    #[error("invalid backend config: {0}")]
    InvalidConfig(String),
    #[error("no persuasion probability for ({dimension}, {stubbornness})")]
    UnknownCell {
        dimension: SocialDimension,
        stubbornness: StubbornnessLevel,
    },
    #[error("mock backend cannot answer: {0}")]
    UnsupportedRequest(String),
}

impl GatewayError {
    /// Transient failures are worth retrying.
    pub fn is_transient(&self) -> bool {
        match self {
            GatewayError::Timeout | GatewayError::Transport(_) => true,
            GatewayError::RemoteError { status, .. } => {
                matches!(status, 408 | 425 | 429) || (500..600).contains(status)
            }
            _ => false,
        }
    }
}

//! Model backends: live HTTPS chat completions, cassette replay, and an
//! offline synthetic generator.

mod live;
mod replay;
mod synthetic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical;

pub use live::LiveBackend;
pub use replay::{Cassette, Interaction, RecordingBackend, ReplayBackend, ReplayMode, CASSETTE_FORMAT};
pub use synthetic::SyntheticBackend;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
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

/// A chat-completion request, as sent on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    pub max_tokens: u32,
}

impl ChatRequest {
    /// SHA-256 of the canonical (sorted-key, compact) request encoding.
    pub fn fingerprint(&self) -> String {
        let text = canonical::to_canonical_compact(self).expect("request serializes");
        canonical::sha256_hex(text.as_bytes())
    }

    pub fn last_user_text(&self) -> Option<&str> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum BackendError {
    #[error("replay miss: no recorded response for request {fingerprint}")]
    ReplayMiss { fingerprint: String },
    #[error("model endpoint unreachable after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("model provider error: {0}")]
    Provider(String),
}

/// Something that answers chat requests. Shared across concurrent runs.
pub trait ModelBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError>;
}

impl<F> ModelBackend for F
where
    F: Fn(&ChatRequest) -> Result<String, BackendError> + Send + Sync,
{
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        self(request)
    }
}

impl<B: ModelBackend + ?Sized> ModelBackend for std::sync::Arc<B> {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

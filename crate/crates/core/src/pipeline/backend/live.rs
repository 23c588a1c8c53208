use serde_json::Value;

use super::{BackendError, ChatRequest, ModelBackend};
use crate::wire::{WireClient, WireError};

/// OpenAI-compatible `/chat/completions` backend.
#[derive(Debug, Clone)]
pub struct LiveBackend {
    client: WireClient,
}

impl LiveBackend {
    pub fn new(client: WireClient) -> LiveBackend {
        LiveBackend { client }
    }
}

impl ModelBackend for LiveBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let resp: Value = self
            .client
            .post_json("chat/completions", request)
            .map_err(|e| match e {
                WireError::Transport { attempts, message } => BackendError::Transport { attempts, message },
                other => BackendError::Provider(other.to_string()),
            })?;
        resp["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| BackendError::Provider("response has no message content".into()))
    }
}

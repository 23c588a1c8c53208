//! Minimal blocking JSON-over-HTTPS client for OpenAI-compatible endpoints.

use std::time::Duration;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

/// Environment variable holding the API key.
pub const API_KEY_ENV: &str = "LESSONFORGE_API_KEY";
/// Environment variable holding the API base URL.
pub const API_BASE_ENV: &str = "LESSONFORGE_API_BASE";
pub const DEFAULT_API_BASE: &str = "https://api.openai.com/v1";

#[derive(Debug, Clone)]
pub struct WireConfig {
    pub api_base: String,
    pub api_key: String,
    pub timeout: Duration,
    /// Total attempts for retryable failures (transport errors, 429, 5xx).
    pub max_attempts: u32,
    pub backoff: Duration,
}

impl WireConfig {
    pub fn new(api_base: impl Into<String>, api_key: impl Into<String>) -> WireConfig {
        WireConfig {
            api_base: api_base.into(),
            api_key: api_key.into(),
            timeout: Duration::from_secs(120),
            max_attempts: 3,
            backoff: Duration::from_millis(500),
        }
    }

    /// Reads base URL and key from the process environment.
    pub fn from_env() -> Result<WireConfig, WireError> {
        let key = std::env::var(API_KEY_ENV).map_err(|_| WireError::MissingKey)?;
        let base = std::env::var(API_BASE_ENV).unwrap_or_else(|_| DEFAULT_API_BASE.to_owned());
        Ok(WireConfig::new(base, key))
    }
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error("{API_KEY_ENV} is not set")]
    MissingKey,
    #[error("request failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint rejected request with status {status}")]
    Rejected { status: u16 },
    #[error("malformed response: {0}")]
    Malformed(String),
}

impl WireError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, WireError::Transport { .. })
    }
}

#[derive(Debug, Clone)]
pub struct WireClient {
    config: WireConfig,
    agent: ureq::Agent,
}

impl WireClient {
    pub fn new(config: WireConfig) -> WireClient {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        WireClient { config, agent }
    }

    pub fn post_json<B: Serialize>(&self, path: &str, body: &B) -> Result<Value, WireError> {
        let url = format!("{}/{}", self.config.api_base.trim_end_matches('/'), path);
        let mut last = String::new();
        for attempt in 1..=self.config.max_attempts.max(1) {
            let result = self
                .agent
                .post(&url)
                .header("Authorization", &format!("Bearer {}", self.config.api_key))
                .send_json(body);
            match result {
                Ok(mut resp) => {
                    return resp
                        .body_mut()
                        .read_json::<Value>()
                        .map_err(|e| WireError::Malformed(e.to_string()));
                }
                Err(ureq::Error::StatusCode(status)) if status != 429 && status < 500 => {
                    return Err(WireError::Rejected { status });
                }
                Err(e) => last = e.to_string(),
            }
            if attempt < self.config.max_attempts {
                std::thread::sleep(self.config.backoff * attempt);
            }
        }
        Err(WireError::Transport {
            attempts: self.config.max_attempts.max(1),
            message: last,
        })
    }
}

use serde::{Deserialize, Serialize};

pub const DEFAULT_MODEL_ID: &str = "gpt-4o-2024-05-13";

/// Sampling and retry settings for one generation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub model_id: String,
    pub temperature: f64,
    pub seed: Option<u64>,
    pub max_output_tokens: u32,
    /// Extra attempts per segment after the first one fails to parse.
    pub max_repair_retries: u32,
}

impl Default for ModelConfig {
    fn default() -> ModelConfig {
        ModelConfig {
            model_id: DEFAULT_MODEL_ID.to_owned(),
            temperature: 0.7,
            seed: None,
            max_output_tokens: 4096,
            max_repair_retries: 2,
        }
    }
}

impl ModelConfig {
    pub fn check(&self) -> Result<(), String> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(format!("temperature must be a finite value >= 0, got {}", self.temperature));
        }
        if self.model_id.trim().is_empty() {
            return Err("model id is empty".to_owned());
        }
        if self.max_output_tokens == 0 {
            return Err("max_output_tokens must be positive".to_owned());
        }
        Ok(())
    }
}

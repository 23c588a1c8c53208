//! Resolved CLI settings. Each value comes from the first source that sets it:
//! command-line flag, environment variable, config file, built-in default.

use std::path::{Path, PathBuf};

use lessonforge_core::pipeline::ModelConfig;
use serde::Deserialize;

use crate::error::CliError;

pub const DEFAULT_STORE: &str = "lessonforge-store";
pub const DEFAULT_CORPUS: &str = "default";
pub const DEFAULT_LISTEN: &str = "127.0.0.1:8787";

/// `lessonforge.toml`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub store: Option<PathBuf>,
    pub rubric: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub corpus: Option<String>,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub server: ServerSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerSection {
    pub listen: Option<String>,
    pub cors_origin: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage("config_unreadable", format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::usage("config_invalid", format!("{}: {e}", path.display())))
    }
}

/// Per-field model overrides from flags or environment.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct ModelFlags {
    /// Chat model id.
    #[arg(long = "model", env = "LESSONFORGE_MODEL")]
    pub model_id: Option<String>,
    /// Sampling temperature, >= 0.
    #[arg(long, env = "LESSONFORGE_TEMPERATURE")]
    pub temperature: Option<f64>,
    /// Sampling seed passed to backends that accept one.
    #[arg(long, env = "LESSONFORGE_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "LESSONFORGE_MAX_OUTPUT_TOKENS")]
    pub max_output_tokens: Option<u32>,
    /// Repair attempts after the first try of each segment.
    #[arg(long, env = "LESSONFORGE_MAX_REPAIR_RETRIES")]
    pub max_repair_retries: Option<u32>,
}

#[derive(Debug, Clone)]
pub struct CliConfig {
    pub store: PathBuf,
    pub rubric: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub corpus: String,
    pub model: ModelConfig,
    pub listen: String,
    pub cors_origin: Option<String>,
}

/// Flag-or-env values for the global options, before file and defaults.
#[derive(Debug, Default, Clone)]
pub struct GlobalOverrides {
    pub store: Option<PathBuf>,
    pub rubric: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub corpus: Option<String>,
}

impl CliConfig {
    pub fn resolve(global: GlobalOverrides, file: FileConfig) -> CliConfig {
        CliConfig {
            store: global.store.or(file.store).unwrap_or_else(|| PathBuf::from(DEFAULT_STORE)),
            rubric: global.rubric.or(file.rubric),
            templates: global.templates.or(file.templates),
            corpus: global.corpus.or(file.corpus).unwrap_or_else(|| DEFAULT_CORPUS.to_owned()),
            model: file.model.unwrap_or_default(),
            listen: file.server.listen.unwrap_or_else(|| DEFAULT_LISTEN.to_owned()),
            cors_origin: file.server.cors_origin,
        }
    }

    /// Model settings with flag/env overrides applied on top.
    pub fn model_with(&self, flags: &ModelFlags) -> ModelConfig {
        let mut m = self.model.clone();
        if let Some(v) = &flags.model_id {
            m.model_id = v.clone();
        }
        if let Some(v) = flags.temperature {
            m.temperature = v;
        }
        if flags.seed.is_some() {
            m.seed = flags.seed;
        }
        if let Some(v) = flags.max_output_tokens {
            m.max_output_tokens = v;
        }
        if let Some(v) = flags.max_repair_retries {
            m.max_repair_retries = v;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file: FileConfig = toml::from_str(
            "store = \"from-file\"\ncorpus = \"c1\"\n[model]\ntemperature = 0.3\nseed = 9\n[server]\nlisten = \"0.0.0.0:1\"\n",
        )
        .unwrap();
        let cfg = CliConfig::resolve(
            GlobalOverrides { store: Some("from-flag".into()), ..Default::default() },
            file,
        );
        assert_eq!(cfg.store, PathBuf::from("from-flag"));
        assert_eq!(cfg.corpus, "c1");
        assert_eq!(cfg.listen, "0.0.0.0:1");
        assert_eq!(cfg.model.temperature, 0.3);
        assert_eq!(cfg.model.model_id, "gpt-4o-2024-05-13");
        let m = cfg.model_with(&ModelFlags { temperature: Some(0.0), ..Default::default() });
        assert_eq!((m.temperature, m.seed), (0.0, Some(9)));

        let bare = CliConfig::resolve(GlobalOverrides::default(), FileConfig::default());
        assert_eq!(bare.store, PathBuf::from(DEFAULT_STORE));
        assert_eq!(bare.corpus, DEFAULT_CORPUS);
        assert_eq!(bare.model, ModelConfig::default());
    }

    #[test]
    fn unknown_file_keys_rejected() {
        assert!(toml::from_str::<FileConfig>("stor = \"x\"").is_err());
    }
}

//! Corpus manifest: a TOML file listing plain-text articles and their metadata.
//!
//! ```toml
//! [[documents]]
//! id = "castelli2021"
//! path = "castelli2021.txt"
//! title = "Why students do not turn on their video cameras"
//! authors = ["Castelli, F. R.", "Sarvary, M. A."]
//! year = 2021
//! bibliography = [{ title = "Politeness", year = 1987 }]
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use super::index::{BibEntry, CorpusDocument};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    documents: Vec<ManifestEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestEntry {
    id: String,
    path: PathBuf,
    title: String,
    #[serde(default)]
    authors: Vec<String>,
    year: Option<i32>,
    #[serde(default)]
    bibliography: Vec<BibEntry>,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("manifest {path}: {message}")]
    Format { path: PathBuf, message: String },
}

/// Loads every document named in the manifest; bodies are read relative to
/// the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<Vec<CorpusDocument>, ManifestError> {
    let io_err = |p: &Path| {
        let p = p.to_path_buf();
        move |source| ManifestError::Io { path: p, source }
    };
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let parsed: ManifestFile = toml::from_str(&text).map_err(|e| ManifestError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parsed
        .documents
        .into_iter()
        .map(|e| {
            let body_path = base.join(&e.path);
            let body = std::fs::read_to_string(&body_path)
                .map_err(io_err(&body_path))?
                .replace("\r\n", "\n");
            Ok(CorpusDocument {
                id: e.id,
                title: e.title,
                authors: e.authors,
                year: e.year,
                body,
                bibliography: e.bibliography,
            })
        })
        .collect()
}

use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{BackendError, ChatRequest, ModelBackend};
use crate::{canonical, fsutil};

pub const CASSETTE_FORMAT: &str = "lessonforge-cassette";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub fingerprint: String,
    /// Kept for human inspection; matching uses `fingerprint` only.
    pub request: ChatRequest,
    pub response: String,
}

/// Ordered record of model exchanges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cassette {
    pub format: String,
    pub version: u32,
    pub interactions: Vec<Interaction>,
}

impl Default for Cassette {
    fn default() -> Self {
        Cassette {
            format: CASSETTE_FORMAT.into(),
            version: 1,
            interactions: Vec::new(),
        }
    }
}

impl Cassette {
    pub fn load(path: &Path) -> std::io::Result<Cassette> {
        let text = std::fs::read_to_string(path)?;
        let c: Cassette = serde_json::from_str(&text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        if c.format != CASSETTE_FORMAT || c.version != 1 {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("unsupported cassette {} v{}", c.format, c.version),
            ));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let text = canonical::to_canonical_string(self)?;
        fsutil::write_atomic(path, text.as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplayMode {
    /// Every request must match a recorded fingerprint.
    Strict,
    /// Unmatched requests receive the next unused recording, in order.
    Lenient,
}

/// Serves recorded responses. Repeated identical requests receive successive
/// recordings for that fingerprint; once exhausted the last one repeats.
#[derive(Debug)]
pub struct ReplayBackend {
    cassette: Cassette,
    mode: ReplayMode,
    used: Mutex<Vec<bool>>,
}

impl ReplayBackend {
    pub fn new(cassette: Cassette, mode: ReplayMode) -> ReplayBackend {
        let used = Mutex::new(vec![false; cassette.interactions.len()]);
        ReplayBackend { cassette, mode, used }
    }

    pub fn load(path: &Path, mode: ReplayMode) -> std::io::Result<ReplayBackend> {
        Ok(ReplayBackend::new(Cassette::load(path)?, mode))
    }
}

impl ModelBackend for ReplayBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let fp = request.fingerprint();
        let mut used = self.used.lock().unwrap_or_else(|e| e.into_inner());
        let items = &self.cassette.interactions;
        let matching: Vec<usize> = (0..items.len()).filter(|&i| items[i].fingerprint == fp).collect();
        let pick = matching
            .iter()
            .copied()
            .find(|&i| !used[i])
            .or_else(|| matching.last().copied())
            .or_else(|| match self.mode {
                ReplayMode::Strict => None,
                ReplayMode::Lenient => (0..items.len()).find(|&i| !used[i]),
            });
        match pick {
            Some(i) => {
                used[i] = true;
                Ok(items[i].response.clone())
            }
            None => Err(BackendError::ReplayMiss { fingerprint: fp }),
        }
    }
}

/// Wraps a backend and records every successful exchange.
pub struct RecordingBackend<B> {
    inner: B,
    recorded: Mutex<Cassette>,
}

impl<B: ModelBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> RecordingBackend<B> {
        RecordingBackend {
            inner,
            recorded: Mutex::new(Cassette::default()),
        }
    }

    pub fn cassette(&self) -> Cassette {
        self.recorded.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl<B: ModelBackend> ModelBackend for RecordingBackend<B> {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let response = self.inner.complete(request)?;
        self.recorded
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .interactions
            .push(Interaction {
                fingerprint: request.fingerprint(),
                request: request.clone(),
                response: response.clone(),
            });
        Ok(response)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{ChatMessage, Role};
    use super::*;

    fn req(text: &str) -> ChatRequest {
        ChatRequest {
            model: "m".into(),
            messages: vec![ChatMessage {
                role: Role::User,
                content: text.into(),
            }],
            temperature: 0.7,
            seed: None,
            max_tokens: 10,
        }
    }

    fn cassette() -> Cassette {
        let rec = RecordingBackend::new(|r: &ChatRequest| Ok(format!("echo {}", r.last_user_text().unwrap())));
        rec.complete(&req("a")).unwrap();
        rec.complete(&req("b")).unwrap();
        rec.cassette()
    }

    #[test]
    fn strict_hits_and_misses() {
        let b = ReplayBackend::new(cassette(), ReplayMode::Strict);
        assert_eq!(b.complete(&req("b")).unwrap(), "echo b");
        assert_eq!(b.complete(&req("a")).unwrap(), "echo a");
        assert_eq!(b.complete(&req("a")).unwrap(), "echo a");
        assert!(matches!(b.complete(&req("c")), Err(BackendError::ReplayMiss { .. })));
    }

    #[test]
    fn lenient_falls_back_to_sequence() {
        let b = ReplayBackend::new(cassette(), ReplayMode::Lenient);
        assert_eq!(b.complete(&req("zzz")).unwrap(), "echo a");
        assert_eq!(b.complete(&req("yyy")).unwrap(), "echo b");
        assert!(b.complete(&req("xxx")).is_err());
    }

    #[test]
    fn fingerprint_ignores_field_order_but_not_content() {
        let a = req("x");
        let mut b = a.clone();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.temperature = 0.0;
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
    }

    #[test]
    fn cassette_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        let c = cassette();
        c.save(&path).unwrap();
        assert_eq!(Cassette::load(&path).unwrap(), c);
    }
}

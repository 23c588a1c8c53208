//! Plain-file store.
//!
//! ```text
//! <root>/corpora/<name>/index.jsonl
//! <root>/runs/<run_id>/run.json
//! <root>/runs/<run_id>/transcripts.json
//! <root>/runs/<run_id>/lesson.lesson.json
//! <root>/runs/<run_id>/.lock
//! <root>/ratings/<lesson_id>/<coder_id>.json
//! <root>/consensus/<lesson_id>.json
//! <root>/reports/<name>.json, <name>.txt
//! ```
//!
//! Every file is replaced atomically. `run.json` is written last, so a run
//! directory without it is ignored.

use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical;
use crate::corpus::{CorpusIndex, IndexError};
use crate::evaluation::{ConsensusEntry, ConsensusRecord, RatingSession};
use crate::fsutil;
use crate::lesson::{parse_lesson, serialize_lesson, Lesson, ValidationReport, LESSON_FILE_EXTENSION};
use crate::pipeline::{GenerationRun, ModelConfig, RunStatus, SegmentPlan, SegmentTranscript};

const RUN_FILE: &str = "run.json";
const TRANSCRIPTS_FILE: &str = "transcripts.json";
const LOCK_FILE: &str = ".lock";
const STALE_TEMP_AGE: Duration = Duration::from_secs(600);

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("invalid id {0:?}: use letters, digits, '.', '_' or '-'")]
    InvalidId(String),
    #[error("{kind} {id} not found")]
    NotFound { kind: &'static str, id: String },
    #[error("run {0} is locked by another writer")]
    Locked(String),
    #[error("lock is for run {held}, not {wanted}")]
    WrongLock { held: String, wanted: String },
    #[error(transparent)]
    Index(#[from] IndexError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_owned(), source }
}

/// Accepts ids safe to use as a single path component.
pub fn check_id(id: &str) -> Result<(), StoreError> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'));
    if ok { Ok(()) } else { Err(StoreError::InvalidId(id.to_owned())) }
}

/// `run.json`: everything except transcripts and the lesson body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub id: String,
    pub topic: String,
    pub plan: SegmentPlan,
    pub config: ModelConfig,
    pub status: RunStatus,
    #[serde(default)]
    pub lesson_id: Option<String>,
    #[serde(default)]
    pub validation: Option<ValidationReport>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub id: String,
    pub topic: String,
    pub k: u8,
    pub status: RunStatus,
    pub lesson_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LessonSummary {
    pub lesson_id: String,
    pub run_id: String,
    pub topic: String,
    pub k: u8,
}

/// Exclusive writer handle for one run. Released on drop.
#[derive(Debug)]
pub struct RunLock {
    run_id: String,
    path: PathBuf,
}

impl RunLock {
    pub fn run_id(&self) -> &str {
        &self.run_id
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn pid_alive(pid: u32) -> bool {
    let proc_root = Path::new("/proc");
    if !proc_root.is_dir() {
        return true;
    }
    proc_root.join(pid.to_string()).exists()
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    /// Opens (creating if needed) a store and clears stale temp files.
    pub fn open(root: impl Into<PathBuf>) -> Result<Store, StoreError> {
        let root = root.into();
        for sub in ["corpora", "runs", "ratings", "consensus", "reports"] {
            let p = root.join(sub);
            fs::create_dir_all(&p).map_err(io_err(&p))?;
        }
        fsutil::sweep_temp_files_older_than(&root, STALE_TEMP_AGE).map_err(io_err(&root))?;
        Ok(Store { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Removes every leftover temp file regardless of age.
    pub fn sweep_temp_files(&self) -> Result<usize, StoreError> {
        fsutil::sweep_temp_files(&self.root).map_err(io_err(&self.root))
    }

    fn write_json<T: Serialize + ?Sized>(&self, path: &Path, value: &T) -> Result<(), StoreError> {
        let text = canonical::to_canonical_string(value).map_err(|e| StoreError::Corrupt {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        fsutil::write_atomic(path, text.as_bytes()).map_err(io_err(path))
    }

    fn read_json<T: DeserializeOwned>(&self, path: &Path) -> Result<Option<T>, StoreError> {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(io_err(path)(e)),
        };
        serde_json::from_str(&text).map(Some).map_err(|e| StoreError::Corrupt {
            path: path.to_owned(),
            message: e.to_string(),
        })
    }

    /// Visible (non-temp, non-hidden) entries of a directory, sorted by name.
    fn list_dir(&self, dir: &Path) -> Result<Vec<String>, StoreError> {
        let entries = match fs::read_dir(dir) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io_err(dir)(e)),
        };
        let mut names = Vec::new();
        for entry in entries {
            let name = entry.map_err(io_err(dir))?.file_name().to_string_lossy().into_owned();
            if !name.starts_with('.') {
                names.push(name);
            }
        }
        names.sort();
        Ok(names)
    }

    // ---- corpora

    pub fn corpus_index_path(&self, name: &str) -> Result<PathBuf, StoreError> {
        check_id(name)?;
        Ok(self.root.join("corpora").join(name).join("index.jsonl"))
    }

    pub fn save_index(&self, name: &str, index: &CorpusIndex) -> Result<PathBuf, StoreError> {
        let path = self.corpus_index_path(name)?;
        index.save(&path)?;
        Ok(path)
    }

    pub fn load_index(&self, name: &str) -> Result<CorpusIndex, StoreError> {
        let path = self.corpus_index_path(name)?;
        if !path.exists() {
            return Err(StoreError::NotFound { kind: "corpus", id: name.to_owned() });
        }
        Ok(CorpusIndex::load(&path)?)
    }

    pub fn list_corpora(&self) -> Result<Vec<String>, StoreError> {
        let dir = self.root.join("corpora");
        Ok(self
            .list_dir(&dir)?
            .into_iter()
            .filter(|n| dir.join(n).join("index.jsonl").is_file())
            .collect())
    }

    // ---- runs

    /// Fresh time-sortable run id.
    pub fn new_run_id(&self) -> String {
        ulid::Ulid::new().to_string()
    }

    fn run_dir(&self, id: &str) -> Result<PathBuf, StoreError> {
        check_id(id)?;
        Ok(self.root.join("runs").join(id))
    }

    /// Takes the per-run writer lock. A lock left by a dead process is taken over.
    pub fn lock_run(&self, id: &str) -> Result<RunLock, StoreError> {
        let dir = self.run_dir(id)?;
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let path = dir.join(LOCK_FILE);
        for _ in 0..2 {
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut f) => {
                    let _ = write!(f, "{}", std::process::id());
                    return Ok(RunLock { run_id: id.to_owned(), path });
                }
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                    let holder = fs::read_to_string(&path).ok().and_then(|s| s.trim().parse::<u32>().ok());
                    match holder {
                        Some(pid) if pid != std::process::id() && !pid_alive(pid) => {
                            let _ = fs::remove_file(&path);
                        }
                        _ => return Err(StoreError::Locked(id.to_owned())),
                    }
                }
                Err(e) => return Err(io_err(&path)(e)),
            }
        }
        Err(StoreError::Locked(id.to_owned()))
    }

    pub fn is_run_locked(&self, id: &str) -> Result<bool, StoreError> {
        Ok(self.run_dir(id)?.join(LOCK_FILE).exists())
    }

    pub fn lesson_path(&self, run_id: &str) -> Result<PathBuf, StoreError> {
        Ok(self.run_dir(run_id)?.join(format!("lesson{LESSON_FILE_EXTENSION}")))
    }

    pub fn transcripts_path(&self, run_id: &str) -> Result<PathBuf, StoreError> {
        Ok(self.run_dir(run_id)?.join(TRANSCRIPTS_FILE))
    }

    /// Persists a run. Transcripts and lesson go first, `run.json` last.
    pub fn save_run(&self, lock: &RunLock, run: &GenerationRun) -> Result<(), StoreError> {
        if lock.run_id != run.id {
            return Err(StoreError::WrongLock { held: lock.run_id.clone(), wanted: run.id.clone() });
        }
        let dir = self.run_dir(&run.id)?;
        self.write_json(&dir.join(TRANSCRIPTS_FILE), &run.transcripts)?;
        let lesson_path = self.lesson_path(&run.id)?;
        match &run.lesson {
            Some(lesson) => {
                let text = serialize_lesson(lesson);
                fsutil::write_atomic(&lesson_path, text.as_bytes()).map_err(io_err(&lesson_path))?;
            }
            None => match fs::remove_file(&lesson_path) {
                Ok(()) => {}
                Err(e) if e.kind() == io::ErrorKind::NotFound => {}
                Err(e) => return Err(io_err(&lesson_path)(e)),
            },
        }
        let record = RunRecord {
            id: run.id.clone(),
            topic: run.topic.clone(),
            plan: run.plan.clone(),
            config: run.config.clone(),
            status: run.status.clone(),
            lesson_id: run.lesson.as_ref().map(|l| l.id.clone()),
            validation: run.validation.clone(),
        };
        self.write_json(&dir.join(RUN_FILE), &record)
    }

    pub fn load_run_record(&self, id: &str) -> Result<RunRecord, StoreError> {
        let path = self.run_dir(id)?.join(RUN_FILE);
        self.read_json(&path)?.ok_or_else(|| StoreError::NotFound { kind: "run", id: id.to_owned() })
    }

    pub fn load_run(&self, id: &str) -> Result<GenerationRun, StoreError> {
        let record = self.load_run_record(id)?;
        let transcripts: Vec<SegmentTranscript> =
            self.read_json(&self.transcripts_path(id)?)?.unwrap_or_default();
        let lesson = match &record.lesson_id {
            Some(_) => Some(self.read_lesson_file(&self.lesson_path(id)?)?),
            None => None,
        };
        Ok(GenerationRun {
            id: record.id,
            topic: record.topic,
            plan: record.plan,
            config: record.config,
            transcripts,
            lesson,
            status: record.status,
            validation: record.validation,
        })
    }

    fn read_lesson_file(&self, path: &Path) -> Result<Lesson, StoreError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        parse_lesson(&text).map_err(|e| StoreError::Corrupt { path: path.to_owned(), message: e.to_string() })
    }

    /// Runs with a committed `run.json`, oldest first.
    pub fn list_runs(&self) -> Result<Vec<RunSummary>, StoreError> {
        let mut out = Vec::new();
        for name in self.list_dir(&self.root.join("runs"))? {
            if check_id(&name).is_err() {
                continue;
            }
            match self.load_run_record(&name) {
                Ok(r) => out.push(RunSummary {
                    id: r.id,
                    topic: r.topic,
                    k: r.plan.k,
                    status: r.status,
                    lesson_id: r.lesson_id,
                }),
                Err(StoreError::NotFound { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }

    // ---- lessons

    /// One entry per lesson id; when several runs produced the same lesson the
    /// newest run wins.
    pub fn list_lessons(&self) -> Result<Vec<LessonSummary>, StoreError> {
        let mut by_id = std::collections::BTreeMap::new();
        for r in self.list_runs()? {
            if let Some(lesson_id) = r.lesson_id {
                by_id.insert(
                    lesson_id.clone(),
                    LessonSummary { lesson_id, run_id: r.id, topic: r.topic, k: r.k },
                );
            }
        }
        Ok(by_id.into_values().collect())
    }

    pub fn find_lesson(&self, lesson_id: &str) -> Result<(LessonSummary, Lesson), StoreError> {
        check_id(lesson_id)?;
        let summary = self
            .list_lessons()?
            .into_iter()
            .find(|l| l.lesson_id == lesson_id)
            .ok_or_else(|| StoreError::NotFound { kind: "lesson", id: lesson_id.to_owned() })?;
        let lesson = self.read_lesson_file(&self.lesson_path(&summary.run_id)?)?;
        Ok((summary, lesson))
    }

    // ---- ratings

    fn rating_path(&self, lesson_id: &str, coder_id: &str) -> Result<PathBuf, StoreError> {
        check_id(lesson_id)?;
        check_id(coder_id)?;
        Ok(self.root.join("ratings").join(lesson_id).join(format!("{coder_id}.json")))
    }

    pub fn save_rating(&self, session: &RatingSession) -> Result<(), StoreError> {
        let path = self.rating_path(&session.lesson_id, &session.coder_id)?;
        self.write_json(&path, session)
    }

    pub fn load_ratings(&self, lesson_id: &str) -> Result<Vec<RatingSession>, StoreError> {
        check_id(lesson_id)?;
        let dir = self.root.join("ratings").join(lesson_id);
        let mut out = Vec::new();
        for name in self.list_dir(&dir)? {
            if let Some(coder) = name.strip_suffix(".json") {
                if let Some(s) = self.read_json(&self.rating_path(lesson_id, coder)?)? {
                    out.push(s);
                }
            }
        }
        Ok(out)
    }

    /// Every stored session, ordered by lesson then coder.
    pub fn all_ratings(&self) -> Result<Vec<RatingSession>, StoreError> {
        let mut out = Vec::new();
        for lesson in self.list_dir(&self.root.join("ratings"))? {
            if check_id(&lesson).is_ok() {
                out.extend(self.load_ratings(&lesson)?);
            }
        }
        Ok(out)
    }

    // ---- consensus

    fn consensus_path(&self, lesson_id: &str) -> Result<PathBuf, StoreError> {
        check_id(lesson_id)?;
        Ok(self.root.join("consensus").join(format!("{lesson_id}.json")))
    }

    pub fn save_consensus(&self, record: &ConsensusRecord) -> Result<(), StoreError> {
        self.write_json(&self.consensus_path(&record.lesson_id)?, record)
    }

    pub fn load_consensus(&self, lesson_id: &str) -> Result<Option<ConsensusRecord>, StoreError> {
        self.read_json(&self.consensus_path(lesson_id)?)
    }

    pub fn all_consensus(&self) -> Result<Vec<ConsensusRecord>, StoreError> {
        let mut out = Vec::new();
        for name in self.list_dir(&self.root.join("consensus"))? {
            if let Some(id) = name.strip_suffix(".json") {
                if let Some(r) = self.load_consensus(id)? {
                    out.push(r);
                }
            }
        }
        Ok(out)
    }

    /// Consensus records joined with their run's topic and strategy. Records
    /// whose lesson is not produced by any stored run are returned separately.
    pub fn consensus_entries(&self) -> Result<(Vec<ConsensusEntry>, Vec<String>), StoreError> {
        let lessons = self.list_lessons()?;
        let mut entries = Vec::new();
        let mut orphans = Vec::new();
        for record in self.all_consensus()? {
            match lessons.iter().find(|l| l.lesson_id == record.lesson_id) {
                Some(l) => entries.push(ConsensusEntry { lesson: l.topic.clone(), strategy: l.k, record }),
                None => orphans.push(record.lesson_id),
            }
        }
        entries.sort_by(|a, b| (a.strategy, &a.lesson).cmp(&(b.strategy, &b.lesson)));
        Ok((entries, orphans))
    }

    // ---- reports

    /// Writes `<name>.json` and `<name>.txt` under `reports/`.
    pub fn save_report<T: Serialize>(&self, name: &str, value: &T, text: &str) -> Result<PathBuf, StoreError> {
        check_id(name)?;
        let dir = self.root.join("reports");
        let json_path = dir.join(format!("{name}.json"));
        self.write_json(&json_path, value)?;
        let txt = dir.join(format!("{name}.txt"));
        fsutil::write_atomic(&txt, text.as_bytes()).map_err(io_err(&txt))?;
        Ok(json_path)
    }
}

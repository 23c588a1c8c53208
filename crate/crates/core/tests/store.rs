use std::path::Path;
use std::process::Command;
use std::time::Duration;

use lessonforge_core::corpus::{CorpusIndex, HashEmbedder, IndexRetriever};
use lessonforge_core::evaluation::{RatingSession, RatingValue, RatingValues, Rubric};
use lessonforge_core::fsutil;
use lessonforge_core::lesson::sample::golden_lesson;
use lessonforge_core::lesson::{parse_lesson, serialize_lesson, Lesson, Section};
use lessonforge_core::pipeline::backend::SyntheticBackend;
use lessonforge_core::pipeline::{run_pipeline, GenerationRun, ModelConfig, RunStatus};
use lessonforge_core::store::{Store, StoreError};

const CHILD_ENV: &str = "LESSONFORGE_CRASH_CHILD";
const DIR_ENV: &str = "LESSONFORGE_CRASH_DIR";

fn synthetic_run(id: &str) -> GenerationRun {
    let embedder = HashEmbedder::default();
    let mut index = CorpusIndex::for_embedder(&embedder);
    let doc = lessonforge_core::corpus::CorpusDocument {
        id: "d".into(),
        title: "A short note on polite requests".into(),
        authors: vec![],
        year: Some(2020),
        body: "Polite requests give a reason and leave room to decline. ".repeat(40),
        bibliography: vec![],
    };
    index.ingest(doc, &embedder, &Default::default()).unwrap();
    let retriever = IndexRetriever { index: &index, embedder: &embedder };
    run_pipeline(id, "Turning on Cameras", 3, &retriever, &SyntheticBackend::new(), ModelConfig::default())
}

fn big_lesson(version: usize) -> Lesson {
    let mut l = golden_lesson();
    if let Some(Section::Conclusion(c)) = l.sections.last_mut() {
        c.summary = format!("version {version} ") + &"All tutors benefit from practice. ".repeat(20_000);
    }
    l
}

fn rating(version: usize) -> RatingSession {
    let rubric = Rubric::default();
    let values: RatingValues = rubric
        .ids()
        .enumerate()
        .map(|(i, id)| (id.to_owned(), if (i + version).is_multiple_of(2) { RatingValue::Positive } else { RatingValue::Negative }))
        .collect();
    RatingSession::new("coder-a", "lesson-x", values)
}

#[test]
fn run_roundtrip_and_listing() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let id = store.new_run_id();
    let run = synthetic_run(&id);
    assert_eq!(run.status, RunStatus::Complete);
    {
        let lock = store.lock_run(&id).unwrap();
        assert!(matches!(store.lock_run(&id), Err(StoreError::Locked(_))));
        store.save_run(&lock, &run).unwrap();
    }
    assert!(!store.is_run_locked(&id).unwrap());
    assert_eq!(store.load_run(&id).unwrap(), run);

    let runs = store.list_runs().unwrap();
    assert_eq!(runs.len(), 1);
    assert_eq!(runs[0].k, 3);
    let lessons = store.list_lessons().unwrap();
    let lesson_id = run.lesson.as_ref().unwrap().id.clone();
    assert_eq!(lessons[0].lesson_id, lesson_id);
    let (_, lesson) = store.find_lesson(&lesson_id).unwrap();
    assert_eq!(&lesson, run.lesson.as_ref().unwrap());

    // A run directory without run.json is invisible.
    std::fs::create_dir_all(dir.path().join("runs/01ZZZZZZZZZZZZZZZZZZZZZZZZ")).unwrap();
    assert_eq!(store.list_runs().unwrap().len(), 1);
    assert!(matches!(store.load_run("nope"), Err(StoreError::NotFound { .. })));
}

#[test]
fn run_ids_sort_by_creation() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let a = store.new_run_id();
    std::thread::sleep(Duration::from_millis(2));
    let b = store.new_run_id();
    assert!(a < b);
    assert_eq!(a.len(), 26);
}

#[test]
fn save_requires_matching_lock() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let run = synthetic_run("run-b");
    let lock = store.lock_run("run-a").unwrap();
    assert!(matches!(store.save_run(&lock, &run), Err(StoreError::WrongLock { .. })));
}

#[test]
fn stale_lock_from_dead_process_is_taken_over() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let mut child = Command::new("true").spawn().unwrap();
    let dead = child.id();
    child.wait().unwrap();
    let lock_dir = dir.path().join("runs/r1");
    std::fs::create_dir_all(&lock_dir).unwrap();
    std::fs::write(lock_dir.join(".lock"), dead.to_string()).unwrap();
    assert!(store.lock_run("r1").is_ok());
}

#[test]
fn ratings_and_consensus_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let a = rating(0);
    let mut b = rating(1);
    b.coder_id = "coder-b".into();
    store.save_rating(&b).unwrap();
    store.save_rating(&a).unwrap();
    assert_eq!(store.load_ratings("lesson-x").unwrap(), vec![a.clone(), b.clone()]);
    assert_eq!(store.all_ratings().unwrap().len(), 2);
    assert!(store.load_ratings("lesson-y").unwrap().is_empty());

    let record = lessonforge_core::evaluation::ConsensusRecord {
        lesson_id: "lesson-x".into(),
        values: a.values.clone(),
        provenance: Default::default(),
    };
    store.save_consensus(&record).unwrap();
    assert_eq!(store.load_consensus("lesson-x").unwrap(), Some(record.clone()));
    let (entries, orphans) = store.consensus_entries().unwrap();
    assert!(entries.is_empty());
    assert_eq!(orphans, ["lesson-x"]);
}

#[test]
fn ids_cannot_escape_the_store() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let mut s = rating(0);
    for bad in ["../x", "a/b", "", ".hidden", "a b"] {
        s.lesson_id = bad.into();
        assert!(matches!(store.save_rating(&s), Err(StoreError::InvalidId(_))), "{bad:?}");
    }
    assert!(store.load_run("..").is_err());
}

#[test]
fn open_sweeps_only_stale_temp_files() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let fresh = dir.path().join("ratings/.tmp-fresh");
    std::fs::write(&fresh, b"x").unwrap();
    Store::open(dir.path()).unwrap();
    assert!(fresh.exists());
    assert_eq!(store.sweep_temp_files().unwrap(), 1);
    assert!(!fresh.exists());
}

// ---- crash safety

/// Entry point for the child process. A no-op unless the parent set CHILD_ENV.
#[test]
fn crash_child() {
    let Ok(mode) = std::env::var(CHILD_ENV) else { return };
    let root = std::env::var(DIR_ENV).unwrap();
    let store = Store::open(&root).unwrap();
    match mode.as_str() {
        "abort-lesson" => {
            let path = store.lesson_path("run-crash").unwrap();
            let bytes = serialize_lesson(&big_lesson(2));
            let _ = fsutil::write_atomic_with(&path, |w| {
                w.write_all(&bytes.as_bytes()[..bytes.len() / 2])?;
                w.flush()?;
                std::process::abort();
            });
        }
        "abort-rating" => {
            let path = Path::new(&root).join("ratings/lesson-x/coder-a.json");
            let text = serde_json::to_string_pretty(&rating(2)).unwrap();
            let _ = fsutil::write_atomic_with(&path, |w| {
                w.write_all(&text.as_bytes()[..text.len() / 3])?;
                w.flush()?;
                std::process::abort();
            });
        }
        "loop" => {
            let lesson_path = store.lesson_path("run-crash").unwrap();
            for v in 0.. {
                fsutil::write_atomic(&lesson_path, serialize_lesson(&big_lesson(v % 3)).as_bytes()).unwrap();
                store.save_rating(&rating(v)).unwrap();
            }
        }
        other => panic!("unknown child mode {other}"),
    }
}

fn spawn_child(mode: &str, root: &Path) -> std::process::Child {
    Command::new(std::env::current_exe().unwrap())
        .args(["--exact", "crash_child", "--nocapture", "--test-threads=1"])
        .env(CHILD_ENV, mode)
        .env(DIR_ENV, root)
        .stdout(std::process::Stdio::null())
        .stderr(std::process::Stdio::null())
        .spawn()
        .unwrap()
}

fn visible_files(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in walk(dir) {
        let name = e.file_name().unwrap().to_string_lossy().into_owned();
        if !name.starts_with('.') {
            out.push(e);
        }
    }
    out
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

fn assert_store_consistent(root: &Path, lesson_versions: &[String]) {
    for f in visible_files(root) {
        let text = std::fs::read_to_string(&f).unwrap();
        if f.to_string_lossy().ends_with(".lesson.json") {
            assert!(parse_lesson(&text).is_ok(), "partial lesson at {}", f.display());
            assert!(lesson_versions.contains(&text), "unexpected lesson bytes");
        } else if f.extension().is_some_and(|e| e == "json") {
            let s: RatingSession = serde_json::from_str(&text).unwrap_or_else(|e| panic!("partial {}: {e}", f.display()));
            assert!((0..2).any(|v| rating(v).values == s.values));
        }
    }
}

#[test]
fn abort_mid_write_keeps_previous_files() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let old = serialize_lesson(&big_lesson(1));
    let lesson_path = store.lesson_path("run-crash").unwrap();
    fsutil::write_atomic(&lesson_path, old.as_bytes()).unwrap();
    store.save_rating(&rating(1)).unwrap();

    for mode in ["abort-lesson", "abort-rating"] {
        let status = spawn_child(mode, dir.path()).wait().unwrap();
        assert!(!status.success(), "{mode} child should die");
        assert_eq!(std::fs::read_to_string(&lesson_path).unwrap(), old);
        assert_eq!(store.load_ratings("lesson-x").unwrap(), vec![rating(1)]);
        assert_store_consistent(dir.path(), std::slice::from_ref(&old));
    }
    // The dead writers' temp files remain hidden until swept.
    assert!(store.sweep_temp_files().unwrap() >= 2);
    assert!(walk(dir.path()).iter().all(|p| !p.file_name().unwrap().to_string_lossy().starts_with(".tmp-")));
}

#[test]
fn kill_during_write_loop_never_exposes_partial_files() {
    let dir = tempfile::tempdir().unwrap();
    let versions: Vec<String> = (0..3).map(|v| serialize_lesson(&big_lesson(v))).collect();
    Store::open(dir.path()).unwrap();
    for i in 0..12u64 {
        let mut child = spawn_child("loop", dir.path());
        std::thread::sleep(Duration::from_millis(40 + i * 13));
        child.kill().unwrap();
        child.wait().unwrap();
        assert_store_consistent(dir.path(), &versions);
    }
}

#[test]
fn failed_or_panicking_fill_in_process() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("l.lesson.json");
    let old = serialize_lesson(&golden_lesson());
    fsutil::write_atomic(&path, old.as_bytes()).unwrap();

    let err = fsutil::write_atomic_with(&path, |w| {
        w.write_all(b"{\"schema\":")?;
        Err(std::io::Error::other("disk full"))
    });
    assert!(err.is_err());
    let caught = std::panic::catch_unwind(|| {
        let _ = fsutil::write_atomic_with(&path, |w| {
            w.write_all(b"{\"sch")?;
            panic!("writer crashed");
        });
    });
    assert!(caught.is_err());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), old);
    assert_eq!(walk(dir.path()).len(), 1);
}

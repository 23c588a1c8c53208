use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use lessonforge_core::corpus::{
    load_manifest, ChunkConfig, CorpusDocument, CorpusIndex, Embedder, HashEmbedder, OwnedRetriever, Retriever,
    WireEmbedder,
};
use lessonforge_core::evaluation::{
    aggregate_by_strategy, coder_pairs, consensus_counts_by_code, kappa_summary, read_consensus_csv,
    read_ratings_csv, read_scores_csv, resolve_consensus, score_lesson, scores_from_consensus, verify_references,
    write_ratings_csv, AggregateReport, RatingSession, Rubric, Tiebreaks,
};
use lessonforge_core::lesson::{parse_lesson, serialize_lesson, validate_lesson, Lesson, Severity, Verification};
use lessonforge_core::pipeline::backend::{
    LiveBackend, ModelBackend, RecordingBackend, ReplayBackend, ReplayMode, SyntheticBackend,
};
use lessonforge_core::pipeline::{make_plan, ModelConfig, Pipeline, PromptTemplates, RunStatus};
use lessonforge_core::store::Store;
use lessonforge_core::wire::{WireClient, WireConfig};
use lessonforge_core::{canonical, fsutil};

use crate::config::{CliConfig, FileConfig, GlobalOverrides};
use crate::error::CliError;
use crate::{BackendArgs, BackendKind, Cli, Command, EmbedderKind, RateCommand, ReportCommand};

struct Ctx {
    config: CliConfig,
}

impl Ctx {
    fn store(&self) -> Result<Store, CliError> {
        Ok(Store::open(&self.config.store)?)
    }

    fn rubric(&self) -> Result<Rubric, CliError> {
        match &self.config.rubric {
            Some(p) => Rubric::load(p).map_err(|e| CliError::usage("rubric_invalid", e.to_string())),
            None => Ok(Rubric::default()),
        }
    }

    fn templates(&self) -> Result<PromptTemplates, CliError> {
        match &self.config.templates {
            Some(dir) => PromptTemplates::load_dir(dir).map_err(|e| CliError::usage("templates_invalid", e.to_string())),
            None => Ok(PromptTemplates::builtin()),
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.global.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let overrides = GlobalOverrides {
        store: cli.global.store,
        rubric: cli.global.rubric,
        templates: cli.global.templates,
        corpus: cli.global.corpus,
    };
    let ctx = Ctx { config: CliConfig::resolve(overrides, file) };
    match cli.command {
        Command::Ingest { manifest, embedder, embedding_model, embedding_dims } => {
            ingest(&ctx, &manifest, embedder, &embedding_model, embedding_dims)
        }
        Command::Generate { topic, segments, manifest, lesson_out, backend } => {
            generate(&ctx, &topic, segments, manifest.as_deref(), lesson_out.as_deref(), &backend)
        }
        Command::Validate { lesson } => validate(&lesson),
        Command::Rate(RateCommand::Import { file }) => rate_import(&ctx, &file),
        Command::Rate(RateCommand::Export { lesson, out }) => rate_export(&ctx, lesson.as_deref(), out.as_deref()),
        Command::Kappa { lesson, pooled: _ } => kappa(&ctx, lesson.as_deref()),
        Command::Consensus { lesson, tiebreaks } => consensus(&ctx, &lesson, tiebreaks.as_deref()),
        Command::Report(ReportCommand::Aggregate { scores, consensus_set, json }) => {
            report_aggregate(&ctx, scores.as_deref(), consensus_set.as_deref(), json)
        }
        Command::VerifyRefs { lesson, manifest } => verify_refs(&ctx, &lesson, manifest.as_deref()),
        Command::Serve { listen, cors_origin, backend } => serve(&ctx, listen, cors_origin, &backend),
    }
}

fn wire_client() -> Result<WireClient, CliError> {
    let config = WireConfig::from_env().map_err(|e| CliError::usage("missing_credentials", e.to_string()))?;
    Ok(WireClient::new(config))
}

/// Rebuilds the embedder an index was built with from its recorded id.
fn embedder_for(id: &str) -> Result<Box<dyn Embedder>, CliError> {
    let parts: Vec<&str> = id.split(':').collect();
    let bad = || CliError::domain("index_invalid", format!("unrecognized embedder id {id:?}"));
    match parts.as_slice() {
        ["hash-trigram", dims, seed] => {
            let dims = dims.parse().map_err(|_| bad())?;
            let seed = seed.parse().map_err(|_| bad())?;
            Ok(Box::new(HashEmbedder::new(dims, seed)))
        }
        ["wire", model, dims] => Ok(Box::new(WireEmbedder::new(wire_client()?, *model, dims.parse().map_err(|_| bad())?))),
        _ => Err(bad()),
    }
}

fn manifest_docs(path: &Path) -> Result<Vec<CorpusDocument>, CliError> {
    load_manifest(path).map_err(|e| CliError::domain("manifest_invalid", e.to_string()))
}

fn build_index(docs: Vec<CorpusDocument>, embedder: &dyn Embedder) -> Result<CorpusIndex, CliError> {
    let mut index = CorpusIndex::for_embedder(embedder);
    for doc in docs {
        index
            .ingest(doc, embedder, &ChunkConfig::default())
            .map_err(|e| CliError::domain("ingest_failed", e.to_string()))?;
    }
    Ok(index)
}

fn ingest(ctx: &Ctx, manifest: &Path, kind: EmbedderKind, model: &str, dims: usize) -> Result<(), CliError> {
    let docs = manifest_docs(manifest)?;
    let embedder: Box<dyn Embedder> = match kind {
        EmbedderKind::Hash => Box::new(HashEmbedder::default()),
        EmbedderKind::Wire => Box::new(WireEmbedder::new(wire_client()?, model, dims)),
    };
    let index = build_index(docs, embedder.as_ref())?;
    let path = ctx.store()?.save_index(&ctx.config.corpus, &index)?;
    println!(
        "corpus {}: {} documents, {} chunks -> {}",
        ctx.config.corpus,
        index.documents().len(),
        index.chunks().len(),
        path.display()
    );
    Ok(())
}

fn retriever(ctx: &Ctx, store: &Store, manifest: Option<&Path>) -> Result<OwnedRetriever, CliError> {
    match manifest {
        Some(m) => {
            let embedder = HashEmbedder::default();
            let index = build_index(manifest_docs(m)?, &embedder)?;
            Ok(OwnedRetriever { index, embedder: Box::new(embedder) })
        }
        None => {
            let index = store.load_index(&ctx.config.corpus).map_err(|e| {
                CliError::domain("corpus_missing", format!("{e}; run `lessonforge ingest <manifest>` first"))
            })?;
            let embedder = embedder_for(index.embedder_id())?;
            Ok(OwnedRetriever { index, embedder })
        }
    }
}

type Recorder = Arc<RecordingBackend<Arc<dyn ModelBackend>>>;

/// Builds the model backend. The recorder, if any, is returned so its
/// cassette can be saved once the work is done.
fn backend(args: &BackendArgs) -> Result<(Arc<dyn ModelBackend>, Option<Recorder>), CliError> {
    let base: Arc<dyn ModelBackend> = match args.backend {
        BackendKind::Live => Arc::new(LiveBackend::new(wire_client()?)),
        BackendKind::Synthetic => Arc::new(SyntheticBackend::new()),
        BackendKind::Replay => {
            let path = args.cassette.as_ref().ok_or_else(|| CliError::usage("usage", "--backend replay needs --cassette"))?;
            let mode = if args.lenient { ReplayMode::Lenient } else { ReplayMode::Strict };
            Arc::new(
                ReplayBackend::load(path, mode)
                    .map_err(|e| CliError::domain("cassette_invalid", format!("{}: {e}", path.display())))?,
            )
        }
    };
    match &args.record {
        Some(_) => {
            let rec = Arc::new(RecordingBackend::new(base));
            Ok((rec.clone() as Arc<dyn ModelBackend>, Some(rec)))
        }
        None => Ok((base, None)),
    }
}

fn save_cassette(args: &BackendArgs, rec: Option<&Recorder>) -> Result<(), CliError> {
    if let (Some(path), Some(rec)) = (&args.record, rec) {
        rec.cassette()
            .save(path)
            .map_err(|e| CliError::domain("io_error", format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn model_config(ctx: &Ctx, args: &BackendArgs) -> Result<ModelConfig, CliError> {
    let m = ctx.config.model_with(&args.model);
    m.check().map_err(|e| CliError::usage("invalid_model_config", e))?;
    Ok(m)
}

fn generate(
    ctx: &Ctx,
    topic: &str,
    k: i64,
    manifest: Option<&Path>,
    lesson_out: Option<&Path>,
    args: &BackendArgs,
) -> Result<(), CliError> {
    let plan = make_plan(k).map_err(|e| CliError::usage("usage", e.to_string()))?;
    let config = model_config(ctx, args)?;
    let templates = ctx.templates()?;
    let store = ctx.store()?;
    let retriever = retriever(ctx, &store, manifest)?;
    let (backend, recorder) = backend(args)?;

    let id = store.new_run_id();
    let lock = store.lock_run(&id)?;
    let pipeline = Pipeline::new(backend.as_ref(), &retriever, &templates);
    let run = pipeline.run(&id, topic, plan, config);
    store.save_run(&lock, &run)?;
    drop(lock);
    save_cassette(args, recorder.as_ref())?;

    println!("run\t{id}");
    println!("transcripts\t{}", store.transcripts_path(&id)?.display());
    if let Some(lesson) = &run.lesson {
        let path = store.lesson_path(&id)?;
        println!("lesson\t{}\t{}", lesson.id, path.display());
        if let Some(out) = lesson_out {
            fsutil::write_atomic(out, serialize_lesson(lesson).as_bytes())
                .map_err(|e| CliError::domain("io_error", format!("{}: {e}", out.display())))?;
        }
    }
    if let Some(report) = &run.validation {
        for issue in &report.issues {
            println!("issue\t{issue}");
        }
    }
    match &run.status {
        RunStatus::Complete => {
            println!("status\tcomplete");
            Ok(())
        }
        RunStatus::Failed { reason } => {
            println!("status\tfailed");
            Err(CliError::domain("run_failed", reason.clone()))
        }
        RunStatus::Pending => Err(CliError::domain("run_failed", "run did not finish")),
    }
}

fn read_lesson(path: &Path) -> Result<Lesson, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::domain("io_error", format!("{}: {e}", path.display())))?;
    parse_lesson(&text).map_err(|e| CliError::domain("lesson_unparseable", format!("{}: {e}", path.display())))
}

fn validate(path: &Path) -> Result<(), CliError> {
    let lesson = read_lesson(path)?;
    let report = validate_lesson(&lesson);
    for issue in &report.issues {
        println!("{issue}");
    }
    let errors = report.errors().count();
    let warnings = report.issues.iter().filter(|i| i.severity == Severity::Warning).count();
    println!("{errors} error(s), {warnings} warning(s)");
    if errors > 0 {
        return Err(CliError::domain("validation_failed", format!("{errors} error(s) in {}", path.display())));
    }
    Ok(())
}

fn rate_import(ctx: &Ctx, file: &Path) -> Result<(), CliError> {
    let rubric = ctx.rubric()?;
    let f = std::fs::File::open(file).map_err(|e| CliError::domain("io_error", format!("{}: {e}", file.display())))?;
    let mut sessions = read_ratings_csv(f).map_err(|e| CliError::domain("ratings_invalid", e.to_string()))?;
    for s in &mut sessions {
        s.refresh(&rubric).map_err(|e| CliError::domain("ratings_invalid", e.to_string()))?;
    }
    let store = ctx.store()?;
    for s in &sessions {
        store.save_rating(s)?;
        let state = if s.complete { "complete".to_owned() } else { format!("missing {}", s.missing_codes(&rubric).join(",")) };
        println!("{}\t{}\t{}", s.lesson_id, s.coder_id, state);
    }
    println!("imported {} session(s)", sessions.len());
    Ok(())
}

fn rate_export(ctx: &Ctx, lesson: Option<&str>, out: Option<&Path>) -> Result<(), CliError> {
    let store = ctx.store()?;
    let sessions = match lesson {
        Some(l) => store.load_ratings(l)?,
        None => store.all_ratings()?,
    };
    let mut buf = Vec::new();
    write_ratings_csv(&sessions, &mut buf).map_err(|e| CliError::domain("io_error", e.to_string()))?;
    match out {
        Some(p) => fsutil::write_atomic(p, &buf).map_err(|e| CliError::domain("io_error", format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(&buf).map_err(|e| CliError::domain("io_error", e.to_string())),
    }
}

fn stored_sessions(ctx: &Ctx, store: &Store, lesson: Option<&str>) -> Result<Vec<RatingSession>, CliError> {
    let rubric = ctx.rubric()?;
    let mut sessions = match lesson {
        Some(l) => store.load_ratings(l)?,
        None => store.all_ratings()?,
    };
    for s in &mut sessions {
        s.refresh(&rubric).map_err(|e| CliError::domain("ratings_invalid", e.to_string()))?;
    }
    Ok(sessions)
}

fn kappa(ctx: &Ctx, lesson: Option<&str>) -> Result<(), CliError> {
    let store = ctx.store()?;
    let sessions = stored_sessions(ctx, &store, lesson)?;
    let s = kappa_summary(&sessions, lesson).map_err(|e| CliError::domain("kappa_unavailable", e.to_string()))?;
    println!("{:.4}", s.kappa);
    println!(
        "n={} a={} b={} c={} d={} lessons={}",
        s.table.n(),
        s.table.a,
        s.table.b,
        s.table.c,
        s.table.d,
        s.lessons.join(",")
    );
    Ok(())
}

fn consensus(ctx: &Ctx, lesson: &str, tiebreaks: Option<&Path>) -> Result<(), CliError> {
    let rubric = ctx.rubric()?;
    let store = ctx.store()?;
    let tiebreaks: Tiebreaks = match tiebreaks {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::domain("io_error", format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::usage("tiebreaks_invalid", format!("{}: {e}", p.display())))?
        }
        None => Tiebreaks::default(),
    };
    let sessions = stored_sessions(ctx, &store, Some(lesson))?;
    let pairs = coder_pairs(&sessions, Some(lesson)).map_err(|e| CliError::domain("consensus_rejected", e.to_string()))?;
    let (a, b) = pairs[0];
    let record = resolve_consensus(&rubric, a, b, &tiebreaks).map_err(|e| CliError::domain("consensus_rejected", e.to_string()))?;
    store.save_consensus(&record)?;
    let score = score_lesson(&rubric, &record).expect("consensus covers the rubric");
    println!("{lesson}\t{score}/{}", rubric.len());
    Ok(())
}

fn open_csv(path: &Path) -> Result<std::fs::File, CliError> {
    std::fs::File::open(path).map_err(|e| CliError::domain("io_error", format!("{}: {e}", path.display())))
}

fn report_aggregate(ctx: &Ctx, scores: Option<&Path>, consensus_set: Option<&Path>, json: bool) -> Result<(), CliError> {
    let rubric = ctx.rubric()?;
    let agg_err = |e: lessonforge_core::evaluation::AggregateError| CliError::domain("aggregate_failed", e.to_string());
    let store = ctx.store()?;
    let entries = match consensus_set {
        Some(p) => Some(read_consensus_csv(open_csv(p)?).map_err(agg_err)?),
        None if scores.is_none() => {
            let (entries, skipped) = store.consensus_entries()?;
            for s in skipped {
                eprintln!("skipping consensus for {s}: no stored run produced it");
            }
            Some(entries)
        }
        None => None,
    };
    let max = rubric.len() as u32;
    let score_rows = match (scores, &entries) {
        (Some(p), _) => Some(read_scores_csv(open_csv(p)?).map_err(agg_err)?),
        (None, Some(e)) if !e.is_empty() => Some(scores_from_consensus(&rubric, e).map_err(agg_err)?),
        _ => None,
    };
    let report = AggregateReport {
        scores: score_rows.map(|s| aggregate_by_strategy(&s, max)).transpose().map_err(agg_err)?,
        code_counts: match &entries {
            Some(e) if !e.is_empty() => Some(consensus_counts_by_code(&rubric, e).map_err(agg_err)?),
            _ => None,
        },
    };
    if report.scores.is_none() && report.code_counts.is_none() {
        return Err(CliError::domain("aggregate_failed", "nothing to aggregate: no consensus records or scores"));
    }
    let text = report.render_text();
    store.save_report("aggregate", &report, &text)?;
    if json {
        print!("{}", canonical::to_canonical_string(&report).expect("report serializes"));
    } else {
        print!("{text}");
    }
    Ok(())
}

fn verify_refs(ctx: &Ctx, lesson: &str, manifest: Option<&Path>) -> Result<(), CliError> {
    let store = ctx.store()?;
    let lesson = if Path::new(lesson).is_file() {
        read_lesson(Path::new(lesson))?
    } else {
        store.find_lesson(lesson)?.1
    };
    let docs = match manifest {
        Some(m) => manifest_docs(m)?,
        None => store
            .load_index(&ctx.config.corpus)
            .map_err(|e| CliError::domain("corpus_missing", e.to_string()))?
            .documents()
            .to_vec(),
    };
    let conclusion = lesson
        .conclusion()
        .ok_or_else(|| CliError::domain("no_conclusion", format!("lesson {} has no conclusion", lesson.id)))?;
    let verdicts = verify_references(conclusion, &docs);
    let mut unverified = 0;
    for v in &verdicts {
        let label = match v.verification {
            Verification::Verified => "verified",
            _ => {
                unverified += 1;
                "unverified"
            }
        };
        println!(
            "{label}\t{:.3}\t{}\t{}",
            v.evidence.score,
            v.evidence.doc_id.as_deref().unwrap_or("-"),
            v.reference.raw_citation
        );
    }
    if unverified > 0 {
        return Err(CliError::domain(
            "unverified_references",
            format!("{unverified} of {} reference(s) unverified", verdicts.len()),
        ));
    }
    Ok(())
}

fn serve(ctx: &Ctx, listen: Option<String>, cors_origin: Option<String>, args: &BackendArgs) -> Result<(), CliError> {
    let listen = listen.unwrap_or_else(|| ctx.config.listen.clone());
    let addr: std::net::SocketAddr = listen
        .parse()
        .map_err(|e| CliError::usage("usage", format!("invalid listen address {listen:?}: {e}")))?;
    let store = ctx.store()?;
    let retriever: Arc<dyn Retriever> = Arc::new(retriever(ctx, &store, None)?);
    let (backend, _) = backend(&BackendArgs { record: None, ..args.clone() })?;
    let state = Arc::new(lessonforge_server::AppState::new(
        store,
        backend,
        retriever,
        ctx.templates()?,
        ctx.rubric()?,
        model_config(ctx, args)?,
    ));
    let options = lessonforge_server::ServerOptions { cors_origin: cors_origin.or_else(|| ctx.config.cors_origin.clone()) };
    let _ = tracing_subscriber::fmt().with_writer(std::io::stderr).try_init();
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::domain("io_error", e.to_string()))?;
    rt.block_on(lessonforge_server::serve(state, addr, options))
        .map_err(|e| CliError::domain("serve_failed", e.to_string()))
}

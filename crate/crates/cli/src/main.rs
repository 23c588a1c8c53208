//! `lessonforge`: ingest a research corpus, generate segmented lessons, and
//! run the rating workflow from the command line.
//!
//! Exit status is 0 on success, 1 when the requested work fails on its own
//! terms (a failed run, a lesson with errors, an unverified reference), and
//! 2 for usage problems. Failures also print one JSON line to stderr.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::ModelFlags;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "lessonforge", version, about = "Segmented, retrieval-grounded tutor-training lesson generation")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Store directory.
    #[arg(long, global = true, env = "LESSONFORGE_STORE")]
    store: Option<PathBuf>,
    /// TOML config file.
    #[arg(long, global = true, env = "LESSONFORGE_CONFIG")]
    config: Option<PathBuf>,
    /// Rubric CSV (id,section,name,description); the built-in 17 codes otherwise.
    #[arg(long, global = true, env = "LESSONFORGE_RUBRIC")]
    rubric: Option<PathBuf>,
    /// Directory of prompt templates; the built-in set otherwise.
    #[arg(long, global = true, env = "LESSONFORGE_TEMPLATES")]
    templates: Option<PathBuf>,
    /// Name of the stored corpus to use.
    #[arg(long, global = true, env = "LESSONFORGE_CORPUS")]
    corpus: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    /// HTTPS chat completions (needs LESSONFORGE_API_KEY).
    Live,
    /// Recorded responses from a cassette file.
    Replay,
    /// Offline generator producing schema-valid placeholder lessons.
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EmbedderKind {
    Hash,
    Wire,
}

#[derive(Debug, Clone, Args)]
struct BackendArgs {
    #[arg(long, value_enum, default_value = "synthetic")]
    backend: BackendKind,
    /// Cassette to replay from.
    #[arg(long, required_if_eq("backend", "replay"))]
    cassette: Option<PathBuf>,
    /// Serve the next unused recording when a request has no exact match.
    #[arg(long)]
    lenient: bool,
    /// Record every exchange to this cassette file.
    #[arg(long)]
    record: Option<PathBuf>,
    #[command(flatten)]
    model: ModelFlags,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Chunk, embed and index the documents listed in a corpus manifest.
    Ingest {
        /// TOML manifest listing documents and their bibliographies.
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "hash")]
        embedder: EmbedderKind,
        /// Embedding model for `--embedder wire`.
        #[arg(long, default_value = "text-embedding-3-small")]
        embedding_model: String,
        /// Vector size for either embedder.
        #[arg(long, default_value_t = 256)]
        embedding_dims: usize,
    },
    /// Generate a lesson with a k-segment plan.
    Generate {
        /// Lesson topic, e.g. "Turning on Cameras".
        #[arg(long)]
        topic: String,
        /// Number of prompt segments, 1 to 5.
        #[arg(long, value_parser = clap::value_parser!(i64).range(1..=5))]
        segments: i64,
        /// Build the retrieval index from this manifest instead of the stored corpus.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Also copy the lesson file here.
        #[arg(long)]
        lesson_out: Option<PathBuf>,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Check a lesson file against the structural rules.
    Validate { lesson: PathBuf },
    /// Import or export rating sessions as CSV (coder,lesson,code,value).
    #[command(subcommand)]
    Rate(RateCommand),
    /// Cohen's kappa between the two coders of one lesson, or pooled over all lessons.
    Kappa {
        #[arg(long, conflicts_with = "pooled", required_unless_present = "pooled")]
        lesson: Option<String>,
        #[arg(long)]
        pooled: bool,
    },
    /// Merge two coders' sessions using third-reviewer tiebreaks.
    Consensus {
        #[arg(long)]
        lesson: String,
        /// JSON file: {"reviewer": "...", "values": {"code": "positive"|"negative"}}.
        #[arg(long)]
        tiebreaks: Option<PathBuf>,
    },
    /// Strategy-level reports.
    #[command(subcommand)]
    Report(ReportCommand),
    /// Check a lesson's references against the corpus.
    VerifyRefs {
        /// Stored lesson id, or a path to a lesson file.
        #[arg(long)]
        lesson: String,
        /// Use this manifest's metadata instead of the stored corpus.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, env = "LESSONFORGE_LISTEN")]
        listen: Option<String>,
        #[arg(long, env = "LESSONFORGE_CORS_ORIGIN")]
        cors_origin: Option<String>,
        #[command(flatten)]
        backend: BackendArgs,
    },
}

#[derive(Debug, Subcommand)]
enum RateCommand {
    Import { file: PathBuf },
    Export {
        #[arg(long)]
        lesson: Option<String>,
        /// Output file; stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum ReportCommand {
    /// Per-lesson totals with strategy averages, and per-code positive counts.
    Aggregate {
        /// CSV of lesson,strategy,total.
        #[arg(long)]
        scores: Option<PathBuf>,
        /// CSV of lesson,strategy,code,value consensus ratings.
        #[arg(long)]
        consensus_set: Option<PathBuf>,
        /// Print JSON instead of the text tables.
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            let err = CliError::usage("usage", e.kind().to_string());
            eprintln!("{}", err.json_line());
            return ExitCode::from(err.exit);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.json_line());
            ExitCode::from(e.exit)
        }
    }
}

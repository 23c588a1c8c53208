//! Rubric-based rating of generated lessons: coder sessions, agreement,
//! adjudicated consensus, strategy-level reports, and reference checks.

mod aggregate;
mod consensus;
mod kappa;
mod rating;
mod references;
mod rubric;

pub use aggregate::{
    aggregate_by_strategy, average_cents, consensus_counts_by_code, format_cents, read_consensus_csv,
    read_scores_csv, scores_from_consensus, strategy_label, AggregateError, AggregateReport, CodeCell,
    CodeCountTable, CodeRow, ConsensusEntry, LessonScore, ScoreTable, StrategyColumn,
};
pub use consensus::{
    disagreements, resolve_consensus, score_lesson, ConsensusError, ConsensusRecord, Provenance, Tiebreaks,
};
pub use kappa::{
    cohens_kappa, coder_pairs, contingency, kappa_summary, pooled_contingency, ContingencyTable, KappaError,
    KappaSummary,
};
pub use rating::{read_ratings_csv, write_ratings_csv, RatingCsvError, RatingError, RatingSession, RatingValue, RatingValues};
pub use references::{verify_reference, verify_references, MatchEvidence, ReferenceVerdict, TITLE_THRESHOLD, YEAR_TOLERANCE};
pub use rubric::{Rubric, RubricCode, RubricError};

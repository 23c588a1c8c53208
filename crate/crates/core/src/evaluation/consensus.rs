use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::rating::{RatingSession, RatingValue, RatingValues};
use super::rubric::Rubric;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Agreed,
    Adjudicated { reviewer: String },
}

/// Third-reviewer decisions for the codes two coders disagreed on.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tiebreaks {
    pub reviewer: String,
    #[serde(default)]
    pub values: RatingValues,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusRecord {
    pub lesson_id: String,
    pub values: RatingValues,
    /// Empty for records imported without adjudication history.
    #[serde(default)]
    pub provenance: BTreeMap<String, Provenance>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConsensusError {
    #[error("sessions are for different lessons: {0} and {1}")]
    LessonMismatch(String, String),
    #[error("both sessions are from coder {0}")]
    SameCoder(String),
    #[error("session from {coder} is incomplete; missing: {}", missing.join(", "))]
    Incomplete { coder: String, missing: Vec<String> },
    #[error("session from {coder} rates codes outside the rubric: {}", unknown.join(", "))]
    UnknownCodes { coder: String, unknown: Vec<String> },
    #[error("disagreements without a tiebreak: {}", .0.join(", "))]
    MissingTiebreaks(Vec<String>),
    #[error("tiebreaks given for codes the coders agree on: {}", .0.join(", "))]
    SuperfluousTiebreaks(Vec<String>),
    #[error("tiebreaks need a reviewer id")]
    NoReviewer,
}

impl ConsensusRecord {
    pub fn positives(&self) -> usize {
        self.values.values().filter(|v| v.is_positive()).count()
    }

    pub fn get(&self, code: &str) -> Option<RatingValue> {
        self.values.get(code).copied()
    }
}

fn check_session(s: &RatingSession, rubric: &Rubric) -> Result<(), ConsensusError> {
    let known = rubric.id_set();
    let unknown: Vec<String> = s.values.keys().filter(|k| !known.contains(k.as_str())).cloned().collect();
    if !unknown.is_empty() {
        return Err(ConsensusError::UnknownCodes { coder: s.coder_id.clone(), unknown });
    }
    let missing = s.missing_codes(rubric);
    if !missing.is_empty() {
        return Err(ConsensusError::Incomplete { coder: s.coder_id.clone(), missing });
    }
    Ok(())
}

/// Codes on which the two sessions disagree, in key order.
pub fn disagreements(a: &RatingSession, b: &RatingSession) -> Vec<String> {
    a.values
        .iter()
        .filter(|(k, v)| b.values.get(*k).is_some_and(|w| w != *v))
        .map(|(k, _)| k.clone())
        .collect()
}

/// Merges two complete sessions. Agreed codes pass through; each disagreement
/// takes its tiebreak value. Tiebreaks must cover exactly the disagreements.
pub fn resolve_consensus(
    rubric: &Rubric,
    a: &RatingSession,
    b: &RatingSession,
    tiebreaks: &Tiebreaks,
) -> Result<ConsensusRecord, ConsensusError> {
    if a.lesson_id != b.lesson_id {
        return Err(ConsensusError::LessonMismatch(a.lesson_id.clone(), b.lesson_id.clone()));
    }
    if a.coder_id == b.coder_id {
        return Err(ConsensusError::SameCoder(a.coder_id.clone()));
    }
    check_session(a, rubric)?;
    check_session(b, rubric)?;
    let split = disagreements(a, b);
    let missing: Vec<String> = split.iter().filter(|k| !tiebreaks.values.contains_key(*k)).cloned().collect();
    if !missing.is_empty() {
        return Err(ConsensusError::MissingTiebreaks(missing));
    }
    let extra: Vec<String> = tiebreaks.values.keys().filter(|k| !split.contains(k)).cloned().collect();
    if !extra.is_empty() {
        return Err(ConsensusError::SuperfluousTiebreaks(extra));
    }
    if !split.is_empty() && tiebreaks.reviewer.trim().is_empty() {
        return Err(ConsensusError::NoReviewer);
    }
    let mut values = RatingValues::new();
    let mut provenance = BTreeMap::new();
    for (code, v) in &a.values {
        match tiebreaks.values.get(code) {
            Some(t) => {
                values.insert(code.clone(), *t);
                provenance.insert(code.clone(), Provenance::Adjudicated { reviewer: tiebreaks.reviewer.clone() });
            }
            None => {
                values.insert(code.clone(), *v);
                provenance.insert(code.clone(), Provenance::Agreed);
            }
        }
    }
    Ok(ConsensusRecord { lesson_id: a.lesson_id.clone(), values, provenance })
}

/// Number of positive codes. Errors list any rubric codes the record lacks.
pub fn score_lesson(rubric: &Rubric, consensus: &ConsensusRecord) -> Result<u32, Vec<String>> {
    let missing: Vec<String> = rubric.ids().filter(|id| !consensus.values.contains_key(*id)).map(str::to_owned).collect();
    if !missing.is_empty() {
        return Err(missing);
    }
    Ok(rubric.ids().filter(|id| consensus.values[*id].is_positive()).count() as u32)
}

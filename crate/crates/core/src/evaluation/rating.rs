//! Per-coder rating sessions and their CSV exchange format
//! (`coder,lesson,code,value`).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::rubric::Rubric;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatingValue {
    Positive,
    Negative,
}

impl RatingValue {
    pub fn flipped(self) -> RatingValue {
        match self {
            RatingValue::Positive => RatingValue::Negative,
            RatingValue::Negative => RatingValue::Positive,
        }
    }

    pub fn is_positive(self) -> bool {
        self == RatingValue::Positive
    }
}

impl fmt::Display for RatingValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RatingValue::Positive => "positive",
            RatingValue::Negative => "negative",
        })
    }
}

impl FromStr for RatingValue {
    type Err = String;

    fn from_str(s: &str) -> Result<RatingValue, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" | "pos" | "1" | "+" | "yes" | "y" => Ok(RatingValue::Positive),
            "negative" | "neg" | "0" | "-" | "no" | "n" => Ok(RatingValue::Negative),
            other => Err(format!("not a rating value: {other:?}")),
        }
    }
}

pub type RatingValues = BTreeMap<String, RatingValue>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RatingError {
    #[error("rating session {coder}/{lesson} is missing codes: {}", missing.join(", "))]
    MissingCodes {
        coder: String,
        lesson: String,
        missing: Vec<String>,
    },
    #[error("rating session {coder}/{lesson} has codes not in the rubric: {}", unknown.join(", "))]
    UnknownCodes {
        coder: String,
        lesson: String,
        unknown: Vec<String>,
    },
    #[error("coder id is empty")]
    EmptyCoder,
    #[error("lesson id is empty")]
    EmptyLesson,
}

/// One coder's binary ratings for one lesson.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingSession {
    pub coder_id: String,
    pub lesson_id: String,
    pub values: RatingValues,
    /// True once every rubric code has a value.
    #[serde(default)]
    pub complete: bool,
}

impl RatingSession {
    pub fn new(coder_id: impl Into<String>, lesson_id: impl Into<String>, values: RatingValues) -> RatingSession {
        RatingSession {
            coder_id: coder_id.into(),
            lesson_id: lesson_id.into(),
            values,
            complete: false,
        }
    }

    /// Codes in the rubric that this session has not rated, in rubric order.
    pub fn missing_codes(&self, rubric: &Rubric) -> Vec<String> {
        rubric.ids().filter(|id| !self.values.contains_key(*id)).map(str::to_owned).collect()
    }

    /// Checks ids and codes against the rubric and sets `complete`.
    /// Unknown codes are always an error; missing codes are not.
    pub fn refresh(&mut self, rubric: &Rubric) -> Result<(), RatingError> {
        if self.coder_id.trim().is_empty() {
            return Err(RatingError::EmptyCoder);
        }
        if self.lesson_id.trim().is_empty() {
            return Err(RatingError::EmptyLesson);
        }
        let known = rubric.id_set();
        let unknown: Vec<String> = self.values.keys().filter(|k| !known.contains(k.as_str())).cloned().collect();
        if !unknown.is_empty() {
            return Err(RatingError::UnknownCodes {
                coder: self.coder_id.clone(),
                lesson: self.lesson_id.clone(),
                unknown,
            });
        }
        self.complete = self.missing_codes(rubric).is_empty();
        Ok(())
    }

    /// Like [`refresh`](Self::refresh) but also requires every code.
    pub fn require_complete(&mut self, rubric: &Rubric) -> Result<(), RatingError> {
        self.refresh(rubric)?;
        if !self.complete {
            return Err(RatingError::MissingCodes {
                coder: self.coder_id.clone(),
                lesson: self.lesson_id.clone(),
                missing: self.missing_codes(rubric),
            });
        }
        Ok(())
    }

    pub fn positives(&self) -> usize {
        self.values.values().filter(|v| v.is_positive()).count()
    }
}

#[derive(Debug, Error)]
pub enum RatingCsvError {
    #[error("ratings csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("ratings csv line {line}: {message}")]
    Row { line: u64, message: String },
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    coder: String,
    lesson: String,
    code: String,
    value: String,
}

/// Reads `coder,lesson,code,value` rows into sessions keyed by (lesson, coder).
/// Sessions come back sorted by lesson then coder; `complete` is not set.
pub fn read_ratings_csv(reader: impl std::io::Read) -> Result<Vec<RatingSession>, RatingCsvError> {
    let mut sessions: BTreeMap<(String, String), RatingValues> = BTreeMap::new();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record)? {
        let line = record.position().map_or(0, |p| p.line());
        let row: CsvRow = record.deserialize(Some(&headers))?;
        let value: RatingValue = row
            .value
            .parse()
            .map_err(|message| RatingCsvError::Row { line, message })?;
        let entry = sessions.entry((row.lesson.clone(), row.coder.clone())).or_default();
        if let Some(prev) = entry.insert(row.code.clone(), value) {
            if prev != value {
                return Err(RatingCsvError::Row {
                    line,
                    message: format!("conflicting values for {}/{}/{}", row.coder, row.lesson, row.code),
                });
            }
        }
    }
    Ok(sessions
        .into_iter()
        .map(|((lesson, coder), values)| RatingSession::new(coder, lesson, values))
        .collect())
}

/// Writes sessions as CSV rows, ordered by lesson, coder, then code id.
pub fn write_ratings_csv(sessions: &[RatingSession], writer: impl std::io::Write) -> Result<(), RatingCsvError> {
    let mut sorted: Vec<&RatingSession> = sessions.iter().collect();
    sorted.sort_by(|a, b| (&a.lesson_id, &a.coder_id).cmp(&(&b.lesson_id, &b.coder_id)));
    let mut w = csv::Writer::from_writer(writer);
    for s in sorted {
        for (code, value) in &s.values {
            w.serialize(CsvRow {
                coder: s.coder_id.clone(),
                lesson: s.lesson_id.clone(),
                code: code.clone(),
                value: value.to_string(),
            })?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

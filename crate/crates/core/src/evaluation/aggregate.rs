//! Strategy-level aggregation: per-lesson totals with averages, and per-code
//! positive counts. Both render as JSON and as aligned text.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::consensus::{score_lesson, ConsensusRecord};
use super::rating::{RatingValue, RatingValues};
use super::rubric::Rubric;

/// Total positive codes for one lesson generated with strategy `strategy`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LessonScore {
    pub lesson: String,
    pub strategy: u8,
    pub total: u32,
}

/// A consensus record tagged with its row key and strategy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusEntry {
    pub lesson: String,
    pub strategy: u8,
    pub record: ConsensusRecord,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AggregateError {
    #[error("no scores to aggregate")]
    Empty,
    #[error("strategy {0} is outside 1..5")]
    BadStrategy(u8),
    #[error("duplicate score for lesson {lesson}, strategy {strategy}")]
    Duplicate { lesson: String, strategy: u8 },
    #[error("total {total} for lesson {lesson} exceeds the maximum {max}")]
    TotalTooLarge { lesson: String, total: u32, max: u32 },
    #[error("incomplete grid; missing cells: {}", .0.join(", "))]
    MissingCells(Vec<String>),
    #[error("consensus for {lesson} (strategy {strategy}) lacks codes: {}", missing.join(", "))]
    IncompleteConsensus { lesson: String, strategy: u8, missing: Vec<String> },
    #[error("csv: {0}")]
    Csv(String),
}

pub fn strategy_label(k: u8) -> String {
    match k {
        1 => "One Seg.".into(),
        2 => "Two Seg.".into(),
        3 => "Three Seg.".into(),
        4 => "Four Seg.".into(),
        5 => "Five Seg.".into(),
        _ => format!("{k} Seg."),
    }
}

/// Mean of `totals` in hundredths, rounded half-up. Exact integer arithmetic.
pub fn average_cents(totals: &[u32]) -> u64 {
    let n = totals.len() as u64;
    if n == 0 {
        return 0;
    }
    let sum: u64 = totals.iter().map(|&t| u64::from(t)).sum();
    (sum * 200 + n) / (2 * n)
}

pub fn format_cents(cents: u64) -> String {
    format!("{}.{:02}", cents / 100, cents % 100)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyColumn {
    pub strategy: u8,
    pub label: String,
    /// Aligned with [`ScoreTable::lessons`].
    pub totals: Vec<u32>,
    pub average: String,
    pub average_value: f64,
}

/// Lessons down, strategies across.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub lessons: Vec<String>,
    pub columns: Vec<StrategyColumn>,
}

/// Averages each strategy's totals over lessons. Every strategy present must
/// have a score for every lesson present; lesson rows keep first-seen order.
pub fn aggregate_by_strategy(scores: &[LessonScore], max_total: u32) -> Result<ScoreTable, AggregateError> {
    if scores.is_empty() {
        return Err(AggregateError::Empty);
    }
    let mut lessons: Vec<String> = Vec::new();
    let mut cells: BTreeMap<(u8, String), u32> = BTreeMap::new();
    for s in scores {
        if !(1..=5).contains(&s.strategy) {
            return Err(AggregateError::BadStrategy(s.strategy));
        }
        if s.total > max_total {
            return Err(AggregateError::TotalTooLarge { lesson: s.lesson.clone(), total: s.total, max: max_total });
        }
        if !lessons.contains(&s.lesson) {
            lessons.push(s.lesson.clone());
        }
        if cells.insert((s.strategy, s.lesson.clone()), s.total).is_some() {
            return Err(AggregateError::Duplicate { lesson: s.lesson.clone(), strategy: s.strategy });
        }
    }
    let strategies: BTreeSet<u8> = scores.iter().map(|s| s.strategy).collect();
    let missing: Vec<String> = strategies
        .iter()
        .flat_map(|k| lessons.iter().map(move |l| (*k, l)))
        .filter(|(k, l)| !cells.contains_key(&(*k, (*l).clone())))
        .map(|(k, l)| format!("{l}@{k}"))
        .collect();
    if !missing.is_empty() {
        return Err(AggregateError::MissingCells(missing));
    }
    let columns = strategies
        .into_iter()
        .map(|k| {
            let totals: Vec<u32> = lessons.iter().map(|l| cells[&(k, l.clone())]).collect();
            let cents = average_cents(&totals);
            StrategyColumn {
                strategy: k,
                label: strategy_label(k),
                totals,
                average: format_cents(cents),
                average_value: cents as f64 / 100.0,
            }
        })
        .collect();
    Ok(ScoreTable { lessons, columns })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeCell {
    pub strategy: u8,
    pub positive: u32,
    pub lessons: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeRow {
    pub code: String,
    pub label: String,
    pub cells: Vec<CodeCell>,
}

impl CodeRow {
    pub fn cell(&self, strategy: u8) -> Option<&CodeCell> {
        self.cells.iter().find(|c| c.strategy == strategy)
    }
}

/// Rubric codes down, strategies across; each cell counts positive lessons.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeCountTable {
    pub strategies: Vec<u8>,
    pub rows: Vec<CodeRow>,
}

impl CodeCountTable {
    pub fn row(&self, code: &str) -> Option<&CodeRow> {
        self.rows.iter().find(|r| r.code == code)
    }
}

fn check_entries(rubric: &Rubric, entries: &[ConsensusEntry]) -> Result<(), AggregateError> {
    if entries.is_empty() {
        return Err(AggregateError::Empty);
    }
    let mut seen = BTreeSet::new();
    for e in entries {
        if !(1..=5).contains(&e.strategy) {
            return Err(AggregateError::BadStrategy(e.strategy));
        }
        if !seen.insert((e.strategy, e.lesson.as_str())) {
            return Err(AggregateError::Duplicate { lesson: e.lesson.clone(), strategy: e.strategy });
        }
        score_lesson(rubric, &e.record).map_err(|missing| AggregateError::IncompleteConsensus {
            lesson: e.lesson.clone(),
            strategy: e.strategy,
            missing,
        })?;
    }
    Ok(())
}

pub fn consensus_counts_by_code(rubric: &Rubric, entries: &[ConsensusEntry]) -> Result<CodeCountTable, AggregateError> {
    check_entries(rubric, entries)?;
    let strategies: Vec<u8> = entries.iter().map(|e| e.strategy).collect::<BTreeSet<_>>().into_iter().collect();
    let rows = rubric
        .codes
        .iter()
        .map(|code| CodeRow {
            code: code.id.clone(),
            label: code.display_name(),
            cells: strategies
                .iter()
                .map(|&k| {
                    let mine: Vec<&ConsensusEntry> = entries.iter().filter(|e| e.strategy == k).collect();
                    CodeCell {
                        strategy: k,
                        positive: mine.iter().filter(|e| e.record.values[&code.id].is_positive()).count() as u32,
                        lessons: mine.len() as u32,
                    }
                })
                .collect(),
        })
        .collect();
    Ok(CodeCountTable { strategies, rows })
}

/// Per-lesson totals derived from consensus records.
pub fn scores_from_consensus(rubric: &Rubric, entries: &[ConsensusEntry]) -> Result<Vec<LessonScore>, AggregateError> {
    check_entries(rubric, entries)?;
    Ok(entries
        .iter()
        .map(|e| LessonScore {
            lesson: e.lesson.clone(),
            strategy: e.strategy,
            total: score_lesson(rubric, &e.record).expect("checked above"),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scores: Option<ScoreTable>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub code_counts: Option<CodeCountTable>,
}

fn write_table(out: &mut String, rows: &[Vec<String>]) {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|i| rows.iter().filter_map(|r| r.get(i)).map(|c| c.chars().count()).max().unwrap_or(0))
        .collect();
    for r in rows {
        let mut line = String::new();
        for (i, cell) in r.iter().enumerate() {
            if i == 0 {
                let _ = write!(line, "{cell:<w$}", w = widths[0]);
            } else {
                let _ = write!(line, "  {cell:>w$}", w = widths[i]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
}

impl AggregateReport {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        if let Some(t) = &self.scores {
            let mut rows = vec![std::iter::once("Lesson".to_owned()).chain(t.columns.iter().map(|c| c.label.clone())).collect()];
            for (i, l) in t.lessons.iter().enumerate() {
                rows.push(std::iter::once(l.clone()).chain(t.columns.iter().map(|c| c.totals[i].to_string())).collect());
            }
            rows.push(std::iter::once("Average".to_owned()).chain(t.columns.iter().map(|c| c.average.clone())).collect());
            write_table(&mut out, &rows);
        }
        if let Some(t) = &self.code_counts {
            if !out.is_empty() {
                out.push('\n');
            }
            let mut rows = vec![std::iter::once("Code".to_owned()).chain(t.strategies.iter().map(|k| strategy_label(*k))).collect()];
            for r in &t.rows {
                rows.push(
                    std::iter::once(r.label.clone())
                        .chain(r.cells.iter().map(|c| format!("{}/{}", c.positive, c.lessons)))
                        .collect(),
                );
            }
            write_table(&mut out, &rows);
        }
        out
    }
}

#[derive(Debug, Deserialize)]
struct ScoreRow {
    lesson: String,
    strategy: u8,
    total: u32,
}

/// Reads `lesson,strategy,total` rows.
pub fn read_scores_csv(reader: impl std::io::Read) -> Result<Vec<LessonScore>, AggregateError> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader)
        .deserialize::<ScoreRow>()
        .map(|r| {
            r.map(|r| LessonScore { lesson: r.lesson, strategy: r.strategy, total: r.total })
                .map_err(|e| AggregateError::Csv(e.to_string()))
        })
        .collect()
}

#[derive(Debug, Deserialize)]
struct ConsensusRow {
    lesson: String,
    strategy: u8,
    code: String,
    value: String,
}

/// Reads `lesson,strategy,code,value` rows into consensus entries, keeping
/// first-seen (lesson, strategy) order.
pub fn read_consensus_csv(reader: impl std::io::Read) -> Result<Vec<ConsensusEntry>, AggregateError> {
    let mut order: Vec<(String, u8)> = Vec::new();
    let mut values: BTreeMap<(String, u8), RatingValues> = BTreeMap::new();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    for row in rdr.deserialize::<ConsensusRow>() {
        let row = row.map_err(|e| AggregateError::Csv(e.to_string()))?;
        let v: RatingValue = row.value.parse().map_err(AggregateError::Csv)?;
        let key = (row.lesson, row.strategy);
        if !values.contains_key(&key) {
            order.push(key.clone());
        }
        values.entry(key).or_default().insert(row.code, v);
    }
    Ok(order
        .into_iter()
        .map(|key| {
            let v = values.remove(&key).expect("key recorded");
            ConsensusEntry {
                record: ConsensusRecord { lesson_id: key.0.clone(), values: v, provenance: BTreeMap::new() },
                lesson: key.0,
                strategy: key.1,
            }
        })
        .collect())
}

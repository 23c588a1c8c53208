use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lesson::SectionKind;

const DEFAULT_RUBRIC_CSV: &str = include_str!("../../data/rubric.csv");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RubricCode {
    pub id: String,
    pub section: SectionKind,
    pub name: String,
    pub description: String,
}

impl RubricCode {
    /// `Section / Name`, e.g. `Instruction / Pedagogy Grounded`.
    pub fn display_name(&self) -> String {
        format!("{} / {}", self.section.title(), self.name)
    }
}

#[derive(Debug, Error)]
pub enum RubricError {
    #[error("rubric file: {0}")]
    Io(#[from] std::io::Error),
    #[error("rubric csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("rubric row {row}: unknown section {section:?}")]
    UnknownSection { row: usize, section: String },
    #[error("rubric code {0:?} is defined twice")]
    DuplicateCode(String),
    #[error("rubric has no codes")]
    Empty,
}

#[derive(Debug, Deserialize)]
struct Row {
    id: String,
    section: String,
    name: String,
    description: String,
}

/// Ordered set of binary quality codes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rubric {
    pub codes: Vec<RubricCode>,
}

impl Default for Rubric {
    /// The 17-code rubric compiled into the crate.
    fn default() -> Rubric {
        Rubric::from_csv(DEFAULT_RUBRIC_CSV.as_bytes()).expect("builtin rubric is valid")
    }
}

impl Rubric {
    pub fn from_csv(reader: impl std::io::Read) -> Result<Rubric, RubricError> {
        let mut codes: Vec<RubricCode> = Vec::new();
        for (i, row) in csv::Reader::from_reader(reader).deserialize::<Row>().enumerate() {
            let row = row?;
            let section = SectionKind::from_wire(row.section.trim()).ok_or_else(|| RubricError::UnknownSection {
                row: i + 2,
                section: row.section.clone(),
            })?;
            let id = row.id.trim().to_owned();
            if codes.iter().any(|c| c.id == id) {
                return Err(RubricError::DuplicateCode(id));
            }
            codes.push(RubricCode {
                id,
                section,
                name: row.name.trim().to_owned(),
                description: row.description.trim().to_owned(),
            });
        }
        if codes.is_empty() {
            return Err(RubricError::Empty);
        }
        Ok(Rubric { codes })
    }

    pub fn load(path: &Path) -> Result<Rubric, RubricError> {
        Rubric::from_csv(std::fs::File::open(path)?)
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&RubricCode> {
        self.codes.iter().find(|c| c.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.codes.iter().map(|c| c.id.as_str())
    }

    pub fn id_set(&self) -> BTreeSet<&str> {
        self.ids().collect()
    }
}

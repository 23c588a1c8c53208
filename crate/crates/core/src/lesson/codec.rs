//! Canonical `.lesson.json` encoding.

use std::fmt;

use serde_json::error::Category;
use thiserror::Error;

use super::types::{Lesson, SCHEMA_VERSION};
use crate::canonical;

/// What the parser was looking for when it gave up.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expected {
    /// Input ended before a complete document.
    Value,
    /// Malformed JSON syntax.
    Syntax,
    /// A field name the schema does not define.
    KnownField { found: String },
    /// Well-formed JSON that does not fit the lesson schema.
    SchemaShape,
    /// `schema` field other than the supported version.
    SchemaVersion { found: u32 },
}

impl fmt::Display for Expected {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expected::Value => f.write_str("a JSON value"),
            Expected::Syntax => f.write_str("valid JSON syntax"),
            Expected::KnownField { found } => write!(f, "a known field name (found unknown field `{found}`)"),
            Expected::SchemaShape => f.write_str("a value matching the lesson schema"),
            Expected::SchemaVersion { found } => {
                write!(f, "schema version {SCHEMA_VERSION} (found {found})")
            }
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("parse error at line {line}, column {column} (offset {offset}): expected {expected}: {detail}")]
pub struct ParseError {
    /// Byte offset into the input.
    pub offset: usize,
    pub line: usize,
    pub column: usize,
    pub expected: Expected,
    pub detail: String,
}

impl ParseError {
    /// Name of the unknown field, when that is what went wrong.
    pub fn unknown_field(&self) -> Option<&str> {
        match &self.expected {
            Expected::KnownField { found } => Some(found),
            _ => None,
        }
    }
}

pub fn serialize_lesson(lesson: &Lesson) -> String {
    canonical::to_canonical_string(lesson).expect("lesson serialization is infallible")
}

pub fn parse_lesson(text: &str) -> Result<Lesson, ParseError> {
    let lesson: Lesson = serde_json::from_str(text).map_err(|e| from_json_error(text, &e))?;
    if lesson.schema != SCHEMA_VERSION {
        return Err(ParseError {
            offset: 0,
            line: 1,
            column: 0,
            expected: Expected::SchemaVersion { found: lesson.schema },
            detail: "unsupported lesson schema version".into(),
        });
    }
    Ok(lesson)
}

pub(crate) fn from_json_error(text: &str, e: &serde_json::Error) -> ParseError {
    let line = e.line();
    let column = e.column();
    let offset = offset_of(text, line, column);
    let detail = e.to_string();
    let expected = match e.classify() {
        Category::Eof => Expected::Value,
        Category::Syntax | Category::Io => Expected::Syntax,
        Category::Data => match unknown_field_name(&detail) {
            Some(found) => Expected::KnownField { found },
            None => Expected::SchemaShape,
        },
    };
    ParseError {
        offset,
        line,
        column,
        expected,
        detail,
    }
}

fn unknown_field_name(message: &str) -> Option<String> {
    let rest = message.strip_prefix("unknown field `")?;
    rest.split('`').next().map(str::to_owned)
}

/// Converts serde_json's 1-based line / 1-based column into a byte offset.
/// Column 0 means "before the first character of the line".
fn offset_of(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line - 1)
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

//! Lesson document model: five ordered sections, validation rules,
//! canonical serialization and plain-text rendering.

mod codec;
mod render;
pub mod sample;
pub mod text;
mod types;
mod validate;

pub use codec::{parse_lesson, serialize_lesson, Expected, ParseError};
pub use render::render_section_text;
pub use types::*;
pub use validate::{
    parse_verb_list, rules, validate_lesson, validate_lesson_with, Issue, Severity,
    ValidationConfig, ValidationReport, DEFAULT_ACTION_VERBS,
};

/// File extension for lesson documents.
pub const LESSON_FILE_EXTENSION: &str = ".lesson.json";

//! Turns raw model text into lesson sections, or into an error precise
//! enough to send back to the model as a repair instruction.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::lesson::{Section, SectionKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairKind {
    NotParseable,
    MissingSection,
    SchemaViolation,
}

impl fmt::Display for RepairKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RepairKind::NotParseable => "not_parseable",
            RepairKind::MissingSection => "missing_section",
            RepairKind::SchemaViolation => "schema_violation",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{kind}: {detail}")]
pub struct RepairableError {
    pub kind: RepairKind,
    pub detail: String,
    /// Set for [`RepairKind::MissingSection`].
    pub section: Option<SectionKind>,
}

impl RepairableError {
    fn new(kind: RepairKind, detail: impl Into<String>) -> RepairableError {
        RepairableError {
            kind,
            detail: detail.into(),
            section: None,
        }
    }
}

/// Strips a surrounding markdown fence and any prose around the outermost object.
fn extract_json(raw: &str) -> &str {
    let mut s = raw.trim();
    if let Some(rest) = s.strip_prefix("```") {
        let body = rest.split_once('\n').map_or("", |(_, b)| b);
        s = body.trim_end().strip_suffix("```").unwrap_or(body).trim();
    }
    if !s.starts_with('{') {
        if let (Some(a), Some(b)) = (s.find('{'), s.rfind('}')) {
            if a < b {
                return &s[a..=b];
            }
        }
    }
    s
}

/// Parses `{"sections": [...]}` and returns exactly `expected` sections, in that order.
pub fn parse_structured_output(
    raw: &str,
    expected: &[SectionKind],
) -> Result<Vec<Section>, RepairableError> {
    assert!(!expected.is_empty(), "expected section list must not be empty");
    let text = extract_json(raw);
    if text.is_empty() {
        return Err(RepairableError::new(RepairKind::NotParseable, "response is empty"));
    }
    let value: Value = serde_json::from_str(text)
        .map_err(|e| RepairableError::new(RepairKind::NotParseable, format!("invalid JSON: {e}")))?;
    let items = value
        .get("sections")
        .and_then(Value::as_array)
        .ok_or_else(|| {
            RepairableError::new(
                RepairKind::NotParseable,
                "expected a JSON object with a \"sections\" array",
            )
        })?;

    let mut slots: Vec<Option<&Value>> = vec![None; expected.len()];
    for (i, item) in items.iter().enumerate() {
        let name = item.get("kind").and_then(Value::as_str).ok_or_else(|| {
            RepairableError::new(
                RepairKind::SchemaViolation,
                format!("sections[{i}] has no \"kind\" string"),
            )
        })?;
        let kind = SectionKind::from_wire(name).ok_or_else(|| {
            RepairableError::new(
                RepairKind::SchemaViolation,
                format!("sections[{i}] has unknown kind {name:?}"),
            )
        })?;
        let pos = expected.iter().position(|k| *k == kind).ok_or_else(|| {
            RepairableError::new(
                RepairKind::SchemaViolation,
                format!("section {kind} was not requested"),
            )
        })?;
        if slots[pos].replace(item).is_some() {
            return Err(RepairableError::new(
                RepairKind::SchemaViolation,
                format!("section {kind} appears more than once"),
            ));
        }
    }
    if let Some(pos) = slots.iter().position(Option::is_none) {
        let kind = expected[pos];
        return Err(RepairableError {
            kind: RepairKind::MissingSection,
            detail: format!("section {kind} is missing"),
            section: Some(kind),
        });
    }

    slots
        .into_iter()
        .map(|v| {
            let v = v.expect("all slots filled");
            let mut section: Section = serde_json::from_value(v.clone()).map_err(|e| {
                RepairableError::new(
                    RepairKind::SchemaViolation,
                    format!("section {}: {e}", v["kind"].as_str().unwrap_or("?")),
                )
            })?;
            section.fill_derived();
            Ok(section)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::to_canonical_compact;
    use crate::lesson::sample::golden_lesson;

    fn output_for(kinds: &[SectionKind]) -> String {
        let lesson = golden_lesson();
        let sections: Vec<&Section> = kinds.iter().map(|k| lesson.section(*k).unwrap()).collect();
        to_canonical_compact(&serde_json::json!({ "sections": sections })).unwrap()
    }

    #[test]
    fn well_formed_instruction() {
        let raw = output_for(&[SectionKind::Instruction]);
        let got = parse_structured_output(&raw, &[SectionKind::Instruction]).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(&got[0], golden_lesson().section(SectionKind::Instruction).unwrap());
    }

    #[test]
    fn fenced_and_prose_wrapped_output() {
        let raw = output_for(&[SectionKind::Conclusion]);
        let fenced = format!("```json\n{raw}\n```");
        assert!(parse_structured_output(&fenced, &[SectionKind::Conclusion]).is_ok());
        let chatty = format!("Here you go:\n{raw}\nHope this helps!");
        assert!(parse_structured_output(&chatty, &[SectionKind::Conclusion]).is_ok());
    }

    #[test]
    fn missing_conclusion() {
        let raw = output_for(&[SectionKind::ScenarioTwo]);
        let err =
            parse_structured_output(&raw, &[SectionKind::ScenarioTwo, SectionKind::Conclusion]).unwrap_err();
        assert_eq!(err.kind, RepairKind::MissingSection);
        assert_eq!(err.section, Some(SectionKind::Conclusion));
    }

    #[test]
    fn empty_is_not_parseable() {
        let err = parse_structured_output("", &[SectionKind::TitlePage]).unwrap_err();
        assert_eq!(err.kind, RepairKind::NotParseable);
        let err = parse_structured_output("   \n", &[SectionKind::TitlePage]).unwrap_err();
        assert_eq!(err.kind, RepairKind::NotParseable);
    }

    #[test]
    fn extra_sections_rejected() {
        let raw = output_for(&[SectionKind::TitlePage, SectionKind::ScenarioOne]);
        let err = parse_structured_output(&raw, &[SectionKind::TitlePage]).unwrap_err();
        assert_eq!(err.kind, RepairKind::SchemaViolation);
        assert!(err.detail.contains("scenario_one"));
    }

    #[test]
    fn schema_violation_names_field() {
        let raw = r#"{"sections":[{"kind":"conclusion","summary":"s","refs":[]}]}"#;
        let err = parse_structured_output(raw, &[SectionKind::Conclusion]).unwrap_err();
        assert_eq!(err.kind, RepairKind::SchemaViolation);
        assert!(err.to_string().starts_with("schema_violation: "));
        assert!(err.detail.contains("refs"));
    }

    #[test]
    fn reorders_to_expected_and_derives_titles() {
        let raw = r#"{"sections":[
            {"kind":"conclusion","summary":"s","references":[{"raw_citation":"Newman, R. S. (1994). Adaptive help seeking: A strategy of self-regulated learning. Erlbaum."}]},
            {"kind":"scenario_two","narrative":"n","questions":[]}]}"#;
        let got =
            parse_structured_output(raw, &[SectionKind::ScenarioTwo, SectionKind::Conclusion]).unwrap();
        assert_eq!(got[0].kind(), SectionKind::ScenarioTwo);
        match &got[1] {
            Section::Conclusion(c) => {
                assert_eq!(
                    c.references[0].normalized_title,
                    "adaptive help seeking a strategy of self regulated learning"
                );
                assert_eq!(c.references[0].year, Some(1994));
            }
            _ => panic!(),
        }
    }
}

//! Prompt templates. Wording lives in plain-text files; this module only
//! loads them and fills `{placeholder}` slots.

use std::path::Path;

use thiserror::Error;

use crate::lesson::SectionKind;

const BUILTIN_VERSION: &str = "v1";

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template {name}: {source}")]
    Io {
        name: String,
        source: std::io::Error,
    },
    #[error("template {name} lacks required placeholder {{{placeholder}}}")]
    MissingPlaceholder { name: String, placeholder: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub version: String,
    pub system: String,
    /// Uses `{topic}`, `{target_sections}`, `{prior_context}`, `{retrieved}`.
    pub segment: String,
    /// Uses `{error}`.
    pub repair: String,
    /// Uses `{note}`.
    pub note: String,
    pub output_format: String,
    /// Per-section requirements, indexed by [`SectionKind::position`].
    pub sections: [String; 5],
}

fn section_file(kind: SectionKind) -> String {
    format!("section_{}.txt", kind.as_str())
}

impl PromptTemplates {
    /// Templates compiled into the binary.
    pub fn builtin() -> PromptTemplates {
        macro_rules! t {
            ($f:literal) => {
                include_str!(concat!("../../templates/v1/", $f)).to_owned()
            };
        }
        PromptTemplates {
            version: BUILTIN_VERSION.into(),
            system: t!("system.txt"),
            segment: t!("segment.txt"),
            repair: t!("repair.txt"),
            note: t!("note.txt"),
            output_format: t!("output_format.txt"),
            sections: [
                t!("section_title_page.txt"),
                t!("section_scenario_one.txt"),
                t!("section_instruction.txt"),
                t!("section_scenario_two.txt"),
                t!("section_conclusion.txt"),
            ],
        }
    }

    /// Loads a template directory laid out like `templates/v1/`. The
    /// directory name is recorded as the template version.
    pub fn load_dir(dir: &Path) -> Result<PromptTemplates, TemplateError> {
        let read = |name: &str| {
            std::fs::read_to_string(dir.join(name)).map_err(|source| TemplateError::Io {
                name: name.to_owned(),
                source,
            })
        };
        let version = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "custom".into());
        let t = PromptTemplates {
            version,
            system: read("system.txt")?,
            segment: read("segment.txt")?,
            repair: read("repair.txt")?,
            note: read("note.txt")?,
            output_format: read("output_format.txt")?,
            sections: [
                read(&section_file(SectionKind::TitlePage))?,
                read(&section_file(SectionKind::ScenarioOne))?,
                read(&section_file(SectionKind::Instruction))?,
                read(&section_file(SectionKind::ScenarioTwo))?,
                read(&section_file(SectionKind::Conclusion))?,
            ],
        };
        t.check()?;
        Ok(t)
    }

    fn check(&self) -> Result<(), TemplateError> {
        let required: [(&str, &str, &[&str]); 3] = [
            ("segment.txt", &self.segment, &["topic", "target_sections", "prior_context", "retrieved"]),
            ("repair.txt", &self.repair, &["error"]),
            ("note.txt", &self.note, &["note"]),
        ];
        for (name, text, slots) in required {
            for slot in slots {
                if !text.contains(&format!("{{{slot}}}")) {
                    return Err(TemplateError::MissingPlaceholder {
                        name: name.into(),
                        placeholder: (*slot).into(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn section_requirements(&self, kind: SectionKind) -> &str {
        &self.sections[kind.position()]
    }
}

/// Replaces each `{name}` in `template` with its value in a single pass, so
/// substituted text is never re-scanned for placeholders.
pub fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = after.find('}').and_then(|close| {
            let name = &after[..close];
            values
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| (close, *v))
        });
        match hit {
            Some((close, value)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

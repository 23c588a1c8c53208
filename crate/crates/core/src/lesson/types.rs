use std::fmt;

use serde::{Deserialize, Serialize};

/// Current version of the lesson document format.
pub const SCHEMA_VERSION: u32 = 1;

/// The five lesson sections, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionKind {
    TitlePage,
    ScenarioOne,
    Instruction,
    ScenarioTwo,
    Conclusion,
}

impl SectionKind {
    pub const ALL: [SectionKind; 5] = [
        SectionKind::TitlePage,
        SectionKind::ScenarioOne,
        SectionKind::Instruction,
        SectionKind::ScenarioTwo,
        SectionKind::Conclusion,
    ];

    /// Zero-based position in the canonical order.
    pub fn position(self) -> usize {
        self as usize
    }

    /// Wire name, as used in lesson documents and model output.
    pub fn as_str(self) -> &'static str {
        match self {
            SectionKind::TitlePage => "title_page",
            SectionKind::ScenarioOne => "scenario_one",
            SectionKind::Instruction => "instruction",
            SectionKind::ScenarioTwo => "scenario_two",
            SectionKind::Conclusion => "conclusion",
        }
    }

    pub fn from_wire(name: &str) -> Option<SectionKind> {
        SectionKind::ALL.into_iter().find(|k| k.as_str() == name)
    }

    /// Heading used in plain-text renderings.
    pub fn title(self) -> &'static str {
        match self {
            SectionKind::TitlePage => "Title Page",
            SectionKind::ScenarioOne => "Scenario I",
            SectionKind::Instruction => "Instruction",
            SectionKind::ScenarioTwo => "Scenario II",
            SectionKind::Conclusion => "Conclusion",
        }
    }
}

impl fmt::Display for SectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningObjective {
    pub statement: String,
    /// Who the objective addresses. Must read "tutor" or "tutors".
    pub audience_term: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TitlePage {
    pub topic_description: String,
    #[serde(default)]
    pub focus_areas: Vec<String>,
    pub learning_objectives: Vec<LearningObjective>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    OpenEnded,
    MultipleChoice,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McqOption {
    pub label: String,
    pub is_correct: bool,
    pub feedback: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Question {
    pub kind: QuestionKind,
    pub prompt: String,
    /// Empty for open-ended questions.
    #[serde(default)]
    pub options: Vec<McqOption>,
    /// Model answer or feedback for open-ended questions.
    #[serde(default)]
    pub rationale_feedback: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub narrative: String,
    pub questions: Vec<Question>,
}

/// A named practice with a desired and an undesired example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeachingStrategy {
    pub name: String,
    pub description: String,
    pub good_example: String,
    pub bad_example: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstructionSection {
    pub strategies: Vec<TeachingStrategy>,
    pub body: String,
    #[serde(default)]
    pub citations: Vec<Reference>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConclusionSection {
    pub summary: String,
    pub references: Vec<Reference>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verification {
    #[default]
    Unchecked,
    Verified,
    Unverified,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reference {
    pub raw_citation: String,
    /// Lowercase, punctuation-free title derived from `raw_citation`.
    /// Filled in by [`Reference::fill_derived`] when absent.
    #[serde(default)]
    pub normalized_title: String,
    #[serde(default)]
    pub year: Option<i32>,
    #[serde(default)]
    pub verification: Verification,
}

impl Reference {
    /// Builds a reference from a free-form citation, extracting title and year.
    pub fn from_citation(raw: impl Into<String>) -> Reference {
        let mut r = Reference {
            raw_citation: raw.into(),
            normalized_title: String::new(),
            year: None,
            verification: Verification::Unchecked,
        };
        r.fill_derived();
        r
    }

    /// Derives `normalized_title` and `year` from the raw citation where missing.
    pub fn fill_derived(&mut self) {
        if self.normalized_title.trim().is_empty() {
            self.normalized_title = super::text::normalize_title(
                &super::text::extract_citation_title(&self.raw_citation),
            );
        }
        if self.year.is_none() {
            self.year = super::text::extract_citation_year(&self.raw_citation);
        }
    }
}

/// One lesson section. The `kind` tag doubles as the section's [`SectionKind`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Section {
    TitlePage(TitlePage),
    ScenarioOne(ScenarioSection),
    Instruction(InstructionSection),
    ScenarioTwo(ScenarioSection),
    Conclusion(ConclusionSection),
}

impl Section {
    pub fn kind(&self) -> SectionKind {
        match self {
            Section::TitlePage(_) => SectionKind::TitlePage,
            Section::ScenarioOne(_) => SectionKind::ScenarioOne,
            Section::Instruction(_) => SectionKind::Instruction,
            Section::ScenarioTwo(_) => SectionKind::ScenarioTwo,
            Section::Conclusion(_) => SectionKind::Conclusion,
        }
    }

    /// Applies [`Reference::fill_derived`] to every reference in the section.
    pub fn fill_derived(&mut self) {
        match self {
            Section::Instruction(s) => s.citations.iter_mut().for_each(Reference::fill_derived),
            Section::Conclusion(s) => s.references.iter_mut().for_each(Reference::fill_derived),
            _ => {}
        }
    }
}

/// A complete lesson document.
///
/// `sections` is stored as a list so that malformed documents can still be
/// loaded and reported on; a valid lesson holds exactly one section of each
/// kind in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lesson {
    pub schema: u32,
    pub id: String,
    pub topic: String,
    pub sections: Vec<Section>,
}

impl Lesson {
    pub fn new(id: impl Into<String>, topic: impl Into<String>, sections: Vec<Section>) -> Lesson {
        Lesson {
            schema: SCHEMA_VERSION,
            id: id.into(),
            topic: topic.into(),
            sections,
        }
    }

    pub fn section(&self, kind: SectionKind) -> Option<&Section> {
        self.sections.iter().find(|s| s.kind() == kind)
    }

    pub fn title_page(&self) -> Option<&TitlePage> {
        match self.section(SectionKind::TitlePage) {
            Some(Section::TitlePage(t)) => Some(t),
            _ => None,
        }
    }

    pub fn conclusion(&self) -> Option<&ConclusionSection> {
        match self.section(SectionKind::Conclusion) {
            Some(Section::Conclusion(c)) => Some(c),
            _ => None,
        }
    }
}

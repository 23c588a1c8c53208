//! Structural and content rules for lesson documents.
//!
//! Validation never fails; every broken rule becomes an [`Issue`] in the
//! returned [`ValidationReport`]. Issues are sorted by section position
//! (lesson-level issues first), then rule id, then path.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::text::{jaccard, normalize_title, token_set};
use super::types::*;

/// Stable rule identifiers.
pub mod rules {
    pub const LESSON_SECTION_COUNT: &str = "lesson.section_count";
    pub const LESSON_DUPLICATE_SECTION: &str = "lesson.duplicate_section";
    pub const LESSON_SECTION_ORDER: &str = "lesson.section_order";
    pub const LESSON_TOPIC_EMPTY: &str = "lesson.topic_empty";
    pub const TITLE_TOPIC_DESCRIPTION: &str = "title.topic_description_empty";
    pub const TITLE_NO_OBJECTIVES: &str = "title.no_objectives";
    pub const OBJECTIVE_ACTION_VERB: &str = "objective.action_verb";
    pub const OBJECTIVE_AUDIENCE_TERM: &str = "objective.audience_term";
    pub const SCENARIO_NARRATIVE_EMPTY: &str = "scenario.narrative_empty";
    pub const SCENARIO_MISSING_OPEN_ENDED: &str = "scenario.missing_open_ended";
    pub const SCENARIO_MISSING_MCQ: &str = "scenario.missing_mcq";
    pub const SCENARIO_DUPLICATE_NARRATIVE: &str = "scenario.duplicate_narrative";
    pub const QUESTION_PROMPT_EMPTY: &str = "question.prompt_empty";
    pub const QUESTION_OPEN_ENDED_OPTIONS: &str = "question.open_ended_options";
    pub const QUESTION_RATIONALE_EMPTY: &str = "question.rationale_empty";
    pub const MCQ_OPTION_COUNT: &str = "mcq.option_count";
    pub const MCQ_SINGLE_CORRECT: &str = "mcq.single_correct";
    pub const MCQ_OPTION_FEEDBACK: &str = "mcq.option_feedback";
    pub const MCQ_DUPLICATE_LABEL: &str = "mcq.duplicate_label";
    pub const INSTRUCTION_NO_STRATEGIES: &str = "instruction.no_strategies";
    pub const INSTRUCTION_STRATEGY_EXAMPLES: &str = "instruction.strategy_examples";
    pub const INSTRUCTION_BODY_EMPTY: &str = "instruction.body_empty";
    pub const CONCLUSION_SUMMARY_EMPTY: &str = "conclusion.summary_empty";
    pub const CONCLUSION_NO_REFERENCES: &str = "conclusion.no_references";
    pub const REFERENCE_NORMALIZED_TITLE: &str = "reference.normalized_title";
}

pub const DEFAULT_ACTION_VERBS: [&str; 8] = [
    "explain",
    "describe",
    "identify",
    "apply",
    "develop",
    "implement",
    "demonstrate",
    "outline",
];

const AUDIENCE_TERMS: [&str; 2] = ["tutor", "tutors"];
const CONFUSABLE_AUDIENCE: [&str; 4] = ["learner", "learners", "teacher", "teachers"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub path: String,
    pub rule_id: String,
    pub message: String,
    pub severity: Severity,
    /// Position of the offending section in the document; `None` for lesson-level issues.
    #[serde(skip)]
    section_index: Option<usize>,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}\t{}\t{}\t{}", self.path, self.rule_id, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        self.issues.iter().any(|i| i.severity == Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn contains_rule(&self, rule_id: &str) -> bool {
        self.issues.iter().any(|i| i.rule_id == rule_id)
    }
}

/// Tunables for [`validate_lesson_with`].
#[derive(Debug, Clone)]
pub struct ValidationConfig {
    pub action_verbs: BTreeSet<String>,
    /// Scenario II is a duplicate when its narrative's token Jaccard with
    /// Scenario I reaches this value.
    pub scenario_similarity_threshold: f64,
    pub min_mcq_options: usize,
    pub max_mcq_options: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            action_verbs: DEFAULT_ACTION_VERBS.iter().map(|s| s.to_string()).collect(),
            scenario_similarity_threshold: 0.9,
            min_mcq_options: 2,
            max_mcq_options: 6,
        }
    }
}

impl ValidationConfig {
    /// Reads a verb list: one verb per line, `#` starts a comment.
    pub fn load_verbs(path: &Path) -> io::Result<BTreeSet<String>> {
        let text = std::fs::read_to_string(path)?;
        Ok(parse_verb_list(&text))
    }
}

pub fn parse_verb_list(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect()
}

pub fn validate_lesson(lesson: &Lesson) -> ValidationReport {
    validate_lesson_with(lesson, &ValidationConfig::default())
}

pub fn validate_lesson_with(lesson: &Lesson, config: &ValidationConfig) -> ValidationReport {
    let mut v = Validator {
        config,
        issues: Vec::new(),
    };
    v.lesson_level(lesson);
    let scenario_one = lesson.sections.iter().find_map(|s| match s {
        Section::ScenarioOne(s) => Some(s),
        _ => None,
    });
    for (idx, section) in lesson.sections.iter().enumerate() {
        let base = format!("sections[{idx}]");
        match section {
            Section::TitlePage(t) => v.title_page(idx, &base, t),
            Section::ScenarioOne(s) => v.scenario(idx, &base, s, None),
            Section::ScenarioTwo(s) => v.scenario(idx, &base, s, scenario_one),
            Section::Instruction(s) => v.instruction(idx, &base, s),
            Section::Conclusion(s) => v.conclusion(idx, &base, s),
        }
    }
    let mut issues = v.issues;
    issues.sort_by(|a, b| {
        a.section_index
            .cmp(&b.section_index)
            .then_with(|| a.rule_id.cmp(&b.rule_id))
            .then_with(|| a.path.cmp(&b.path))
            .then_with(|| a.message.cmp(&b.message))
    });
    ValidationReport { issues }
}

struct Validator<'a> {
    config: &'a ValidationConfig,
    issues: Vec<Issue>,
}

fn blank(s: &str) -> bool {
    s.trim().is_empty()
}

impl Validator<'_> {
    fn push(&mut self, section: Option<usize>, path: String, rule: &str, message: String) {
        self.push_sev(section, path, rule, message, Severity::Error);
    }

    fn push_sev(
        &mut self,
        section_index: Option<usize>,
        path: String,
        rule: &str,
        message: String,
        severity: Severity,
    ) {
        self.issues.push(Issue {
            path,
            rule_id: rule.to_owned(),
            message,
            severity,
            section_index,
        });
    }

    fn lesson_level(&mut self, lesson: &Lesson) {
        if blank(&lesson.topic) {
            self.push(None, "topic".into(), rules::LESSON_TOPIC_EMPTY, "lesson topic is empty".into());
        }
        let kinds: Vec<SectionKind> = lesson.sections.iter().map(Section::kind).collect();
        if kinds.len() != 5 {
            self.push(
                None,
                "sections".into(),
                rules::LESSON_SECTION_COUNT,
                format!("expected 5 sections, found {}", kinds.len()),
            );
        }
        let mut seen = HashSet::new();
        for (i, k) in kinds.iter().enumerate() {
            if !seen.insert(*k) {
                self.push(
                    None,
                    format!("sections[{i}]"),
                    rules::LESSON_DUPLICATE_SECTION,
                    format!("section {k} appears more than once"),
                );
            }
        }
        if kinds.windows(2).any(|w| w[0] > w[1]) {
            let found: Vec<&str> = kinds.iter().map(|k| k.as_str()).collect();
            self.push(
                None,
                "sections".into(),
                rules::LESSON_SECTION_ORDER,
                format!("sections out of canonical order: [{}]", found.join(", ")),
            );
        }
    }

    fn title_page(&mut self, idx: usize, base: &str, t: &TitlePage) {
        let s = Some(idx);
        if blank(&t.topic_description) {
            self.push(
                s,
                format!("{base}.topic_description"),
                rules::TITLE_TOPIC_DESCRIPTION,
                "topic description is empty".into(),
            );
        }
        if t.learning_objectives.is_empty() {
            self.push(
                s,
                format!("{base}.learning_objectives"),
                rules::TITLE_NO_OBJECTIVES,
                "at least one learning objective is required".into(),
            );
        }
        for (i, lo) in t.learning_objectives.iter().enumerate() {
            let path = format!("{base}.learning_objectives[{i}]");
            let tokens = token_set(&lo.statement);
            if !tokens.iter().any(|tok| self.config.action_verbs.contains(tok)) {
                self.push_sev(
                    s,
                    format!("{path}.statement"),
                    rules::OBJECTIVE_ACTION_VERB,
                    "objective does not name an observable action verb".into(),
                    Severity::Warning,
                );
            }
            let term = lo.audience_term.trim().to_lowercase();
            if !AUDIENCE_TERMS.contains(&term.as_str()) {
                self.push(
                    s,
                    format!("{path}.audience_term"),
                    rules::OBJECTIVE_AUDIENCE_TERM,
                    format!("audience term {:?} must be \"tutor\" or \"tutors\"", lo.audience_term),
                );
            }
            if let Some(word) = CONFUSABLE_AUDIENCE.iter().find(|w| tokens.contains(**w)) {
                self.push(
                    s,
                    format!("{path}.statement"),
                    rules::OBJECTIVE_AUDIENCE_TERM,
                    format!("objective addresses {word:?} instead of tutors"),
                );
            }
        }
    }

    fn scenario(
        &mut self,
        idx: usize,
        base: &str,
        sc: &ScenarioSection,
        first: Option<&ScenarioSection>,
    ) {
        let s = Some(idx);
        if blank(&sc.narrative) {
            self.push(
                s,
                format!("{base}.narrative"),
                rules::SCENARIO_NARRATIVE_EMPTY,
                "scenario narrative is empty".into(),
            );
        }
        if !sc.questions.iter().any(|q| q.kind == QuestionKind::OpenEnded) {
            self.push(
                s,
                format!("{base}.questions"),
                rules::SCENARIO_MISSING_OPEN_ENDED,
                "scenario needs at least one open-ended question".into(),
            );
        }
        if !sc.questions.iter().any(|q| q.kind == QuestionKind::MultipleChoice) {
            self.push(
                s,
                format!("{base}.questions"),
                rules::SCENARIO_MISSING_MCQ,
                "scenario needs at least one multiple-choice question".into(),
            );
        }
        if let Some(first) = first {
            let a = token_set(&first.narrative);
            let b = token_set(&sc.narrative);
            let sim = jaccard(&a, &b);
            if first.narrative == sc.narrative || sim >= self.config.scenario_similarity_threshold {
                self.push(
                    s,
                    format!("{base}.narrative"),
                    rules::SCENARIO_DUPLICATE_NARRATIVE,
                    format!("Scenario II narrative repeats Scenario I (token similarity {sim:.3})"),
                );
            }
        }
        for (qi, q) in sc.questions.iter().enumerate() {
            self.question(idx, &format!("{base}.questions[{qi}]"), q);
        }
    }

    fn question(&mut self, idx: usize, path: &str, q: &Question) {
        let s = Some(idx);
        if blank(&q.prompt) {
            self.push(s, format!("{path}.prompt"), rules::QUESTION_PROMPT_EMPTY, "question prompt is empty".into());
        }
        match q.kind {
            QuestionKind::OpenEnded => {
                if !q.options.is_empty() {
                    self.push(
                        s,
                        format!("{path}.options"),
                        rules::QUESTION_OPEN_ENDED_OPTIONS,
                        "open-ended question must not carry options".into(),
                    );
                }
                if blank(&q.rationale_feedback) {
                    self.push(
                        s,
                        format!("{path}.rationale_feedback"),
                        rules::QUESTION_RATIONALE_EMPTY,
                        "open-ended question needs model-answer feedback".into(),
                    );
                }
            }
            QuestionKind::MultipleChoice => {
                let n = q.options.len();
                if n < self.config.min_mcq_options || n > self.config.max_mcq_options {
                    self.push(
                        s,
                        format!("{path}.options"),
                        rules::MCQ_OPTION_COUNT,
                        format!(
                            "expected {}..{} options, found {n}",
                            self.config.min_mcq_options, self.config.max_mcq_options
                        ),
                    );
                }
                let correct = q.options.iter().filter(|o| o.is_correct).count();
                if correct != 1 {
                    self.push(
                        s,
                        format!("{path}.options"),
                        rules::MCQ_SINGLE_CORRECT,
                        format!("exactly one option must be correct, found {correct}"),
                    );
                }
                let mut labels = HashSet::new();
                for (oi, o) in q.options.iter().enumerate() {
                    if blank(&o.feedback) {
                        self.push(
                            s,
                            format!("{path}.options[{oi}].feedback"),
                            rules::MCQ_OPTION_FEEDBACK,
                            format!("option {:?} has no targeted feedback", o.label),
                        );
                    }
                    if !labels.insert(o.label.trim()) {
                        self.push(
                            s,
                            format!("{path}.options[{oi}].label"),
                            rules::MCQ_DUPLICATE_LABEL,
                            format!("option label {:?} repeats", o.label),
                        );
                    }
                }
            }
        }
    }

    fn instruction(&mut self, idx: usize, base: &str, ins: &InstructionSection) {
        let s = Some(idx);
        if ins.strategies.is_empty() {
            self.push(
                s,
                format!("{base}.strategies"),
                rules::INSTRUCTION_NO_STRATEGIES,
                "at least one strategy is required".into(),
            );
        }
        for (i, st) in ins.strategies.iter().enumerate() {
            if blank(&st.good_example) || blank(&st.bad_example) {
                self.push(
                    s,
                    format!("{base}.strategies[{i}]"),
                    rules::INSTRUCTION_STRATEGY_EXAMPLES,
                    format!("strategy {:?} needs both a desired and an undesired example", st.name),
                );
            }
        }
        if blank(&ins.body) {
            self.push(s, format!("{base}.body"), rules::INSTRUCTION_BODY_EMPTY, "instruction body is empty".into());
        }
        for (i, r) in ins.citations.iter().enumerate() {
            self.reference(idx, &format!("{base}.citations[{i}]"), r);
        }
    }

    fn conclusion(&mut self, idx: usize, base: &str, c: &ConclusionSection) {
        let s = Some(idx);
        if blank(&c.summary) {
            self.push(s, format!("{base}.summary"), rules::CONCLUSION_SUMMARY_EMPTY, "summary is empty".into());
        }
        if c.references.is_empty() {
            self.push(
                s,
                format!("{base}.references"),
                rules::CONCLUSION_NO_REFERENCES,
                "at least one reference is required".into(),
            );
        }
        for (i, r) in c.references.iter().enumerate() {
            self.reference(idx, &format!("{base}.references[{i}]"), r);
        }
    }

    fn reference(&mut self, idx: usize, path: &str, r: &Reference) {
        let title = &r.normalized_title;
        let well_formed = !title.is_empty()
            && normalize_title(title) == *title
            && normalize_title(&r.raw_citation).contains(title.as_str());
        if !well_formed {
            self.push(
                Some(idx),
                format!("{path}.normalized_title"),
                rules::REFERENCE_NORMALIZED_TITLE,
                "normalized title must be a lowercase, punctuation-free excerpt of the citation".into(),
            );
        }
    }
}

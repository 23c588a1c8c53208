//! Drives the backend through a segment plan and records what happened.

use serde::{Deserialize, Serialize};

use super::backend::{BackendError, ChatMessage, ChatRequest, ModelBackend, Role};
use super::config::ModelConfig;
use super::parse::{parse_structured_output, RepairableError};
use super::plan::{make_plan, SegmentPlan};
use super::prompt::{assemble_prompt, retrieval_query, PromptBundle};
use super::templates::{fill, PromptTemplates};
use crate::canonical;
use crate::corpus::{RetrievalHit, Retriever};
use crate::lesson::{validate_lesson, Lesson, Section, SectionKind, ValidationReport};

pub const DEFAULT_RETRIEVAL_K: usize = 5;

/// One request/response exchange for a segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub user_text: String,
    pub fingerprint: String,
    /// Absent when the backend itself failed.
    pub raw_output: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentTranscript {
    pub group_index: usize,
    pub kinds: Vec<SectionKind>,
    pub retrieval_query: String,
    pub hits: Vec<RetrievalHit>,
    pub prompt: PromptBundle,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
    pub attempts: Vec<Attempt>,
    /// Parsed output; empty if every attempt failed.
    pub sections: Vec<Section>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunStatus {
    Pending,
    Complete,
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRun {
    pub id: String,
    pub topic: String,
    pub plan: SegmentPlan,
    pub config: ModelConfig,
    pub transcripts: Vec<SegmentTranscript>,
    pub lesson: Option<Lesson>,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub validation: Option<ValidationReport>,
}

impl GenerationRun {
    pub fn new(id: impl Into<String>, topic: impl Into<String>, plan: SegmentPlan, config: ModelConfig) -> GenerationRun {
        GenerationRun {
            id: id.into(),
            topic: topic.into(),
            plan,
            config,
            transcripts: Vec::new(),
            lesson: None,
            status: RunStatus::Pending,
            validation: None,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.status == RunStatus::Complete
    }

    /// Sections produced so far, in plan order.
    pub fn sections(&self) -> Vec<Section> {
        self.transcripts.iter().flat_map(|t| t.sections.iter().cloned()).collect()
    }

    fn fail(&mut self, reason: impl Into<String>) {
        self.status = RunStatus::Failed { reason: reason.into() };
    }
}

/// Deterministic lesson id derived from topic and content.
pub fn lesson_id_for(topic: &str, sections: &[Section]) -> String {
    let body = canonical::to_canonical_compact(&serde_json::json!({ "topic": topic, "sections": sections }))
        .expect("sections serialize");
    format!("lesson-{}", &canonical::sha256_hex(body.as_bytes())[..16])
}

enum SegmentOutcome {
    Done,
    Failed(String),
}

pub struct Pipeline<'a> {
    pub backend: &'a dyn ModelBackend,
    pub retriever: &'a dyn Retriever,
    pub templates: &'a PromptTemplates,
    pub retrieval_k: usize,
}

impl<'a> Pipeline<'a> {
    pub fn new(
        backend: &'a dyn ModelBackend,
        retriever: &'a dyn Retriever,
        templates: &'a PromptTemplates,
    ) -> Pipeline<'a> {
        Pipeline {
            backend,
            retriever,
            templates,
            retrieval_k: DEFAULT_RETRIEVAL_K,
        }
    }

    /// Generates every group of a fresh run. Never panics on model misbehavior;
    /// problems end up in `status`.
    pub fn run(&self, id: &str, topic: &str, plan: SegmentPlan, config: ModelConfig) -> GenerationRun {
        let mut run = GenerationRun::new(id, topic, plan, config);
        if let Err(e) = run.config.check() {
            run.fail(format!("invalid model config: {e}"));
            return run;
        }
        if topic.trim().is_empty() {
            run.fail("topic is empty");
            return run;
        }
        self.continue_from(&mut run, 0, None);
        run
    }

    /// Re-executes group `group_index` with a designer note, then every later group.
    /// Earlier groups are left untouched.
    pub fn regenerate(&self, run: &mut GenerationRun, group_index: usize, note: &str) -> Result<(), String> {
        if group_index >= run.plan.groups.len() {
            return Err(format!(
                "group {group_index} out of range for a {}-group plan",
                run.plan.groups.len()
            ));
        }
        if run.transcripts.len() < group_index
            || run.transcripts[..group_index].iter().any(|t| t.sections.is_empty())
        {
            return Err(format!("groups before {group_index} have not been generated"));
        }
        run.transcripts.truncate(group_index);
        run.lesson = None;
        run.validation = None;
        run.status = RunStatus::Pending;
        self.continue_from(run, group_index, Some(note));
        Ok(())
    }

    fn continue_from(&self, run: &mut GenerationRun, start: usize, note: Option<&str>) {
        for g in start..run.plan.groups.len() {
            let note = if g == start { note } else { None };
            if let SegmentOutcome::Failed(reason) = self.generate_group(run, g, note) {
                run.fail(reason);
                return;
            }
        }
        let sections = run.sections();
        let lesson = Lesson::new(lesson_id_for(&run.topic, &sections), run.topic.clone(), sections);
        let report = validate_lesson(&lesson);
        let errors = report.errors().count();
        if errors > 0 {
            let first = report.errors().next().map(|i| i.to_string()).unwrap_or_default();
            run.fail(format!("validation failed with {errors} error(s); first: {first}"));
        } else {
            run.status = RunStatus::Complete;
        }
        run.lesson = Some(lesson);
        run.validation = Some(report);
    }

    fn generate_group(&self, run: &mut GenerationRun, g: usize, note: Option<&str>) -> SegmentOutcome {
        let kinds = run.plan.groups[g].sections.clone();
        let query = retrieval_query(&run.topic, &kinds);
        let hits = match self.retriever.retrieve(&query, self.retrieval_k) {
            Ok(h) => h,
            Err(e) => return SegmentOutcome::Failed(format!("segment {}: retrieval failed: {e}", g + 1)),
        };
        let prior = run.sections();
        let prompt = match assemble_prompt(self.templates, &run.topic, &run.plan, g, &prior, &hits) {
            Ok(p) => p,
            Err(e) => return SegmentOutcome::Failed(format!("segment {}: {e}", g + 1)),
        };
        let mut base_text = prompt.user_text.clone();
        if let Some(n) = note {
            base_text.push_str("\n\n");
            base_text.push_str(&fill(&self.templates.note, &[("note", n)]));
        }

        let mut transcript = SegmentTranscript {
            group_index: g,
            kinds: kinds.clone(),
            retrieval_query: query,
            hits,
            prompt,
            note: note.map(str::to_owned),
            attempts: Vec::new(),
            sections: Vec::new(),
        };
        let mut last_error: Option<RepairableError> = None;
        let mut outcome = None;
        for _ in 0..=run.config.max_repair_retries {
            let mut user_text = base_text.clone();
            if let Some(err) = &last_error {
                user_text.push_str("\n\n");
                user_text.push_str(&fill(&self.templates.repair, &[("error", &err.to_string())]));
            }
            let request = self.request(&run.config, &transcript.prompt.system_text, &user_text);
            let fingerprint = request.fingerprint();
            match self.backend.complete(&request) {
                Err(e) => {
                    transcript.attempts.push(Attempt {
                        user_text,
                        fingerprint,
                        raw_output: None,
                        error: Some(e.to_string()),
                    });
                    outcome = Some(SegmentOutcome::Failed(backend_reason(g, &e)));
                    break;
                }
                Ok(raw) => match parse_structured_output(&raw, &kinds) {
                    Ok(sections) => {
                        transcript.attempts.push(Attempt {
                            user_text,
                            fingerprint,
                            raw_output: Some(raw),
                            error: None,
                        });
                        transcript.sections = sections;
                        outcome = Some(SegmentOutcome::Done);
                        break;
                    }
                    Err(err) => {
                        transcript.attempts.push(Attempt {
                            user_text,
                            fingerprint,
                            raw_output: Some(raw),
                            error: Some(err.to_string()),
                        });
                        last_error = Some(err);
                    }
                },
            }
        }
        let outcome = outcome.unwrap_or_else(|| {
            SegmentOutcome::Failed(format!(
                "segment {}: output unusable after {} attempt(s): {}",
                g + 1,
                transcript.attempts.len(),
                last_error.map(|e| e.to_string()).unwrap_or_default()
            ))
        });
        run.transcripts.push(transcript);
        outcome
    }

    fn request(&self, config: &ModelConfig, system: &str, user: &str) -> ChatRequest {
        ChatRequest {
            model: config.model_id.clone(),
            messages: vec![
                ChatMessage { role: Role::System, content: system.to_owned() },
                ChatMessage { role: Role::User, content: user.to_owned() },
            ],
            temperature: config.temperature,
            seed: config.seed,
            max_tokens: config.max_output_tokens,
        }
    }
}

fn backend_reason(g: usize, e: &BackendError) -> String {
    match e {
        // Keep the "replay miss" prefix first so callers can match on it.
        BackendError::ReplayMiss { .. } => format!("{e} (segment {})", g + 1),
        _ => format!("segment {}: {e}", g + 1),
    }
}

/// Convenience wrapper: plan, builtin templates, default retrieval depth.
pub fn run_pipeline(
    id: &str,
    topic: &str,
    k: i64,
    retriever: &dyn Retriever,
    backend: &dyn ModelBackend,
    config: ModelConfig,
) -> GenerationRun {
    let templates = PromptTemplates::builtin();
    match make_plan(k) {
        Ok(plan) => Pipeline::new(backend, retriever, &templates).run(id, topic, plan, config),
        Err(e) => {
            let plan = SegmentPlan { k: 0, groups: Vec::new() };
            let mut run = GenerationRun::new(id, topic, plan, config);
            run.fail(e.to_string());
            run
        }
    }
}

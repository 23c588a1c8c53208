//! Segmented lesson generation: plans, prompt chaining, model backends,
//! structured-output parsing with a bounded repair loop, and run transcripts.

pub mod backend;
mod config;
mod parse;
mod plan;
mod prompt;
mod run;
mod templates;

pub use config::{ModelConfig, DEFAULT_MODEL_ID};
pub use parse::{parse_structured_output, RepairKind, RepairableError};
pub use plan::{make_plan, PlanError, SegmentPlan, SegmentSpec};
pub use prompt::{assemble_prompt, retrieval_query, BlockSource, ChainError, ContextBlock, PromptBundle};
pub use run::{
    lesson_id_for, run_pipeline, Attempt, GenerationRun, Pipeline, RunStatus, SegmentTranscript,
    DEFAULT_RETRIEVAL_K,
};
pub use templates::{fill, PromptTemplates, TemplateError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::plan::SegmentPlan;
use super::templates::{fill, PromptTemplates};
use crate::corpus::RetrievalHit;
use crate::lesson::{render_section_text, Section, SectionKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockSource {
    PriorSegment,
    Retrieval,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextBlock {
    pub label: String,
    pub source: BlockSource,
    pub text: String,
}

/// Everything sent to the model for one segment, before any repair suffix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_text: String,
    pub user_text: String,
    /// Prior-segment renderings first, in segment order, then retrieval excerpts.
    pub context_blocks: Vec<ContextBlock>,
}

impl PromptBundle {
    pub fn prior_blocks(&self) -> impl Iterator<Item = &ContextBlock> {
        self.context_blocks
            .iter()
            .filter(|b| b.source == BlockSource::PriorSegment)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChainError {
    #[error("group index {index} out of range for a {groups}-group plan")]
    GroupOutOfRange { index: usize, groups: usize },
    #[error("prior segment content does not match the plan: expected [{expected}], got [{found}]")]
    MissingPriorSegment { expected: String, found: String },
}

fn kinds_label(kinds: &[SectionKind]) -> String {
    kinds.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(", ")
}

/// Builds the prompt for `group_index`, chaining every earlier section.
///
/// `prior_sections` must hold exactly the sections of groups before
/// `group_index`, in plan order.
pub fn assemble_prompt(
    templates: &PromptTemplates,
    topic: &str,
    plan: &SegmentPlan,
    group_index: usize,
    prior_sections: &[Section],
    hits: &[RetrievalHit],
) -> Result<PromptBundle, ChainError> {
    let group = plan.groups.get(group_index).ok_or(ChainError::GroupOutOfRange {
        index: group_index,
        groups: plan.groups.len(),
    })?;
    let expected = plan.kinds_before(group_index);
    let found: Vec<SectionKind> = prior_sections.iter().map(Section::kind).collect();
    if expected != found {
        return Err(ChainError::MissingPriorSegment {
            expected: kinds_label(&expected),
            found: kinds_label(&found),
        });
    }

    let mut blocks = Vec::new();
    let mut remaining = prior_sections;
    for (gi, g) in plan.groups[..group_index].iter().enumerate() {
        let (mine, rest) = remaining.split_at(g.sections.len());
        remaining = rest;
        let text = mine
            .iter()
            .map(render_section_text)
            .collect::<Vec<_>>()
            .join("\n");
        blocks.push(ContextBlock {
            label: format!("Segment {}: {}", gi + 1, g.label()),
            source: BlockSource::PriorSegment,
            text,
        });
    }
    for (i, h) in hits.iter().enumerate() {
        blocks.push(ContextBlock {
            label: format!("Excerpt {}: {}#{} (score {:.4})", i + 1, h.doc_id, h.ordinal, h.score),
            source: BlockSource::Retrieval,
            text: h.text.clone(),
        });
    }

    let join = |source: BlockSource| {
        let parts: Vec<String> = blocks
            .iter()
            .filter(|b| b.source == source)
            .map(|b| format!("[{}]\n{}", b.label, b.text.trim_end()))
            .collect();
        if parts.is_empty() {
            "(none)".to_owned()
        } else {
            parts.join("\n\n")
        }
    };
    let prior_context = join(BlockSource::PriorSegment);
    let retrieved = join(BlockSource::Retrieval);

    let mut target = format!("Target sections: {}\n", group.label());
    target.push_str(&templates.output_format);
    for kind in &group.sections {
        target.push_str(templates.section_requirements(*kind));
    }
    let target = target.trim_end().to_owned();

    let user_text = fill(
        &templates.segment,
        &[
            ("topic", topic),
            ("target_sections", &target),
            ("prior_context", &prior_context),
            ("retrieved", &retrieved),
        ],
    );
    Ok(PromptBundle {
        system_text: templates.system.clone(),
        user_text,
        context_blocks: blocks,
    })
}

/// Retrieval query for a group: topic plus a role keyword per section.
pub fn retrieval_query(topic: &str, kinds: &[SectionKind]) -> String {
    let mut q = topic.to_owned();
    for k in kinds {
        q.push(' ');
        q.push_str(match k {
            SectionKind::TitlePage => "learning objectives and key focus areas",
            SectionKind::ScenarioOne => "realistic tutoring scenario and student behavior",
            SectionKind::Instruction => "evidence-based strategy recommendations",
            SectionKind::ScenarioTwo => "applying the strategy in a different tutoring situation",
            SectionKind::Conclusion => "summary of key concepts and references",
        });
    }
    q
}

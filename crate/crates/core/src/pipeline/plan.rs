use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lesson::SectionKind;
use SectionKind::*;

/// Sections generated together by one model call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SegmentSpec {
    pub sections: Vec<SectionKind>,
}

impl SegmentSpec {
    fn of(sections: &[SectionKind]) -> SegmentSpec {
        SegmentSpec {
            sections: sections.to_vec(),
        }
    }

    /// Comma-separated wire names, e.g. `title_page, scenario_one`.
    pub fn label(&self) -> String {
        self.sections
            .iter()
            .map(|k| k.as_str())
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// Partition of the five sections into `k` contiguous generation groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentPlan {
    pub k: u8,
    pub groups: Vec<SegmentSpec>,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("segment count must be between 1 and 5, got {0}")]
pub struct PlanError(pub i64);

/// Builds the grouping for a `k`-segment strategy.
///
/// | k | groups |
/// |---|--------|
/// | 1 | all five sections |
/// | 2 | title + Scenario I, then the rest |
/// | 3 | title + Scenario I, Instruction, Scenario II + Conclusion |
/// | 4 | title, Scenario I, Instruction, Scenario II + Conclusion |
/// | 5 | one section per group |
pub fn make_plan(k: i64) -> Result<SegmentPlan, PlanError> {
    let groups: Vec<SegmentSpec> = match k {
        1 => vec![SegmentSpec::of(&SectionKind::ALL)],
        2 => vec![
            SegmentSpec::of(&[TitlePage, ScenarioOne]),
            SegmentSpec::of(&[Instruction, ScenarioTwo, Conclusion]),
        ],
        3 => vec![
            SegmentSpec::of(&[TitlePage, ScenarioOne]),
            SegmentSpec::of(&[Instruction]),
            SegmentSpec::of(&[ScenarioTwo, Conclusion]),
        ],
        4 => vec![
            SegmentSpec::of(&[TitlePage]),
            SegmentSpec::of(&[ScenarioOne]),
            SegmentSpec::of(&[Instruction]),
            SegmentSpec::of(&[ScenarioTwo, Conclusion]),
        ],
        5 => SectionKind::ALL.iter().map(|k| SegmentSpec::of(&[*k])).collect(),
        other => return Err(PlanError(other)),
    };
    Ok(SegmentPlan { k: k as u8, groups })
}

impl SegmentPlan {
    /// Index of the group that generates `kind`.
    pub fn group_of(&self, kind: SectionKind) -> usize {
        self.groups
            .iter()
            .position(|g| g.sections.contains(&kind))
            .expect("plans cover every section kind")
    }

    /// Section kinds generated before `group_index`, in order.
    pub fn kinds_before(&self, group_index: usize) -> Vec<SectionKind> {
        self.groups[..group_index.min(self.groups.len())]
            .iter()
            .flat_map(|g| g.sections.iter().copied())
            .collect()
    }
}

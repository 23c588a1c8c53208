//! Segmented, retrieval-grounded generation of scenario-based tutor-training
//! lessons, plus the rubric workflow used to rate them.

pub mod canonical;
pub mod corpus;
pub mod evaluation;
pub mod fsutil;
pub mod lesson;
pub mod pipeline;
pub mod store;
pub mod wire;

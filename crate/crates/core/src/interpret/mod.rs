//! Meta-path importance from type-level attention: global scores from mean
//! attention distributions and exact per-object scores.

mod global;
mod per_object;
mod report;
mod summary;

pub use global::{
    enumerate_choice_sequences, meta_path_of, score_meta_paths, Choice, ChoiceSequence,
    Contributor, MetaPathScore,
};
pub use per_object::{per_object_scores, PerObjectScores, DEFAULT_BUDGET};
pub use report::{path_label, ExplainReport, ObjectReport, PathScore};
pub use summary::{summarize_attention, AttentionSummary, SummaryRow};

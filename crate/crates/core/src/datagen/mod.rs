//! Synthetic heterogeneous networks with labels planted along a meta-path,
//! split generation and random features.

mod generate;
mod spec;
mod splits;

pub use generate::{generate, generate_with_truth, power_law_degrees, random_features, Generated};
pub use spec::{GenSpec, RelationSpec, DBLP_SCALES};
pub use splits::{make_splits, with_random_splits};

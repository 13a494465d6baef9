//! Typed heterogeneous information networks.

mod graph;
pub mod io;
mod schema;
mod sparse;

pub use graph::{validate_graph, GraphParts, HinGraph, Split, Violation, ViolationKind};
pub use schema::{RelId, Schema, SchemaFile, TypeId};
pub use sparse::SparseAdj;

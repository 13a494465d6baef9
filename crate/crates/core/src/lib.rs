//! Heterogeneous graph convolution over typed information networks.
//!
//! Each layer holds one block per object type. A block projects the
//! representations of its own objects and of every neighbor type into a
//! common space, averages neighbors through row-normalized adjacency
//! matrices, and fuses the per-type results with a type-level attention
//! whose coefficients form a probability distribution per object. Chaining
//! those distributions across layers yields importance scores for every
//! meta-path shorter than the model depth ([`interpret`]).
//!
//! Crate layout:
//!
//! - [`hin`]: schema, sparse adjacency, graph container and on-disk layout.
//! - [`numerics`]: dense matrices, data-parallel kernels, a closed-world
//!   reverse-mode tape and a finite-difference gradient checker.
//! - [`model`]: blocks, the multi-layer forward pass, checkpoints and the
//!   augmented-adjacency equivalence check.
//! - [`training`]: cross-entropy objective, Adam, metrics and the fit loop.
//! - [`interpret`]: global and per-object meta-path scoring.
//! - [`datagen`]: synthetic networks with planted meta-path labels.
//! - [`bench`]: epoch-time sweep over graph sizes.
//!
//! Kernels run on rayon when the `parallel` feature is enabled (the
//! default) and fall back to the sequential implementations otherwise.

pub mod bench;
pub mod datagen;
pub mod error;
pub mod hin;
pub mod interpret;
pub mod io_util;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
pub use hin::{HinGraph, Schema, SparseAdj};
pub use numerics::Matrix;

//! Dense matrices, kernels and the reverse-mode tape.

pub mod gradcheck;
pub mod init;
pub mod kernels;
mod matrix;
pub mod tape;

pub use gradcheck::{gradcheck, GradcheckReport};
pub use init::{dropout_mask, xavier_uniform};
pub use matrix::Matrix;
pub use tape::{Gradients, Tape, Var};

//! The heterogeneous convolution layer and the multi-layer model.

pub mod checkpoint;
mod forward;
mod layer;
mod params;
pub mod spectral;

pub use forward::{eval_forward, forward, AttentionRecords, ForwardOutput, Mode};
pub use layer::{hetero_conv, project, type_attention, BlockOutput};
pub use params::{layer_dims, BlockParams, BlockVars, ModelConfig, ModelParams, ParamVars};
pub use spectral::spectral_equivalence_check;

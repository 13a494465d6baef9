//! Semi-supervised objective, optimizer, training loop and metrics.

mod adam;
mod check;
mod config;
mod fit;
mod loss;
mod metrics;

pub use adam::AdamState;
pub use check::gradcheck_model;
pub use config::TrainConfig;
pub use fit::{evaluate, fit, fit_with, init_params, EpochRecord, FitResult, Trainer};
pub use loss::{cross_entropy_loss, LabeledSet};
pub use metrics::{classification_metrics, Metrics};

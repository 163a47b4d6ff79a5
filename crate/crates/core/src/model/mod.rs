//! Model families assembled from propagation and transformation operators,
//! plus the full-batch training loop.

mod config;
mod network;
mod train;

pub use config::{Architecture, ModelConfig, Precision, SkipKind};
pub use network::{Forward, Mode, Model, ParamKind, ParamSpec, Prepared};
pub use train::{
    first_layer_gradient_probe, fit, model_gradient_check, train, train_model, EpochMetrics, EpochTiming, TrainReport,
};

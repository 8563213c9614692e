//! From-scratch differentiable quantile forecasters: a feed-forward MLP, an
//! LSTM-plus-feed-forward network and two encoder-decoder variants, trained
//! by minimizing the Huber-smoothed multi-output quantile loss.

mod layers;
mod model;
mod spec;
mod train;

pub use layers::{Activation, Dense, DenseGrad, LstmCell, LstmGrad};
pub use model::{LayersMut, NetGrads, NeuralNet};
pub use spec::{Architecture, LayerKind, LayerSpec, ModelSpec};
pub use train::{adam_step, train, AdamState, TrainConfig, TrainResult};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NeuralError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
    #[error("training requires a non-empty sample set")]
    EmptySampleSet,
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    DivergenceDetected { epoch: usize },
}

//! Single-hidden-layer LSTM regressor with an output projection, trained by
//! backpropagation through time and rmsprop on an MSE loss.

mod cell;
mod checkpoint;
mod optim;
mod params;
mod train;

pub use cell::{backward, cell_step, forward, mse_loss, CellState, ForwardPass, StepCache};
pub use checkpoint::{LstmCheckpoint, NamedTensor};
pub use optim::{clip_global_norm, rmsprop_step, RmsPropState};
pub use params::{init_params, Dims, LstmGradients, LstmParams, TENSOR_NAMES};
pub use train::{predict, train, EpochLoss, TrainConfig, TrainOutcome};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LstmError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("empty input sequence")]
    EmptySequence,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty dataset: {0}")]
    EmptyDataset(&'static str),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("checkpoint dimensions {found:?} do not match expected {expected:?}")]
    DimensionMismatch { expected: Dims, found: Dims },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, LstmError>;

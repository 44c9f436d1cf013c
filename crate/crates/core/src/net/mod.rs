//! Minimal dense and recurrent network kernel with reverse-mode gradients.

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod optim;
pub mod tensor;

use thiserror::Error;

pub use checkpoint::Checkpoint;
pub use layers::{Activation, Dense, Gru, HasParams, Lstm, Param};
pub use optim::{lr_schedule, Adam, StepDecay};
pub use tensor::Tensor2;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: (usize, usize), got: (usize, usize) },
    #[error("backward called before a forward pass")]
    GraphNotEvaluated,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[cfg(test)]
mod tests;

//! Learned push dynamics: history windows, networks, training, evaluation
//! and rollouts.

pub mod eval;
pub mod model;
pub mod rollout;
pub mod train;
pub mod window;

pub use eval::{evaluate, ErrorStats, EvalReport, MotionPredictor};
pub use model::{Architecture, DynNet, DynamicsModel, Normalizer, HIDDEN};
pub use rollout::{integrate, rollout, rollout_batch, RoMode, RolloutStep};
pub use train::{train, train_windows, EpochLog, TrainConfig, TrainError, TrainLog};
pub use window::{HistoryContext, HistoryWindow, PushAction, Triple, FEATURES_PER_STEP};

#[cfg(test)]
mod tests;

//! Character-level LSTM trained jointly with a handcrafted-feature layer.
//!
//! Everything runs in `f64` on the CPU; backpropagation through time is
//! written out by hand and checked against finite differences.

mod alphabet;
mod model;
mod train;

use thiserror::Error;

pub use alphabet::{encode_chars, CharAlphabet};
pub use model::{JointModel, Layout};
pub use train::{
    gradient_check, train_joint, EpochRecord, JointConfig, ParamGroup, TrainingHistory,
    HIDDEN_RANGE,
};

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("invalid neural configuration: {0}")]
    Config(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("texts, feature rows and labels differ in length")]
    LengthMismatch,
    #[error("model expects {expected} handcrafted features, got {found}")]
    SchemaMismatch { expected: usize, found: usize },
    #[error("corrupt model: {0}")]
    Corrupt(String),
    #[error("model JSON: {0}")]
    Json(#[from] serde_json::Error),
}

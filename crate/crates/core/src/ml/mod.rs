//! Logistic regression, standardization and information-gain selection.

mod infogain;
mod logistic;
mod standardize;

use thiserror::Error;

use crate::features::FeatureSet;

pub use infogain::{
    default_k_per_set, discretize, information_gain, rank_by_information_gain,
    select_pedagogical_features, set_prefix, DEFAULT_BINS, RANKED_SETS,
};
pub use logistic::{
    logistic_gradient_check, relative_error, train_logistic, LinearModel, LogisticObjective,
    DEFAULT_L2, GRADIENT_TOLERANCE, MAX_ITERATIONS, N_LABELS,
};
pub(crate) use logistic::{argmax, softmax};
pub use standardize::Standardizer;

#[derive(Debug, Error)]
pub enum MlError {
    #[error("no training rows")]
    Empty,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("row {row} has {found} columns, expected {expected}")]
    RaggedRow { row: usize, expected: usize, found: usize },
    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },
    #[error("label ordinal {0} out of range")]
    BadLabel(usize),
    #[error("training labels contain a single class")]
    SingleLabel,
    #[error("l2 strength must be finite and non-negative, got {0}")]
    BadRegularization(f64),
    #[error("model expects {expected} features, got {found}")]
    SchemaMismatch { expected: usize, found: usize },
    #[error("feature set {0} is not ranked by information gain")]
    NotRankable(FeatureSet),
    #[error("feature {0:?} is missing")]
    MissingFeature(String),
    #[error("model JSON: {0}")]
    Json(#[from] serde_json::Error),
}

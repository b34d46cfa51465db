//! Agreement metrics, threshold search, significance tests and the
//! cross-validation driver.

mod cv;
mod metrics;
mod stats;
mod thresholds;

use thiserror::Error;

pub use cv::{
    build_folds, compare, cross_validate, render_coefficients, render_confusion, render_results_table,
    Coefficient, CvOptions, CvReport, EvalReport, Metadata, Significance,
};
pub use metrics::{interrater_agreement, quadratic_weighted_kappa, ConfusionMatrix};
pub use stats::{paired_t_test, TTestResult};
pub use thresholds::{apply_thresholds, search_thresholds, threshold_grid, ThresholdPair, DEFAULT_STEP};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("nothing to evaluate")]
    Empty,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("confusion matrix must be square with at least 2 labels")]
    NotSquare,
    #[error("label ordinal {0} out of range")]
    LabelOutOfRange(usize),
    #[error("degenerate marginals: kappa is undefined when one side uses a single label")]
    DegenerateMarginals,
    #[error("thresholds must satisfy 0 <= t1 <= t2 <= 1, got ({t1}, {t2})")]
    BadThresholds { t1: f64, t2: f64 },
    #[error("score out of range: {0} is not in [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("grid step must be in (0, 1], got {0}")]
    BadStep(f64),
    #[error("labels cover a single category")]
    SingleCategory,
    #[error("no threshold pair yields a defined kappa")]
    NoValidThresholds,
    #[error("paired t-test needs at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("degenerate differences: all paired differences are identical")]
    DegenerateDifferences,
}

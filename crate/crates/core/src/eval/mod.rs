//! Metrics, stratified splitting, significance testing and the two
//! experiment protocols (single-crisis ensemble and cross-crisis transfer).

mod experiment;
mod metrics;
mod report;
mod split;
mod stats;

use thiserror::Error;

pub use experiment::{
    run_rq1_experiment, run_rq1_with_embeddings, run_rq2_experiment, run_rq2_with_embeddings,
    ExperimentConfig, Rq1System, Rq2System,
};
pub use metrics::{compute_metrics, ConfusionCounts, MetricKind, Metrics};
pub use report::{EvalReport, Significance, SignificanceCell, SystemSummary, TrialResult};
pub use split::{stratified_folds, stratified_split, stratified_split_indices};
pub use stats::{
    ln_gamma, paired_t_test, regularized_incomplete_beta, student_t_sf, PairedTTest,
};

use crate::embedding::EmbeddingError;
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("confusion matrix is empty")]
    EmptyConfusion,
    #[error("split fraction must be in (0, 1), got {0}")]
    InvalidFraction(f64),
    #[error("both classes must be present")]
    MissingClass,
    #[error("need at least 2 folds, got {0}")]
    InvalidFolds(usize),
    #[error("each class needs at least {folds} members for {folds}-fold cross-validation")]
    TooFewForFolds { folds: usize },
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("paired t-test needs at least 2 pairs, got {0}")]
    TooFewSamples(usize),
    #[error("differences have zero variance; t statistic undefined")]
    DegenerateVariance,
    #[error("need at least 2 trials, got {0}")]
    TooFewTrials(usize),
    #[error("no systems to evaluate")]
    NoSystems,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

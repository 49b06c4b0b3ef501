//! Decision-tree classifier, confusion-matrix metrics and the subset
//! evaluator used as GA fitness and for final reporting.

mod evaluation;
mod metrics;
mod tree;

use thiserror::Error;

pub use evaluation::{
    evaluate_split, evaluate_subset, FitnessSpec, SubsetEvaluation, DEFAULT_SPLITS,
    DEFAULT_TEST_FRACTION,
};
pub use metrics::{compute_metrics, ConfusionMatrix, MetricsReport, METRIC_NAMES};
pub use tree::{gini, DecisionTree, Node};

#[derive(Debug, Error, PartialEq)]
pub enum ClassifierError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("feature subset is empty")]
    EmptySubset,
    #[error("feature {0} appears twice in the subset")]
    DuplicateFeature(usize),
    #[error("row has {found} values, tree expects {expected}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("feature index {index} out of range (m = {m})")]
    FeatureOutOfRange { index: usize, m: usize },
    #[error("sample index {index} out of range (n = {n})")]
    SampleOutOfRange { index: usize, n: usize },
    #[error("label vector length {labels} does not match matrix rows {n}")]
    LengthMismatch { labels: usize, n: usize },
    #[error("n_splits must be at least 1")]
    NoSplits,
    #[error("split: {0}")]
    Split(String),
}

impl From<crate::data::DataError> for ClassifierError {
    fn from(e: crate::data::DataError) -> Self {
        ClassifierError::Split(e.to_string())
    }
}

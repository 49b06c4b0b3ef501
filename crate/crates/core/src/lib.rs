//! Hybrid filter/wrapper feature selection for high-dimensional binary
//! classification data.
//!
//! The pipeline ranks features with the distance-based mutual congestion
//! score ([`rankers`]), clusters the best-ranked ones with KMeans and keeps one
//! random representative per cluster ([`feature_space`]), then searches that
//! space for a fixed-size subset with an adaptive-rate genetic algorithm
//! ([`gawar`]) whose fitness is the mean holdout accuracy of a CART decision
//! tree ([`classifier`]). [`pipeline`] wires the stages together and writes
//! reports.

pub mod classifier;
pub mod data;
pub mod feature_space;
pub mod gawar;
pub mod pipeline;
pub mod rankers;

pub use classifier::{compute_metrics, evaluate_subset, ConfusionMatrix, FitnessSpec, MetricsReport};
pub use data::{load_csv, stratified_split, FeatureMatrix, LabelVector, SplitPlan};
pub use feature_space::{build_feature_space, effective_q, kmeans, FeatureSpace};
pub use gawar::{GaConfig, GaOutcome, Individual};
pub use rankers::{rank_features, FeatureScore, Ranker};

//! Repeated stratified holdout evaluation of a feature subset.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, ConfusionMatrix, MetricsReport};
use super::tree::DecisionTree;
use super::ClassifierError;
use crate::data::{stratified_split, FeatureMatrix, LabelVector};

pub const DEFAULT_SPLITS: usize = 10;
pub const DEFAULT_TEST_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessSpec {
    pub subset: Vec<usize>,
    pub n_splits: usize,
    pub test_fraction: f64,
    pub base_seed: u64,
}

impl FitnessSpec {
    pub fn new(subset: Vec<usize>, base_seed: u64) -> Self {
        Self { subset, n_splits: DEFAULT_SPLITS, test_fraction: DEFAULT_TEST_FRACTION, base_seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetEvaluation {
    pub mean: MetricsReport,
    pub per_split: Vec<MetricsReport>,
}

fn validate(matrix: &FeatureMatrix, labels: &LabelVector, spec: &FitnessSpec) -> Result<(), ClassifierError> {
    if labels.len() != matrix.n_samples() {
        return Err(ClassifierError::LengthMismatch { labels: labels.len(), n: matrix.n_samples() });
    }
    if spec.subset.is_empty() {
        return Err(ClassifierError::EmptySubset);
    }
    if spec.n_splits == 0 {
        return Err(ClassifierError::NoSplits);
    }
    let mut seen = std::collections::HashSet::with_capacity(spec.subset.len());
    for &j in &spec.subset {
        if j >= matrix.n_features() {
            return Err(ClassifierError::FeatureOutOfRange { index: j, m: matrix.n_features() });
        }
        if !seen.insert(j) {
            return Err(ClassifierError::DuplicateFeature(j));
        }
    }
    Ok(())
}

/// One holdout round: fit on the train part, score on the test part.
pub fn evaluate_split(
    matrix: &FeatureMatrix,
    labels: &LabelVector,
    subset: &[usize],
    test_fraction: f64,
    seed: u64,
) -> Result<MetricsReport, ClassifierError> {
    let plan = stratified_split(labels, test_fraction, seed)?;
    let tree = DecisionTree::fit(matrix, labels, subset, &plan.train_indices)?;
    let cm = ConfusionMatrix::from_pairs(
        plan.test_indices
            .iter()
            .map(|&i| (labels.get(i), tree.predict_sample(matrix, subset, i))),
    );
    Ok(compute_metrics(&cm))
}

/// Split `k` uses seed `base_seed + k`. The mean is taken in split order, so
/// the result does not depend on how the rounds were scheduled.
pub fn evaluate_subset(
    matrix: &FeatureMatrix,
    labels: &LabelVector,
    spec: &FitnessSpec,
) -> Result<SubsetEvaluation, ClassifierError> {
    validate(matrix, labels, spec)?;
    let per_split = (0..spec.n_splits as u64)
        .into_par_iter()
        .map(|k| {
            evaluate_split(matrix, labels, &spec.subset, spec.test_fraction, spec.base_seed.wrapping_add(k))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SubsetEvaluation { mean: MetricsReport::mean(&per_split), per_split })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> (FeatureMatrix, LabelVector) {
        let rows: Vec<Vec<f64>> =
            (0..20).map(|i| vec![(i + 100 * (i / 10)) as f64, ((i * 7) % 5) as f64]).collect();
        let y: Vec<u8> = (0..20).map(|i| u8::from(i >= 10)).collect();
        (
            FeatureMatrix::from_rows_unnamed(&rows).unwrap(),
            LabelVector::new(y, ["neg".into(), "pos".into()]).unwrap(),
        )
    }

    #[test]
    fn separable_feature_is_perfect() {
        let (m, l) = separable();
        let spec = FitnessSpec { subset: vec![0], n_splits: 1, test_fraction: 0.2, base_seed: 3 };
        let e = evaluate_subset(&m, &l, &spec).unwrap();
        assert_eq!(e.mean.overall_accuracy, 1.0);
        assert_eq!(e.per_split.len(), 1);
    }

    #[test]
    fn deterministic() {
        let (m, l) = separable();
        let spec = FitnessSpec::new(vec![1, 0], 42);
        let a = evaluate_subset(&m, &l, &spec).unwrap();
        let b = evaluate_subset(&m, &l, &spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.per_split.len(), 10);
    }

    #[test]
    fn rejects_bad_specs() {
        let (m, l) = separable();
        let bad = |subset: Vec<usize>, n_splits| FitnessSpec { subset, n_splits, test_fraction: 0.2, base_seed: 0 };
        assert_eq!(evaluate_subset(&m, &l, &bad(vec![], 1)), Err(ClassifierError::EmptySubset));
        assert_eq!(evaluate_subset(&m, &l, &bad(vec![0, 0], 1)), Err(ClassifierError::DuplicateFeature(0)));
        assert!(matches!(
            evaluate_subset(&m, &l, &bad(vec![5], 1)),
            Err(ClassifierError::FeatureOutOfRange { .. })
        ));
        assert_eq!(evaluate_subset(&m, &l, &bad(vec![0], 0)), Err(ClassifierError::NoSplits));
    }
}

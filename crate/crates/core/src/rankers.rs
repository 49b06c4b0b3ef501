//! Frequency-based filter rankers.
//!
//! Both rankers sort a feature ascending, carry the labels along, and look at
//! the *mutual congestion region*: the span from the first appearance of the
//! class that does not open the sorted sequence to the last appearance of the
//! class that does. Labels interleave inside that span, so no single threshold
//! separates them there.
//!
//! * MC is the fraction of samples that fall inside the region.
//! * DMC weighs the samples by how far they sit from the region boundary,
//!   relative to the distance mass of the cleanly separated samples outside.
//!
//! Lower is better for both; a perfectly separable feature scores 0.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{FeatureMatrix, LabelVector};

/// Value used for a DMC component whose denominator is zero while its
/// numerator is positive (every sample of one class sits inside the region).
pub const DMC_ZERO_DENOMINATOR_PENALTY: f64 = 1e6;

#[derive(Debug, Error, PartialEq)]
pub enum RankError {
    #[error("feature index {index} out of range (m = {m})")]
    IndexOutOfRange { index: usize, m: usize },
    #[error("feature has a single class after sorting")]
    SingleClass,
    #[error("keep fraction must lie in (0, 1], got {0}")]
    InvalidKeepFraction(f64),
    #[error("label vector length {labels} does not match matrix rows {n}")]
    LengthMismatch { labels: usize, n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ranker {
    Dmc,
    Mc,
}

impl std::fmt::Display for Ranker {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Ranker::Dmc => "dmc",
            Ranker::Mc => "mc",
        })
    }
}

impl std::str::FromStr for Ranker {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dmc" => Ok(Ranker::Dmc),
            "mc" => Ok(Ranker::Mc),
            other => Err(format!("unknown ranker {other:?} (expected dmc or mc)")),
        }
    }
}

/// One feature's values sorted ascending with co-sorted labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedFeatureView {
    pub order: Vec<usize>,
    pub values: Vec<f64>,
    pub labels: Vec<u8>,
}

impl SortedFeatureView {
    /// Stable sort of raw values; ties keep their original row order.
    pub fn from_column(column: &[f64], labels: &[u8]) -> Self {
        let mut order: Vec<usize> = (0..column.len()).collect();
        order.sort_by(|&a, &b| column[a].total_cmp(&column[b]));
        let values = order.iter().map(|&i| column[i]).collect();
        let labels = order.iter().map(|&i| labels[i]).collect();
        Self { order, values, labels }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Bounds of the mutual congestion region in sorted order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CongestionRegion {
    /// Class at sorted position 0.
    pub x_class: u8,
    pub y_class: u8,
    /// First position holding `y_class`.
    pub start: usize,
    /// Last position holding `x_class`.
    pub end: usize,
    pub empty: bool,
}

impl CongestionRegion {
    pub fn contains(&self, pos: usize) -> bool {
        !self.empty && pos >= self.start && pos <= self.end
    }

    pub fn len(&self) -> usize {
        if self.empty {
            0
        } else {
            self.end - self.start + 1
        }
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub feature_index: usize,
    pub score: f64,
    pub ranker: Ranker,
}

pub fn sort_feature(
    matrix: &FeatureMatrix,
    labels: &LabelVector,
    j: usize,
) -> Result<SortedFeatureView, RankError> {
    if j >= matrix.n_features() {
        return Err(RankError::IndexOutOfRange { index: j, m: matrix.n_features() });
    }
    if labels.len() != matrix.n_samples() {
        return Err(RankError::LengthMismatch { labels: labels.len(), n: matrix.n_samples() });
    }
    Ok(SortedFeatureView::from_column(matrix.column(j), labels.as_slice()))
}

pub fn find_region(view: &SortedFeatureView) -> Result<CongestionRegion, RankError> {
    let x_class = *view.labels.first().ok_or(RankError::SingleClass)?;
    let start = view
        .labels
        .iter()
        .position(|&c| c != x_class)
        .ok_or(RankError::SingleClass)?;
    let y_class = view.labels[start];
    // position 0 holds x_class, so rposition always succeeds
    let end = view.labels.iter().rposition(|&c| c == x_class).unwrap_or(0);
    Ok(CongestionRegion { x_class, y_class, start, end, empty: end < start })
}

fn ratio(numerator: f64, denominator: f64) -> f64 {
    if numerator == 0.0 {
        0.0
    } else if denominator == 0.0 {
        DMC_ZERO_DENOMINATOR_PENALTY
    } else {
        numerator / denominator
    }
}

/// Distance-based mutual congestion score.
///
/// With `y_min` the value at `region.start` and `x_max` the value at
/// `region.end`:
///
/// ```text
/// DMC = sum_in(x)  |v - y_min| / sum_out(x) |v - y_min|
///     + sum_in(y)  |v - x_max| / sum_out(y) |v - x_max|
/// ```
pub fn dmc_score(view: &SortedFeatureView, region: &CongestionRegion) -> f64 {
    if region.empty {
        return 0.0;
    }
    let y_min = view.values[region.start];
    let x_max = view.values[region.end];
    let (mut x_in, mut x_out, mut y_in, mut y_out) = (0.0, 0.0, 0.0, 0.0);
    for (pos, (&v, &c)) in view.values.iter().zip(&view.labels).enumerate() {
        let inside = pos >= region.start && pos <= region.end;
        if c == region.x_class {
            let d = (v - y_min).abs();
            if inside {
                x_in += d;
            } else {
                x_out += d;
            }
        } else {
            let d = (v - x_max).abs();
            if inside {
                y_in += d;
            } else {
                y_out += d;
            }
        }
    }
    ratio(x_in, x_out) + ratio(y_in, y_out)
}

/// Mutual congestion score: fraction of samples inside the region.
pub fn mc_score(view: &SortedFeatureView, region: &CongestionRegion) -> f64 {
    region.len() as f64 / view.len() as f64
}

/// Scores one column with the chosen ranker.
pub fn score_column(column: &[f64], labels: &[u8], ranker: Ranker) -> Result<f64, RankError> {
    let view = SortedFeatureView::from_column(column, labels);
    let region = find_region(&view)?;
    Ok(match ranker {
        Ranker::Dmc => dmc_score(&view, &region),
        Ranker::Mc => mc_score(&view, &region),
    })
}

/// Scores every feature, sorted ascending by score (lower index on ties).
pub fn score_features(
    matrix: &FeatureMatrix,
    labels: &LabelVector,
    ranker: Ranker,
) -> Result<Vec<FeatureScore>, RankError> {
    if labels.len() != matrix.n_samples() {
        return Err(RankError::LengthMismatch { labels: labels.len(), n: matrix.n_samples() });
    }
    let mut scores = (0..matrix.n_features())
        .into_par_iter()
        .map(|j| {
            score_column(matrix.column(j), labels.as_slice(), ranker)
                .map(|score| FeatureScore { feature_index: j, score, ranker })
        })
        .collect::<Result<Vec<_>, _>>()?;
    scores.sort_by(|a, b| a.score.total_cmp(&b.score).then(a.feature_index.cmp(&b.feature_index)));
    Ok(scores)
}

/// `floor(keep_fraction * m)`, at least 1.
pub fn retained_count(m: usize, keep_fraction: f64) -> usize {
    // the epsilon absorbs products such as 0.29 * 100 = 28.999999999999996
    ((keep_fraction * m as f64 + 1e-9).floor() as usize).clamp(1, m.max(1))
}

/// Top `floor(keep_fraction * m)` features (minimum 1), best first.
pub fn rank_features(
    matrix: &FeatureMatrix,
    labels: &LabelVector,
    ranker: Ranker,
    keep_fraction: f64,
) -> Result<Vec<FeatureScore>, RankError> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(RankError::InvalidKeepFraction(keep_fraction));
    }
    let mut scores = score_features(matrix, labels, ranker)?;
    scores.truncate(retained_count(matrix.n_features(), keep_fraction));
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn figure_two() -> (Vec<f64>, Vec<u8>) {
        let values = vec![
            1.8, 2.3, 2.4, 2.45, 2.9, 3.0, 3.1, 3.15, 3.2, 3.25, 3.3, 4.0, 4.2, 5.2, 5.5, 5.9,
        ];
        let labels = vec![0, 0, 0, 0, 0, 1, 1, 0, 1, 0, 0, 1, 1, 1, 1, 1];
        (values, labels)
    }

    fn view(values: &[f64], labels: &[u8]) -> SortedFeatureView {
        SortedFeatureView::from_column(values, labels)
    }

    #[test]
    fn sorts_with_labels() {
        let v = view(&[3.0, 1.0, 2.0], &[1, 0, 1]);
        assert_eq!(v.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(v.labels, vec![0, 1, 1]);
        assert_eq!(v.order, vec![1, 2, 0]);
    }

    #[test]
    fn stable_on_ties() {
        let v = view(&[5.0, 5.0, 5.0], &[0, 1, 0]);
        assert_eq!(v.labels, vec![0, 1, 0]);
        assert_eq!(v.order, vec![0, 1, 2]);
    }

    #[test]
    fn figure_two_region_and_scores() {
        let (values, labels) = figure_two();
        // feed it shuffled to exercise the sort
        let perm = [9, 3, 15, 0, 7, 12, 5, 1, 14, 10, 2, 6, 13, 4, 11, 8];
        let col: Vec<f64> = perm.iter().map(|&i| values[i]).collect();
        let lab: Vec<u8> = perm.iter().map(|&i| labels[i]).collect();
        let v = view(&col, &lab);
        assert_eq!(v.values, values);
        assert_eq!(v.labels, labels);
        let r = find_region(&v).unwrap();
        assert_eq!((r.start, r.end, r.empty), (5, 10, false));
        let inside: Vec<u8> = (r.start..=r.end).map(|p| v.labels[p]).collect();
        assert_eq!(inside.iter().filter(|&&c| c == 1).count(), 3);
        assert_eq!(inside.iter().filter(|&&c| c == 0).count(), 3);
        let dmc = dmc_score(&v, &r);
        assert!((dmc - (0.7 / 3.15 + 0.6 / 8.3)).abs() < 1e-12, "{dmc}");
        assert!((dmc - 0.2945).abs() < 1e-3);
        assert_eq!(mc_score(&v, &r), 0.375);
    }

    #[test]
    fn separable_region_is_empty() {
        let v = view(&[1.0, 2.0, 3.0, 4.0], &[0, 0, 1, 1]);
        let r = find_region(&v).unwrap();
        assert!(r.empty);
        assert_eq!(dmc_score(&v, &r), 0.0);
        assert_eq!(mc_score(&v, &r), 0.0);
    }

    #[test]
    fn swapped_roles() {
        let v = view(&[1.0, 2.0, 3.0, 4.0], &[1, 0, 0, 1]);
        let r = find_region(&v).unwrap();
        assert_eq!((r.x_class, r.y_class, r.start, r.end), (1, 0, 1, 3));
        assert_eq!(r.len(), 3);
    }

    #[test]
    fn interleaved_fills_region() {
        let v = view(&[1.0, 2.0, 3.0, 4.0], &[0, 1, 0, 1]);
        let r = find_region(&v).unwrap();
        // region spans 1..=2; MC counts only that span
        assert_eq!((r.start, r.end), (1, 2));
        assert_eq!(mc_score(&v, &r), 0.5);
    }

    #[test]
    fn zero_denominator_penalty() {
        // every x sample ends up inside the region except position 0 which sits at y_min
        let v = view(&[1.0, 1.0, 2.0, 3.0], &[0, 1, 0, 1]);
        let r = find_region(&v).unwrap();
        let s = dmc_score(&v, &r);
        assert!(s >= DMC_ZERO_DENOMINATOR_PENALTY);
    }

    #[test]
    fn single_class_errors() {
        let v = view(&[1.0, 2.0], &[1, 1]);
        assert_eq!(find_region(&v), Err(RankError::SingleClass));
    }

    #[test]
    fn retained_count_rule() {
        assert_eq!(retained_count(2000, 0.05), 100);
        assert_eq!(retained_count(7129, 0.05), 356);
        assert_eq!(retained_count(10, 0.05), 1);
        assert_eq!(retained_count(100, 0.29), 29);
        assert_eq!(retained_count(20, 1.0), 20);
    }

    #[test]
    fn separable_feature_ranks_first() {
        let rows = vec![
            vec![0.3, 9.0, 1.0],
            vec![0.1, 1.0, 2.0],
            vec![0.2, 8.0, 3.0],
            vec![0.4, 2.0, 4.0],
        ];
        let m = FeatureMatrix::from_rows_unnamed(&rows).unwrap();
        let l = LabelVector::new(vec![0, 1, 0, 1], ["a".into(), "b".into()]).unwrap();
        let ranked = rank_features(&m, &l, Ranker::Dmc, 1.0).unwrap();
        assert_eq!(ranked[0].feature_index, 1);
        assert_eq!(ranked[0].score, 0.0);
        assert!(rank_features(&m, &l, Ranker::Mc, 0.0).is_err());
        assert!(matches!(sort_feature(&m, &l, 3), Err(RankError::IndexOutOfRange { .. })));
    }
}

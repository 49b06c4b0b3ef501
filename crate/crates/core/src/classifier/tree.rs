//! CART decision tree with Gini impurity and no depth limit.
//!
//! Split quality is compared in exact integer arithmetic. For two classes the
//! weighted child impurity of a split is
//! `n - (l0² + l1²)/nl - (r0² + r1²)/nr` (up to a factor `1/n`), so ranking
//! splits only needs the purity term `(l0² + l1²)/nl + (r0² + r1²)/nr`, which
//! is a ratio of integers. Equal splits therefore tie exactly and the
//! tie-break (earlier feature, lower threshold) is deterministic.
//!
//! Gini gain is never negative, and an impure node is split whenever any
//! threshold separates its samples, zero-gain splits included. Training rows
//! that are distinct as vectors are therefore always fit exactly.

use serde::{Deserialize, Serialize};

use super::ClassifierError;
use crate::data::{FeatureMatrix, LabelVector};

/// Gini impurity `1 - sum p_c^2`; 0 for an empty node.
pub fn gini(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        /// Position within the feature subset the tree was trained on.
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        class: u8,
        counts: [usize; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    width: usize,
}

/// Purity term as the exact fraction `num / den`.
#[derive(Debug, Clone, Copy)]
struct Purity {
    num: u128,
    den: u128,
}

impl Purity {
    fn of_split(left: [usize; 2], right: [usize; 2]) -> Self {
        let sq = |c: [usize; 2]| (c[0] * c[0] + c[1] * c[1]) as u128;
        let nl = (left[0] + left[1]) as u128;
        let nr = (right[0] + right[1]) as u128;
        Self { num: sq(left) * nr + sq(right) * nl, den: nl * nr }
    }

    fn greater_than(self, other: Purity) -> bool {
        self.num * other.den > other.num * self.den
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    purity: Purity,
}

impl DecisionTree {
    /// Fits on `train` rows using only the columns listed in `subset`.
    pub fn fit(
        matrix: &FeatureMatrix,
        labels: &LabelVector,
        subset: &[usize],
        train: &[usize],
    ) -> Result<Self, ClassifierError> {
        if train.is_empty() {
            return Err(ClassifierError::EmptyTrainingSet);
        }
        if let Some(&bad) = subset.iter().find(|&&j| j >= matrix.n_features()) {
            return Err(ClassifierError::FeatureOutOfRange { index: bad, m: matrix.n_features() });
        }
        if let Some(&bad) = train.iter().find(|&&i| i >= matrix.n_samples()) {
            return Err(ClassifierError::SampleOutOfRange { index: bad, n: matrix.n_samples() });
        }
        let columns: Vec<&[f64]> = subset.iter().map(|&j| matrix.column(j)).collect();
        let mut tree = Self { nodes: Vec::new(), width: subset.len() };
        let mut samples = train.to_vec();
        tree.grow(&columns, labels.as_slice(), &mut samples);
        Ok(tree)
    }

    fn grow(&mut self, columns: &[&[f64]], labels: &[u8], samples: &mut [usize]) -> usize {
        let mut counts = [0usize; 2];
        for &i in samples.iter() {
            counts[labels[i] as usize] += 1;
        }
        let id = self.nodes.len();
        let leaf = Node::Leaf { class: u8::from(counts[1] > counts[0]), counts };
        self.nodes.push(leaf);
        if samples.len() < 2 || counts[0] == 0 || counts[1] == 0 {
            return id;
        }
        let Some(best) = best_split(columns, labels, samples, counts) else {
            return id;
        };
        let column = columns[best.feature];
        let mid = partition(samples, |i| column[i] <= best.threshold);
        let (left_samples, right_samples) = samples.split_at_mut(mid);
        let left = self.grow(columns, labels, left_samples);
        let right = self.grow(columns, labels, right_samples);
        self.nodes[id] = Node::Split { feature: best.feature, threshold: best.threshold, left, right };
        id
    }

    pub fn predict(&self, row: &[f64]) -> Result<u8, ClassifierError> {
        if row.len() != self.width {
            return Err(ClassifierError::WidthMismatch { expected: self.width, found: row.len() });
        }
        Ok(self.route(|f| row[f]))
    }

    /// Predicts sample `i` of `matrix`, reading the same subset used for fitting.
    pub fn predict_sample(&self, matrix: &FeatureMatrix, subset: &[usize], i: usize) -> u8 {
        self.route(|f| matrix.value(i, subset[f]))
    }

    fn route(&self, value: impl Fn(usize) -> f64) -> u8 {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf { class, .. } => return class,
                Node::Split { feature, threshold, left, right } => {
                    id = if value(feature) <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// In-place partition; returns the size of the `true` side.
fn partition(samples: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let mut k = 0;
    for idx in 0..samples.len() {
        if pred(samples[idx]) {
            samples.swap(k, idx);
            k += 1;
        }
    }
    // keep both halves in ascending sample order so the tree does not depend
    // on the swap pattern
    samples[..k].sort_unstable();
    samples[k..].sort_unstable();
    k
}

fn best_split(
    columns: &[&[f64]],
    labels: &[u8],
    samples: &[usize],
    counts: [usize; 2],
) -> Option<Candidate> {
    let mut best: Option<Candidate> = None;
    let mut order: Vec<usize> = samples.to_vec();
    for (f, column) in columns.iter().enumerate() {
        order.copy_from_slice(samples);
        order.sort_by(|&a, &b| column[a].total_cmp(&column[b]));
        let mut left = [0usize; 2];
        for k in 0..order.len() - 1 {
            left[labels[order[k]] as usize] += 1;
            let lo = column[order[k]];
            let hi = column[order[k + 1]];
            if lo == hi {
                continue;
            }
            let right = [counts[0] - left[0], counts[1] - left[1]];
            let purity = Purity::of_split(left, right);
            let better = match &best {
                None => true,
                Some(b) => purity.greater_than(b.purity),
            };
            if better {
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(Candidate { feature: f, threshold, purity });
            }
        }
    }
    best
}

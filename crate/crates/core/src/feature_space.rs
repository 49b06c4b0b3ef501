//! Feature-space construction: KMeans over the retained features, then one
//! randomly drawn representative per cluster.

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::FeatureMatrix;

pub const DEFAULT_Q: usize = 100;
pub const DEFAULT_MAX_ITERS: usize = 300;
pub const DEFAULT_TOL: f64 = 1e-4;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("cannot form {q} clusters from {points} points")]
    TooFewPoints { q: usize, points: usize },
    #[error("cluster {0} has no members")]
    EmptyCluster(usize),
    #[error("feature index {index} out of range (m = {m})")]
    IndexOutOfRange { index: usize, m: usize },
    #[error("assignment has {assignment} entries but {sources} source indices were given")]
    LengthMismatch { assignment: usize, sources: usize },
}

/// Retained feature columns as points in sample space, min-max normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePointSet {
    pub points: Vec<Vec<f64>>,
    pub source_indices: Vec<usize>,
}

impl FeaturePointSet {
    /// Each feature column is scaled into `[0, 1]`; constant columns become zeros.
    pub fn from_matrix(matrix: &FeatureMatrix, source_indices: &[usize]) -> Result<Self, ClusterError> {
        let points = source_indices
            .iter()
            .map(|&j| {
                if j >= matrix.n_features() {
                    return Err(ClusterError::IndexOutOfRange { index: j, m: matrix.n_features() });
                }
                Ok(min_max(matrix.column(j)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { points, source_indices: source_indices.to_vec() })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn min_max(column: &[f64]) -> Vec<f64> {
    let lo = column.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if span > 0.0 {
        column.iter().map(|v| ((v - lo) / span).clamp(0.0, 1.0)).collect()
    } else {
        vec![0.0; column.len()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub q: usize,
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Inertia after each Lloyd iteration.
    pub inertia_trace: Vec<f64>,
    pub iterations: usize,
}

impl Clustering {
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c == cluster)
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace {
    /// One original feature index per cluster, ordered by cluster id.
    pub indices: Vec<usize>,
    pub seed: u64,
}

impl FeatureSpace {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, feature: usize) -> bool {
        self.indices.contains(&feature)
    }
}

pub fn effective_q(retained: usize, requested_q: usize) -> usize {
    requested_q.min(retained)
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn kmeans_plus_plus(points: &[Vec<f64>], q: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut chosen = vec![false; points.len()];
    let first = rng.gen_range(0..points.len());
    chosen[first] = true;
    let mut centroids = vec![points[first].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[first])).collect();
    while centroids.len() < q {
        let total: f64 = d2.iter().zip(&chosen).filter(|(_, &c)| !c).map(|(d, _)| d).sum();
        let next = if total > 0.0 {
            let weights = d2.iter().zip(&chosen).map(|(&d, &c)| if c { 0.0 } else { d });
            WeightedIndex::new(weights)
                .map(|w| w.sample(rng))
                .unwrap_or_else(|_| first_unchosen(&chosen))
        } else {
            // all remaining points coincide with a centroid
            let free: Vec<usize> = (0..points.len()).filter(|&i| !chosen[i]).collect();
            free[rng.gen_range(0..free.len())]
        };
        chosen[next] = true;
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &points[next]));
        }
        centroids.push(points[next].clone());
    }
    centroids
}

fn first_unchosen(chosen: &[bool]) -> usize {
    chosen.iter().position(|&c| !c).unwrap_or(0)
}

/// Moves the point farthest from its centroid into each empty cluster.
/// Donor clusters must keep at least one member.
fn repair_empty(
    points: &[Vec<f64>],
    assignment: &mut [usize],
    centroids: &mut [Vec<f64>],
) {
    let q = centroids.len();
    let mut sizes = vec![0usize; q];
    for &c in assignment.iter() {
        sizes[c] += 1;
    }
    for empty in 0..q {
        if sizes[empty] != 0 {
            continue;
        }
        let mut donor: Option<(usize, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            let c = assignment[i];
            if sizes[c] < 2 {
                continue;
            }
            let d = sq_dist(p, &centroids[c]);
            if donor.is_none_or(|(_, best)| d > best) {
                donor = Some((i, d));
            }
        }
        if let Some((i, _)) = donor {
            sizes[assignment[i]] -= 1;
            assignment[i] = empty;
            sizes[empty] = 1;
            centroids[empty] = points[i].clone();
        }
    }
}

fn update_centroids(points: &[Vec<f64>], assignment: &[usize], centroids: &mut [Vec<f64>]) {
    let dim = points[0].len();
    let q = centroids.len();
    let mut sums = vec![vec![0.0; dim]; q];
    let mut counts = vec![0usize; q];
    for (p, &c) in points.iter().zip(assignment) {
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(p) {
            *s += v;
        }
    }
    for ((centroid, sum), &count) in centroids.iter_mut().zip(sums).zip(&counts) {
        if count > 0 {
            *centroid = sum.into_iter().map(|s| s / count as f64).collect();
        }
    }
}

fn inertia(points: &[Vec<f64>], assignment: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points.iter().zip(assignment).map(|(p, &c)| sq_dist(p, &centroids[c])).sum()
}

/// Lloyd's algorithm from k-means++ seeding.
///
/// Iterates assign -> repair empty clusters -> recompute means until the
/// largest centroid shift drops below `tol` or `max_iters` is reached.
pub fn kmeans(
    points: &FeaturePointSet,
    q: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<Clustering, ClusterError> {
    let data = &points.points;
    if q == 0 || q > data.len() {
        return Err(ClusterError::TooFewPoints { q, points: data.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_plus_plus(data, q, &mut rng);
    let mut assignment = vec![0usize; data.len()];
    let mut trace = Vec::new();
    let mut iterations = 0;
    for _ in 0..max_iters.max(1) {
        iterations += 1;
        assignment = data.par_iter().map(|p| nearest(p, &centroids).0).collect();
        repair_empty(data, &mut assignment, &mut centroids);
        let previous = centroids.clone();
        update_centroids(data, &assignment, &mut centroids);
        trace.push(inertia(data, &assignment, &centroids));
        let shift = previous
            .iter()
            .zip(&centroids)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        if shift < tol {
            break;
        }
    }
    let total = inertia(data, &assignment, &centroids);
    Ok(Clustering { q, assignment, centroids, inertia: total, inertia_trace: trace, iterations })
}

/// Best of `restarts` KMeans runs (lowest inertia, earliest run on ties).
pub fn kmeans_restarts(
    points: &FeaturePointSet,
    q: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
    restarts: usize,
) -> Result<Clustering, ClusterError> {
    let mut best: Option<Clustering> = None;
    for r in 0..restarts.max(1) as u64 {
        let c = kmeans(points, q, seed.wrapping_add(r), max_iters, tol)?;
        if best.as_ref().is_none_or(|b| c.inertia < b.inertia) {
            best = Some(c);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Draws one member of every cluster uniformly at random.
pub fn build_feature_space(
    clustering: &Clustering,
    source_indices: &[usize],
    seed: u64,
) -> Result<FeatureSpace, ClusterError> {
    if clustering.assignment.len() != source_indices.len() {
        return Err(ClusterError::LengthMismatch {
            assignment: clustering.assignment.len(),
            sources: source_indices.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices = (0..clustering.q)
        .map(|c| {
            let members = clustering.members(c);
            members
                .choose(&mut rng)
                .map(|&p| source_indices[p])
                .ok_or(ClusterError::EmptyCluster(c))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FeatureSpace { indices, seed })
}

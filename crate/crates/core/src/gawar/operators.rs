//! Selection, crossover and mutation over fixed-size feature subsets.

use rand::Rng;

use super::{GaError, Individual};
use crate::feature_space::FeatureSpace;

/// Roulette-wheel selection: smallest `i` with `u <= W_i`, where `W` is the
/// cumulative fitness share.
pub fn roulette_select(fitnesses: &[f64], u: f64) -> Result<usize, GaError> {
    let total: f64 = fitnesses.iter().sum();
    if fitnesses.is_empty() || total.is_nan() || total <= 0.0 {
        return Err(GaError::ZeroTotalFitness);
    }
    let mut cumulative = 0.0;
    for (i, f) in fitnesses.iter().enumerate() {
        cumulative += f / total;
        if u <= cumulative {
            return Ok(i);
        }
    }
    // rounding can leave the last W_i a hair below 1
    Ok(fitnesses.len() - 1)
}

/// Roulette selection with a fresh uniform draw; uniform fallback when every
/// fitness is zero.
pub fn select_parent<R: Rng + ?Sized>(fitnesses: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    roulette_select(fitnesses, u).unwrap_or_else(|_| rng.gen_range(0..fitnesses.len()))
}

/// Replaces repeated genes (later occurrences) with unused space members.
fn repair<R: Rng + ?Sized>(genes: &mut [usize], space: &FeatureSpace, rng: &mut R) {
    for pos in 0..genes.len() {
        if !genes[..pos].contains(&genes[pos]) {
            continue;
        }
        let unused: Vec<usize> =
            space.indices.iter().copied().filter(|f| !genes.contains(f)).collect();
        if unused.is_empty() {
            return;
        }
        genes[pos] = unused[rng.gen_range(0..unused.len())];
    }
}

/// Single-point crossover at `cut`:
/// `o1 = p1[..cut] ++ p2[cut..]`, `o2 = p2[..cut] ++ p1[cut..]`.
pub fn crossover<R: Rng + ?Sized>(
    p1: &Individual,
    p2: &Individual,
    cut: usize,
    space: &FeatureSpace,
    rng: &mut R,
) -> (Individual, Individual) {
    let cut = cut.min(p1.genes.len());
    let mut o1: Vec<usize> = p1.genes[..cut].iter().chain(&p2.genes[cut..]).copied().collect();
    let mut o2: Vec<usize> = p2.genes[..cut].iter().chain(&p1.genes[cut..]).copied().collect();
    repair(&mut o1, space, rng);
    repair(&mut o2, space, rng);
    (Individual::new(o1), Individual::new(o2))
}

/// Replaces the gene at `position` with `replacement`.
pub fn mutate_at(x: &Individual, replacement: usize, position: usize) -> Individual {
    let mut genes = x.genes.clone();
    genes[position] = replacement;
    Individual::new(genes)
}

/// Draws a replacement uniformly from the space minus the current genes and
/// a position uniformly from `0..n_var`.
pub fn mutate<R: Rng + ?Sized>(
    x: &Individual,
    space: &FeatureSpace,
    rng: &mut R,
) -> Result<Individual, GaError> {
    let seq: Vec<usize> = space.indices.iter().copied().filter(|f| !x.genes.contains(f)).collect();
    if seq.is_empty() || x.genes.is_empty() {
        return Err(GaError::ExhaustedSpace { space: space.len(), n_var: x.genes.len() });
    }
    let replacement = seq[rng.gen_range(0..seq.len())];
    let position = rng.gen_range(0..x.genes.len());
    Ok(mutate_at(x, replacement, position))
}

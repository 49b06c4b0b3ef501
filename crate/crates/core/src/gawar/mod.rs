//! Genetic algorithm with adaptive rates over fixed-size feature subsets.
//!
//! Each iteration draws roulette-selected parent pairs for single-point
//! crossover, uniformly chosen parents for mutation, evaluates the new
//! individuals, and keeps the `n_pop` fittest of parents plus children. The
//! rate controller in [`rates`] escalates mutation during stagnation, and the
//! run stops after `stagnation_limit` iterations without improvement.
//!
//! Random draws per iteration, in order: for each crossover pair the two
//! roulette draws, the cut point and any repair draws (first child, then
//! second); then for each mutant the parent index, the replacement feature
//! and the position. Fitness is evaluated only after all draws, so running
//! evaluations in parallel never changes a run.

mod operators;
mod rates;

use std::collections::HashMap;
use std::io::Write;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use operators::{crossover, mutate, mutate_at, roulette_select, select_parent};
pub use rates::{adapt_rates, Adaptation, RateState};

use crate::classifier::{evaluate_subset, FitnessSpec};
use crate::data::{FeatureMatrix, LabelVector};
use crate::feature_space::FeatureSpace;

#[derive(Debug, Error, PartialEq)]
pub enum GaError {
    #[error("total fitness is zero")]
    ZeroTotalFitness,
    #[error("no unused feature left for mutation (space {space}, n_var {n_var})")]
    ExhaustedSpace { space: usize, n_var: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("fitness evaluation failed: {0}")]
    Fitness(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub genes: Vec<usize>,
    pub fitness: Option<f64>,
}

impl Individual {
    pub fn new(genes: Vec<usize>) -> Self {
        Self { genes, fitness: None }
    }

    pub fn has_distinct_genes(&self) -> bool {
        let mut g = self.genes.clone();
        g.sort_unstable();
        g.windows(2).all(|w| w[0] != w[1])
    }

    /// Gene set in ascending order; the fitness cache key.
    pub fn key(&self) -> Vec<usize> {
        let mut g = self.genes.clone();
        g.sort_unstable();
        g
    }

    fn fitness_or_zero(&self) -> f64 {
        self.fitness.unwrap_or(0.0)
    }
}

/// Objective maximized by the GA. Receives the gene set in ascending order.
pub trait Fitness: Sync {
    fn evaluate(&self, genes: &[usize]) -> Result<f64, GaError>;
}

impl<F> Fitness for F
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    fn evaluate(&self, genes: &[usize]) -> Result<f64, GaError> {
        Ok(self(genes))
    }
}

/// Mean holdout accuracy of a decision tree on the subset.
pub struct SubsetAccuracy<'a> {
    pub matrix: &'a FeatureMatrix,
    pub labels: &'a LabelVector,
    pub n_splits: usize,
    pub test_fraction: f64,
    pub base_seed: u64,
}

impl Fitness for SubsetAccuracy<'_> {
    fn evaluate(&self, genes: &[usize]) -> Result<f64, GaError> {
        let spec = FitnessSpec {
            subset: genes.to_vec(),
            n_splits: self.n_splits,
            test_fraction: self.test_fraction,
            base_seed: self.base_seed,
        };
        evaluate_subset(self.matrix, self.labels, &spec)
            .map(|e| e.mean.overall_accuracy)
            .map_err(|e| GaError::Fitness(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub n_pop: usize,
    pub max_iters: usize,
    pub stagnation_limit: u32,
    pub adapt_period: u32,
    pub n_var: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self { n_pop: 20, max_iters: 150, stagnation_limit: 30, adapt_period: 5, n_var: 10, seed: 0 }
    }
}

impl GaConfig {
    pub fn validate(&self, space: &FeatureSpace) -> Result<(), GaError> {
        let bad = |msg: String| Err(GaError::InvalidConfig(msg));
        if self.n_pop < 2 {
            return bad(format!("n_pop must be at least 2, got {}", self.n_pop));
        }
        if self.n_var == 0 {
            return bad("n_var must be at least 1".into());
        }
        if self.n_var > space.len() {
            return bad(format!("n_var {} exceeds feature space size {}", self.n_var, space.len()));
        }
        if self.stagnation_limit == 0 || self.adapt_period == 0 {
            return bad("stagnation_limit and adapt_period must be positive".into());
        }
        let mut sorted = space.indices.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return bad("feature space has repeated indices".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub best_fitness: f64,
    /// Rates and counts after this iteration's adaptation step.
    pub p_c: f64,
    pub p_m: f64,
    pub n_c: usize,
    pub n_m: usize,
    pub adapted: bool,
    pub full_mutation: bool,
    pub nfe_cumulative: usize,
    /// Offspring and mutants actually produced during this iteration.
    pub offspring: usize,
    pub mutants: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceLog {
    pub initial_best: f64,
    pub records: Vec<IterationRecord>,
    /// Distinct subsets evaluated (fitness cache misses).
    pub nfe: usize,
}

impl ConvergenceLog {
    pub const CSV_HEADER: [&'static str; 9] = [
        "iteration",
        "best_fitness",
        "p_c",
        "p_m",
        "n_c",
        "n_m",
        "adapted",
        "full_mutation",
        "nfe_cumulative",
    ];

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(Self::CSV_HEADER)?;
        for r in &self.records {
            w.write_record([
                r.iteration.to_string(),
                r.best_fitness.to_string(),
                r.p_c.to_string(),
                r.p_m.to_string(),
                r.n_c.to_string(),
                r.n_m.to_string(),
                u8::from(r.adapted).to_string(),
                u8::from(r.full_mutation).to_string(),
                r.nfe_cumulative.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxIterations,
    Stagnation,
    /// The space holds exactly `n_var` features, so there was nothing to search.
    SingleSubset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaOutcome {
    pub best: Individual,
    pub log: ConvergenceLog,
    pub termination: Termination,
}

/// Snapshot handed to an observer once per iteration, after the new
/// individuals are evaluated and before survivors are chosen.
pub struct Generation<'a> {
    pub iteration: usize,
    pub population: &'a [Individual],
    pub offspring: &'a [Individual],
    pub mutants: &'a [Individual],
    pub n_c: usize,
    pub n_m: usize,
}

struct Evaluator<'f, F: Fitness + ?Sized> {
    fitness: &'f F,
    cache: HashMap<Vec<usize>, f64>,
}

impl<F: Fitness + ?Sized> Evaluator<'_, F> {
    fn nfe(&self) -> usize {
        self.cache.len()
    }

    fn evaluate_all(&mut self, batch: &mut [Individual]) -> Result<(), GaError> {
        let mut pending: Vec<Vec<usize>> = Vec::new();
        for ind in batch.iter() {
            let key = ind.key();
            if !self.cache.contains_key(&key) && !pending.contains(&key) {
                pending.push(key);
            }
        }
        let fitness = self.fitness;
        let scores = pending
            .par_iter()
            .map(|k| fitness.evaluate(k))
            .collect::<Result<Vec<_>, _>>()?;
        self.cache.extend(pending.into_iter().zip(scores));
        for ind in batch.iter_mut() {
            ind.fitness = Some(self.cache[&ind.key()]);
        }
        Ok(())
    }
}

/// Tag each individual with its birth order so survivor ties go to the older one.
#[derive(Clone)]
struct Member {
    ind: Individual,
    birth: u64,
}

fn sort_survivors(pool: &mut [Member]) {
    pool.sort_by(|a, b| {
        b.ind
            .fitness_or_zero()
            .total_cmp(&a.ind.fitness_or_zero())
            .then(a.birth.cmp(&b.birth))
    });
}

pub fn run<F: Fitness + ?Sized>(
    space: &FeatureSpace,
    config: &GaConfig,
    fitness: &F,
) -> Result<GaOutcome, GaError> {
    run_observed(space, config, fitness, |_| {})
}

pub fn run_observed<F, O>(
    space: &FeatureSpace,
    config: &GaConfig,
    fitness: &F,
    mut observer: O,
) -> Result<GaOutcome, GaError>
where
    F: Fitness + ?Sized,
    O: FnMut(&Generation<'_>),
{
    config.validate(space)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut evaluator = Evaluator { fitness, cache: HashMap::new() };
    let n_var = config.n_var;

    if space.len() == n_var {
        let mut only = vec![Individual::new(space.indices.clone())];
        evaluator.evaluate_all(&mut only)?;
        let best = only.pop().expect("one individual");
        let log = ConvergenceLog {
            initial_best: best.fitness_or_zero(),
            records: Vec::new(),
            nfe: evaluator.nfe(),
        };
        return Ok(GaOutcome { best, log, termination: Termination::SingleSubset });
    }

    let mut births = 0u64;
    let mut initial: Vec<Individual> = (0..config.n_pop)
        .map(|_| {
            let genes = sample(&mut rng, space.len(), n_var)
                .into_iter()
                .map(|p| space.indices[p])
                .collect();
            Individual::new(genes)
        })
        .collect();
    evaluator.evaluate_all(&mut initial)?;
    let mut population: Vec<Member> = initial
        .into_iter()
        .map(|ind| {
            births += 1;
            Member { ind, birth: births }
        })
        .collect();
    sort_survivors(&mut population);

    let mut state = RateState::default();
    let (mut n_c, mut n_m) = state.counts(config.n_pop);
    let mut log = ConvergenceLog {
        initial_best: population[0].ind.fitness_or_zero(),
        records: Vec::with_capacity(config.max_iters),
        nfe: 0,
    };
    let mut previous_best = log.initial_best;
    let mut termination = Termination::MaxIterations;

    for iteration in 1..=config.max_iters {
        let fits: Vec<f64> = population.iter().map(|m| m.ind.fitness_or_zero()).collect();

        let mut offspring = Vec::with_capacity(n_c);
        if n_var >= 2 {
            for _ in 0..n_c / 2 {
                let a = select_parent(&fits, &mut rng);
                let b = select_parent(&fits, &mut rng);
                let cut = rng.gen_range(1..n_var);
                let (o1, o2) =
                    crossover(&population[a].ind, &population[b].ind, cut, space, &mut rng);
                offspring.push(o1);
                offspring.push(o2);
            }
        } else {
            for _ in 0..n_c {
                let a = select_parent(&fits, &mut rng);
                offspring.push(Individual::new(population[a].ind.genes.clone()));
            }
        }

        let mut mutants = Vec::with_capacity(n_m);
        for _ in 0..n_m {
            let parent = rng.gen_range(0..population.len());
            mutants.push(mutate(&population[parent].ind, space, &mut rng)?);
        }

        evaluator.evaluate_all(&mut offspring)?;
        evaluator.evaluate_all(&mut mutants)?;
        let parents: Vec<Individual> = population.iter().map(|m| m.ind.clone()).collect();
        observer(&Generation {
            iteration,
            population: &parents,
            offspring: &offspring,
            mutants: &mutants,
            n_c,
            n_m,
        });

        let produced = (offspring.len(), mutants.len());
        for ind in offspring.into_iter().chain(mutants) {
            births += 1;
            population.push(Member { ind, birth: births });
        }
        sort_survivors(&mut population);
        population.truncate(config.n_pop);

        let best = population[0].ind.fitness_or_zero();
        // the first iteration has no predecessor to compare against
        let improved = iteration == 1 || best > previous_best;
        previous_best = best;
        let step = adapt_rates(state, improved, config.n_pop, config.adapt_period);
        state = step.state;
        n_c = step.n_c;
        n_m = step.n_m;

        log.records.push(IterationRecord {
            iteration,
            best_fitness: best,
            p_c: state.p_c(),
            p_m: state.p_m(),
            n_c,
            n_m,
            adapted: step.adapted,
            full_mutation: !state.crossover_active,
            nfe_cumulative: evaluator.nfe(),
            offspring: produced.0,
            mutants: produced.1,
        });

        if state.tag >= config.stagnation_limit {
            termination = Termination::Stagnation;
            break;
        }
    }

    log.nfe = evaluator.nfe();
    let best = population.swap_remove(0).ind;
    Ok(GaOutcome { best, log, termination })
}

/// Binomial coefficient `C(n, k)`, `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) at every step
        acc = acc.checked_mul(u128::from(n - i))? / u128::from(i + 1);
    }
    Some(acc)
}

/// Number of distinct `n_var`-subsets of a `q`-feature space.
pub fn search_space_size(q: usize, n_var: usize) -> Option<u128> {
    binomial(q as u64, n_var as u64)
}

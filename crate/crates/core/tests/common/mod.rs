#![allow(dead_code)]

use dmc_gawar::{FeatureMatrix, LabelVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The 16-sample worked feature: five class-0 samples, then an interleaved
/// block, then five class-1 samples.
pub fn worked_feature() -> (Vec<f64>, Vec<u8>) {
    let values = vec![
        1.8, 2.3, 2.4, 2.45, 2.9, 3.0, 3.1, 3.15, 3.2, 3.25, 3.3, 4.0, 4.2, 5.2, 5.5, 5.9,
    ];
    let labels = vec![0, 0, 0, 0, 0, 1, 1, 0, 1, 0, 0, 1, 1, 1, 1, 1];
    (values, labels)
}

/// Brute-force region scorer, written independently of the library.
///
/// Sorts by (value, original index) with insertion sort, then partitions the
/// samples into the four named sets by walking positions and sums each set
/// directly.
pub struct Oracle {
    pub dmc: f64,
    pub mc: f64,
    pub region: Option<(usize, usize)>,
}

#[allow(clippy::needless_range_loop)]
pub fn oracle(values: &[f64], labels: &[u8]) -> Oracle {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    for i in 1..n {
        let mut k = i;
        while k > 0 {
            let (a, b) = (order[k - 1], order[k]);
            if values[a] > values[b] || (values[a] == values[b] && a > b) {
                order.swap(k - 1, k);
                k -= 1;
            } else {
                break;
            }
        }
    }
    let sv: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let sl: Vec<u8> = order.iter().map(|&i| labels[i]).collect();
    let early = sl[0];
    let mut first_late = None;
    let mut last_early = 0;
    for p in 0..n {
        if sl[p] != early && first_late.is_none() {
            first_late = Some(p);
        }
        if sl[p] == early {
            last_early = p;
        }
    }
    let start = first_late.expect("two classes");
    let end = last_early;
    if end < start {
        return Oracle { dmc: 0.0, mc: 0.0, region: None };
    }
    let y_min = sv[start];
    let x_max = sv[end];
    let mut x_mc = Vec::new();
    let mut x_nmc = Vec::new();
    let mut y_mc = Vec::new();
    let mut y_nmc = Vec::new();
    for p in 0..n {
        let inside = start <= p && p <= end;
        match (sl[p] == early, inside) {
            (true, true) => x_mc.push(sv[p]),
            (true, false) => x_nmc.push(sv[p]),
            (false, true) => y_mc.push(sv[p]),
            (false, false) => y_nmc.push(sv[p]),
        }
    }
    let dist = |set: &[f64], anchor: f64| set.iter().map(|v| (v - anchor).abs()).sum::<f64>();
    let term = |num: f64, den: f64| {
        if num == 0.0 {
            0.0
        } else if den == 0.0 {
            1e6
        } else {
            num / den
        }
    };
    let dmc = term(dist(&x_mc, y_min), dist(&x_nmc, y_min)) + term(dist(&y_mc, x_max), dist(&y_nmc, x_max));
    let mc = (x_mc.len() + y_mc.len()) as f64 / n as f64;
    Oracle { dmc, mc, region: Some((start, end)) }
}

/// Random labels with both classes present at least twice.
pub fn random_labels<R: Rng>(rng: &mut R, n: usize) -> Vec<u8> {
    loop {
        let y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let ones = y.iter().filter(|&&c| c == 1).count();
        if ones >= 2 && n - ones >= 2 {
            return y;
        }
    }
}

pub fn labels(y: Vec<u8>) -> LabelVector {
    LabelVector::new(y, ["neg".into(), "pos".into()]).unwrap()
}

/// `n` samples, `m` Gaussian-ish features, the first `informative` of which
/// shift by `gap` for class 1. Classes alternate.
pub fn synthetic(n: usize, m: usize, informative: usize, gap: f64, seed: u64) -> (FeatureMatrix, LabelVector) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let noise: f64 = (0..4).map(|_| rng.gen_range(-1.0..1.0)).sum::<f64>() * 0.5;
                    noise + if j < informative { gap * f64::from(y[i]) } else { 0.0 }
                })
                .collect()
        })
        .collect();
    let names = (0..m).map(|j| format!("f{j}")).collect();
    (FeatureMatrix::from_rows(&rows, names).unwrap(), labels(y))
}

pub fn write_dataset(path: &std::path::Path, matrix: &FeatureMatrix, labels: &LabelVector) {
    let f = std::fs::File::create(path).unwrap();
    dmc_gawar::data::write_csv(f, matrix, labels, "class").unwrap();
}

/// Runs the GA with an observer and checks the per-iteration invariants.
/// Returns a description of the first violation.
pub fn check_ga_invariants<F: dmc_gawar::gawar::Fitness>(
    space: &dmc_gawar::FeatureSpace,
    config: &dmc_gawar::GaConfig,
    fitness: &F,
) -> Result<dmc_gawar::GaOutcome, String> {
    let mut violation: Option<String> = None;
    let mut produced = 0usize;
    let outcome = dmc_gawar::gawar::run_observed(space, config, fitness, |g| {
        let mut fail = |msg: String| {
            violation.get_or_insert(format!("iteration {}: {msg}", g.iteration));
        };
        if g.population.len() != config.n_pop {
            fail(format!("population {} != {}", g.population.len(), config.n_pop));
        }
        if g.n_c % 2 != 0 {
            fail(format!("odd n_c {}", g.n_c));
        }
        if g.offspring.len() != g.n_c || g.mutants.len() != g.n_m {
            fail("produced counts differ from n_c/n_m".into());
        }
        produced += g.n_c + g.n_m;
        for ind in g.population.iter().chain(g.offspring).chain(g.mutants) {
            if ind.genes.len() != config.n_var || !ind.has_distinct_genes() {
                fail(format!("bad genes {:?}", ind.genes));
            }
            if !ind.genes.iter().all(|&f| space.contains(f)) {
                fail(format!("gene outside space {:?}", ind.genes));
            }
        }
    })
    .map_err(|e| e.to_string())?;
    if let Some(v) = violation {
        return Err(v);
    }
    let trace: Vec<f64> = outcome.log.records.iter().map(|r| r.best_fitness).collect();
    if trace.first().is_some_and(|&b| b < outcome.log.initial_best) || trace.windows(2).any(|w| w[1] < w[0]) {
        return Err(format!("best-fitness trace decreases: {trace:?}"));
    }
    if outcome.log.nfe > config.n_pop + produced {
        return Err(format!("nfe {} exceeds n_pop + produced {}", outcome.log.nfe, config.n_pop + produced));
    }
    if outcome.best.fitness != trace.last().copied() {
        return Err("returned best differs from the final trace value".into());
    }
    Ok(outcome)
}

/// `|genes ∩ target| / |target|`.
pub fn planted_fitness(target: &[usize]) -> impl Fn(&[usize]) -> f64 + Sync + '_ {
    move |genes: &[usize]| {
        genes.iter().filter(|g| target.contains(g)).count() as f64 / target.len() as f64
    }
}

/// A hidden 10-set drawn from a 100-feature space with the given seed.
pub fn planted_target(space: &dmc_gawar::FeatureSpace, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    space.indices.choose_multiple(&mut rng, 10).copied().collect()
}

//! End-to-end orchestration: rank -> cluster -> feature space -> GA ->
//! evaluation, plus the random-subset baseline and multi-run experiments.
//!
//! Every stage draws from its own seed, `master_seed + offset`, with the
//! offsets below. A stage can therefore be re-run on its own and reproduce
//! the pipeline's choices.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{evaluate_subset, FitnessSpec, MetricsReport, METRIC_NAMES};
use crate::data::{load_csv, FeatureMatrix, LabelVector};
use crate::feature_space::{
    build_feature_space, effective_q, kmeans_restarts, Clustering, FeaturePointSet, FeatureSpace,
    DEFAULT_MAX_ITERS, DEFAULT_Q, DEFAULT_TOL,
};
use crate::gawar::{self, ConvergenceLog, GaConfig, SubsetAccuracy, Termination};
use crate::rankers::{retained_count, score_features, FeatureScore, Ranker};

pub const KMEANS_SEED_OFFSET: u64 = 1_000;
pub const REPRESENTATIVE_SEED_OFFSET: u64 = 2_000;
pub const GA_SEED_OFFSET: u64 = 3_000;
pub const SPLIT_SEED_OFFSET: u64 = 4_000;
pub const BASELINE_SEED_OFFSET: u64 = 5_000;

pub const DEFAULT_KEEP_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Load,
    Rank,
    Cluster,
    Space,
    Optimize,
    Evaluate,
    Baseline,
    Write,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Load => "load",
            Stage::Rank => "rank",
            Stage::Cluster => "cluster",
            Stage::Space => "space",
            Stage::Optimize => "optimize",
            Stage::Evaluate => "evaluate",
            Stage::Baseline => "baseline",
            Stage::Write => "write",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{stage}: {message}")]
    Usage { stage: Stage, message: String },
    #[error("{stage}: {message}")]
    Data { stage: Stage, message: String },
    #[error("{stage}: internal invariant violated: {message}")]
    Internal { stage: Stage, message: String },
}

impl PipelineError {
    pub fn data(stage: Stage, e: impl std::fmt::Display) -> Self {
        PipelineError::Data { stage, message: e.to_string() }
    }

    pub fn internal(stage: Stage, e: impl std::fmt::Display) -> Self {
        PipelineError::Internal { stage, message: e.to_string() }
    }

    pub fn usage(stage: Stage, e: impl std::fmt::Display) -> Self {
        PipelineError::Usage { stage, message: e.to_string() }
    }

    /// Process exit code: 1 usage, 2 data, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage { .. } => 1,
            PipelineError::Data { .. } => 2,
            PipelineError::Internal { .. } => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub dataset: PathBuf,
    pub label_column: Option<String>,
    pub ranker: Ranker,
    pub keep_fraction: f64,
    pub q: usize,
    pub kmeans_restarts: usize,
    pub kmeans_max_iters: usize,
    pub kmeans_tol: f64,
    /// `ga.seed` is ignored; the GA seed derives from `seed`.
    pub ga: GaConfig,
    pub n_splits: usize,
    pub test_fraction: f64,
    pub n_runs: usize,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::new(),
            label_column: None,
            ranker: Ranker::Dmc,
            keep_fraction: DEFAULT_KEEP_FRACTION,
            q: DEFAULT_Q,
            kmeans_restarts: 1,
            kmeans_max_iters: DEFAULT_MAX_ITERS,
            kmeans_tol: DEFAULT_TOL,
            ga: GaConfig::default(),
            n_splits: crate::classifier::DEFAULT_SPLITS,
            test_fraction: crate::classifier::DEFAULT_TEST_FRACTION,
            n_runs: 5,
            seed: 0,
            out_dir: None,
        }
    }
}

/// Key-value overrides read from a TOML config file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub dataset: Option<PathBuf>,
    pub label_column: Option<String>,
    pub ranker: Option<Ranker>,
    pub keep_fraction: Option<f64>,
    pub q: Option<usize>,
    pub kmeans_restarts: Option<usize>,
    pub kmeans_max_iters: Option<usize>,
    pub kmeans_tol: Option<f64>,
    pub n_pop: Option<usize>,
    pub max_iters: Option<usize>,
    pub stagnation_limit: Option<u32>,
    pub adapt_period: Option<u32>,
    pub n_var: Option<usize>,
    pub n_splits: Option<usize>,
    pub test_fraction: Option<f64>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::usage(Stage::Config, format!("{}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| PipelineError::usage(Stage::Config, format!("{}: {e}", path.display())))
    }

    pub fn apply(&self, c: &mut PipelineConfig) {
        macro_rules! set {
            ($field:ident => $($target:tt)+) => {
                if let Some(v) = self.$field.clone() {
                    c.$($target)+ = v;
                }
            };
        }
        set!(dataset => dataset);
        if let Some(v) = &self.label_column {
            c.label_column = Some(v.clone());
        }
        set!(ranker => ranker);
        set!(keep_fraction => keep_fraction);
        set!(q => q);
        set!(kmeans_restarts => kmeans_restarts);
        set!(kmeans_max_iters => kmeans_max_iters);
        set!(kmeans_tol => kmeans_tol);
        set!(n_pop => ga.n_pop);
        set!(max_iters => ga.max_iters);
        set!(stagnation_limit => ga.stagnation_limit);
        set!(adapt_period => ga.adapt_period);
        set!(n_var => ga.n_var);
        set!(n_splits => n_splits);
        set!(test_fraction => test_fraction);
        set!(runs => n_runs);
        set!(seed => seed);
        if let Some(v) = &self.out_dir {
            c.out_dir = Some(v.clone());
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::usage(Stage::Config, m));
        if !(self.keep_fraction > 0.0 && self.keep_fraction <= 1.0) {
            return bad(format!("keep fraction must lie in (0, 1], got {}", self.keep_fraction));
        }
        if self.q == 0 {
            return bad("q must be at least 1".into());
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test fraction must lie in (0, 1), got {}", self.test_fraction));
        }
        if self.n_splits == 0 {
            return bad("splits must be at least 1".into());
        }
        if self.ga.n_pop < 2 {
            return bad(format!("population must be at least 2, got {}", self.ga.n_pop));
        }
        if self.ga.n_var == 0 {
            return bad("n_var must be at least 1".into());
        }
        if self.ga.stagnation_limit == 0 || self.ga.adapt_period == 0 {
            return bad("stagnation limit and adapt period must be positive".into());
        }
        Ok(())
    }

    pub fn split_seed(&self) -> u64 {
        self.seed.wrapping_add(SPLIT_SEED_OFFSET)
    }

    pub fn fitness_spec(&self, subset: Vec<usize>) -> FitnessSpec {
        FitnessSpec {
            subset,
            n_splits: self.n_splits,
            test_fraction: self.test_fraction,
            base_seed: self.split_seed(),
        }
    }
}

/// Stage seeds for one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StageSeeds {
    pub kmeans: u64,
    pub representatives: u64,
    pub ga: u64,
    pub splits: u64,
    pub baseline: u64,
}

impl StageSeeds {
    pub fn derive(master: u64) -> Self {
        Self {
            kmeans: master.wrapping_add(KMEANS_SEED_OFFSET),
            representatives: master.wrapping_add(REPRESENTATIVE_SEED_OFFSET),
            ga: master.wrapping_add(GA_SEED_OFFSET),
            splits: master.wrapping_add(SPLIT_SEED_OFFSET),
            baseline: master.wrapping_add(BASELINE_SEED_OFFSET),
        }
    }
}

/// Subset size actually used: `n_var` clamped to the feature count.
pub fn effective_n_var(m: usize, n_var: usize) -> usize {
    n_var.min(m)
}

/// Retained feature count: `floor(keep * m)`, raised where needed so the GA
/// has at least `n_var + 1` features to choose from (capped at `m`).
pub fn effective_retained(m: usize, keep_fraction: f64, n_var: usize) -> usize {
    retained_count(m, keep_fraction).max((n_var + 1).min(m))
}

/// Output of the filter and clustering stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceFile {
    pub ranker: Ranker,
    pub keep_fraction: f64,
    pub q: usize,
    pub seed: u64,
    pub retained: Vec<FeatureScore>,
    pub source_indices: Vec<usize>,
    pub assignment: Vec<usize>,
    pub inertia: f64,
    pub indices: Vec<usize>,
    pub feature_names: Vec<String>,
}

impl SpaceFile {
    pub fn feature_space(&self) -> FeatureSpace {
        FeatureSpace { indices: self.indices.clone(), seed: self.seed }
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::data(Stage::Load, format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::data(Stage::Load, format!("{}: {e}", path.display())))
    }
}

pub struct SpaceStages {
    pub scores: Vec<FeatureScore>,
    pub retained: usize,
    pub clustering: Clustering,
    pub space: FeatureSpace,
    pub file: SpaceFile,
}

pub fn load_dataset(config: &PipelineConfig) -> Result<(FeatureMatrix, LabelVector), PipelineError> {
    load_csv(&config.dataset, config.label_column.as_deref()).map_err(|e| PipelineError::data(Stage::Load, e))
}

/// Rank every feature, keep the best, cluster them and draw representatives.
pub fn build_space(
    matrix: &FeatureMatrix,
    labels: &LabelVector,
    config: &PipelineConfig,
) -> Result<SpaceStages, PipelineError> {
    config.validate()?;
    let seeds = StageSeeds::derive(config.seed);
    let scores = score_features(matrix, labels, config.ranker).map_err(|e| PipelineError::data(Stage::Rank, e))?;
    let n_var = effective_n_var(matrix.n_features(), config.ga.n_var);
    let retained = effective_retained(matrix.n_features(), config.keep_fraction, n_var);
    let top: Vec<FeatureScore> = scores[..retained].to_vec();
    let source_indices: Vec<usize> = top.iter().map(|s| s.feature_index).collect();

    let q = effective_q(retained, config.q);
    if q < n_var {
        return Err(PipelineError::usage(
            Stage::Cluster,
            format!("q = {q} leaves fewer features than the subset size {n_var}"),
        ));
    }
    let points = FeaturePointSet::from_matrix(matrix, &source_indices).map_err(|e| PipelineError::internal(Stage::Cluster, e))?;
    let clustering = kmeans_restarts(
        &points,
        q,
        seeds.kmeans,
        config.kmeans_max_iters,
        config.kmeans_tol,
        config.kmeans_restarts,
    )
    .map_err(|e| PipelineError::internal(Stage::Cluster, e))?;
    let space = build_feature_space(&clustering, &source_indices, seeds.representatives)
        .map_err(|e| PipelineError::internal(Stage::Space, e))?;

    let file = SpaceFile {
        ranker: config.ranker,
        keep_fraction: config.keep_fraction,
        q,
        seed: seeds.representatives,
        retained: top,
        source_indices,
        assignment: clustering.assignment.clone(),
        inertia: clustering.inertia,
        indices: space.indices.clone(),
        feature_names: space.indices.iter().map(|&j| matrix.feature_names()[j].clone()).collect(),
    };
    Ok(SpaceStages { scores, retained, clustering, space, file })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaSummary {
    pub nfe: usize,
    pub iterations: usize,
    pub termination: Termination,
    pub best_fitness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: String,
    pub n_samples: usize,
    pub n_features: usize,
    pub seed: u64,
    pub ranker: Ranker,
    pub retained: usize,
    pub q: usize,
    pub n_var: usize,
    pub feature_space: Vec<usize>,
    pub selected_indices: Vec<usize>,
    pub selected_names: Vec<String>,
    pub before: MetricsReport,
    pub after: MetricsReport,
    pub ga: GaSummary,
    pub convergence: ConvergenceLog,
    /// Kept out of `report.json` so reports stay byte-reproducible.
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Runs every stage on an already loaded dataset.
pub fn run_on_data(
    matrix: &FeatureMatrix,
    labels: &LabelVector,
    config: &PipelineConfig,
) -> Result<(RunReport, SpaceFile), PipelineError> {
    let started = Instant::now();
    let stages = build_space(matrix, labels, config)?;
    let seeds = StageSeeds::derive(config.seed);
    let n_var = effective_n_var(matrix.n_features(), config.ga.n_var);
    let ga_config = GaConfig { seed: seeds.ga, n_var, ..config.ga.clone() };
    let fitness = SubsetAccuracy {
        matrix,
        labels,
        n_splits: config.n_splits,
        test_fraction: config.test_fraction,
        base_seed: seeds.splits,
    };
    let outcome = gawar::run(&stages.space, &ga_config, &fitness).map_err(|e| match e {
        gawar::GaError::Fitness(_) => PipelineError::data(Stage::Optimize, e),
        gawar::GaError::InvalidConfig(_) => PipelineError::usage(Stage::Optimize, e),
        _ => PipelineError::internal(Stage::Optimize, e),
    })?;

    let selected = outcome.best.key();
    if selected.len() != n_var {
        return Err(PipelineError::internal(
            Stage::Optimize,
            format!("selected {} features, expected {n_var}", selected.len()),
        ));
    }
    let all: Vec<usize> = (0..matrix.n_features()).collect();
    let before = evaluate_subset(matrix, labels, &config.fitness_spec(all))
        .map_err(|e| PipelineError::data(Stage::Evaluate, e))?;
    let after = evaluate_subset(matrix, labels, &config.fitness_spec(selected.clone()))
        .map_err(|e| PipelineError::data(Stage::Evaluate, e))?;

    let report = RunReport {
        dataset: config.dataset.display().to_string(),
        n_samples: matrix.n_samples(),
        n_features: matrix.n_features(),
        seed: config.seed,
        ranker: config.ranker,
        retained: stages.retained,
        q: stages.clustering.q,
        n_var,
        feature_space: stages.space.indices.clone(),
        selected_names: selected.iter().map(|&j| matrix.feature_names()[j].clone()).collect(),
        selected_indices: selected,
        before: before.mean,
        after: after.mean,
        ga: GaSummary {
            nfe: outcome.log.nfe,
            iterations: outcome.log.records.len(),
            termination: outcome.termination,
            best_fitness: outcome.best.fitness.unwrap_or(0.0),
        },
        convergence: outcome.log,
        wall_time: started.elapsed(),
    };
    Ok((report, stages.file))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    fs::write(path, bytes).map_err(|e| PipelineError::data(Stage::Write, format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, PipelineError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| PipelineError::internal(Stage::Write, e))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes `scores.csv` (rank, feature_index, feature_name, score).
pub fn write_scores_csv<W: std::io::Write>(
    writer: W,
    scores: &[FeatureScore],
    names: &[String],
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["rank", "feature_index", "feature_name", "score"])?;
    for (r, s) in scores.iter().enumerate() {
        w.write_record([
            (r + 1).to_string(),
            s.feature_index.to_string(),
            names[s.feature_index].clone(),
            s.score.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `report.json`, `convergence.csv`, `space.json` and `timing.json`.
pub fn write_run_outputs(dir: &Path, report: &RunReport, space: &SpaceFile) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(|e| PipelineError::data(Stage::Write, format!("{}: {e}", dir.display())))?;
    write_file(&dir.join("report.json"), &to_json(report)?)?;
    write_file(&dir.join("space.json"), &to_json(space)?)?;
    let mut csv_bytes = Vec::new();
    report.convergence.write_csv(&mut csv_bytes).map_err(|e| PipelineError::internal(Stage::Write, e))?;
    write_file(&dir.join("convergence.csv"), &csv_bytes)?;
    let timing = serde_json::json!({ "wall_time_secs": report.wall_time.as_secs_f64() });
    write_file(&dir.join("timing.json"), &to_json(&timing)?)
}

/// Loads the dataset, runs all stages and writes outputs when `out_dir` is set.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunReport, PipelineError> {
    config.validate()?;
    let (matrix, labels) = load_dataset(config)?;
    let (report, space) = run_on_data(&matrix, &labels, config)?;
    if let Some(dir) = &config.out_dir {
        write_run_outputs(dir, &report, &space)?;
    }
    Ok(report)
}

/// `n_runs` uniform `n_var`-subsets of the space, one seeded stream per run.
pub fn random_subsets(space: &FeatureSpace, n_var: usize, n_runs: usize, seed: u64) -> Vec<Vec<usize>> {
    (0..n_runs as u64)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r));
            let mut s: Vec<usize> = sample(&mut rng, space.len(), n_var.min(space.len()))
                .into_iter()
                .map(|p| space.indices[p])
                .collect();
            s.sort_unstable();
            s
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub seed: u64,
    pub subsets: Vec<Vec<usize>>,
    pub per_run: Vec<MetricsReport>,
    pub mean: MetricsReport,
}

/// Random-selection baseline on an already loaded dataset and built space.
pub fn random_baseline_on_space(
    matrix: &FeatureMatrix,
    labels: &LabelVector,
    space: &FeatureSpace,
    config: &PipelineConfig,
    n_runs: usize,
) -> Result<BaselineReport, PipelineError> {
    let seeds = StageSeeds::derive(config.seed);
    let n_var = effective_n_var(matrix.n_features(), config.ga.n_var);
    let subsets = random_subsets(space, n_var, n_runs, seeds.baseline);
    let per_run = subsets
        .iter()
        .map(|s| {
            evaluate_subset(matrix, labels, &config.fitness_spec(s.clone()))
                .map(|e| e.mean)
                .map_err(|e| PipelineError::data(Stage::Baseline, e))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BaselineReport { seed: config.seed, mean: MetricsReport::mean(&per_run), subsets, per_run })
}

/// Loads the dataset, builds the feature space and averages `n_runs` random subsets.
pub fn random_baseline(config: &PipelineConfig, n_runs: usize) -> Result<BaselineReport, PipelineError> {
    config.validate()?;
    let (matrix, labels) = load_dataset(config)?;
    let stages = build_space(&matrix, &labels, config)?;
    random_baseline_on_space(&matrix, &labels, &stages.space, config, n_runs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub run: usize,
    pub seed: u64,
    pub before: MetricsReport,
    pub after: MetricsReport,
    pub nfe: usize,
    pub iterations: usize,
    pub selected_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTable {
    pub runs: Vec<RunRow>,
    pub mean_before: MetricsReport,
    pub std_before: MetricsReport,
    pub mean_after: MetricsReport,
    pub std_after: MetricsReport,
    pub mean_nfe: f64,
}

impl ExperimentTable {
    pub fn from_runs(runs: Vec<RunRow>) -> Self {
        let before: Vec<MetricsReport> = runs.iter().map(|r| r.before).collect();
        let after: Vec<MetricsReport> = runs.iter().map(|r| r.after).collect();
        let mean_nfe = if runs.is_empty() {
            0.0
        } else {
            runs.iter().map(|r| r.nfe as f64).sum::<f64>() / runs.len() as f64
        };
        Self {
            mean_before: MetricsReport::mean(&before),
            std_before: MetricsReport::std_dev(&before),
            mean_after: MetricsReport::mean(&after),
            std_after: MetricsReport::std_dev(&after),
            mean_nfe,
            runs,
        }
    }

    /// One row per run and stage, then mean and std rows.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["row", "seed", "stage"];
        header.extend(METRIC_NAMES);
        header.push("nfe");
        w.write_record(&header)?;
        let mut emit = |row: String, seed: String, stage: &str, m: &MetricsReport, nfe: String| {
            let mut rec = vec![row, seed, stage.to_string()];
            rec.extend(m.to_array().iter().map(f64::to_string));
            rec.push(nfe);
            w.write_record(&rec)
        };
        for r in &self.runs {
            emit(r.run.to_string(), r.seed.to_string(), "before", &r.before, String::new())?;
            emit(r.run.to_string(), r.seed.to_string(), "after", &r.after, r.nfe.to_string())?;
        }
        let nfe = self.mean_nfe.to_string();
        emit("mean".into(), String::new(), "before", &self.mean_before, String::new())?;
        emit("mean".into(), String::new(), "after", &self.mean_after, nfe)?;
        emit("std".into(), String::new(), "before", &self.std_before, String::new())?;
        emit("std".into(), String::new(), "after", &self.std_after, String::new())?;
        w.flush()?;
        Ok(())
    }
}

/// Runs the pipeline `n_runs` times with seeds `seed, seed + 1, ...`.
///
/// With an output directory each run writes into `run_<k>/` and the
/// aggregate goes to `experiment.json` and `experiment.csv`.
pub fn experiment(config: &PipelineConfig, n_runs: usize) -> Result<ExperimentTable, PipelineError> {
    config.validate()?;
    let (matrix, labels) = load_dataset(config)?;
    experiment_on_data(&matrix, &labels, config, n_runs)
}

pub fn experiment_on_data(
    matrix: &FeatureMatrix,
    labels: &LabelVector,
    config: &PipelineConfig,
    n_runs: usize,
) -> Result<ExperimentTable, PipelineError> {
    let rows = (0..n_runs)
        .into_par_iter()
        .map(|run| {
            let mut cfg = config.clone();
            cfg.seed = config.seed.wrapping_add(run as u64);
            cfg.out_dir = config.out_dir.as_ref().map(|d| d.join(format!("run_{run}")));
            let (report, space) = run_on_data(matrix, labels, &cfg)?;
            if let Some(dir) = &cfg.out_dir {
                write_run_outputs(dir, &report, &space)?;
            }
            Ok(RunRow {
                run,
                seed: cfg.seed,
                before: report.before,
                after: report.after,
                nfe: report.ga.nfe,
                iterations: report.ga.iterations,
                selected_indices: report.selected_indices,
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let table = ExperimentTable::from_runs(rows);
    if let Some(dir) = &config.out_dir {
        fs::create_dir_all(dir).map_err(|e| PipelineError::data(Stage::Write, e))?;
        write_file(&dir.join("experiment.json"), &to_json(&table)?)?;
        let mut bytes = Vec::new();
        table.write_csv(&mut bytes).map_err(|e| PipelineError::internal(Stage::Write, e))?;
        write_file(&dir.join("experiment.csv"), &bytes)?;
    }
    Ok(table)
}

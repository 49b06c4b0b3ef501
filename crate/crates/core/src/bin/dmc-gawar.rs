use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use dmc_gawar::classifier::evaluate_subset;
use dmc_gawar::gawar::{self, GaConfig, SubsetAccuracy};
use dmc_gawar::pipeline::{
    self, build_space, load_dataset, write_scores_csv, ConfigFile, PipelineConfig, PipelineError, SpaceFile, Stage,
    StageSeeds,
};
use dmc_gawar::rankers::{retained_count, score_features, Ranker};

#[derive(Parser)]
#[command(name = "dmc-gawar", version, about = "Hybrid DMC filter + adaptive-rate GA feature selection")]
struct Cli {
    /// Master seed; every stage derives its own seed from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// TOML file of default settings. Flags win over file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Input CSV with one header row.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Label column name (default: last column).
    #[arg(long, global = true)]
    label_column: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Tuning {
    #[arg(long)]
    ranker: Option<Ranker>,
    /// Fraction of ranked features kept for clustering.
    #[arg(long)]
    keep: Option<f64>,
    /// Number of KMeans clusters, i.e. the size of the GA's feature space.
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    kmeans_restarts: Option<usize>,
    #[arg(long)]
    npop: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    stagnation: Option<u32>,
    #[arg(long)]
    adapt_period: Option<u32>,
    /// Subset size searched by the GA.
    #[arg(long)]
    n_var: Option<usize>,
    #[arg(long)]
    splits: Option<usize>,
    #[arg(long)]
    test_fraction: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Score every feature and write the retained ranking as CSV.
    Rank {
        #[command(flatten)]
        tuning: Tuning,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank, cluster the retained features and draw one per cluster.
    Cluster {
        #[command(flatten)]
        tuning: Tuning,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the GA over a feature space written by `cluster`.
    Optimize {
        #[command(flatten)]
        tuning: Tuning,
        #[arg(long)]
        space: PathBuf,
        /// Convergence CSV.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Result JSON (selected features and NFE).
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Evaluate a given feature subset with repeated stratified holdout.
    Evaluate {
        #[command(flatten)]
        tuning: Tuning,
        /// Comma-separated feature indices.
        #[arg(long, value_delimiter = ',', required = true)]
        features: Vec<usize>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Full pipeline: rank, cluster, optimize and evaluate before/after.
    Pipeline {
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Repeat the pipeline with seeds seed, seed+1, ... and aggregate.
    Experiment {
        #[command(flatten)]
        tuning: Tuning,
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Average of random subsets drawn from the feature space.
    Baseline {
        #[command(flatten)]
        tuning: Tuning,
        #[arg(long, default_value_t = 3)]
        runs: usize,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn build_config(cli: &Cli, tuning: &Tuning) -> Result<PipelineConfig, PipelineError> {
    let mut c = PipelineConfig::default();
    if let Some(path) = &cli.config {
        ConfigFile::load(path)?.apply(&mut c);
    }
    if let Some(v) = &cli.data {
        c.dataset = v.clone();
    }
    if let Some(v) = &cli.label_column {
        c.label_column = Some(v.clone());
    }
    if let Some(v) = cli.seed {
        c.seed = v;
    }
    if let Some(v) = &cli.out_dir {
        c.out_dir = Some(v.clone());
    }
    let t = tuning;
    if let Some(v) = t.ranker {
        c.ranker = v;
    }
    if let Some(v) = t.keep {
        c.keep_fraction = v;
    }
    if let Some(v) = t.q {
        c.q = v;
    }
    if let Some(v) = t.kmeans_restarts {
        c.kmeans_restarts = v;
    }
    if let Some(v) = t.npop {
        c.ga.n_pop = v;
    }
    if let Some(v) = t.max_iters {
        c.ga.max_iters = v;
    }
    if let Some(v) = t.stagnation {
        c.ga.stagnation_limit = v;
    }
    if let Some(v) = t.adapt_period {
        c.ga.adapt_period = v;
    }
    if let Some(v) = t.n_var {
        c.ga.n_var = v;
    }
    if let Some(v) = t.splits {
        c.n_splits = v;
    }
    if let Some(v) = t.test_fraction {
        c.test_fraction = v;
    }
    if c.dataset.as_os_str().is_empty() {
        return Err(PipelineError::usage(Stage::Config, "no dataset given (use --data or `dataset` in the config file)"));
    }
    c.validate()?;
    Ok(c)
}

/// `explicit`, else `<out-dir>/<default_name>`, else nothing (stdout).
fn output_path(explicit: &Option<PathBuf>, config: &PipelineConfig, default_name: &str) -> Option<PathBuf> {
    explicit.clone().or_else(|| config.out_dir.as_ref().map(|d| d.join(default_name)))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| PipelineError::data(Stage::Write, format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, bytes).map_err(|e| PipelineError::data(Stage::Write, format!("{}: {e}", path.display())))
}

fn emit(path: Option<PathBuf>, bytes: &[u8]) -> Result<(), PipelineError> {
    match path {
        Some(p) => write_bytes(&p, bytes),
        None => std::io::stdout().write_all(bytes).map_err(|e| PipelineError::data(Stage::Write, e)),
    }
}

fn json<T: Serialize>(value: &T) -> Result<Vec<u8>, PipelineError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| PipelineError::internal(Stage::Write, e))?;
    bytes.push(b'\n');
    Ok(bytes)
}

#[derive(Serialize)]
struct OptimizeResult {
    seed: u64,
    selected_indices: Vec<usize>,
    best_fitness: f64,
    nfe: usize,
    iterations: usize,
    termination: gawar::Termination,
}

#[derive(Serialize)]
struct EvaluateResult {
    features: Vec<usize>,
    n_splits: usize,
    split_seed: u64,
    mean: dmc_gawar::MetricsReport,
    per_split: Vec<dmc_gawar::MetricsReport>,
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    match &cli.command {
        Command::Rank { tuning, out } => {
            let config = build_config(cli, tuning)?;
            let (matrix, labels) = load_dataset(&config)?;
            let scores = score_features(&matrix, &labels, config.ranker).map_err(|e| PipelineError::data(Stage::Rank, e))?;
            let keep = retained_count(matrix.n_features(), config.keep_fraction);
            let mut bytes = Vec::new();
            write_scores_csv(&mut bytes, &scores[..keep], matrix.feature_names())
                .map_err(|e| PipelineError::internal(Stage::Write, e))?;
            emit(output_path(out, &config, "scores.csv"), &bytes)
        }
        Command::Cluster { tuning, out } => {
            let config = build_config(cli, tuning)?;
            let (matrix, labels) = load_dataset(&config)?;
            let stages = build_space(&matrix, &labels, &config)?;
            emit(output_path(out, &config, "space.json"), &json(&stages.file)?)
        }
        Command::Optimize { tuning, space, log, json: json_out } => {
            let config = build_config(cli, tuning)?;
            let (matrix, labels) = load_dataset(&config)?;
            let file = SpaceFile::load(space)?;
            if let Some(&j) = file.indices.iter().find(|&&j| j >= matrix.n_features()) {
                return Err(PipelineError::data(
                    Stage::Load,
                    format!("space refers to feature {j} but the dataset has {}", matrix.n_features()),
                ));
            }
            let seeds = StageSeeds::derive(config.seed);
            let ga = GaConfig {
                seed: seeds.ga,
                n_var: pipeline::effective_n_var(matrix.n_features(), config.ga.n_var),
                ..config.ga.clone()
            };
            let fitness = SubsetAccuracy {
                matrix: &matrix,
                labels: &labels,
                n_splits: config.n_splits,
                test_fraction: config.test_fraction,
                base_seed: seeds.splits,
            };
            let outcome = gawar::run(&file.feature_space(), &ga, &fitness).map_err(|e| match e {
                gawar::GaError::Fitness(_) => PipelineError::data(Stage::Optimize, e),
                gawar::GaError::InvalidConfig(_) | gawar::GaError::ExhaustedSpace { .. } => {
                    PipelineError::usage(Stage::Optimize, e)
                }
                _ => PipelineError::internal(Stage::Optimize, e),
            })?;
            let mut csv_bytes = Vec::new();
            outcome.log.write_csv(&mut csv_bytes).map_err(|e| PipelineError::internal(Stage::Write, e))?;
            if let Some(p) = output_path(log, &config, "convergence.csv") {
                write_bytes(&p, &csv_bytes)?;
            }
            let result = OptimizeResult {
                seed: config.seed,
                selected_indices: outcome.best.key(),
                best_fitness: outcome.best.fitness.unwrap_or(0.0),
                nfe: outcome.log.nfe,
                iterations: outcome.log.records.len(),
                termination: outcome.termination,
            };
            emit(output_path(json_out, &config, "optimize.json"), &json(&result)?)
        }
        Command::Evaluate { tuning, features, json: json_out } => {
            let config = build_config(cli, tuning)?;
            let (matrix, labels) = load_dataset(&config)?;
            let spec = config.fitness_spec(features.clone());
            let e = evaluate_subset(&matrix, &labels, &spec).map_err(|e| match e {
                dmc_gawar::classifier::ClassifierError::Split(_) => PipelineError::data(Stage::Evaluate, e),
                _ => PipelineError::usage(Stage::Evaluate, e),
            })?;
            let result = EvaluateResult {
                features: features.clone(),
                n_splits: spec.n_splits,
                split_seed: spec.base_seed,
                mean: e.mean,
                per_split: e.per_split,
            };
            emit(output_path(json_out, &config, "evaluate.json"), &json(&result)?)
        }
        Command::Pipeline { tuning } => {
            let config = build_config(cli, tuning)?;
            let report = pipeline::run_pipeline(&config)?;
            println!(
                "before accuracy {:.4}  after accuracy {:.4}  nfe {}  selected {:?}",
                report.before.overall_accuracy, report.after.overall_accuracy, report.ga.nfe, report.selected_indices
            );
            Ok(())
        }
        Command::Experiment { tuning, runs } => {
            let config = build_config(cli, tuning)?;
            let n_runs = runs.unwrap_or(config.n_runs);
            if n_runs == 0 {
                return Err(PipelineError::usage(Stage::Config, "runs must be at least 1"));
            }
            let table = pipeline::experiment(&config, n_runs)?;
            println!(
                "runs {}  before {:.4} ± {:.4}  after {:.4} ± {:.4}  mean nfe {:.1}",
                table.runs.len(),
                table.mean_before.overall_accuracy,
                table.std_before.overall_accuracy,
                table.mean_after.overall_accuracy,
                table.std_after.overall_accuracy,
                table.mean_nfe
            );
            Ok(())
        }
        Command::Baseline { tuning, runs, json: json_out } => {
            let config = build_config(cli, tuning)?;
            if *runs == 0 {
                return Err(PipelineError::usage(Stage::Config, "runs must be at least 1"));
            }
            let report = pipeline::random_baseline(&config, *runs)?;
            emit(output_path(json_out, &config, "baseline.json"), &json(&report)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

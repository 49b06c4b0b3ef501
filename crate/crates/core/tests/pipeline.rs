mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use dmc_gawar::pipeline::{
    experiment, random_baseline, random_baseline_on_space, run_pipeline, PipelineConfig, StageSeeds,
};
use dmc_gawar::{evaluate_subset, FeatureSpace, GaConfig};

fn quick_config(dataset: &Path) -> PipelineConfig {
    PipelineConfig {
        dataset: dataset.to_path_buf(),
        keep_fraction: 0.25,
        q: 12,
        ga: GaConfig { max_iters: 20, stagnation_limit: 8, n_var: 4, ..GaConfig::default() },
        n_splits: 3,
        seed: 5,
        ..PipelineConfig::default()
    }
}

fn dataset(dir: &Path, m: usize) -> std::path::PathBuf {
    let (x, y) = common::synthetic(30, m, 4, 1.5, 21);
    let path = dir.join("data.csv");
    common::write_dataset(&path, &x, &y);
    path
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path(), 80);
    let mut a = quick_config(&data);
    a.out_dir = Some(dir.path().join("a"));
    let mut b = a.clone();
    b.out_dir = Some(dir.path().join("b"));
    let ra = run_pipeline(&a).unwrap();
    let rb = run_pipeline(&b).unwrap();
    assert_eq!(ra.selected_indices, rb.selected_indices);
    assert_eq!(ra.selected_indices.len(), 4);
    for name in ["report.json", "space.json", "convergence.csv"] {
        let fa = fs::read(dir.path().join("a").join(name)).unwrap();
        let fb = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(fa, fb, "{name} differs");
    }
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("a/report.json")).unwrap()).unwrap();
    for key in ["before", "after", "selected_indices", "selected_names", "convergence", "ga"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn before_and_after_share_split_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path(), 60);
    let config = quick_config(&data);
    let report = run_pipeline(&config).unwrap();
    let (x, y) = dmc_gawar::load_csv(&data, None).unwrap();
    let all: Vec<usize> = (0..x.n_features()).collect();
    assert_eq!(report.before, evaluate_subset(&x, &y, &config.fitness_spec(all)).unwrap().mean);
    let after = evaluate_subset(&x, &y, &config.fitness_spec(report.selected_indices.clone())).unwrap();
    assert_eq!(report.after, after.mean);
    assert_eq!(config.fitness_spec(vec![0]).base_seed, StageSeeds::derive(config.seed).splits);
}

#[test]
fn twenty_feature_dataset_is_clamped() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path(), 20);
    let config = PipelineConfig {
        dataset: data,
        seed: 1,
        ga: GaConfig { max_iters: 15, ..GaConfig::default() },
        n_splits: 2,
        ..PipelineConfig::default()
    };
    let report = run_pipeline(&config).unwrap();
    assert_eq!(report.n_var, 10);
    assert_eq!(report.selected_indices.len(), 10);
    assert!(report.feature_space.len() >= 10);
}

#[test]
fn experiment_aggregates_runs() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path(), 50);
    let mut config = quick_config(&data);
    config.out_dir = Some(dir.path().join("exp"));
    let one = experiment(&config, 1).unwrap();
    let single = run_pipeline(&PipelineConfig { out_dir: None, ..config.clone() }).unwrap();
    assert_eq!(one.mean_after, single.after);
    assert_eq!(one.mean_nfe, single.ga.nfe as f64);

    let three = experiment(&config, 3).unwrap();
    let seeds: Vec<u64> = three.runs.iter().map(|r| r.seed).collect();
    assert_eq!(seeds, vec![5, 6, 7]);
    let mean = three.runs.iter().map(|r| r.after.overall_accuracy).sum::<f64>() / 3.0;
    assert!((three.mean_after.overall_accuracy - mean).abs() < 1e-12);
    for k in 0..3 {
        assert!(dir.path().join(format!("exp/run_{k}/report.json")).exists());
    }
    assert!(dir.path().join("exp/experiment.csv").exists());
}

#[test]
fn baseline_is_deterministic_and_forced_on_exact_space() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path(), 40);
    let config = quick_config(&data);
    assert_eq!(random_baseline(&config, 3).unwrap(), random_baseline(&config, 3).unwrap());

    let (x, y) = dmc_gawar::load_csv(&data, None).unwrap();
    let exact = FeatureSpace { indices: vec![3, 1, 7, 9], seed: 0 };
    let b = random_baseline_on_space(&x, &y, &exact, &config, 2).unwrap();
    let unique = evaluate_subset(&x, &y, &config.fitness_spec(vec![1, 3, 7, 9])).unwrap().mean;
    assert_eq!(b.mean, unique);
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dmc-gawar"))
}

#[test]
fn cli_stages_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path(), 60);
    let d = |p: &str| dir.path().join(p);
    let ok = |args: &[&str]| {
        let out = cli().arg("--data").arg(&data).args(args).output().unwrap();
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        out
    };

    ok(&["rank", "--keep", "0.1", "--out", d("scores.csv").to_str().unwrap()]);
    let scores = fs::read_to_string(d("scores.csv")).unwrap();
    assert!(scores.starts_with("rank,feature_index,feature_name,score\n"));
    assert_eq!(scores.lines().count(), 1 + 6);

    ok(&["--seed", "2", "cluster", "--keep", "0.3", "--q", "8", "--n-var", "4", "--out", d("space.json").to_str().unwrap()]);
    ok(&[
        "--seed", "2", "optimize", "--space", d("space.json").to_str().unwrap(), "--npop", "10", "--max-iters",
        "12", "--stagnation", "6", "--n-var", "4", "--splits", "2", "--log", d("conv.csv").to_str().unwrap(),
        "--json", d("opt.json").to_str().unwrap(),
    ]);
    let conv = fs::read_to_string(d("conv.csv")).unwrap();
    assert!(conv.starts_with("iteration,best_fitness,p_c,p_m,n_c,n_m,adapted,full_mutation,nfe_cumulative\n"));

    let out = ok(&["evaluate", "--features", "0,1,2", "--splits", "2"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["per_split"].as_array().unwrap().len(), 2);

    fs::write(d("cfg.toml"), "q = 8\nkeep_fraction = 0.3\nn_var = 4\nmax_iters = 5\nn_splits = 2\n").unwrap();
    ok(&["--config", d("cfg.toml").to_str().unwrap(), "--out-dir", d("run").to_str().unwrap(), "pipeline"]);
    assert!(d("run/report.json").exists() && d("run/convergence.csv").exists());
    ok(&["--config", d("cfg.toml").to_str().unwrap(), "baseline", "--runs", "2", "--json", d("base.json").to_str().unwrap()]);
    ok(&["--config", d("cfg.toml").to_str().unwrap(), "experiment", "--runs", "2"]);

    let code = |args: &[&str]| cli().args(args).output().unwrap().status.code();
    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(code(&["--no-such-flag"]), Some(1));
    assert_eq!(code(&["pipeline"]), Some(1));
    assert_eq!(code(&["--data", d("missing.csv").to_str().unwrap(), "pipeline"]), Some(2));
    fs::write(d("bad.csv"), "a,y\n1,A\n2,B\n3,C\n").unwrap();
    assert_eq!(code(&["--data", d("bad.csv").to_str().unwrap(), "rank"]), Some(2));
    fs::write(d("bad.toml"), "nonsense_key = 3\n").unwrap();
    assert_eq!(code(&["--data", data.to_str().unwrap(), "--config", d("bad.toml").to_str().unwrap(), "rank"]), Some(1));
}

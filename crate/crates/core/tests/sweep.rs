mod common;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use qgnn_noise::experiment::{
    cmd_analyze, cmd_sweep, read_runs, AnalyzeOptions, DatasetSource, ExperimentConfig, ExperimentError, RunLine,
    SweepOptions, SyntheticSpec, RUNS_FILE,
};
use qgnn_noise::trainer::RunRecord;

fn tiny(out: &Path, n_seeds: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::synthetic(40, 5);
    c.dataset = DatasetSource::Synthetic(SyntheticSpec { count: 40, seed: 5, max_atoms: 4 });
    c.n_seeds = n_seeds;
    c.noise.epsilons = vec![0.0, 0.005, 0.01, 0.02];
    c.model.hidden = [4, 4, 4];
    c.train.max_epochs = 4;
    c.train.batch_size = 16;
    c.train.learning_rate = 2e-2;
    c.output_dir = out.to_path_buf();
    c.workers = 2;
    c.analysis.n_perm = 199;
    c
}

fn records(path: &Path) -> Vec<RunRecord> {
    let (lines, truncated) = read_runs(path).unwrap();
    assert!(truncated.is_none());
    let mut out: Vec<RunRecord> = lines
        .into_iter()
        .map(|l| match l {
            RunLine::Ok(mut r) => {
                r.wall_time = 0.0;
                r
            }
            RunLine::Failed(f) => panic!("run failed: {}", f.error),
        })
        .collect();
    out.sort_by_key(|r| (r.init_seed, r.epsilon.to_bits()));
    out
}

#[test]
fn sweep_writes_one_line_per_pair_and_shares_init() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny(dir.path(), 2);
    let s = cmd_sweep(&config, &SweepOptions::default()).unwrap();
    assert_eq!((s.executed, s.succeeded, s.failed, s.skipped), (8, 8, 0, 0));
    let text = fs::read_to_string(dir.path().join(RUNS_FILE)).unwrap();
    assert_eq!(text.lines().count(), 8);
    let recs = records(&dir.path().join(RUNS_FILE));
    let pairs: BTreeSet<(u64, u64)> = recs.iter().map(|r| (r.init_seed, r.epsilon.to_bits())).collect();
    assert_eq!(pairs.len(), 8);
    for seed in [0u64, 1] {
        let digests: BTreeSet<&str> =
            recs.iter().filter(|r| r.init_seed == seed).map(|r| r.initial_params_digest.as_str()).collect();
        assert_eq!(digests.len(), 1, "seed {seed}");
    }
    for r in &recs {
        let ck = dir.path().join(r.checkpoint_path.as_ref().unwrap());
        assert!(ck.exists(), "{}", ck.display());
    }

    // a second plain sweep refuses to clobber the log
    assert!(matches!(cmd_sweep(&config, &SweepOptions::default()), Err(ExperimentError::Config(_))));
    // resuming a complete log does nothing
    let s = cmd_sweep(&config, &SweepOptions { resume: true, limit: None }).unwrap();
    assert_eq!((s.executed, s.skipped), (0, 8));
}

#[test]
fn interrupted_sweep_resumes_to_the_same_records() {
    let full_dir = tempfile::tempdir().unwrap();
    let full = tiny(full_dir.path(), 2);
    cmd_sweep(&full, &SweepOptions::default()).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let config = tiny(dir.path(), 2);
    let s = cmd_sweep(&config, &SweepOptions { resume: false, limit: Some(3) }).unwrap();
    assert_eq!(s.executed, 3);
    // simulate a crash mid-write
    let runs = dir.path().join(RUNS_FILE);
    let mut text = fs::read_to_string(&runs).unwrap();
    text.push_str("{\"status\":\"ok\",\"init_se");
    fs::write(&runs, text).unwrap();

    let s = cmd_sweep(&config, &SweepOptions { resume: true, limit: None }).unwrap();
    assert_eq!((s.executed, s.skipped), (5, 3));
    assert_eq!(fs::read_to_string(&runs).unwrap().lines().count(), 8);
    assert_eq!(records(&runs), records(&full_dir.path().join(RUNS_FILE)));
}

#[test]
fn resume_with_changed_config_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny(dir.path(), 1);
    cmd_sweep(&config, &SweepOptions { resume: false, limit: Some(1) }).unwrap();
    let mut changed = config.clone();
    changed.train.learning_rate = 1e-3;
    let err = cmd_sweep(&changed, &SweepOptions { resume: true, limit: None }).unwrap_err();
    assert!(matches!(err, ExperimentError::Config(_)), "{err}");
}

#[test]
fn analyze_names_missing_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny(dir.path(), 2);
    cmd_sweep(&config, &SweepOptions { resume: false, limit: Some(7) }).unwrap();
    let err = cmd_analyze(&config.runs_path(), &config, &dir.path().join("report"), &AnalyzeOptions::default())
        .unwrap_err();
    match &err {
        ExperimentError::MissingRuns(pairs) => assert_eq!(pairs.len(), 1),
        other => panic!("unexpected {other}"),
    }
    let (seed, eps) = config.grid_pairs()[7];
    let msg = err.to_string();
    assert!(msg.contains(&seed.to_string()) && msg.contains(&eps.to_string()), "{msg}");
}

#[test]
fn report_is_reproducible_and_matches_raw_log() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = tiny(dir.path(), 3);
    config.dataset = DatasetSource::Synthetic(SyntheticSpec { count: 80, seed: 5, max_atoms: 6 });
    config.model.hidden = [8, 8, 8];
    config.train.max_epochs = 40;
    cmd_sweep(&config, &SweepOptions::default()).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let report = cmd_analyze(&config.runs_path(), &config, &a, &AnalyzeOptions::default()).unwrap();
    cmd_analyze(&config.runs_path(), &config, &b, &AnalyzeOptions::default()).unwrap();
    for name in ["report.json", "waterfall.csv", "histogram.csv", "dose_response.csv", "scatter.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }

    assert!(!report.summaries.is_empty());
    let raw = common::reaggregate(&config.runs_path());
    assert_eq!(report.summaries.len() + report.excluded_seeds.len(), raw.len());
    for s in &report.summaries {
        let (base, best, delta) = raw[&s.init_seed];
        assert_eq!(s.baseline_r2, base);
        assert_eq!(s.best_noisy_r2, best);
        assert_eq!(s.delta_r2_percent, delta);
    }
    for seed in &report.excluded_seeds {
        assert!(raw[seed].0 <= 0.0);
    }
    let written: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    for (s, w) in report.summaries.iter().zip(written["summaries"].as_array().unwrap()) {
        assert_eq!(w["delta_r2_percent"].as_f64().unwrap(), s.delta_r2_percent);
    }
}

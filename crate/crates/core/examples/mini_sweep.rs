//! A small seeds × noise sweep, interrupted and resumed, then analyzed.
//!
//! Usage: cargo run --release --example mini_sweep -- [n_seeds]

use qgnn_noise::experiment::{cmd_analyze, cmd_sweep, AnalyzeOptions, ExperimentConfig, SweepOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n_seeds: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(3);
    let dir = tempfile::tempdir()?;
    let mut config = ExperimentConfig::synthetic(120, 7);
    config.n_seeds = n_seeds;
    config.output_dir = dir.path().join("out");
    config.train.max_epochs = 60;
    config.analysis.n_perm = 999;

    let first = cmd_sweep(&config, &SweepOptions { resume: false, limit: Some(2) })?;
    println!("first pass: {first:?}");
    let second = cmd_sweep(&config, &SweepOptions { resume: true, limit: None })?;
    println!("resumed:    {second:?}");

    let report = cmd_analyze(&config.runs_path(), &config, &dir.path().join("report"), &AnalyzeOptions::default())?;
    for s in &report.summaries {
        println!("seed {}: baseline {:.3}, ΔR² {:+.2}% {:?}", s.init_seed, s.baseline_r2, s.delta_r2_percent, s.category);
    }
    println!("excluded (nonpositive baseline): {:?}", report.excluded_seeds);
    for f in ["report.json", "waterfall.csv", "histogram.csv", "dose_response.csv", "scatter.csv"] {
        println!("wrote {f}");
    }
    Ok(())
}

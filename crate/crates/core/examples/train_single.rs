//! Trains one model on a synthetic dataset and prints its R² scores.
//!
//! Usage: cargo run --release --example train_single -- [init_seed] [epsilon]

use qgnn_noise::graph_data::{generate_synthetic, split_dataset, DEFAULT_RATIOS};
use qgnn_noise::trainer::{train_model, ModelConfig, NoiseSettings, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let epsilon: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0.0);

    let graphs = generate_synthetic(200, 7, 11);
    let split = split_dataset(&graphs, DEFAULT_RATIOS, 42)?;
    let noise = NoiseSettings { epsilon, ..NoiseSettings::noiseless() };
    let config = TrainConfig { init_seed: seed, ..TrainConfig::default() };
    let out = train_model(&split, &noise, &ModelConfig::default(), &config, 0)?;
    let r = &out.record;
    println!(
        "seed {seed} ε {epsilon}: epochs {} (best {}), R² train {:.4} val {:.4} test {:.4}, {:.1}s",
        r.epochs_run, r.best_epoch, r.r2_train, r.r2_val, r.r2_test, r.wall_time
    );
    Ok(())
}

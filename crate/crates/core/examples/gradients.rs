//! Compares the adjoint, parameter-shift and finite-difference gradient engines.

use qgnn_noise::graph_data::generate_synthetic;
use qgnn_noise::trainer::{init_params, quantum_gradient, GradientMode, ModelConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = &generate_synthetic(1, 11, 6)[0];
    let params = init_params(5, &ModelConfig::default());
    let mut results = Vec::new();
    for mode in [GradientMode::Adjoint, GradientMode::ParameterShift, GradientMode::FiniteDifference] {
        let t = std::time::Instant::now();
        let grad = quantum_gradient(g, &params, 1.0, mode, 1e-4)?;
        println!("{mode:?}: {:.2} ms", t.elapsed().as_secs_f64() * 1e3);
        results.push(grad);
    }
    println!("{:>5} {:>14} {:>14} {:>14}", "param", "adjoint", "shift", "central diff");
    for k in 0..results[0].len() {
        println!("{k:>5} {:>14.9} {:>14.9} {:>14.9}", results[0][k], results[1][k], results[2][k]);
    }
    Ok(())
}

//! Error accumulation with circuit size and the sampled output channel.

use qgnn_noise::noise::{sample_output_noise, theoretical_optimal_epsilon, NoiseProfile, DEFAULT_SIGMA_COEFF};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:>6} {:>8} {:>10} {:>10}", "N_g", "eps", "p_error", "sigma");
    for n_g in [50, 75, 100] {
        for eps in [0.005, 0.010, 0.015] {
            let p = NoiseProfile::new(eps, n_g, 1, DEFAULT_SIGMA_COEFF)?;
            println!("{n_g:>6} {eps:>8.3} {:>10.6} {:>10.6}", p.p_error(), p.sigma());
        }
    }
    println!("optimal ε for N_g = 50..100: [{:.5}, {:.5}]", theoretical_optimal_epsilon(100, 1), theoretical_optimal_epsilon(50, 1));

    let profile = NoiseProfile::new(0.005, 100, 1, DEFAULT_SIGMA_COEFF)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let draws: Vec<f64> = (0..10_000).map(|_| sample_output_noise(1.0, &profile, &mut rng).0).collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    println!("f = 1.0 through the channel: sample mean {mean:.4}, expected {:.4}", profile.attenuation());
    Ok(())
}

//! Cohort statistics on a hand-made set of per-seed responses.

use qgnn_noise::analysis::{
    cohort_report, pearson, permutation_test_exhaustive, summarize_seed, welch_t_test, AnalysisOptions, SeedResponses,
};

fn seed(init_seed: u64, r2: [f64; 4]) -> SeedResponses {
    SeedResponses {
        init_seed,
        epsilons: vec![0.0, 0.005, 0.010, 0.015],
        r2_test: r2.to_vec(),
        early_stopped: vec![true; 4],
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cohort = vec![
        seed(0, [0.62, 0.66, 0.64, 0.61]),
        seed(1, [0.70, 0.73, 0.71, 0.69]),
        seed(2, [0.72, 0.66, 0.65, 0.64]),
        seed(3, [0.80, 0.79, 0.78, 0.75]),
        seed(4, [0.58, 0.63, 0.60, 0.57]),
    ];
    for r in &cohort {
        let s = summarize_seed(r)?;
        println!("seed {}: baseline {:.2}, best ε {}, ΔR² {:+.2}% {:?}", s.init_seed, s.baseline_r2, s.best_epsilon, s.delta_r2_percent, s.category);
    }
    let report = cohort_report(&cohort, &AnalysisOptions { n_perm: 999, ..AnalysisOptions::default() })?;
    println!("fractions (beneficial, detrimental, marginal): {:?}", report.category_fractions);

    let base: Vec<f64> = report.summaries.iter().map(|s| s.baseline_r2).collect();
    let delta: Vec<f64> = report.summaries.iter().map(|s| s.delta_r2_percent).collect();
    let r = pearson(&base, &delta)?;
    println!("pearson r = {:.4}, p = {:.4}", r.statistic, r.p_value);
    let t = welch_t_test(&base[..2], &base[2..])?;
    println!("welch t = {:.4}, p = {:.4}", t.statistic, t.p_value);
    let values: Vec<Vec<f64>> = cohort[..3].iter().map(|c| c.r2_test.clone()).collect();
    let p = permutation_test_exhaustive(&values)?;
    println!("exhaustive permutation over {} assignments: spread {:.3}, p = {:.4}", p.n_null, p.observed, p.p_value);
    Ok(())
}

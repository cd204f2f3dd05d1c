//! Cohort statistics over per-seed noise responses.
//!
//! Conventions:
//!
//! * `ΔR² = (R²_noisy − R²_baseline) / R²_baseline × 100`, where `R²_noisy` is the
//!   best test R² over the nonzero noise levels, reported for every seed (also
//!   for seeds whose overall best is the noiseless run).
//! * Beneficial if `ΔR² > 2`, Detrimental if `ΔR² < −2`, Marginal otherwise.
//! * Permutation null: within each seed, the R² values of all noise levels are
//!   shuffled, which re-assigns which value acts as the baseline. The statistic
//!   is the spread `max ΔR² − min ΔR²` across seeds. Null values within
//!   `1e-12` (relative) of the observed statistic count as ties, i.e. as extreme.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::{mean, student_t_two_sided, variance};
use crate::trainer::RunRecord;

pub const CATEGORY_THRESHOLD_PERCENT: f64 = 2.0;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("targets are constant; R² is undefined")]
    ConstantTargets,
    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),
    #[error("baseline R² {0} is not positive")]
    NonPositiveBaseline(f64),
    #[error("seed {seed}: {message}")]
    SeedRecords { seed: u64, message: String },
    #[error("malformed input: {0}")]
    Malformed(String),
}

pub fn r2_score(y_true: &[f64], y_pred: &[f64]) -> Result<f64, AnalysisError> {
    if y_true.len() != y_pred.len() {
        return Err(AnalysisError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.len() < 2 {
        return Err(AnalysisError::TooFew { needed: 2, got: y_true.len() });
    }
    let m = mean(y_true);
    let ss_tot: f64 = y_true.iter().map(|y| (y - m).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(AnalysisError::ConstantTargets);
    }
    let ss_res: f64 = y_true.iter().zip(y_pred).map(|(y, p)| (y - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Relative change in percent.
pub fn delta_r2(noisy: f64, baseline: f64) -> Result<f64, AnalysisError> {
    if !(baseline > 0.0) {
        return Err(AnalysisError::NonPositiveBaseline(baseline));
    }
    Ok((noisy - baseline) / baseline * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Beneficial,
    Detrimental,
    Marginal,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Beneficial, Category::Detrimental, Category::Marginal];

    pub fn name(self) -> &'static str {
        match self {
            Category::Beneficial => "beneficial",
            Category::Detrimental => "detrimental",
            Category::Marginal => "marginal",
        }
    }
}

pub fn classify(delta_r2_percent: f64) -> Category {
    if delta_r2_percent > CATEGORY_THRESHOLD_PERCENT {
        Category::Beneficial
    } else if delta_r2_percent < -CATEGORY_THRESHOLD_PERCENT {
        Category::Detrimental
    } else {
        Category::Marginal
    }
}

/// Test R² of one seed at every configured noise level, ε ascending, ε = 0 first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResponses {
    pub init_seed: u64,
    pub epsilons: Vec<f64>,
    pub r2_test: Vec<f64>,
    pub early_stopped: Vec<bool>,
}

impl SeedResponses {
    /// Groups records of one seed; requires exactly one record per ε in `grid`.
    pub fn from_records(records: &[&RunRecord], grid: &[f64]) -> Result<Self, AnalysisError> {
        let seed = records.first().map(|r| r.init_seed).ok_or(AnalysisError::TooFew { needed: 1, got: 0 })?;
        let err = |message: String| AnalysisError::SeedRecords { seed, message };
        if let Some(r) = records.iter().find(|r| r.init_seed != seed) {
            return Err(err(format!("mismatched seed {} in group", r.init_seed)));
        }
        let mut eps: Vec<f64> = grid.to_vec();
        eps.sort_by(f64::total_cmp);
        if eps.first() != Some(&0.0) || eps.iter().filter(|&&e| e == 0.0).count() != 1 {
            return Err(err("noise grid must contain 0.0 exactly once".into()));
        }
        let mut r2 = Vec::with_capacity(eps.len());
        let mut es = Vec::with_capacity(eps.len());
        for &e in &eps {
            let hits: Vec<_> = records.iter().filter(|r| r.epsilon == e).collect();
            match hits.len() {
                0 => return Err(err(format!("missing ε = {e}"))),
                1 => {
                    r2.push(hits[0].r2_test);
                    es.push(hits[0].early_stopped);
                }
                _ => return Err(err(format!("duplicate ε = {e}"))),
            }
        }
        if records.len() != eps.len() {
            return Err(err(format!("{} records for {} noise levels", records.len(), eps.len())));
        }
        Ok(SeedResponses { init_seed: seed, epsilons: eps, r2_test: r2, early_stopped: es })
    }

    pub fn baseline(&self) -> f64 {
        self.r2_test[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSummary {
    pub init_seed: u64,
    pub baseline_r2: f64,
    pub best_epsilon: f64,
    pub best_noisy_r2: f64,
    pub delta_r2_percent: f64,
    pub category: Category,
}

/// Index (into the nonzero levels, offset by one) of the best noisy R²; first wins ties.
fn best_noisy(values: &[f64]) -> usize {
    let mut best = 1;
    for k in 2..values.len() {
        if values[k] > values[best] {
            best = k;
        }
    }
    best
}

pub fn summarize_seed(responses: &SeedResponses) -> Result<ResponseSummary, AnalysisError> {
    if responses.r2_test.len() < 2 {
        return Err(AnalysisError::SeedRecords {
            seed: responses.init_seed,
            message: "need at least one nonzero noise level".into(),
        });
    }
    let baseline = responses.baseline();
    let k = best_noisy(&responses.r2_test);
    let best_noisy_r2 = responses.r2_test[k];
    let delta = delta_r2(best_noisy_r2, baseline)?;
    // ε = 0 is the optimum only if it beats every noisy run strictly
    let best_epsilon = if baseline > best_noisy_r2 { 0.0 } else { responses.epsilons[k] };
    Ok(ResponseSummary {
        init_seed: responses.init_seed,
        baseline_r2: baseline,
        best_epsilon,
        best_noisy_r2,
        delta_r2_percent: delta,
        category: classify(delta),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
}

/// Sample Pearson correlation with a two-sided t-distribution p-value (n − 2 dof).
pub fn pearson(x: &[f64], y: &[f64]) -> Result<TestOutcome, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(AnalysisError::TooFew { needed: 3, got: x.len() });
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 {
        return Err(AnalysisError::ZeroVariance("x"));
    }
    if syy == 0.0 {
        return Err(AnalysisError::ZeroVariance("y"));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = (x.len() - 2) as f64;
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        student_t_two_sided(r * (df / (1.0 - r * r)).sqrt(), df)
    };
    Ok(TestOutcome { statistic: r, p_value: p })
}

/// Welch's unequal-variance t-test, two-sided, Welch–Satterthwaite degrees of freedom.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TestOutcome, AnalysisError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(AnalysisError::TooFew { needed: 2, got: s.len() });
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (variance(a) / na, variance(b) / nb);
    let diff = mean(a) - mean(b);
    let se2 = va + vb;
    if se2 == 0.0 {
        return Ok(if diff == 0.0 {
            TestOutcome { statistic: 0.0, p_value: 1.0 }
        } else {
            TestOutcome { statistic: diff.signum() * f64::INFINITY, p_value: 0.0 }
        });
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    Ok(TestOutcome { statistic: t, p_value: student_t_two_sided(t, df) })
}

/// `max ΔR² − min ΔR²` across seeds, each seed's values ordered baseline first.
pub fn delta_spread(per_seed: &[Vec<f64>]) -> Result<f64, AnalysisError> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in per_seed {
        let d = delta_r2(v[best_noisy(v)], v[0])?;
        lo = lo.min(d);
        hi = hi.max(d);
    }
    Ok(hi - lo)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationOutcome {
    pub observed: f64,
    pub p_value: f64,
    /// Number of null assignments evaluated.
    pub n_null: u64,
    pub exhaustive: bool,
}

fn is_extreme(null: f64, observed: f64) -> bool {
    null >= observed - 1e-12 * observed.abs().max(1.0)
}

fn check_permutation_input(per_seed: &[Vec<f64>]) -> Result<(), AnalysisError> {
    if per_seed.len() < 2 {
        return Err(AnalysisError::TooFew { needed: 2, got: per_seed.len() });
    }
    let k = per_seed[0].len();
    if k < 2 || per_seed.iter().any(|v| v.len() != k) {
        return Err(AnalysisError::Malformed("every seed needs the same ≥ 2 noise levels".into()));
    }
    if per_seed.iter().flatten().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(AnalysisError::Malformed("permutation test needs positive finite R² values".into()));
    }
    Ok(())
}

/// Exact p-value by enumerating every within-seed assignment of the baseline.
///
/// Only which value lands in the baseline slot affects the statistic, so the
/// `k^S` baseline choices carry the same distribution as all `(k!)^S` permutations.
pub fn permutation_test_exhaustive(per_seed: &[Vec<f64>]) -> Result<PermutationOutcome, AnalysisError> {
    check_permutation_input(per_seed)?;
    let observed = delta_spread(per_seed)?;
    let k = per_seed[0].len();
    let total = (k as u64)
        .checked_pow(per_seed.len() as u32)
        .filter(|&t| t <= 50_000_000)
        .ok_or_else(|| AnalysisError::Malformed("too many assignments to enumerate".into()))?;
    let mut choice = vec![0usize; per_seed.len()];
    let mut work: Vec<Vec<f64>> = per_seed.to_vec();
    let mut extreme = 0u64;
    for _ in 0..total {
        for (s, &c) in choice.iter().enumerate() {
            let orig = &per_seed[s];
            let w = &mut work[s];
            w[0] = orig[c];
            let mut j = 1;
            for (i, &v) in orig.iter().enumerate() {
                if i != c {
                    w[j] = v;
                    j += 1;
                }
            }
        }
        if is_extreme(delta_spread(&work)?, observed) {
            extreme += 1;
        }
        for c in choice.iter_mut() {
            *c += 1;
            if *c < k {
                break;
            }
            *c = 0;
        }
    }
    Ok(PermutationOutcome { observed, p_value: extreme as f64 / total as f64, n_null: total, exhaustive: true })
}

/// Monte-Carlo permutation test with add-one smoothing: `p = (1 + #extreme) / (1 + n_perm)`.
pub fn permutation_test_sampled(per_seed: &[Vec<f64>], n_perm: usize, seed: u64) -> Result<PermutationOutcome, AnalysisError> {
    check_permutation_input(per_seed)?;
    if n_perm < 99 {
        return Err(AnalysisError::TooFew { needed: 99, got: n_perm });
    }
    let observed = delta_spread(per_seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work: Vec<Vec<f64>> = per_seed.to_vec();
    let mut extreme = 0u64;
    for _ in 0..n_perm {
        for (w, orig) in work.iter_mut().zip(per_seed) {
            w.copy_from_slice(orig);
            w.shuffle(&mut rng);
        }
        if is_extreme(delta_spread(&work)?, observed) {
            extreme += 1;
        }
    }
    Ok(PermutationOutcome {
        observed,
        p_value: (1 + extreme) as f64 / (1 + n_perm) as f64,
        n_null: n_perm as u64,
        exhaustive: false,
    })
}

/// Enumerates exactly when the assignment space is no larger than `n_perm`, samples otherwise.
pub fn permutation_test(per_seed: &[Vec<f64>], n_perm: usize, seed: u64) -> Result<PermutationOutcome, AnalysisError> {
    check_permutation_input(per_seed)?;
    let k = per_seed[0].len() as u64;
    match k.checked_pow(per_seed.len() as u32) {
        Some(total) if total <= n_perm as u64 => permutation_test_exhaustive(per_seed),
        _ => permutation_test_sampled(per_seed, n_perm, seed),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOutcome {
    pub threshold: f64,
    pub n_below: usize,
    pub n_above: usize,
    /// Fraction of seeds with baseline below the threshold that are Beneficial.
    pub p_benefit_below: Option<f64>,
    /// Fraction of seeds with baseline at or above the threshold that are Detrimental.
    pub p_degrade_above: Option<f64>,
}

pub fn threshold_analysis(summaries: &[ResponseSummary], threshold: f64) -> Result<ThresholdOutcome, AnalysisError> {
    if summaries.is_empty() {
        return Err(AnalysisError::TooFew { needed: 1, got: 0 });
    }
    let (below, above): (Vec<_>, Vec<_>) = summaries.iter().partition(|s| s.baseline_r2 < threshold);
    let frac = |set: &[&ResponseSummary], c: Category| {
        (!set.is_empty()).then(|| set.iter().filter(|s| s.category == c).count() as f64 / set.len() as f64)
    };
    Ok(ThresholdOutcome {
        threshold,
        n_below: below.len(),
        n_above: above.len(),
        p_benefit_below: frac(&below, Category::Beneficial),
        p_degrade_above: frac(&above, Category::Detrimental),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DosePoint {
    pub epsilon: f64,
    pub mean_delta_r2: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoseCurve {
    pub category: Category,
    /// Empty when no seed falls in the category.
    pub points: Vec<DosePoint>,
}

/// Per-category mean ΔR² at each nonzero noise level.
pub fn dose_response(summaries: &[ResponseSummary], responses: &[SeedResponses]) -> Result<Vec<DoseCurve>, AnalysisError> {
    let by_seed: BTreeMap<u64, &SeedResponses> = responses.iter().map(|r| (r.init_seed, r)).collect();
    let grid = responses.first().map(|r| r.epsilons.clone()).unwrap_or_default();
    let mut curves = Vec::new();
    for cat in Category::ALL {
        let members: Vec<&SeedResponses> = summaries
            .iter()
            .filter(|s| s.category == cat)
            .map(|s| {
                by_seed
                    .get(&s.init_seed)
                    .copied()
                    .ok_or_else(|| AnalysisError::Malformed(format!("no responses for seed {}", s.init_seed)))
            })
            .collect::<Result<_, _>>()?;
        let mut points = Vec::new();
        if !members.is_empty() {
            for (k, &eps) in grid.iter().enumerate().skip(1) {
                let deltas: Vec<f64> =
                    members.iter().map(|m| delta_r2(m.r2_test[k], m.baseline())).collect::<Result<_, _>>()?;
                points.push(DosePoint { epsilon: eps, mean_delta_r2: mean(&deltas), n: deltas.len() });
            }
        }
        curves.push(DoseCurve { category: cat, points });
    }
    Ok(curves)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub n: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl GroupStats {
    fn of(xs: &[f64]) -> Self {
        GroupStats {
            n: xs.len(),
            mean: (!xs.is_empty()).then(|| mean(xs)),
            std: (xs.len() >= 2).then(|| variance(xs).sqrt()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryDetail {
    pub category: Category,
    pub fraction: f64,
    pub delta_r2: GroupStats,
    pub baseline_r2: GroupStats,
    /// Fraction of member runs that stopped early, per noise level.
    pub early_stopped_fraction: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    /// Baseline threshold; `None` uses the midpoint of the Beneficial and
    /// Detrimental baseline means (the cohort median if either group is empty).
    pub threshold: Option<f64>,
    pub n_perm: usize,
    pub perm_seed: u64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions { threshold: None, n_perm: 9999, perm_seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub epsilons: Vec<f64>,
    pub summaries: Vec<ResponseSummary>,
    /// Seeds left out because their noiseless R² is not positive.
    pub excluded_seeds: Vec<u64>,
    /// Beneficial, Detrimental, Marginal.
    pub category_fractions: [f64; 3],
    pub categories: Vec<CategoryDetail>,
    /// Fraction of seeds with any degradation (best noisy R² below baseline).
    pub any_degradation_fraction: f64,
    pub mean_delta_r2: f64,
    pub delta_r2_min: f64,
    pub delta_r2_max: f64,
    pub optimal_epsilon_histogram: Vec<(f64, f64)>,
    pub pearson: Option<TestOutcome>,
    /// Baseline R² of Beneficial vs Detrimental seeds.
    pub welch: Option<TestOutcome>,
    pub permutation: Option<PermutationOutcome>,
    pub dose_response: Vec<DoseCurve>,
    pub threshold: Option<ThresholdOutcome>,
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Builds the full cohort report from per-seed responses.
pub fn cohort_report(responses: &[SeedResponses], options: &AnalysisOptions) -> Result<CohortReport, AnalysisError> {
    let epsilons = responses.first().map(|r| r.epsilons.clone()).ok_or(AnalysisError::TooFew { needed: 1, got: 0 })?;
    if responses.iter().any(|r| r.epsilons != epsilons) {
        return Err(AnalysisError::Malformed("seeds use different noise grids".into()));
    }
    let (kept, dropped): (Vec<&SeedResponses>, Vec<&SeedResponses>) =
        responses.iter().partition(|r| r.baseline() > 0.0);
    let excluded_seeds = dropped.iter().map(|r| r.init_seed).collect();
    let kept_owned: Vec<SeedResponses> = kept.iter().map(|r| (*r).clone()).collect();
    let summaries: Vec<ResponseSummary> = kept.iter().map(|r| summarize_seed(r)).collect::<Result<_, _>>()?;
    let n = summaries.len();
    if n == 0 {
        return Err(AnalysisError::Malformed("no seed has a positive noiseless R²".into()));
    }
    let nf = n as f64;
    let members = |c: Category| summaries.iter().filter(move |s| s.category == c);
    let count = |c: Category| members(c).count();
    let category_fractions = [
        count(Category::Beneficial) as f64 / nf,
        count(Category::Detrimental) as f64 / nf,
        count(Category::Marginal) as f64 / nf,
    ];
    let by_seed: BTreeMap<u64, &SeedResponses> = kept.iter().map(|r| (r.init_seed, *r)).collect();
    let categories = Category::ALL
        .iter()
        .map(|&c| {
            let deltas: Vec<f64> = members(c).map(|s| s.delta_r2_percent).collect();
            let bases: Vec<f64> = members(c).map(|s| s.baseline_r2).collect();
            let early = epsilons
                .iter()
                .enumerate()
                .map(|(k, &e)| {
                    let m: Vec<bool> = members(c).map(|s| by_seed[&s.init_seed].early_stopped[k]).collect();
                    let frac = if m.is_empty() { 0.0 } else { m.iter().filter(|&&b| b).count() as f64 / m.len() as f64 };
                    (e, frac)
                })
                .collect();
            CategoryDetail {
                category: c,
                fraction: count(c) as f64 / nf,
                delta_r2: GroupStats::of(&deltas),
                baseline_r2: GroupStats::of(&bases),
                early_stopped_fraction: early,
            }
        })
        .collect::<Vec<_>>();
    let deltas: Vec<f64> = summaries.iter().map(|s| s.delta_r2_percent).collect();
    let baselines: Vec<f64> = summaries.iter().map(|s| s.baseline_r2).collect();
    let optimal_epsilon_histogram = epsilons
        .iter()
        .map(|&e| (e, summaries.iter().filter(|s| s.best_epsilon == e).count() as f64 / nf))
        .collect();
    let pearson = pearson(&baselines, &deltas).ok();
    let ben: Vec<f64> = members(Category::Beneficial).map(|s| s.baseline_r2).collect();
    let det: Vec<f64> = members(Category::Detrimental).map(|s| s.baseline_r2).collect();
    let welch = welch_t_test(&ben, &det).ok();
    let perm_input: Vec<Vec<f64>> = kept_owned
        .iter()
        .filter(|r| r.r2_test.iter().all(|&v| v > 0.0))
        .map(|r| r.r2_test.clone())
        .collect();
    let permutation = permutation_test(&perm_input, options.n_perm, options.perm_seed).ok();
    let dose_response = dose_response(&summaries, &kept_owned)?;
    let threshold_value = options.threshold.unwrap_or_else(|| match (ben.is_empty(), det.is_empty()) {
        (false, false) => 0.5 * (mean(&ben) + mean(&det)),
        _ => median(&baselines),
    });
    let threshold = threshold_analysis(&summaries, threshold_value).ok();
    Ok(CohortReport {
        epsilons,
        any_degradation_fraction: summaries.iter().filter(|s| s.best_noisy_r2 < s.baseline_r2).count() as f64 / nf,
        mean_delta_r2: mean(&deltas),
        delta_r2_min: deltas.iter().copied().fold(f64::INFINITY, f64::min),
        delta_r2_max: deltas.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        summaries,
        excluded_seeds,
        category_fractions,
        categories,
        optimal_epsilon_histogram,
        pearson,
        welch,
        permutation,
        dose_response,
        threshold,
    })
}

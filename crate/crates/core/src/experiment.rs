//! Seeds × noise-levels sweeps: configuration, crash-safe run log, resume,
//! cohort analysis outputs and the theory table.
//!
//! Layout of `output_dir`:
//!
//! ```text
//! runs.jsonl            one line per finished run, `"status": "ok" | "failed"`
//! checkpoints/          best-validation parameters per run
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{cohort_report, AnalysisError, AnalysisOptions, CohortReport, SeedResponses};
use crate::graph_data::{generate_synthetic, parse_dataset, split_dataset, GraphError, MolecularGraph, DEFAULT_RATIOS, MAX_ATOMS};
use crate::model::{gate_count, Checkpoint};
use crate::noise::{theoretical_optimal_epsilon, GateCountMode, DEFAULT_SIGMA_COEFF};
use crate::trainer::{train_model, GradientFault, ModelConfig, NoiseSettings, RunRecord, TrainConfig};
use crate::validation::{run_suite, ValidationReport};

pub const WORKERS_ENV: &str = "QGNN_WORKERS";
pub const CODE_VERSION: &str = concat!("qgnn-noise ", env!("CARGO_PKG_VERSION"));
pub const RUNS_FILE: &str = "runs.jsonl";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("incomplete grid, missing (seed, ε): {}", format_pairs(.0))]
    MissingRuns(Vec<(u64, f64)>),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn format_pairs(pairs: &[(u64, f64)]) -> String {
    pairs.iter().map(|(s, e)| format!("({s}, {e})")).collect::<Vec<_>>().join(", ")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub count: usize,
    pub seed: u64,
    #[serde(default = "default_max_atoms")]
    pub max_atoms: usize,
}

fn default_max_atoms() -> usize {
    MAX_ATOMS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSource {
    /// JSON-lines graph file; relative paths resolve against the config file.
    Path(PathBuf),
    Synthetic(SyntheticSpec),
}

/// Noise section: the ε grid plus the channel settings shared by all levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub epsilons: Vec<f64>,
    pub sigma_coeff: f64,
    pub gate_count: GateCountMode,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            epsilons: vec![0.000, 0.005, 0.010, 0.015],
            sigma_coeff: DEFAULT_SIGMA_COEFF,
            gate_count: GateCountMode::PerMolecule,
        }
    }
}

impl NoiseSection {
    pub fn settings(&self, epsilon: f64) -> NoiseSettings {
        NoiseSettings { epsilon, sigma_coeff: self.sigma_coeff, gate_count: self.gate_count }
    }

    /// Grid in ascending order.
    pub fn grid(&self) -> Vec<f64> {
        let mut g = self.epsilons.clone();
        g.sort_by(f64::total_cmp);
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub threshold: Option<f64>,
    pub n_perm: usize,
    pub perm_seed: u64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        let d = AnalysisOptions::default();
        AnalysisSection { threshold: d.threshold, n_perm: d.n_perm, perm_seed: d.perm_seed }
    }
}

impl AnalysisSection {
    pub fn options(&self) -> AnalysisOptions {
        AnalysisOptions { threshold: self.threshold, n_perm: self.n_perm, perm_seed: self.perm_seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    #[serde(default = "default_split_seed")]
    pub split_seed: u64,
    #[serde(default = "default_n_seeds")]
    pub n_seeds: usize,
    /// Seed `s` of the sweep trains with `init_seed = base_seed + s` at every ε.
    #[serde(default)]
    pub base_seed: u64,
    /// Keys the dropout and output-noise streams.
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub model: ModelConfig,
    /// `train.init_seed` is replaced per run.
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_true")]
    pub save_checkpoints: bool,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

fn default_split_seed() -> u64 {
    42
}
fn default_n_seeds() -> usize {
    55
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}
fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}
fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    pub fn synthetic(count: usize, seed: u64) -> Self {
        ExperimentConfig {
            dataset: DatasetSource::Synthetic(SyntheticSpec { count, seed, max_atoms: MAX_ATOMS }),
            split_seed: default_split_seed(),
            n_seeds: default_n_seeds(),
            base_seed: 0,
            master_seed: 0,
            noise: NoiseSection::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            output_dir: default_output_dir(),
            workers: default_workers(),
            save_checkpoints: true,
            analysis: AnalysisSection::default(),
        }
    }

    /// Reads a config; relative dataset and output paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut config: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let DatasetSource::Path(p) = &mut config.dataset {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if config.output_dir.is_relative() {
            config.output_dir = base.join(&config.output_dir);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        let eps = &self.noise.epsilons;
        if eps.iter().filter(|&&e| e == 0.0).count() != 1 {
            return bad("noise.epsilons must contain 0.0 exactly once".into());
        }
        if eps.iter().any(|e| !(0.0..1.0).contains(e)) {
            return bad(format!("noise.epsilons must lie in [0, 1): {eps:?}"));
        }
        if self.noise.grid().windows(2).any(|w| w[0] == w[1]) {
            return bad("noise.epsilons contains duplicates".into());
        }
        if !(self.noise.sigma_coeff.is_finite() && self.noise.sigma_coeff >= 0.0) {
            return bad("noise.sigma_coeff must be nonnegative".into());
        }
        if self.n_seeds == 0 {
            return bad("n_seeds must be at least 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.model.depth == 0 {
            return bad("model.depth must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.model.dropout_rate) {
            return bad("model.dropout_rate must lie in [0, 1)".into());
        }
        if let DatasetSource::Synthetic(s) = &self.dataset {
            if !(2..=MAX_ATOMS).contains(&s.max_atoms) {
                return bad(format!("dataset.synthetic.max_atoms must lie in [2, {MAX_ATOMS}]"));
            }
        }
        self.train.validate().map_err(|e| ExperimentError::Config(e.to_string()))
    }

    /// Digest of everything that affects run numerics (not paths or worker count).
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        c.workers = 1;
        c.save_checkpoints = true;
        c.analysis = AnalysisSection::default();
        if let DatasetSource::Path(p) = &mut c.dataset {
            // the file content, not its location, feeds the digest
            let content = fs::read(&*p).unwrap_or_default();
            *p = PathBuf::from(hex::encode(Sha256::digest(&content)));
        }
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Worker count after the environment override.
    pub fn effective_workers(&self) -> Result<usize, ExperimentError> {
        match std::env::var(WORKERS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(n) if n >= 1 => Ok(n),
                _ => Err(ExperimentError::Config(format!("{WORKERS_ENV}={v:?} is not a positive integer"))),
            },
            Err(_) => Ok(self.workers),
        }
    }

    pub fn load_graphs(&self) -> Result<Vec<MolecularGraph>, ExperimentError> {
        match &self.dataset {
            DatasetSource::Path(p) => Ok(parse_dataset(p)?),
            DatasetSource::Synthetic(s) => Ok(generate_synthetic(s.count, s.seed, s.max_atoms)),
        }
    }

    pub fn runs_path(&self) -> PathBuf {
        self.output_dir.join(RUNS_FILE)
    }

    /// All (init_seed, ε) pairs of the grid, seed-major, ε ascending.
    pub fn grid_pairs(&self) -> Vec<(u64, f64)> {
        let grid = self.noise.grid();
        (0..self.n_seeds as u64)
            .flat_map(|s| grid.iter().map(move |&e| (self.base_seed + s, e)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedRun {
    pub init_seed: u64,
    pub epsilon: f64,
    pub error: String,
    pub config_digest: String,
    pub code_version: String,
}

/// One line of `runs.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum RunLine {
    Ok(RunRecord),
    Failed(FailedRun),
}

impl RunLine {
    pub fn key(&self) -> (u64, u64) {
        match self {
            RunLine::Ok(r) => (r.init_seed, r.epsilon.to_bits()),
            RunLine::Failed(f) => (f.init_seed, f.epsilon.to_bits()),
        }
    }

    pub fn config_digest(&self) -> &str {
        match self {
            RunLine::Ok(r) => &r.config_digest,
            RunLine::Failed(f) => &f.config_digest,
        }
    }
}

/// Parses a run log. A final line without a newline that fails to parse is
/// the trace of an interrupted write; it is reported separately, not as an error.
pub fn read_runs(path: &Path) -> Result<(Vec<RunLine>, Option<u64>), ExperimentError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let mut lines = Vec::new();
    let mut offset = 0usize;
    let mut truncated_at = None;
    for raw in bytes.split_inclusive(|&b| b == b'\n') {
        let complete = raw.ends_with(b"\n");
        let text = String::from_utf8_lossy(raw);
        let text = text.trim();
        if !text.is_empty() {
            match serde_json::from_str::<RunLine>(text) {
                Ok(line) => lines.push(line),
                Err(_) if !complete => truncated_at = Some(offset as u64),
                Err(e) => {
                    let n = bytes[..offset].iter().filter(|&&b| b == b'\n').count() + 1;
                    return Err(ExperimentError::Data(format!("{}:{n}: {e}", path.display())));
                }
            }
        }
        offset += raw.len();
    }
    Ok((lines, truncated_at))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepOptions {
    pub resume: bool,
    /// Stop after this many new runs.
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepSummary {
    pub executed: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub skipped: usize,
}

struct RunLog {
    file: Mutex<File>,
    path: PathBuf,
}

impl RunLog {
    fn append(&self, line: &RunLine) -> Result<(), ExperimentError> {
        let mut text = serde_json::to_string(line).expect("run line serializes");
        text.push('\n');
        let mut f = self.file.lock().unwrap_or_else(|p| p.into_inner());
        f.write_all(text.as_bytes()).and_then(|_| f.flush()).map_err(io_err(&self.path))
    }
}

fn checkpoint_name(seed: u64, eps: f64) -> String {
    format!("seed-{seed}_eps-{eps}.json")
}

fn run_one(
    config: &ExperimentConfig,
    split: &crate::graph_data::DatasetSplit,
    seed: u64,
    eps: f64,
    digest: &str,
) -> RunLine {
    let failed = |error: String| {
        RunLine::Failed(FailedRun {
            init_seed: seed,
            epsilon: eps,
            error,
            config_digest: digest.to_string(),
            code_version: CODE_VERSION.to_string(),
        })
    };
    let train = TrainConfig { init_seed: seed, ..config.train.clone() };
    let outcome = catch_unwind(AssertUnwindSafe(|| {
        train_model(split, &config.noise.settings(eps), &config.model, &train, config.master_seed)
    }));
    let outcome = match outcome {
        Ok(Ok(o)) => o,
        Ok(Err(e)) => return failed(e.to_string()),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "worker panicked".into());
            return failed(format!("panic: {msg}"));
        }
    };
    let mut record = outcome.record;
    record.config_digest = digest.to_string();
    record.code_version = CODE_VERSION.to_string();
    if config.save_checkpoints {
        let name = checkpoint_name(seed, eps);
        let path = config.output_dir.join("checkpoints").join(&name);
        let ck = Checkpoint::new(outcome.params, seed, config.split_seed, eps);
        if let Err(e) = ck.save(&path) {
            return failed(format!("checkpoint {}: {e}", path.display()));
        }
        record.checkpoint_path = Some(format!("checkpoints/{name}"));
    }
    RunLine::Ok(record)
}

/// Runs every missing (seed, ε) pair of the grid and appends one line per run.
pub fn cmd_sweep(config: &ExperimentConfig, options: &SweepOptions) -> Result<SweepSummary, ExperimentError> {
    config.validate()?;
    let graphs = config.load_graphs()?;
    let split = split_dataset(&graphs, DEFAULT_RATIOS, config.split_seed)?;
    let digest = config.digest();
    let runs_path = config.runs_path();
    fs::create_dir_all(config.output_dir.join("checkpoints")).map_err(io_err(&config.output_dir))?;

    let mut done = BTreeSet::new();
    if runs_path.exists() && fs::metadata(&runs_path).map_err(io_err(&runs_path))?.len() > 0 {
        if !options.resume {
            return Err(ExperimentError::Config(format!(
                "{} already exists; pass --resume to continue it",
                runs_path.display()
            )));
        }
        let (lines, truncated_at) = read_runs(&runs_path)?;
        if let Some(at) = truncated_at {
            let f = OpenOptions::new().write(true).open(&runs_path).map_err(io_err(&runs_path))?;
            f.set_len(at).map_err(io_err(&runs_path))?;
        }
        for line in &lines {
            if line.config_digest() != digest {
                return Err(ExperimentError::Config(format!(
                    "{} was produced by a different configuration (digest {})",
                    runs_path.display(),
                    line.config_digest()
                )));
            }
            if let RunLine::Ok(r) = line {
                done.insert((r.init_seed, r.epsilon.to_bits()));
            }
        }
    }

    let all = config.grid_pairs();
    let mut pending: Vec<(u64, f64)> = all.iter().copied().filter(|(s, e)| !done.contains(&(*s, e.to_bits()))).collect();
    let skipped = all.len() - pending.len();
    if let Some(limit) = options.limit {
        pending.truncate(limit);
    }

    let file = OpenOptions::new().create(true).append(true).open(&runs_path).map_err(io_err(&runs_path))?;
    let log = RunLog { file: Mutex::new(file), path: runs_path.clone() };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.effective_workers()?)
        .build()
        .map_err(|e| ExperimentError::Config(format!("worker pool: {e}")))?;
    let results: Vec<Result<bool, ExperimentError>> = pool.install(|| {
        pending
            .par_iter()
            .map(|&(seed, eps)| {
                let line = run_one(config, &split, seed, eps, &digest);
                let ok = matches!(line, RunLine::Ok(_));
                log.append(&line)?;
                Ok(ok)
            })
            .collect()
    });
    let mut summary = SweepSummary { executed: 0, succeeded: 0, failed: 0, skipped };
    for r in results {
        summary.executed += 1;
        if r? {
            summary.succeeded += 1;
        } else {
            summary.failed += 1;
        }
    }
    Ok(summary)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnalyzeOptions {
    /// Accept runs produced under a different config digest.
    pub force: bool,
}

/// Checks grid completeness and digests, then groups test R² by seed.
pub fn collect_responses(
    lines: &[RunLine],
    config: &ExperimentConfig,
    force: bool,
) -> Result<Vec<SeedResponses>, ExperimentError> {
    let digest = config.digest();
    let ok: Vec<&RunRecord> = lines
        .iter()
        .filter_map(|l| match l {
            RunLine::Ok(r) => Some(r),
            RunLine::Failed(_) => None,
        })
        .collect();
    if !force {
        let digests: BTreeSet<&str> = ok.iter().map(|r| r.config_digest.as_str()).collect();
        if digests.len() > 1 {
            return Err(ExperimentError::Data(format!(
                "runs come from {} different configurations; use --force to combine them",
                digests.len()
            )));
        }
        if let Some(d) = digests.iter().next() {
            if *d != digest {
                return Err(ExperimentError::Data(
                    "runs were produced by a different configuration; use --force to analyze anyway".into(),
                ));
            }
        }
    }
    let mut by_seed: BTreeMap<u64, Vec<&RunRecord>> = BTreeMap::new();
    for r in &ok {
        by_seed.entry(r.init_seed).or_default().push(r);
    }
    let missing: Vec<(u64, f64)> = config
        .grid_pairs()
        .into_iter()
        .filter(|(s, e)| !by_seed.get(s).is_some_and(|rs| rs.iter().any(|r| r.epsilon == *e)))
        .collect();
    if !missing.is_empty() {
        return Err(ExperimentError::MissingRuns(missing));
    }
    let grid = config.noise.grid();
    let seeds: BTreeSet<u64> = config.grid_pairs().into_iter().map(|(s, _)| s).collect();
    seeds
        .iter()
        .map(|s| {
            let group: Vec<&RunRecord> = by_seed[s].iter().copied().filter(|r| grid.contains(&r.epsilon)).collect();
            Ok(SeedResponses::from_records(&group, &grid)?)
        })
        .collect()
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), ExperimentError> {
    fs::write(path, contents).map_err(io_err(path))
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(&r).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

/// Writes `report.json`, `waterfall.csv`, `histogram.csv`, `dose_response.csv` and `scatter.csv`.
pub fn write_report(report: &CohortReport, out_dir: &Path) -> Result<(), ExperimentError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut json = serde_json::to_string_pretty(report).expect("report serializes");
    json.push('\n');
    write_file(&out_dir.join("report.json"), json.as_bytes())?;

    let mut ranked = report.summaries.clone();
    ranked.sort_by(|a, b| b.delta_r2_percent.total_cmp(&a.delta_r2_percent).then(a.init_seed.cmp(&b.init_seed)));
    let rows = ranked
        .iter()
        .enumerate()
        .map(|(k, s)| {
            vec![
                (k + 1).to_string(),
                s.init_seed.to_string(),
                s.baseline_r2.to_string(),
                s.best_epsilon.to_string(),
                s.best_noisy_r2.to_string(),
                s.delta_r2_percent.to_string(),
                s.category.name().to_string(),
            ]
        })
        .collect();
    write_file(
        &out_dir.join("waterfall.csv"),
        &csv_bytes(&["rank", "init_seed", "baseline_r2", "best_epsilon", "best_noisy_r2", "delta_r2_percent", "category"], rows),
    )?;

    let rows = report
        .optimal_epsilon_histogram
        .iter()
        .map(|&(e, f)| vec![e.to_string(), report.summaries.iter().filter(|s| s.best_epsilon == e).count().to_string(), f.to_string()])
        .collect();
    write_file(&out_dir.join("histogram.csv"), &csv_bytes(&["epsilon", "count", "fraction"], rows))?;

    let mut rows = Vec::new();
    for curve in &report.dose_response {
        for p in &curve.points {
            rows.push(vec![curve.category.name().to_string(), p.epsilon.to_string(), p.mean_delta_r2.to_string(), p.n.to_string()]);
        }
    }
    write_file(&out_dir.join("dose_response.csv"), &csv_bytes(&["category", "epsilon", "mean_delta_r2", "n"], rows))?;

    let rows = report
        .summaries
        .iter()
        .map(|s| vec![s.init_seed.to_string(), s.baseline_r2.to_string(), s.delta_r2_percent.to_string(), s.category.name().to_string()])
        .collect();
    write_file(&out_dir.join("scatter.csv"), &csv_bytes(&["init_seed", "baseline_r2", "delta_r2_percent", "category"], rows))?;
    Ok(())
}

pub fn cmd_analyze(
    runs_path: &Path,
    config: &ExperimentConfig,
    out_dir: &Path,
    options: &AnalyzeOptions,
) -> Result<CohortReport, ExperimentError> {
    let (lines, truncated) = read_runs(runs_path)?;
    if truncated.is_some() {
        return Err(ExperimentError::Data(format!(
            "{} ends with a partial line; resume the sweep first",
            runs_path.display()
        )));
    }
    let responses = collect_responses(&lines, config, options.force)?;
    let report = cohort_report(&responses, &config.analysis.options())?;
    write_report(&report, out_dir)?;
    Ok(report)
}

pub fn cmd_validate(config: &ExperimentConfig, fault: Option<GradientFault>) -> Result<ValidationReport, ExperimentError> {
    let graphs = config.load_graphs()?;
    Ok(run_suite(&graphs, config.model.depth, fault))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryRow {
    pub index: usize,
    pub n_atoms: usize,
    pub n_bonds: usize,
    /// Single-layer gate count used as `N_g`.
    pub gate_count: usize,
    pub optimal_epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryTable {
    pub depth: usize,
    pub rows: Vec<TheoryRow>,
    /// Smallest and largest optimal ε over the dataset.
    pub range: Option<(f64, f64)>,
    pub grid: Vec<f64>,
}

impl TheoryTable {
    pub fn render(&self) -> String {
        let mut out = format!("depth L = {}\n{:>6} {:>6} {:>6} {:>6} {:>12}\n", self.depth, "index", "atoms", "bonds", "N_g", "eps_opt");
        for r in &self.rows {
            out.push_str(&format!("{:>6} {:>6} {:>6} {:>6} {:>12.6}\n", r.index, r.n_atoms, r.n_bonds, r.gate_count, r.optimal_epsilon));
        }
        match self.range {
            Some((lo, hi)) => out.push_str(&format!("eps_opt range: [{lo:.6}, {hi:.6}]\n")),
            None => out.push_str("eps_opt range: (empty dataset)\n"),
        }
        let grid: Vec<String> = self.grid.iter().map(|e| e.to_string()).collect();
        out.push_str(&format!("configured grid: [{}]\n", grid.join(", ")));
        out
    }
}

pub fn theory_table(graphs: &[MolecularGraph], depth: usize, grid: Vec<f64>) -> TheoryTable {
    let rows: Vec<TheoryRow> = graphs
        .iter()
        .enumerate()
        .map(|(index, g)| {
            let n_g = gate_count(g, 1);
            TheoryRow {
                index,
                n_atoms: g.n_atoms(),
                n_bonds: g.bonds().len(),
                gate_count: n_g,
                optimal_epsilon: theoretical_optimal_epsilon(n_g, depth),
            }
        })
        .collect();
    let range = rows.iter().map(|r| r.optimal_epsilon).fold(None, |acc: Option<(f64, f64)>, e| {
        Some(acc.map_or((e, e), |(lo, hi)| (lo.min(e), hi.max(e))))
    });
    TheoryTable { depth, rows, range, grid }
}

pub fn cmd_theory(config: &ExperimentConfig) -> Result<TheoryTable, ExperimentError> {
    let graphs = config.load_graphs()?;
    Ok(theory_table(&graphs, config.model.depth, config.noise.grid()))
}

pub fn cmd_gen_data(count: usize, seed: u64, max_atoms: usize, out: &Path) -> Result<usize, ExperimentError> {
    if !(2..=MAX_ATOMS).contains(&max_atoms) {
        return Err(ExperimentError::Config(format!("max_atoms must lie in [2, {MAX_ATOMS}]")));
    }
    let graphs = generate_synthetic(count, seed, max_atoms);
    crate::graph_data::write_dataset(out, &graphs)?;
    Ok(graphs.len())
}

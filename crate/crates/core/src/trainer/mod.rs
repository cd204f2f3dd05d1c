//! Hybrid training: seeded initialization, mini-batch Adam over quantum and
//! classical parameters jointly, output noise injected on every forward pass,
//! early stopping on validation loss with best-weight restore.
//!
//! Randomness is split into independent streams (see [`crate::seeding`]):
//!
//! * initialization keyed by `init_seed` only, so every noise level starts from
//!   identical parameters
//! * batch order keyed by `(init_seed, epoch)`
//! * dropout masks keyed by `(master_seed, init_seed)`
//! * output noise keyed by `(master_seed, init_seed, ε)`

mod gradient;
mod optim;

pub use gradient::{adjoint_vjp, quantum_gradient, quantum_vjp, quantum_vjp_with_fault, GradientFault, GradientMode};
pub use optim::{Adam, EarlyStopping, StopDecision};

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{r2_score, AnalysisError};
use crate::graph_data::{DatasetSplit, MolecularGraph};
use crate::model::{
    gate_count, mlp_backward, mlp_forward, mlp_forward_tape, CompactCircuit, DropoutMask, ModelError, ModelParams,
    QuantumParams,
};
use crate::noise::{sample_output_noise, GateCountMode, NoiseError, NoiseProfile, DEFAULT_SIGMA_COEFF};
use crate::seeding::{stream_rng, Stream};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("loss became non-finite at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error("evaluation: {0}")]
    Metric(#[from] AnalysisError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub depth: usize,
    pub hidden: [usize; 3],
    pub dropout_rate: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { depth: 1, hidden: [64, 32, 16], dropout_rate: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub gradient_mode: GradientMode,
    pub fd_step: f64,
    pub init_seed: u64,
    /// Train against z-scored targets; predictions are mapped back before scoring.
    pub standardize_targets: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 200,
            batch_size: 32,
            learning_rate: 5e-3,
            patience: 15,
            gradient_mode: GradientMode::Adjoint,
            fd_step: 1e-4,
            init_seed: 0,
            standardize_targets: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(self.fd_step.is_finite() && self.fd_step > 0.0) {
            return bad("fd_step must be positive");
        }
        Ok(())
    }
}

/// Output-noise settings of one run; `N_g` is resolved per molecule as the
/// gate count of a single layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSettings {
    pub epsilon: f64,
    pub sigma_coeff: f64,
    pub gate_count: GateCountMode,
}

impl NoiseSettings {
    pub fn noiseless() -> Self {
        NoiseSettings { epsilon: 0.0, sigma_coeff: DEFAULT_SIGMA_COEFF, gate_count: GateCountMode::PerMolecule }
    }

    pub fn profile_for(&self, graph: &MolecularGraph, depth: usize) -> Result<NoiseProfile, NoiseError> {
        let n_g = match self.gate_count {
            // per-layer count; the channel multiplies by depth itself
            GateCountMode::PerMolecule => gate_count(graph, 1),
            GateCountMode::Fixed(n) => n,
        };
        NoiseProfile::new(self.epsilon, n_g, depth, self.sigma_coeff)
    }
}

/// Quantum angles uniform in [−π, π]; He-normal classical weights, zero biases.
pub fn init_params(seed: u64, config: &ModelConfig) -> ModelParams {
    let mut rng = stream_rng(Stream::Init, &[seed]);
    let mut params = ModelParams::zeros(config.depth, config.hidden, config.dropout_rate);
    let pi = std::f64::consts::PI;
    let angles: Vec<f64> = (0..params.quantum.n_params()).map(|_| rng.random_range(-pi..=pi)).collect();
    params.quantum.set_flat(&angles);
    for layer in &mut params.classical.layers {
        let std = (2.0 / layer.n_in as f64).sqrt();
        for w in &mut layer.weights {
            *w = std * crate::noise::standard_normal(&mut rng);
        }
    }
    params
}

/// SHA-256 over the little-endian bytes of every parameter, hex encoded.
pub fn params_digest(params: &ModelParams) -> String {
    let mut h = Sha256::new();
    for v in params.quantum.to_flat().iter().chain(&params.classical.to_flat()) {
        h.update(v.to_le_bytes());
    }
    for d in params.classical.hidden_dims() {
        h.update((d as u64).to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Outcome of one (seed, ε) training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub init_seed: u64,
    pub epsilon: f64,
    pub r2_train: f64,
    pub r2_val: f64,
    pub r2_test: f64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub early_stopped: bool,
    pub wall_time: f64,
    pub initial_params_digest: String,
    #[serde(default)]
    pub checkpoint_path: Option<String>,
    #[serde(default)]
    pub config_digest: String,
    #[serde(default)]
    pub code_version: String,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub record: RunRecord,
    /// Mean noisy training loss of each epoch, in standardized units.
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
}

struct Example<'a> {
    graph: &'a MolecularGraph,
    target: f64,
    profile: NoiseProfile,
}

struct Scaling {
    mean: f64,
    std: f64,
}

impl Scaling {
    fn fit(graphs: &[MolecularGraph], enabled: bool) -> Self {
        if !enabled {
            return Scaling { mean: 0.0, std: 1.0 };
        }
        let ys: Vec<f64> = graphs.iter().map(|g| g.target()).collect();
        let mean = crate::stats::mean(&ys);
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / ys.len() as f64;
        let std = if var > 0.0 { var.sqrt() } else { 1.0 };
        Scaling { mean, std }
    }
}

fn examples<'a>(
    graphs: &'a [MolecularGraph],
    noise: &NoiseSettings,
    depth: usize,
    scaling: &Scaling,
) -> Result<Vec<Example<'a>>, NoiseError> {
    graphs
        .iter()
        .map(|g| {
            Ok(Example { graph: g, target: (g.target() - scaling.mean) / scaling.std, profile: noise.profile_for(g, depth)? })
        })
        .collect()
}

fn split_params(params: &ModelParams) -> Vec<f64> {
    let mut flat = params.quantum.to_flat();
    flat.extend(params.classical.to_flat());
    flat
}

fn load_params(params: &mut ModelParams, flat: &[f64]) {
    let nq = params.quantum.n_params();
    params.quantum.set_flat(&flat[..nq]);
    params.classical.set_flat(&flat[nq..]);
}

/// Noisy prediction in standardized units, evaluation mode.
fn noisy_eval(ex: &Example<'_>, params: &ModelParams, rng: &mut impl Rng) -> Result<f64, ModelError> {
    let z = crate::model::extract_features(ex.graph, &params.quantum)?;
    let f = mlp_forward(&z, &params.classical, None, false)?;
    Ok(sample_output_noise(f, &ex.profile, rng).0)
}

/// Mean squared error and its gradient (quantum then classical, flat) over a batch.
///
/// With `dropout_rng = None` the network runs in evaluation mode.
pub fn batch_loss_gradient(
    graphs: &[&MolecularGraph],
    targets: &[f64],
    params: &ModelParams,
    profiles: &[NoiseProfile],
    mode: GradientMode,
    fd_step: f64,
    mut dropout_rng: Option<&mut dyn rand::RngCore>,
    noise_rng: &mut dyn rand::RngCore,
) -> Result<(f64, Vec<f64>), ModelError> {
    let nq = params.quantum.n_params();
    let mut grad = vec![0.0; nq + params.classical.n_params()];
    let mut loss = 0.0;
    let scale = 1.0 / graphs.len() as f64;
    for ((graph, &target), profile) in graphs.iter().zip(targets).zip(profiles) {
        let circuit = CompactCircuit::new(graph, &params.quantum);
        let state = circuit.run()?;
        let z = circuit.features_from(&state);
        let tape = match dropout_rng.as_deref_mut() {
            Some(rng) => {
                let mask = DropoutMask::sample(&params.classical, &mut &mut *rng);
                mlp_forward_tape(&z, &params.classical, Some(&mask), true)?
            }
            None => mlp_forward_tape(&z, &params.classical, None, false)?,
        };
        let (noisy, _) = sample_output_noise(tape.output, profile, &mut &mut *noise_rng);
        let resid = noisy - target;
        loss += scale * resid * resid;
        // ξ is held constant; the attenuation scales the derivative
        let upstream = 2.0 * scale * resid * profile.attenuation();
        let (mgrad, dz) = mlp_backward(&tape, &params.classical, upstream);
        let qgrad = match mode {
            GradientMode::Adjoint => adjoint_vjp(&circuit, state, &dz, nq)?,
            other => quantum_vjp(graph, &params.quantum, &dz, other, fd_step)?,
        };
        for (g, q) in grad.iter_mut().zip(&qgrad) {
            *g += q;
        }
        for (g, c) in grad[nq..].iter_mut().zip(mgrad.to_flat()) {
            *g += c;
        }
    }
    Ok((loss, grad))
}

pub fn train_model(
    split: &DatasetSplit,
    noise: &NoiseSettings,
    model: &ModelConfig,
    config: &TrainConfig,
    master_seed: u64,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    for (name, part) in [("train", &split.train), ("validation", &split.validation), ("test", &split.test)] {
        if part.is_empty() {
            return Err(TrainError::EmptySplit(name));
        }
    }
    let started = Instant::now();
    let seed = config.init_seed;
    let scaling = Scaling::fit(&split.train, config.standardize_targets);
    let train = examples(&split.train, noise, model.depth, &scaling)?;
    let val = examples(&split.validation, noise, model.depth, &scaling)?;
    let test = examples(&split.test, noise, model.depth, &scaling)?;

    let mut params = init_params(seed, model);
    params.validate()?;
    let initial_params_digest = params_digest(&params);
    let mut flat = split_params(&params);
    let mut best_flat = flat.clone();
    let mut adam = Adam::new(flat.len(), config.learning_rate);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut dropout_rng = stream_rng(Stream::Dropout, &[master_seed, seed]);
    let mut noise_rng = stream_rng(Stream::OutputNoise, &[master_seed, seed, noise.epsilon.to_bits()]);

    let mut train_loss = Vec::new();
    let mut val_loss = Vec::new();
    let mut early_stopped = false;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..config.max_epochs {
        order.sort_unstable();
        order.shuffle(&mut stream_rng(Stream::Shuffle, &[seed, epoch as u64]));
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let graphs: Vec<&MolecularGraph> = batch.iter().map(|&k| train[k].graph).collect();
            let targets: Vec<f64> = batch.iter().map(|&k| train[k].target).collect();
            let profiles: Vec<NoiseProfile> = batch.iter().map(|&k| train[k].profile).collect();
            let (loss, grad) = batch_loss_gradient(
                &graphs,
                &targets,
                &params,
                &profiles,
                config.gradient_mode,
                config.fd_step,
                Some(&mut dropout_rng),
                &mut noise_rng,
            )?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(TrainError::Diverged { epoch });
            }
            epoch_loss += loss * batch.len() as f64;
            adam.step(&mut flat, &grad);
            load_params(&mut params, &flat);
        }
        train_loss.push(epoch_loss / train.len() as f64);

        let mut vl = 0.0;
        for ex in &val {
            let p = noisy_eval(ex, &params, &mut noise_rng)?;
            vl += (p - ex.target).powi(2);
        }
        vl /= val.len() as f64;
        if !vl.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }
        val_loss.push(vl);
        match stopper.update(epoch, vl) {
            StopDecision::Improved => best_flat.clone_from(&flat),
            StopDecision::Continue => {}
            StopDecision::Stop => {
                early_stopped = true;
                break;
            }
        }
    }
    load_params(&mut params, &best_flat);

    let mut score = |set: &[Example<'_>]| -> Result<f64, TrainError> {
        let mut truth = Vec::with_capacity(set.len());
        let mut pred = Vec::with_capacity(set.len());
        for ex in set {
            truth.push(ex.graph.target());
            pred.push(scaling.mean + scaling.std * noisy_eval(ex, &params, &mut noise_rng)?);
        }
        Ok(r2_score(&truth, &pred)?)
    };
    let r2_train = score(&train)?;
    let r2_val = score(&val)?;
    let r2_test = score(&test)?;

    let record = RunRecord {
        init_seed: seed,
        epsilon: noise.epsilon,
        r2_train,
        r2_val,
        r2_test,
        epochs_run: val_loss.len(),
        best_epoch: stopper.best_epoch().unwrap_or(0),
        best_val_loss: stopper.best(),
        early_stopped,
        wall_time: started.elapsed().as_secs_f64(),
        initial_params_digest,
        checkpoint_path: None,
        config_digest: String::new(),
        code_version: String::new(),
    };
    Ok(TrainOutcome { params, record, train_loss, val_loss })
}

/// Number of trainable quantum angles for `depth` layers.
pub fn n_quantum_params(depth: usize) -> usize {
    QuantumParams::zeros(depth).n_params()
}

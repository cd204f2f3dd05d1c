//! Phenomenological output-noise channel.
//!
//! A prediction `f` is attenuated by the no-error probability and perturbed by
//! Gaussian noise whose width scales with the cumulative error probability:
//!
//! ```text
//! p_error  = 1 − (1 − ε)^(N_g·L)
//! f_noisy  = (1 − p_error)·f + ξ,   ξ ~ N(0, (σ_coeff·p_error)²)
//! ```
//!
//! Gaussian draws use the Box–Muller transform (cosine branch only), so a
//! sample consumes exactly two uniforms from the caller's generator.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_SIGMA_COEFF: f64 = 0.2;

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("per-gate error rate {0} not in [0, 1)")]
    Epsilon(f64),
    #[error("gate count must be at least 1")]
    GateCount,
    #[error("depth must be at least 1")]
    Depth,
    #[error("sigma coefficient {0} must be finite and non-negative")]
    SigmaCoeff(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    epsilon: f64,
    gate_count: usize,
    depth: usize,
    sigma_coeff: f64,
}

impl NoiseProfile {
    pub fn new(epsilon: f64, gate_count: usize, depth: usize, sigma_coeff: f64) -> Result<Self, NoiseError> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(NoiseError::Epsilon(epsilon));
        }
        if gate_count == 0 {
            return Err(NoiseError::GateCount);
        }
        if depth == 0 {
            return Err(NoiseError::Depth);
        }
        if !(sigma_coeff.is_finite() && sigma_coeff >= 0.0) {
            return Err(NoiseError::SigmaCoeff(sigma_coeff));
        }
        Ok(NoiseProfile { epsilon, gate_count, depth, sigma_coeff })
    }

    pub fn noiseless() -> Self {
        NoiseProfile { epsilon: 0.0, gate_count: 1, depth: 1, sigma_coeff: DEFAULT_SIGMA_COEFF }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn gate_count(&self) -> usize {
        self.gate_count
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn sigma_coeff(&self) -> f64 {
        self.sigma_coeff
    }

    /// Same profile with a different effective gate count.
    pub fn with_gate_count(&self, gate_count: usize) -> Result<Self, NoiseError> {
        NoiseProfile::new(self.epsilon, gate_count, self.depth, self.sigma_coeff)
    }

    pub fn p_error(&self) -> f64 {
        p_error(self)
    }

    pub fn attenuation(&self) -> f64 {
        1.0 - self.p_error()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma_coeff * self.p_error()
    }
}

/// `1 − (1 − ε)^(N_g·L)`, evaluated as `−expm1(n·ln1p(−ε))` to keep precision for small ε.
pub fn p_error(profile: &NoiseProfile) -> f64 {
    if profile.epsilon == 0.0 {
        return 0.0;
    }
    let exponent = (profile.gate_count * profile.depth) as f64;
    -(exponent * (-profile.epsilon).ln_1p()).exp_m1()
}

pub fn standard_normal(rng: &mut impl Rng) -> f64 {
    // u1 in (0, 1] keeps the logarithm finite
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Noisy output and the ξ that was drawn. A draw is consumed only when σ > 0.
pub fn sample_output_noise(f: f64, profile: &NoiseProfile, rng: &mut impl Rng) -> (f64, f64) {
    let sigma = profile.sigma();
    let xi = if sigma > 0.0 { sigma * standard_normal(rng) } else { 0.0 };
    (profile.attenuation() * f + xi, xi)
}

pub fn apply_output_noise(f: f64, profile: &NoiseProfile, rng: &mut impl Rng) -> f64 {
    sample_output_noise(f, profile, rng).0
}

/// Error rate at which `p_error` reaches one half to first order: `ln 2 / (N_g·L)`.
pub fn theoretical_optimal_epsilon(gate_count: usize, depth: usize) -> f64 {
    assert!(gate_count * depth >= 1, "N_g·L must be at least 1");
    std::f64::consts::LN_2 / (gate_count * depth) as f64
}

/// How the effective gate count `N_g` is chosen for a molecule.
/// Serialized as `"per-molecule"` or a positive integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GateCountMode {
    #[default]
    PerMolecule,
    Fixed(usize),
}

impl Serialize for GateCountMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            GateCountMode::PerMolecule => s.serialize_str("per-molecule"),
            GateCountMode::Fixed(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for GateCountMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(usize),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(0) => Err(serde::de::Error::custom("gate count must be at least 1")),
            Raw::Count(n) => Ok(GateCountMode::Fixed(n)),
            Raw::Name(s) if s == "per-molecule" => Ok(GateCountMode::PerMolecule),
            Raw::Name(s) => Err(serde::de::Error::custom(format!(
                "expected \"per-molecule\" or an integer, got {s:?}"
            ))),
        }
    }
}

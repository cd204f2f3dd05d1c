//! Gradients of the quantum features with respect to the circuit angles.
//!
//! All engines compute the vector–Jacobian product `∂(Σ_i w_i z_i)/∂θ` for a
//! weight vector `w` over the 12 features, so one call serves every feature.
//!
//! * [`GradientMode::Adjoint`] walks the circuit backwards once, carrying the
//!   state and the observable-applied co-state.
//! * [`GradientMode::ParameterShift`] shifts each gate occurrence by ±π/2 (all
//!   RY, RZ and RZZ generators have eigenvalues ±1/2) and sums occurrences of
//!   shared angles. The CRY readout has a three-level generator spectrum, so its
//!   angle falls back to central differences.
//! * [`GradientMode::FiniteDifference`] uses central differences for every angle.

use serde::{Deserialize, Serialize};

use crate::graph_data::MolecularGraph;
use crate::model::{
    extract_features, mlp_backward, mlp_forward_tape, CompactCircuit, ModelError, ModelParams, QuantumParams,
};
use crate::simulator::{GateKind, Statevector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMode {
    #[default]
    Adjoint,
    ParameterShift,
    FiniteDifference,
}

/// Deliberate defects for checking that the validation suite notices them.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientFault {
    /// Negates every RY occurrence's parameter-shift contribution.
    FlipRyShiftSign,
}

fn energy(circuit: &CompactCircuit, weights: &[f64]) -> Result<f64, ModelError> {
    let z = circuit.features_from(&circuit.run()?);
    Ok(z.iter().zip(weights).map(|(a, b)| a * b).sum())
}

fn check_weights(weights: &[f64]) -> Result<(), ModelError> {
    if weights.len() != crate::model::N_FEATURES {
        return Err(ModelError::Dimension(format!("expected 12 feature weights, got {}", weights.len())));
    }
    Ok(())
}

/// Adjoint-mode product given the already simulated final state of `circuit`.
pub fn adjoint_vjp(
    circuit: &CompactCircuit,
    final_state: Statevector,
    weights: &[f64],
    n_params: usize,
) -> Result<Vec<f64>, ModelError> {
    check_weights(weights)?;
    let mut grad = vec![0.0; n_params];
    let mut lambda = final_state.z_observable_applied(&circuit.compact_weights(weights));
    let mut phi = final_state;
    for g in circuit.gates.iter().rev() {
        phi.apply_inverse(g)?;
        if let Some(tag) = g.tag {
            grad[tag.index] += 2.0 * lambda.derivative_inner(&phi, g)?.re * tag.sign();
        }
        lambda.apply_inverse(g)?;
    }
    Ok(grad)
}

pub fn quantum_vjp(
    graph: &MolecularGraph,
    params: &QuantumParams,
    weights: &[f64],
    mode: GradientMode,
    fd_step: f64,
) -> Result<Vec<f64>, ModelError> {
    quantum_vjp_with_fault(graph, params, weights, mode, fd_step, None)
}

#[doc(hidden)]
pub fn quantum_vjp_with_fault(
    graph: &MolecularGraph,
    params: &QuantumParams,
    weights: &[f64],
    mode: GradientMode,
    fd_step: f64,
    fault: Option<GradientFault>,
) -> Result<Vec<f64>, ModelError> {
    params.validate()?;
    check_weights(weights)?;
    if mode != GradientMode::Adjoint && !(fd_step.is_finite() && fd_step > 0.0) {
        return Err(ModelError::Dimension(format!("finite-difference step {fd_step} must be positive")));
    }
    match mode {
        GradientMode::Adjoint => {
            let circuit = CompactCircuit::new(graph, params);
            let state = circuit.run()?;
            adjoint_vjp(&circuit, state, weights, params.n_params())
        }
        GradientMode::ParameterShift => parameter_shift(graph, params, weights, fd_step, fault),
        GradientMode::FiniteDifference => {
            let flat = params.to_flat();
            (0..flat.len()).map(|k| central_difference(graph, params, &flat, k, weights, fd_step)).collect()
        }
    }
}

fn central_difference(
    graph: &MolecularGraph,
    params: &QuantumParams,
    flat: &[f64],
    k: usize,
    weights: &[f64],
    h: f64,
) -> Result<f64, ModelError> {
    let mut shifted = params.clone();
    let mut f = flat.to_vec();
    f[k] = flat[k] + h;
    shifted.set_flat(&f);
    let plus = energy(&CompactCircuit::new(graph, &shifted), weights)?;
    f[k] = flat[k] - h;
    shifted.set_flat(&f);
    let minus = energy(&CompactCircuit::new(graph, &shifted), weights)?;
    Ok((plus - minus) / (2.0 * h))
}

fn parameter_shift(
    graph: &MolecularGraph,
    params: &QuantumParams,
    weights: &[f64],
    fd_step: f64,
    fault: Option<GradientFault>,
) -> Result<Vec<f64>, ModelError> {
    let shift = std::f64::consts::FRAC_PI_2;
    let base = CompactCircuit::new(graph, params);
    let mut grad = vec![0.0; params.n_params()];
    let mut fd_params = Vec::new();
    let mut shifted = base.clone();
    for (k, g) in base.gates.iter().enumerate() {
        let Some(tag) = g.tag else { continue };
        if g.kind == GateKind::Cry {
            if !fd_params.contains(&tag.index) {
                fd_params.push(tag.index);
            }
            continue;
        }
        shifted.gates[k] = g.with_angle(g.angle + shift);
        let plus = energy(&shifted, weights)?;
        shifted.gates[k] = g.with_angle(g.angle - shift);
        let minus = energy(&shifted, weights)?;
        shifted.gates[k] = *g;
        let mut term = tag.sign() * (plus - minus) / 2.0;
        if g.kind == GateKind::Ry && fault == Some(GradientFault::FlipRyShiftSign) {
            term = -term;
        }
        grad[tag.index] += term;
    }
    let flat = params.to_flat();
    for k in fd_params {
        grad[k] = central_difference(graph, params, &flat, k, weights, fd_step)?;
    }
    Ok(grad)
}

/// `upstream · ∂f/∂θ_quantum` for the evaluation-mode prediction `f = MLP(z(G, θ))`.
pub fn quantum_gradient(
    graph: &MolecularGraph,
    params: &ModelParams,
    upstream: f64,
    mode: GradientMode,
    fd_step: f64,
) -> Result<Vec<f64>, ModelError> {
    let z = extract_features(graph, &params.quantum)?;
    let tape = mlp_forward_tape(&z, &params.classical, None, false)?;
    let (_, dz) = mlp_backward(&tape, &params.classical, upstream);
    quantum_vjp(graph, &params.quantum, &dz, mode, fd_step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_data::{generate_synthetic, parse_record};
    use crate::model::{QuantumParamId, MASTER_QUBIT};
    use crate::simulator::GateOp;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_q(rng: &mut ChaCha8Rng) -> QuantumParams {
        let mut q = QuantumParams::zeros(1);
        let f: Vec<f64> = (0..q.n_params()).map(|_| rng.random_range(-3.0..3.0)).collect();
        q.set_flat(&f);
        q
    }

    #[test]
    fn single_ry_gradient_closed_form() {
        // one gate RY(θ) on |0⟩, observable Z: d cos θ / dθ = −sin θ
        let theta: f64 = 0.7;
        let circuit = CompactCircuit { n_atoms: 1, gates: vec![GateOp::ry(0, theta).tagged(0, false)] };
        let mut w = vec![0.0; 12];
        w[0] = 1.0;
        let g = adjoint_vjp(&circuit, circuit.run().unwrap(), &w, 1).unwrap();
        assert!((g[0] + theta.sin()).abs() < 1e-14);
        assert!((g[0] + 0.644_217_687_237_691).abs() < 1e-12);
    }

    #[test]
    fn engines_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for g in generate_synthetic(6, 8, 5) {
            let q = random_q(&mut rng);
            let w: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
            let adj = quantum_vjp(&g, &q, &w, GradientMode::Adjoint, 1e-4).unwrap();
            let ps = quantum_vjp(&g, &q, &w, GradientMode::ParameterShift, 1e-4).unwrap();
            let fd = quantum_vjp(&g, &q, &w, GradientMode::FiniteDifference, 1e-4).unwrap();
            for k in 0..adj.len() {
                assert!((adj[k] - ps[k]).abs() <= 1e-10 + 1e-6 * ps[k].abs().max(1e-3), "{k}: {} {}", adj[k], ps[k]);
                assert!((fd[k] - ps[k]).abs() <= 1e-8 + 1e-5 * ps[k].abs(), "{k}: {} {}", fd[k], ps[k]);
            }
        }
    }

    #[test]
    fn absent_parameters_have_zero_gradient() {
        let g = parse_record(r#"{"atoms":["C","C","N"],"bonds":[[0,1,"single"],[1,2,"single"]],"target":1}"#, 1)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = random_q(&mut rng);
        let w = vec![0.3; 12];
        for mode in [GradientMode::Adjoint, GradientMode::ParameterShift, GradientMode::FiniteDifference] {
            let grad = quantum_vjp(&g, &q, &w, mode, 1e-4).unwrap();
            for id in [
                QuantumParamId::Element(2),
                QuantumParamId::Element(3),
                QuantumParamId::Theta { layer: 0, bond: crate::graph_data::BondType::Triple },
                QuantumParamId::Phi { layer: 0, bond: crate::graph_data::BondType::Double },
            ] {
                assert_eq!(grad[QuantumParams::flat_index(id)], 0.0, "{mode:?} {id:?}");
            }
        }
    }

    #[test]
    fn injected_fault_is_visible() {
        let g = &generate_synthetic(1, 3, 4)[0];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = random_q(&mut rng);
        let mut w = vec![0.0; 12];
        w[MASTER_QUBIT] = 1.0;
        w[0] = 0.5;
        let good = quantum_vjp(g, &q, &w, GradientMode::ParameterShift, 1e-4).unwrap();
        let bad = quantum_vjp_with_fault(g, &q, &w, GradientMode::ParameterShift, 1e-4, Some(GradientFault::FlipRyShiftSign)).unwrap();
        assert!(good.iter().zip(&bad).any(|(a, b)| (a - b).abs() > 1e-6));
    }
}

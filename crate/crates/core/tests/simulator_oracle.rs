mod common;

use common::checks::dense_oracle_worst;
use common::{circuit_matrix, gate_matrix, C};
use qgnn_noise::model::{build_circuit, simulate_full, N_QUBITS};
use qgnn_noise::simulator::{GateOp, Statevector};
use qgnn_noise::trainer::{init_params, ModelConfig};

#[test]
fn kernels_match_dense_matrices() {
    let (worst, cases) = dense_oracle_worst(20, 7);
    assert!(cases > 20);
    assert!(worst < 1e-12, "worst amplitude error {worst:e}");
}

#[test]
fn dense_oracle_is_unitary() {
    let gates = [GateOp::h(0), GateOp::rzz(0, 2, 0.3), GateOp::cry(2, 1, -1.1), GateOp::rz(1, 2.0)];
    let u = circuit_matrix(3, &gates);
    let mut udag = u.clone();
    for i in 0..8 {
        for j in 0..8 {
            udag.a[i * 8 + j] = u.a[j * 8 + i].conj();
        }
    }
    let p = udag.mul(&u);
    for i in 0..8 {
        for j in 0..8 {
            let e = if i == j { 1.0 } else { 0.0 };
            assert!((p.a[i * 8 + j] - C::new(e, 0.0)).norm() < 1e-13);
        }
    }
    // qubit 0 is the low bit: X-like rotation on qubit 0 of |00⟩ populates index 1
    let m = gate_matrix(2, &GateOp::ry(0, std::f64::consts::PI));
    assert!((m.a[1 * 4] - C::new(1.0, 0.0)).norm() < 1e-15);
}

#[test]
fn encoding_circuit_matches_dense_oracle_on_small_register() {
    // a two-atom molecule fits a three-qubit register once the master is remapped
    let g = qgnn_noise::graph_data::parse_record(r#"{"atoms":["N","O"],"bonds":[[0,1,"double"]],"target":5}"#, 1).unwrap();
    let params = init_params(9, &ModelConfig::default());
    let full = simulate_full(&g, &params.quantum).unwrap();
    let gates: Vec<GateOp> = build_circuit(&g, &params.quantum)
        .iter()
        .map(|op| op.remapped(|q| if q == N_QUBITS - 1 { 2 } else { q }))
        .collect();
    let mut e0 = vec![C::new(0.0, 0.0); 8];
    e0[0] = C::new(1.0, 0.0);
    let small = circuit_matrix(3, &gates).apply(&e0);
    // embed: qubits 2..=10 stay |0⟩, master is bit 11
    for (k, amp) in small.iter().enumerate() {
        let idx = (k & 0b11) | ((k >> 2) << 11);
        assert!((full.amplitudes()[idx] - amp).norm() < 1e-12, "index {k}");
    }
    let mut check = Statevector::zero(3).unwrap();
    check.apply_sequence(&gates).unwrap();
    assert!(check.amplitudes().iter().zip(&small).all(|(a, b)| (a - b).norm() < 1e-12));
}

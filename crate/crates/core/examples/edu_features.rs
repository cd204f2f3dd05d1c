//! Encodes a small molecule, prints the gate budget and quantum features, and
//! checks that relabeling atoms permutes the atom features.

use qgnn_noise::graph_data::parse_record;
use qgnn_noise::model::{build_circuit, extract_features, gate_count, MASTER_QUBIT};
use qgnn_noise::trainer::{init_params, ModelConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // acetaldehyde heavy atoms: C-C=O
    let g = parse_record(r#"{"atoms":["C","C","O"],"bonds":[[0,1,"single"],[1,2,"double"]],"target":6.1}"#, 1)?;
    let params = init_params(3, &ModelConfig::default());

    let circuit = build_circuit(&g, &params.quantum);
    println!("gates: {} (closed form {})", circuit.len(), gate_count(&g, 1));
    for op in circuit.iter().take(6) {
        println!("  {:?} on {:?} angle {:+.4}", op.kind, op.qubits(), op.angle);
    }

    let z = extract_features(&g, &params.quantum)?;
    println!("features: {}", z.iter().map(|v| format!("{v:+.4}")).collect::<Vec<_>>().join(" "));

    let perm = [2, 0, 1];
    let zp = extract_features(&g.permuted(&perm), &params.quantum)?;
    let worst = (0..g.n_atoms()).map(|a| (z[a] - zp[perm[a]]).abs()).fold(0.0, f64::max);
    println!("atom features after relabeling {perm:?}: max error {worst:.2e}");
    println!("master feature: {:+.12} vs {:+.12}", z[MASTER_QUBIT], zp[MASTER_QUBIT]);
    Ok(())
}

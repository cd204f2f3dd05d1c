//! Builds a three-qubit circuit by hand and reads out amplitudes and ⟨Z⟩.

use qgnn_noise::simulator::{GateOp, Statevector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gates = [
        GateOp::h(0),
        GateOp::ry(1, 0.9),
        GateOp::rzz(0, 1, 0.4),
        GateOp::cry(1, 2, 1.2),
        GateOp::rz(2, -0.3),
    ];
    let mut psi = Statevector::zero(3)?;
    psi.apply_sequence(&gates)?;

    for (k, a) in psi.amplitudes().iter().enumerate() {
        println!("|{k:03b}⟩  {:+.6} {:+.6}i", a.re, a.im);
    }
    println!("norm² = {:.15}", psi.norm_sqr());
    for q in 0..3 {
        println!("⟨Z_{q}⟩ = {:+.6}", psi.expect_z(q)?);
    }

    // undoing the gates in reverse order returns to |000⟩
    for g in gates.iter().rev() {
        psi.apply_inverse(g)?;
    }
    println!("distance to |000⟩ after inversion: {:.2e}", psi.distance(&Statevector::zero(3)?));
    Ok(())
}

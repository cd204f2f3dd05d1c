//! Exact statevector simulation of the EDU gate alphabet.
//!
//! Qubit `q` is bit `q` of the basis index (qubit 0 is the least-significant bit).
//! Rotation conventions:
//!
//! * `RY(θ) = exp(−iθY/2)`, `RZ(φ) = exp(−iφZ/2)`
//! * `RZZ(ψ) = exp(−iψ Z⊗Z/2)`
//! * `CRY(α) = |0⟩⟨0| ⊗ I + |1⟩⟨1| ⊗ RY(α)` (control first, target second)

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_QUBITS: usize = 16;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("register of {0} qubits exceeds the {MAX_QUBITS}-qubit cap")]
    TooManyQubits(usize),
    #[error("qubit {qubit} out of range for {n_qubits}-qubit register")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },
    #[error("two-qubit gate acts on qubit {0} twice")]
    RepeatedQubit(usize),
    #[error("gate angle {0} is not finite")]
    NonFiniteAngle(f64),
    #[error("{0:?} has no angle to differentiate")]
    NotParameterized(GateKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    H,
    Ry,
    Rz,
    Rzz,
    Cry,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::H | GateKind::Ry | GateKind::Rz => 1,
            GateKind::Rzz | GateKind::Cry => 2,
        }
    }
}

/// Links a gate angle to entry `index` of a flat trainable-parameter vector.
/// The gate angle is `−param` when `negated` is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamTag {
    pub index: usize,
    pub negated: bool,
}

impl ParamTag {
    pub fn sign(self) -> f64 {
        if self.negated {
            -1.0
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateOp {
    pub kind: GateKind,
    qubits: [usize; 2],
    pub angle: f64,
    pub tag: Option<ParamTag>,
}

impl GateOp {
    pub fn h(q: usize) -> Self {
        GateOp { kind: GateKind::H, qubits: [q, q], angle: 0.0, tag: None }
    }

    pub fn ry(q: usize, theta: f64) -> Self {
        GateOp { kind: GateKind::Ry, qubits: [q, q], angle: theta, tag: None }
    }

    pub fn rz(q: usize, phi: f64) -> Self {
        GateOp { kind: GateKind::Rz, qubits: [q, q], angle: phi, tag: None }
    }

    pub fn rzz(a: usize, b: usize, psi: f64) -> Self {
        GateOp { kind: GateKind::Rzz, qubits: [a, b], angle: psi, tag: None }
    }

    pub fn cry(control: usize, target: usize, alpha: f64) -> Self {
        GateOp { kind: GateKind::Cry, qubits: [control, target], angle: alpha, tag: None }
    }

    pub fn tagged(mut self, index: usize, negated: bool) -> Self {
        self.tag = Some(ParamTag { index, negated });
        self
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits[..self.kind.arity()]
    }

    /// Copy acting on relabeled qubits.
    pub fn remapped(&self, map: impl Fn(usize) -> usize) -> Self {
        let mut g = *self;
        g.qubits = [map(self.qubits[0]), map(self.qubits[1])];
        g
    }

    pub fn with_angle(&self, angle: f64) -> Self {
        let mut g = *self;
        g.angle = angle;
        g
    }

    /// The Hermitian adjoint of this gate.
    pub fn inverse(&self) -> Self {
        match self.kind {
            GateKind::H => *self,
            _ => self.with_angle(-self.angle),
        }
    }

    fn validate(&self, n_qubits: usize) -> Result<(), SimError> {
        for &q in self.qubits() {
            if q >= n_qubits {
                return Err(SimError::QubitOutOfRange { qubit: q, n_qubits });
            }
        }
        if self.kind.arity() == 2 && self.qubits[0] == self.qubits[1] {
            return Err(SimError::RepeatedQubit(self.qubits[0]));
        }
        if !self.angle.is_finite() {
            return Err(SimError::NonFiniteAngle(self.angle));
        }
        Ok(())
    }
}

type Mat2 = [[Complex64; 2]; 2];

fn real_mat(m: [[f64; 2]; 2]) -> Mat2 {
    m.map(|row| row.map(|x| Complex64::new(x, 0.0)))
}

fn ry_matrix(theta: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    real_mat([[c, -s], [s, c]])
}

fn ry_derivative(theta: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    real_mat([[-0.5 * s, -0.5 * c], [0.5 * c, -0.5 * s]])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl Statevector {
    /// The all-zeros basis state `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Result<Self, SimError> {
        if n_qubits > MAX_QUBITS {
            return Err(SimError::TooManyQubits(n_qubits));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Statevector { n_qubits, amplitudes })
    }

    /// Wraps raw amplitudes. The length must be a power of two; no normalization is applied.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self, SimError> {
        let len = amplitudes.len();
        assert!(len.is_power_of_two(), "amplitude count must be a power of two");
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(SimError::TooManyQubits(n_qubits));
        }
        Ok(Statevector { n_qubits, amplitudes })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Statevector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Euclidean distance between amplitude vectors.
    pub fn distance(&self, other: &Statevector) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn apply(&mut self, gate: &GateOp) -> Result<(), SimError> {
        gate.validate(self.n_qubits)?;
        let q = gate.qubits;
        match gate.kind {
            GateKind::H => {
                let h = std::f64::consts::FRAC_1_SQRT_2;
                self.apply_1q(q[0], &real_mat([[h, h], [h, -h]]));
            }
            GateKind::Ry => self.apply_1q(q[0], &ry_matrix(gate.angle)),
            GateKind::Rz => {
                let half = Complex64::from_polar(1.0, -gate.angle / 2.0);
                self.apply_diag_1q(q[0], half, half.conj());
            }
            GateKind::Rzz => {
                let half = Complex64::from_polar(1.0, -gate.angle / 2.0);
                self.apply_diag_zz(q[0], q[1], half, half.conj());
            }
            GateKind::Cry => self.apply_controlled_1q(q[0], q[1], &ry_matrix(gate.angle)),
        }
        Ok(())
    }

    pub fn apply_inverse(&mut self, gate: &GateOp) -> Result<(), SimError> {
        self.apply(&gate.inverse())
    }

    /// Applies `dU/dangle` of a parameterized gate. The result is not normalized.
    pub fn apply_derivative(&mut self, gate: &GateOp) -> Result<(), SimError> {
        gate.validate(self.n_qubits)?;
        let q = gate.qubits;
        let i_half = Complex64::new(0.0, 0.5);
        match gate.kind {
            GateKind::H => return Err(SimError::NotParameterized(GateKind::H)),
            GateKind::Ry => self.apply_1q(q[0], &ry_derivative(gate.angle)),
            GateKind::Rz => {
                let half = Complex64::from_polar(1.0, -gate.angle / 2.0);
                self.apply_diag_1q(q[0], -i_half * half, i_half * half.conj());
            }
            GateKind::Rzz => {
                let half = Complex64::from_polar(1.0, -gate.angle / 2.0);
                self.apply_diag_zz(q[0], q[1], -i_half * half, i_half * half.conj());
            }
            GateKind::Cry => {
                let cmask = 1usize << q[0];
                for (i, a) in self.amplitudes.iter_mut().enumerate() {
                    if i & cmask == 0 {
                        *a = Complex64::new(0.0, 0.0);
                    }
                }
                self.apply_controlled_1q(q[0], q[1], &ry_derivative(gate.angle));
            }
        }
        Ok(())
    }

    /// `⟨self| dU/dangle |phi⟩` for a parameterized gate, without allocating.
    pub fn derivative_inner(&self, phi: &Statevector, gate: &GateOp) -> Result<Complex64, SimError> {
        gate.validate(self.n_qubits)?;
        let q = gate.qubits;
        let lam = &self.amplitudes;
        let phi = &phi.amplitudes;
        let i_half = Complex64::new(0.0, 0.5);
        let pair_sum = |m: &Mat2, cmask: usize, tmask: usize| {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..lam.len() {
                if i & tmask == 0 && i & cmask == cmask {
                    let j = i | tmask;
                    let (a, b) = (phi[i], phi[j]);
                    acc += lam[i].conj() * (m[0][0] * a + m[0][1] * b)
                        + lam[j].conj() * (m[1][0] * a + m[1][1] * b);
                }
            }
            acc
        };
        Ok(match gate.kind {
            GateKind::H => return Err(SimError::NotParameterized(GateKind::H)),
            GateKind::Ry => pair_sum(&ry_derivative(gate.angle), 0, 1 << q[0]),
            GateKind::Cry => pair_sum(&ry_derivative(gate.angle), 1 << q[0], 1 << q[1]),
            GateKind::Rz => {
                let half = Complex64::from_polar(1.0, -gate.angle / 2.0);
                let (d0, d1) = (-i_half * half, i_half * half.conj());
                let mask = 1usize << q[0];
                lam.iter()
                    .zip(phi)
                    .enumerate()
                    .map(|(i, (l, p))| l.conj() * p * if i & mask == 0 { d0 } else { d1 })
                    .sum()
            }
            GateKind::Rzz => {
                let half = Complex64::from_polar(1.0, -gate.angle / 2.0);
                let (d_even, d_odd) = (-i_half * half, i_half * half.conj());
                lam.iter()
                    .zip(phi)
                    .enumerate()
                    .map(|(i, (l, p))| {
                        let odd = ((i >> q[0]) ^ (i >> q[1])) & 1 == 1;
                        l.conj() * p * if odd { d_odd } else { d_even }
                    })
                    .sum()
            }
        })
    }

    pub fn apply_sequence<'a>(
        &mut self,
        gates: impl IntoIterator<Item = &'a GateOp>,
    ) -> Result<(), SimError> {
        for g in gates {
            self.apply(g)?;
        }
        Ok(())
    }

    fn apply_1q(&mut self, q: usize, m: &Mat2) {
        let mask = 1usize << q;
        let len = self.amplitudes.len();
        let amps = &mut self.amplitudes;
        let mut base = 0;
        while base < len {
            for i in base..base + mask {
                let j = i | mask;
                let (a, b) = (amps[i], amps[j]);
                amps[i] = m[0][0] * a + m[0][1] * b;
                amps[j] = m[1][0] * a + m[1][1] * b;
            }
            base += mask << 1;
        }
    }

    fn apply_controlled_1q(&mut self, control: usize, target: usize, m: &Mat2) {
        let cmask = 1usize << control;
        let tmask = 1usize << target;
        let amps = &mut self.amplitudes;
        for i in 0..amps.len() {
            if i & cmask != 0 && i & tmask == 0 {
                let j = i | tmask;
                let (a, b) = (amps[i], amps[j]);
                amps[i] = m[0][0] * a + m[0][1] * b;
                amps[j] = m[1][0] * a + m[1][1] * b;
            }
        }
    }

    fn apply_diag_1q(&mut self, q: usize, d0: Complex64, d1: Complex64) {
        let mask = 1usize << q;
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            *a *= if i & mask == 0 { d0 } else { d1 };
        }
    }

    /// `d_even` multiplies basis states where the two bits agree (Z⊗Z = +1).
    fn apply_diag_zz(&mut self, a: usize, b: usize, d_even: Complex64, d_odd: Complex64) {
        for (i, amp) in self.amplitudes.iter_mut().enumerate() {
            let odd = ((i >> a) ^ (i >> b)) & 1 == 1;
            *amp *= if odd { d_odd } else { d_even };
        }
    }

    pub fn expect_z(&self, qubit: usize) -> Result<f64, SimError> {
        if qubit >= self.n_qubits {
            return Err(SimError::QubitOutOfRange { qubit, n_qubits: self.n_qubits });
        }
        let mask = 1usize << qubit;
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| if i & mask == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum())
    }

    /// `⟨Z_q⟩` for every qubit in one pass.
    pub fn expect_z_all(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_qubits];
        for (i, a) in self.amplitudes.iter().enumerate() {
            let p = a.norm_sqr();
            for (q, o) in out.iter_mut().enumerate() {
                if (i >> q) & 1 == 0 {
                    *o += p;
                } else {
                    *o -= p;
                }
            }
        }
        out
    }

    /// `(Σ_q weights[q]·Z_q)|self⟩`.
    pub fn z_observable_applied(&self, weights: &[f64]) -> Statevector {
        assert_eq!(weights.len(), self.n_qubits);
        let total: f64 = weights.iter().sum();
        let amplitudes = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let mut w = total;
                for (q, &wq) in weights.iter().enumerate() {
                    if (i >> q) & 1 == 1 {
                        w -= 2.0 * wq;
                    }
                }
                a * w
            })
            .collect();
        Statevector { n_qubits: self.n_qubits, amplitudes }
    }
}

/// Value-in/value-out gate application.
pub fn apply_gate(mut state: Statevector, gate: &GateOp) -> Result<Statevector, SimError> {
    state.apply(gate)?;
    Ok(state)
}

pub fn apply_sequence(mut state: Statevector, gates: &[GateOp]) -> Result<Statevector, SimError> {
    state.apply_sequence(gates)?;
    Ok(state)
}

pub fn expect_z(state: &Statevector, qubit: usize) -> Result<f64, SimError> {
    state.expect_z(qubit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn hadamard_gives_zero_expectation() {
        let s = apply_gate(Statevector::zero(1).unwrap(), &GateOp::h(0)).unwrap();
        close(s.expect_z(0).unwrap(), 0.0, 1e-15);
    }

    #[test]
    fn ry_pi_flips() {
        let s = apply_gate(Statevector::zero(1).unwrap(), &GateOp::ry(0, PI)).unwrap();
        close(s.expect_z(0).unwrap(), -1.0, 1e-15);
    }

    #[test]
    fn ry_matches_closed_form() {
        for theta in [0.3, 1.1, 2.5] {
            let s = apply_gate(Statevector::zero(1).unwrap(), &GateOp::ry(0, theta)).unwrap();
            // direct 2x2 evaluation: RY|0> = (cos θ/2, sin θ/2)
            let (c, s2) = ((theta / 2.0).cos(), (theta / 2.0).sin());
            close(s.expect_z(0).unwrap(), c * c - s2 * s2, 1e-14);
            close(s.expect_z(0).unwrap(), theta.cos(), 1e-14);
        }
    }

    #[test]
    fn rzz_on_zero_is_phase_only() {
        let s0 = Statevector::zero(2).unwrap();
        let s = apply_gate(s0.clone(), &GateOp::rzz(0, 1, 0.9)).unwrap();
        close(s.amplitudes()[0].norm(), 1.0, 1e-15);
        close(s.expect_z(0).unwrap(), 1.0, 1e-15);
        close(s.expect_z(1).unwrap(), 1.0, 1e-15);
        close(s.inner(&s0).norm(), 1.0, 1e-15);
    }

    #[test]
    fn product_state_expectation() {
        let s = apply_sequence(
            Statevector::zero(2).unwrap(),
            &[GateOp::ry(0, 1.0), GateOp::ry(1, 2.0)],
        )
        .unwrap();
        close(s.expect_z(1).unwrap(), 2.0f64.cos(), 1e-14);
        close(s.expect_z(1).unwrap(), -0.4161468365471424, 1e-14);
    }

    #[test]
    fn zero_state_and_uniform_superposition() {
        let s = Statevector::zero(4).unwrap();
        for q in 0..4 {
            assert_eq!(s.expect_z(q).unwrap(), 1.0);
        }
        let hs: Vec<GateOp> = (0..4).map(GateOp::h).collect();
        let s = apply_sequence(s, &hs).unwrap();
        for q in 0..4 {
            close(s.expect_z(q).unwrap(), 0.0, 1e-14);
        }
    }

    #[test]
    fn inverse_pair_restores_state() {
        let mut s = Statevector::zero(3).unwrap();
        s.apply_sequence(&[GateOp::h(0), GateOp::ry(1, 0.4), GateOp::cry(0, 2, 1.3)]).unwrap();
        let orig = s.clone();
        s.apply_sequence(&[GateOp::ry(2, 0.77), GateOp::ry(2, -0.77)]).unwrap();
        assert!(s.distance(&orig) < 1e-12);
        assert_eq!(apply_sequence(orig.clone(), &[]).unwrap(), orig);
    }

    #[test]
    fn errors() {
        let s = Statevector::zero(2).unwrap();
        assert_eq!(
            apply_gate(s.clone(), &GateOp::ry(2, 0.1)).unwrap_err(),
            SimError::QubitOutOfRange { qubit: 2, n_qubits: 2 }
        );
        assert_eq!(
            apply_gate(s.clone(), &GateOp::rzz(1, 1, 0.1)).unwrap_err(),
            SimError::RepeatedQubit(1)
        );
        assert!(matches!(
            apply_gate(s.clone(), &GateOp::rz(0, f64::NAN)),
            Err(SimError::NonFiniteAngle(_))
        ));
        assert!(s.expect_z(5).is_err());
        assert_eq!(Statevector::zero(17).unwrap_err(), SimError::TooManyQubits(17));
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let mut base = Statevector::zero(2).unwrap();
        base.apply_sequence(&[GateOp::h(0), GateOp::ry(1, 0.8), GateOp::rz(0, 0.3)]).unwrap();
        let gates = [
            GateOp::ry(0, 0.7),
            GateOp::rz(1, -1.2),
            GateOp::rzz(0, 1, 0.5),
            GateOp::cry(0, 1, 2.1),
        ];
        let h = 1e-6;
        for g in gates {
            let mut d = base.clone();
            d.apply_derivative(&g).unwrap();
            let plus = apply_gate(base.clone(), &g.with_angle(g.angle + h)).unwrap();
            let minus = apply_gate(base.clone(), &g.with_angle(g.angle - h)).unwrap();
            for k in 0..4 {
                let fd = (plus.amplitudes()[k] - minus.amplitudes()[k]) / (2.0 * h);
                assert!((fd - d.amplitudes()[k]).norm() < 1e-8, "{g:?}");
            }
        }
    }

    #[test]
    fn derivative_inner_matches_explicit() {
        let mut phi = Statevector::zero(3).unwrap();
        phi.apply_sequence(&[GateOp::h(0), GateOp::ry(1, 0.8), GateOp::h(2), GateOp::rz(2, 0.4)]).unwrap();
        let mut lam = Statevector::zero(3).unwrap();
        lam.apply_sequence(&[GateOp::ry(0, 1.3), GateOp::h(1), GateOp::cry(1, 2, 0.6)]).unwrap();
        for g in [GateOp::ry(2, 0.7), GateOp::rz(0, -1.1), GateOp::rzz(0, 2, 0.5), GateOp::cry(2, 1, 1.9)] {
            let mut d = phi.clone();
            d.apply_derivative(&g).unwrap();
            let expect = lam.inner(&d);
            let got = lam.derivative_inner(&phi, &g).unwrap();
            assert!((expect - got).norm() < 1e-14, "{g:?}");
        }
    }

    #[test]
    fn z_observable_matches_expectations() {
        let mut s = Statevector::zero(3).unwrap();
        s.apply_sequence(&[GateOp::ry(0, 0.3), GateOp::h(1), GateOp::cry(1, 2, 0.9)]).unwrap();
        let w = [0.5, -1.5, 2.0];
        let o = s.z_observable_applied(&w).inner(&s).re;
        let direct: f64 = (0..3).map(|q| w[q] * s.expect_z(q).unwrap()).sum();
        close(o, direct, 1e-14);
        let all = s.expect_z_all();
        for q in 0..3 {
            close(all[q], s.expect_z(q).unwrap(), 1e-15);
        }
    }
}

//! Independent reference implementations shared by the integration tests and
//! the acceptance runner.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use qgnn_noise::graph_data::{Bond, BondType, Element, MolecularGraph};
use qgnn_noise::simulator::{GateKind, GateOp};

pub type C = Complex64;

/// Dense square matrix, row-major.
#[derive(Clone, Debug)]
pub struct Mat {
    pub n: usize,
    pub a: Vec<C>,
}

impl Mat {
    pub fn identity(n: usize) -> Mat {
        let mut a = vec![C::new(0.0, 0.0); n * n];
        for i in 0..n {
            a[i * n + i] = C::new(1.0, 0.0);
        }
        Mat { n, a }
    }

    pub fn from_rows(rows: &[&[C]]) -> Mat {
        let n = rows.len();
        Mat { n, a: rows.iter().flat_map(|r| r.iter().copied()).collect() }
    }

    pub fn kron(&self, other: &Mat) -> Mat {
        let n = self.n * other.n;
        let mut a = vec![C::new(0.0, 0.0); n * n];
        for i in 0..self.n {
            for j in 0..self.n {
                for k in 0..other.n {
                    for l in 0..other.n {
                        a[(i * other.n + k) * n + j * other.n + l] = self.a[i * self.n + j] * other.a[k * other.n + l];
                    }
                }
            }
        }
        Mat { n, a }
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        let n = self.n;
        let mut a = vec![C::new(0.0, 0.0); n * n];
        for i in 0..n {
            for k in 0..n {
                let x = self.a[i * n + k];
                for j in 0..n {
                    a[i * n + j] += x * other.a[k * n + j];
                }
            }
        }
        Mat { n, a }
    }

    pub fn add(&self, other: &Mat) -> Mat {
        Mat { n: self.n, a: self.a.iter().zip(&other.a).map(|(x, y)| x + y).collect() }
    }

    pub fn apply(&self, v: &[C]) -> Vec<C> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.a[i * self.n + j] * v[j]).sum()).collect()
    }
}

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn h2() -> Mat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Mat::from_rows(&[&[c(s, 0.0), c(s, 0.0)], &[c(s, 0.0), c(-s, 0.0)]])
}

pub fn ry2(t: f64) -> Mat {
    let (s, co) = (t / 2.0).sin_cos();
    Mat::from_rows(&[&[c(co, 0.0), c(-s, 0.0)], &[c(s, 0.0), c(co, 0.0)]])
}

pub fn rz2(t: f64) -> Mat {
    let (s, co) = (t / 2.0).sin_cos();
    Mat::from_rows(&[&[c(co, -s), c(0.0, 0.0)], &[c(0.0, 0.0), c(co, s)]])
}

fn proj(bit: usize) -> Mat {
    let (p, q) = if bit == 0 { (1.0, 0.0) } else { (0.0, 1.0) };
    Mat::from_rows(&[&[c(p, 0.0), c(0.0, 0.0)], &[c(0.0, 0.0), c(q, 0.0)]])
}

/// `⊗_{q = n−1}^{0} factor(q)`: qubit 0 is the least significant index bit.
fn tensor(n: usize, factor: impl Fn(usize) -> Mat) -> Mat {
    let mut m = factor(n - 1);
    for q in (0..n - 1).rev() {
        m = m.kron(&factor(q));
    }
    m
}

fn embed1(n: usize, q: usize, u: &Mat) -> Mat {
    tensor(n, |k| if k == q { u.clone() } else { Mat::identity(2) })
}

/// Full-register matrix of one gate, assembled from Kronecker products only.
pub fn gate_matrix(n: usize, g: &GateOp) -> Mat {
    let q = g.qubits();
    match g.kind {
        GateKind::H => embed1(n, q[0], &h2()),
        GateKind::Ry => embed1(n, q[0], &ry2(g.angle)),
        GateKind::Rz => embed1(n, q[0], &rz2(g.angle)),
        GateKind::Rzz => {
            // exp(−iψ/2 Z⊗Z) = Σ_{b,b'} e^{−iψ/2 (−1)^{b+b'}} |b⟩⟨b| ⊗ |b'⟩⟨b'|
            let mut m = Mat { n: 1 << n, a: vec![c(0.0, 0.0); 1 << (2 * n)] };
            for (ba, bb) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let sign = if ba == bb { 1.0 } else { -1.0 };
                let phase = C::from_polar(1.0, -g.angle / 2.0 * sign);
                let term = tensor(n, |k| {
                    if k == q[0] {
                        proj(ba)
                    } else if k == q[1] {
                        proj(bb)
                    } else {
                        Mat::identity(2)
                    }
                });
                m = m.add(&Mat { n: term.n, a: term.a.iter().map(|x| x * phase).collect() });
            }
            m
        }
        GateKind::Cry => {
            let (ctl, tgt) = (q[0], q[1]);
            let off = tensor(n, |k| if k == ctl { proj(0) } else { Mat::identity(2) });
            let on = tensor(n, |k| {
                if k == ctl {
                    proj(1)
                } else if k == tgt {
                    ry2(g.angle)
                } else {
                    Mat::identity(2)
                }
            });
            off.add(&on)
        }
    }
}

pub fn circuit_matrix(n: usize, gates: &[GateOp]) -> Mat {
    gates.iter().fold(Mat::identity(1 << n), |acc, g| gate_matrix(n, g).mul(&acc))
}

/// `1 − (1 − ε)^n` in exact rational arithmetic, rounded to f64 at the end.
pub fn exact_p_error(eps_num: i64, eps_den: i64, n: u32) -> f64 {
    let one = BigRational::from_integer(BigInt::from(1));
    let keep = &one - BigRational::new(BigInt::from(eps_num), BigInt::from(eps_den));
    let mut pow = one.clone();
    for _ in 0..n {
        pow *= &keep;
    }
    let p = one - pow;
    // scale to 40 decimal digits of the quotient, then to float
    let scale = BigInt::from(10).pow(40);
    let q: BigInt = (p.numer() * &scale) / p.denom();
    let digits = q.to_string();
    let val: f64 = digits.parse::<f64>().expect("integer digits");
    val / 1e40
}

/// Independent ΔR² re-aggregation from a raw run log, grouped by seed:
/// `(baseline, best nonzero-ε R², ΔR² %)`.
pub fn reaggregate(runs_path: &Path) -> BTreeMap<u64, (f64, f64, f64)> {
    let text = std::fs::read_to_string(runs_path).expect("run log readable");
    let mut by_seed: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let v: serde_json::Value = serde_json::from_str(line).expect("valid JSON line");
        if v["status"] != "ok" {
            continue;
        }
        let seed = v["init_seed"].as_u64().expect("seed");
        by_seed
            .entry(seed)
            .or_default()
            .push((v["epsilon"].as_f64().expect("epsilon"), v["r2_test"].as_f64().expect("r2_test")));
    }
    by_seed
        .into_iter()
        .map(|(seed, runs)| {
            let base = runs.iter().find(|(e, _)| *e == 0.0).expect("baseline run").1;
            let best = runs.iter().filter(|(e, _)| *e != 0.0).map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
            (seed, (base, best, (best - base) / base * 100.0))
        })
        .collect()
}

/// Hand features of the planted target: bond-type counts, per-element degree sums, 1.
pub fn planted_features(g: &MolecularGraph) -> Vec<f64> {
    let mut f = vec![0.0; 9];
    let mut deg = vec![0usize; g.n_atoms()];
    for b in g.bonds() {
        let k = match b.kind {
            BondType::Single => 0,
            BondType::Aromatic => 1,
            BondType::Double => 2,
            BondType::Triple => 3,
        };
        f[k] += 1.0;
        deg[b.i] += 1;
        deg[b.j] += 1;
    }
    for (a, el) in g.atoms().iter().enumerate() {
        let k = match el {
            Element::C => 4,
            Element::N => 5,
            Element::O => 6,
            Element::F => 7,
        };
        f[k] += deg[a] as f64;
    }
    f[8] = 1.0;
    f
}

/// Ordinary least squares by normal equations and Gaussian elimination.
pub fn least_squares(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let mut a = vec![vec![0.0; p + 1]; p];
    for (row, &t) in x.iter().zip(y) {
        for i in 0..p {
            for j in 0..p {
                a[i][j] += row[i] * row[j];
            }
            a[i][p] += row[i] * t;
        }
    }
    for i in 0..p {
        a[i][i] += 1e-12;
    }
    for col in 0..p {
        let piv = (col..p).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs())).expect("nonempty");
        a.swap(col, piv);
        for r in 0..p {
            if r != col {
                let f = a[r][col] / a[col][col];
                for k in col..=p {
                    a[r][k] -= f * a[col][k];
                }
            }
        }
    }
    (0..p).map(|i| a[i][p] / a[i][i]).collect()
}

pub fn r2_oracle(y: &[f64], pred: &[f64]) -> f64 {
    let m = y.iter().sum::<f64>() / y.len() as f64;
    let tot: f64 = y.iter().map(|v| (v - m) * (v - m)).sum();
    let res: f64 = y.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum();
    1.0 - res / tot
}

pub fn bond(i: usize, j: usize, kind: BondType) -> Bond {
    Bond { i, j, kind }
}

pub mod checks {
    use super::*;
    use qgnn_noise::graph_data::generate_synthetic;
    use qgnn_noise::model::{
        extract_features, mlp_backward, mlp_forward, mlp_forward_tape, simulate_full, ModelParams, QuantumParams, MASTER_QUBIT,
    };
    use qgnn_noise::simulator::Statevector;
    use qgnn_noise::trainer::{init_params, quantum_gradient, GradientMode, ModelConfig};
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn random_state(n: usize, rng: &mut ChaCha8Rng) -> Vec<C> {
        let mut v: Vec<C> = (0..1 << n).map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
        v
    }

    fn random_gate(n: usize, rng: &mut ChaCha8Rng) -> GateOp {
        let t = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n);
        while n > 1 && b == a {
            b = rng.random_range(0..n);
        }
        match (rng.random_range(0..5), n) {
            (0, _) => GateOp::h(a),
            (1, _) => GateOp::ry(a, t),
            (2, _) => GateOp::rz(a, t),
            (3, 2..) => GateOp::rzz(a, b, t),
            (4, 2..) => GateOp::cry(a, b, t),
            _ => GateOp::ry(a, t),
        }
    }

    fn max_diff(a: &[C], b: &[C]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    /// Every gate kind at every placement on 1–3 qubits, then `circuits` random 3-qubit circuits.
    pub fn dense_oracle_worst(circuits: usize, seed: u64) -> (f64, usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        let mut cases = 0;
        for n in 1..=3usize {
            for a in 0..n {
                let t = rng.random_range(-3.0..3.0);
                let mut gates = vec![GateOp::h(a), GateOp::ry(a, t), GateOp::rz(a, t)];
                for b in (0..n).filter(|&b| b != a) {
                    gates.push(GateOp::rzz(a, b, t));
                    gates.push(GateOp::cry(a, b, t));
                }
                for g in gates {
                    let v = random_state(n, &mut rng);
                    let mut sv = Statevector::from_amplitudes(v.clone()).expect("valid size");
                    sv.apply(&g).expect("valid gate");
                    worst = worst.max(max_diff(sv.amplitudes(), &gate_matrix(n, &g).apply(&v)));
                    cases += 1;
                }
            }
        }
        for _ in 0..circuits {
            let len = rng.random_range(5..25);
            let gates: Vec<GateOp> = (0..len).map(|_| random_gate(3, &mut rng)).collect();
            let mut sv = Statevector::zero(3).expect("valid size");
            sv.apply_sequence(&gates).expect("valid gates");
            let mut e0 = vec![C::new(0.0, 0.0); 8];
            e0[0] = C::new(1.0, 0.0);
            worst = worst.max(max_diff(sv.amplitudes(), &circuit_matrix(3, &gates).apply(&e0)));
            cases += 1;
        }
        (worst, cases)
    }

    fn random_quantum(rng: &mut ChaCha8Rng, depth: usize) -> QuantumParams {
        let mut q = QuantumParams::zeros(depth);
        let flat: Vec<f64> = (0..q.n_params()).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect();
        q.set_flat(&flat);
        q
    }

    /// `(worst atom-feature error, worst master-feature error)` under random relabelings.
    pub fn equivariance_worst(cases: usize, seed: u64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let graphs = generate_synthetic(cases, seed, 6);
        let (mut atom, mut master): (f64, f64) = (0.0, 0.0);
        for g in &graphs {
            let q = random_quantum(&mut rng, 1);
            let mut perm: Vec<usize> = (0..g.n_atoms()).collect();
            perm.shuffle(&mut rng);
            let z = extract_features(g, &q).expect("finite");
            let zp = extract_features(&g.permuted(&perm), &q).expect("finite");
            for a in 0..g.n_atoms() {
                atom = atom.max((z[a] - zp[perm[a]]).abs());
            }
            master = master.max((z[MASTER_QUBIT] - zp[MASTER_QUBIT]).abs());
        }
        (atom, master)
    }

    /// Worst statevector distance after shuffling same-type bonds.
    pub fn bond_order_worst(cases: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for g in generate_synthetic(cases, seed, 8) {
            let q = random_quantum(&mut rng, 1);
            // circuits group bonds by type, so a global shuffle only reorders within types
            let mut order: Vec<usize> = (0..g.bonds().len()).collect();
            order.shuffle(&mut rng);
            let a = simulate_full(&g, &q).expect("finite");
            let b = simulate_full(&g.with_bond_order(&order), &q).expect("finite");
            worst = worst.max(a.distance(&b));
        }
        worst
    }

    fn rel(a: f64, b: f64) -> f64 {
        if (a - b).abs() <= 1e-8 {
            0.0
        } else {
            (a - b).abs() / a.abs().max(b.abs())
        }
    }

    /// Parameter-shift vs central differences on random models, relative with a 1e-8 absolute floor.
    pub fn shift_vs_fd_worst(models: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let graphs = generate_synthetic(models, seed ^ 0xabc, 6);
        let mut worst: f64 = 0.0;
        for (k, g) in graphs.iter().enumerate() {
            let config = ModelConfig { hidden: [16, 8, 4], dropout_rate: 0.0, ..ModelConfig::default() };
            let mut params: ModelParams = init_params(seed + k as u64, &config);
            params.quantum = random_quantum(&mut rng, 1);
            let ps = quantum_gradient(g, &params, 1.0, GradientMode::ParameterShift, 1e-4).expect("valid");
            let fd = quantum_gradient(g, &params, 1.0, GradientMode::FiniteDifference, 1e-4).expect("valid");
            for (a, b) in ps.iter().zip(&fd) {
                worst = worst.max(rel(*a, *b));
            }
        }
        worst
    }

    /// MLP backprop vs central differences taken directly on the forward pass.
    pub fn backprop_vs_fd_worst(models: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for k in 0..models {
            let config = ModelConfig { hidden: [10, 7, 5], dropout_rate: 0.0, ..ModelConfig::default() };
            let mut mlp = init_params(seed + k as u64, &config).classical;
            // nonzero biases move units away from the ReLU kinks
            let mut flat = mlp.to_flat();
            flat.iter_mut().for_each(|v| *v += rng.random_range(-0.1..0.1));
            mlp.set_flat(&flat);
            let z: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
            let tape = mlp_forward_tape(&z, &mlp, None, false).expect("valid");
            let analytic = mlp_backward(&tape, &mlp, 1.0).0.to_flat();
            let h = 1e-6;
            for (i, &a) in analytic.iter().enumerate() {
                let mut p = mlp.clone();
                let mut v = flat.clone();
                v[i] = flat[i] + h;
                p.set_flat(&v);
                let up = mlp_forward(&z, &p, None, false).expect("valid");
                v[i] = flat[i] - h;
                p.set_flat(&v);
                let down = mlp_forward(&z, &p, None, false).expect("valid");
                worst = worst.max(rel(a, (up - down) / (2.0 * h)));
            }
        }
        worst
    }
}

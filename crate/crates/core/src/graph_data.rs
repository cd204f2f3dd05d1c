//! Molecular graphs: data model, JSON-lines ingestion, deterministic splits and a
//! synthetic generator with a planted, learnable target.
//!
//! Graphs hold heavy atoms only. Each atom occupies one qubit of the circuit, so
//! a graph may have at most [`MAX_ATOMS`] atoms.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Qubits available for atoms (the twelfth qubit is the readout qubit).
pub const MAX_ATOMS: usize = 11;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph has no atoms")]
    NoAtoms,
    #[error("atom count {0} exceeds qubit budget {MAX_ATOMS}")]
    TooManyAtoms(usize),
    #[error("self-loop / invalid bond ({i}, {j}): {reason}")]
    InvalidBond { i: usize, j: usize, reason: &'static str },
    #[error("duplicate bond ({i}, {j})")]
    DuplicateBond { i: usize, j: usize },
    #[error("graph is disconnected")]
    Disconnected,
    #[error("target {0} is not finite")]
    NonFiniteTarget(f64),
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<GraphError>,
    },
    #[error("cannot split {count} graphs: every split needs at least one member")]
    TooFewGraphs { count: usize },
    #[error("invalid split ratios {0:?}")]
    BadRatios((f64, f64, f64)),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Element {
    C,
    N,
    O,
    F,
}

impl Element {
    pub const ALL: [Element; 4] = [Element::C, Element::N, Element::O, Element::F];

    /// Position of the element's encoding angle.
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BondType {
    Single,
    Aromatic,
    Double,
    Triple,
}

impl BondType {
    /// Canonical application order of bond-type groups in the circuit.
    pub const ALL: [BondType; 4] = [
        BondType::Single,
        BondType::Aromatic,
        BondType::Double,
        BondType::Triple,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub kind: BondType,
}

/// An undirected, connected molecular graph with a scalar regression target.
///
/// Bonds are normalized so that `i < j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphRecord", into = "GraphRecord")]
pub struct MolecularGraph {
    atoms: Vec<Element>,
    bonds: Vec<Bond>,
    target: f64,
}

/// Wire form of one JSON-lines record.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphRecord {
    atoms: Vec<Element>,
    bonds: Vec<(usize, usize, BondType)>,
    target: f64,
}

impl TryFrom<GraphRecord> for MolecularGraph {
    type Error = GraphError;

    fn try_from(rec: GraphRecord) -> Result<Self, Self::Error> {
        let bonds = rec
            .bonds
            .into_iter()
            .map(|(i, j, kind)| Bond { i, j, kind })
            .collect();
        MolecularGraph::new(rec.atoms, bonds, rec.target)
    }
}

impl From<MolecularGraph> for GraphRecord {
    fn from(g: MolecularGraph) -> Self {
        GraphRecord {
            atoms: g.atoms,
            bonds: g.bonds.into_iter().map(|b| (b.i, b.j, b.kind)).collect(),
            target: g.target,
        }
    }
}

impl MolecularGraph {
    pub fn new(atoms: Vec<Element>, bonds: Vec<Bond>, target: f64) -> Result<Self, GraphError> {
        if atoms.is_empty() {
            return Err(GraphError::NoAtoms);
        }
        if atoms.len() > MAX_ATOMS {
            return Err(GraphError::TooManyAtoms(atoms.len()));
        }
        if !target.is_finite() {
            return Err(GraphError::NonFiniteTarget(target));
        }
        let n = atoms.len();
        let mut seen = HashSet::with_capacity(bonds.len());
        let mut normalized = Vec::with_capacity(bonds.len());
        for b in bonds {
            if b.i == b.j {
                return Err(GraphError::InvalidBond { i: b.i, j: b.j, reason: "self-loop" });
            }
            if b.i >= n || b.j >= n {
                return Err(GraphError::InvalidBond {
                    i: b.i,
                    j: b.j,
                    reason: "atom index out of range",
                });
            }
            let (i, j) = if b.i < b.j { (b.i, b.j) } else { (b.j, b.i) };
            if !seen.insert((i, j)) {
                return Err(GraphError::DuplicateBond { i, j });
            }
            normalized.push(Bond { i, j, kind: b.kind });
        }
        let graph = MolecularGraph { atoms, bonds: normalized, target };
        if !graph.is_connected() {
            return Err(GraphError::Disconnected);
        }
        Ok(graph)
    }

    pub fn atoms(&self) -> &[Element] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.bonds.iter().filter(|b| b.i == atom || b.j == atom).count()
    }

    fn is_connected(&self) -> bool {
        let n = self.atoms.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut components = n;
        for b in &self.bonds {
            let (ri, rj) = (find(&mut parent, b.i), find(&mut parent, b.j));
            if ri != rj {
                parent[ri] = rj;
                components -= 1;
            }
        }
        components == 1
    }

    /// Relabels atoms: atom `a` of `self` becomes atom `perm[a]` of the result.
    ///
    /// Panics if `perm` is not a permutation of `0..n_atoms`.
    pub fn permuted(&self, perm: &[usize]) -> MolecularGraph {
        let n = self.atoms.len();
        assert_eq!(perm.len(), n, "permutation length mismatch");
        let mut atoms = vec![Element::C; n];
        let mut hit = vec![false; n];
        for (a, &p) in perm.iter().enumerate() {
            assert!(!hit[p], "not a permutation");
            hit[p] = true;
            atoms[p] = self.atoms[a];
        }
        let bonds = self
            .bonds
            .iter()
            .map(|b| {
                let (i, j) = (perm[b.i], perm[b.j]);
                Bond { i: i.min(j), j: i.max(j), kind: b.kind }
            })
            .collect();
        MolecularGraph { atoms, bonds, target: self.target }
    }

    /// Same graph with the bond list reordered. Bond semantics are unchanged.
    pub fn with_bond_order(&self, order: &[usize]) -> MolecularGraph {
        assert_eq!(order.len(), self.bonds.len());
        MolecularGraph {
            atoms: self.atoms.clone(),
            bonds: order.iter().map(|&k| self.bonds[k]).collect(),
            target: self.target,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("graph serialization is infallible")
    }
}

/// Parses one JSON-lines record. `line` is 1-based and only used for errors.
pub fn parse_record(text: &str, line: usize) -> Result<MolecularGraph, GraphError> {
    let rec: GraphRecord = serde_json::from_str(text).map_err(|e| GraphError::Malformed {
        line,
        message: e.to_string(),
    })?;
    MolecularGraph::try_from(rec).map_err(|e| GraphError::AtLine { line, source: Box::new(e) })
}

/// Reads a JSON-lines dataset. Blank lines are skipped; record order is preserved.
pub fn parse_dataset(path: impl AsRef<Path>) -> Result<Vec<MolecularGraph>, GraphError> {
    let reader = BufReader::new(File::open(path)?);
    let mut graphs = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        graphs.push(parse_record(&line, k + 1)?);
    }
    Ok(graphs)
}

pub fn write_dataset(path: impl AsRef<Path>, graphs: &[MolecularGraph]) -> Result<(), GraphError> {
    let mut out = BufWriter::new(File::create(path)?);
    for g in graphs {
        out.write_all(g.to_json_line().as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<MolecularGraph>,
    pub validation: Vec<MolecularGraph>,
    pub test: Vec<MolecularGraph>,
    pub split_seed: u64,
}

pub const DEFAULT_RATIOS: (f64, f64, f64) = (0.8, 0.1, 0.1);

/// Shuffles with a seeded generator and cuts into train/validation/test.
///
/// Train and validation sizes are rounded; test takes the remainder.
pub fn split_dataset(
    graphs: &[MolecularGraph],
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<DatasetSplit, GraphError> {
    let (rt, rv, rs) = ratios;
    let sum = rt + rv + rs;
    if [rt, rv, rs].iter().any(|r| !(r.is_finite() && *r > 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(GraphError::BadRatios(ratios));
    }
    let n = graphs.len();
    let n_train = (rt * n as f64).round() as usize;
    let n_val = (rv * n as f64).round() as usize;
    if n_train == 0 || n_val == 0 || n_train + n_val >= n {
        return Err(GraphError::TooFewGraphs { count: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |idx: &[usize]| idx.iter().map(|&k| graphs[k].clone()).collect::<Vec<_>>();
    Ok(DatasetSplit {
        train: pick(&order[..n_train]),
        validation: pick(&order[n_train..n_train + n_val]),
        test: pick(&order[n_train + n_val..]),
        split_seed: seed,
    })
}

/// Bond-type contributions of the planted target, indexed by [`BondType::index`].
pub const PLANTED_BOND_WEIGHTS: [f64; 4] = [0.7, 0.5, 0.3, 0.1];
/// Element weights multiplying atom degree, indexed by [`Element::index`].
pub const PLANTED_ELEMENT_WEIGHTS: [f64; 4] = [1.0, -0.5, 2.0, -1.0];
pub const PLANTED_OFFSET: f64 = 0.0;
pub const PLANTED_CENTER: f64 = 4.0;
pub const PLANTED_WIDTH: f64 = 3.0;
pub const PLANTED_MID: f64 = 6.0;
pub const PLANTED_AMPLITUDE: f64 = 2.5;

/// Planted structure-dependent target used by the synthetic generator.
///
/// `raw = Σ_bonds w(type) + 0.1 Σ_atoms deg(a)·x(element)`, then
/// `target = 6 + 2.5·tanh((raw − 4) / 3)`, bounded in (3.5, 8.5).
/// All bond weights are positive so molecule size carries part of the signal.
pub fn planted_target(atoms: &[Element], bonds: &[Bond]) -> f64 {
    let mut degree = vec![0usize; atoms.len()];
    let mut raw = PLANTED_OFFSET;
    for b in bonds {
        raw += PLANTED_BOND_WEIGHTS[b.kind.index()];
        degree[b.i] += 1;
        degree[b.j] += 1;
    }
    for (a, el) in atoms.iter().enumerate() {
        raw += 0.1 * degree[a] as f64 * PLANTED_ELEMENT_WEIGHTS[el.index()];
    }
    PLANTED_MID + PLANTED_AMPLITUDE * ((raw - PLANTED_CENTER) / PLANTED_WIDTH).tanh()
}

/// Random connected graphs with 2..=max_atoms atoms: a random spanning tree plus up
/// to two extra edges (fewer when a one-layer circuit would exceed 130 gates),
/// uniform elements and bond types, planted target.
pub fn generate_synthetic(count: usize, seed: u64, max_atoms: usize) -> Vec<MolecularGraph> {
    let max_atoms = max_atoms.clamp(2, MAX_ATOMS);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let n = rng.random_range(2..=max_atoms);
        let atoms: Vec<Element> = (0..n).map(|_| Element::ALL[rng.random_range(0..4)]).collect();
        let mut bonds = Vec::new();
        let mut present = HashSet::new();
        for k in 1..n {
            let parent = rng.random_range(0..k);
            present.insert((parent, k));
            bonds.push(Bond { i: parent, j: k, kind: BondType::ALL[rng.random_range(0..4)] });
        }
        let mut free: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|p| !present.contains(p))
            .collect();
        // keep 1 + 2n + 9·bonds within the 130-gate budget of a single layer
        let budget = (129usize.saturating_sub(2 * n) / 9).saturating_sub(n - 1);
        let extra = rng.random_range(0..=2usize).min(free.len()).min(budget);
        free.shuffle(&mut rng);
        for &(i, j) in &free[..extra] {
            bonds.push(Bond { i, j, kind: BondType::ALL[rng.random_range(0..4)] });
        }
        let target = planted_target(&atoms, &bonds);
        out.push(MolecularGraph::new(atoms, bonds, target).expect("generator emits valid graphs"));
    }
    out
}

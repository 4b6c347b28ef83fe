//! The gate/measure interface shared by the dense and stabilizer simulators,
//! plus the register bookkeeping and circuit fragments both of them use.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::bitvec::BitVector;
use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// Measurement basis. In the Hadamard basis `|+⟩` reads as 0 and `|−⟩` as 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    Computational,
    Hadamard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    Dense,
    Stabilizer,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Dense => "dense",
            BackendKind::Stabilizer => "stabilizer",
        })
    }
}

impl std::str::FromStr for BackendKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dense" | "statevector" => Ok(BackendKind::Dense),
            "stabilizer" | "tableau" => Ok(BackendKind::Stabilizer),
            other => Err(Error::Parse(format!("unknown backend `{other}`"))),
        }
    }
}

/// Resource limits handed to backends when systems are created or grown.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Largest qubit count a single dense state may reach.
    pub dense_qubit_cap: usize,
}

pub const DEFAULT_DENSE_QUBIT_CAP: usize = 26;

impl Default for Limits {
    fn default() -> Self {
        Self {
            dense_qubit_cap: DEFAULT_DENSE_QUBIT_CAP,
        }
    }
}

/// A simulator of `n` qubits with its own measurement randomness.
///
/// Qubit `q` of a backend corresponds to bit `q` of a computational basis
/// index. Implementations hold exclusive state: a backend is mutated by one
/// owner at a time, while clones are independent.
pub trait Backend: Clone + Send + Sync + fmt::Debug + Sized {
    const KIND: BackendKind;

    /// `n` qubits in `|0…0⟩`.
    fn zeroed(n: usize, seed: u64, limits: &Limits) -> Result<Self>;

    fn num_qubits(&self) -> usize;

    fn h(&mut self, q: usize) -> Result<()>;
    fn x(&mut self, q: usize) -> Result<()>;
    fn z(&mut self, q: usize) -> Result<()>;
    fn cnot(&mut self, control: usize, target: usize) -> Result<()>;

    /// Computational-basis measurement with collapse.
    fn measure(&mut self, q: usize) -> Result<bool>;

    fn reseed(&mut self, seed: u64);

    /// Appends `count` fresh qubits in `|0⟩` and returns their indices.
    fn allocate(&mut self, count: usize) -> Result<Range<usize>>;

    /// Tensors `others` onto this system, in order, returning the index offset
    /// at which each one's qubits now start.
    fn absorb(&mut self, others: Vec<Self>) -> Result<Vec<usize>>;

    /// Multiplies each basis component by `(−1)^{s·x}`, `x` being the
    /// content of `qubits` (bit `i` of `x` is `qubits[i]`).
    fn phase_oracle(&mut self, qubits: &[usize], s: &BitVector) -> Result<()> {
        check_width(qubits, s)?;
        for i in s.ones() {
            self.z(qubits[i])?;
        }
        Ok(())
    }

    /// Draws `shots` independent joint outcomes of `qubits` (computational
    /// basis) without disturbing `self`.
    fn sample(&self, qubits: &[usize], shots: usize, seed: u64) -> Result<Vec<BitVector>> {
        let mut out = Vec::with_capacity(shots);
        for shot in 0..shots {
            let mut copy = self.clone();
            copy.reseed(derive_seed(seed, shot as u64));
            out.push(copy.measure_register(qubits, Basis::Computational)?);
        }
        Ok(out)
    }

    /// Exact outcome distribution of `qubits`, indexed like [`BitVector::to_u64`],
    /// when the backend can compute it.
    fn exact_distribution(&self, _qubits: &[usize]) -> Option<Vec<f64>> {
        None
    }

    fn measure_in(&mut self, q: usize, basis: Basis) -> Result<bool> {
        match basis {
            Basis::Computational => self.measure(q),
            Basis::Hadamard => {
                self.h(q)?;
                let bit = self.measure(q)?;
                self.h(q)?;
                Ok(bit)
            }
        }
    }

    fn h_all(&mut self, qubits: &[usize]) -> Result<()> {
        qubits.iter().try_for_each(|&q| self.h(q))
    }

    /// Measures `qubits` in ascending list order; bit `i` of the result is `qubits[i]`.
    fn measure_register(&mut self, qubits: &[usize], basis: Basis) -> Result<BitVector> {
        let mut bits = Vec::with_capacity(qubits.len());
        for &q in qubits {
            bits.push(self.measure_in(q, basis)?);
        }
        BitVector::from_bits(&bits)
    }
}

pub(crate) fn check_width(qubits: &[usize], s: &BitVector) -> Result<()> {
    if qubits.len() != s.len() {
        return Err(Error::Dimension {
            expected: qubits.len(),
            found: s.len(),
        });
    }
    Ok(())
}

/// Oracle realisation used by [`apply_phase_oracle`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMode {
    /// Direct `(−1)^{s·x}` phase multiplication; no ancilla.
    Diagonal,
    /// CNOTs from each register qubit with `s_i = 1` into an ancilla held in `|−⟩`.
    #[default]
    Circuit,
}

/// Phase kickback: CNOT from every `qubits[i]` with `s_i = 1` into `ancilla`,
/// which must be in `|−⟩`. Maps `|−⟩|x⟩` to `(−1)^{s·x}|−⟩|x⟩`.
pub fn kickback_oracle<B: Backend>(
    backend: &mut B,
    qubits: &[usize],
    s: &BitVector,
    ancilla: usize,
) -> Result<()> {
    check_width(qubits, s)?;
    for i in s.ones() {
        backend.cnot(qubits[i], ancilla)?;
    }
    Ok(())
}

/// Applies `(−1)^{s·x}` to the register either diagonally or via kickback.
/// `ancilla` is required in circuit mode.
pub fn apply_phase_oracle<B: Backend>(
    backend: &mut B,
    qubits: &[usize],
    s: &BitVector,
    mode: OracleMode,
    ancilla: Option<usize>,
) -> Result<()> {
    match mode {
        OracleMode::Diagonal => backend.phase_oracle(qubits, s),
        OracleMode::Circuit => {
            let anc = ancilla
                .ok_or_else(|| Error::Argument("circuit-mode oracle needs an ancilla".into()))?;
            kickback_oracle(backend, qubits, s, anc)
        }
    }
}

/// Puts a qubit known to be in `|0⟩` into `|−⟩`.
pub fn prepare_minus<B: Backend>(backend: &mut B, q: usize) -> Result<()> {
    backend.x(q)?;
    backend.h(q)
}

/// Named qubit registers. Each register is an ordered list of qubit indices;
/// position `i` in the list holds bit `x_i` of the register content.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterLayout {
    registers: Vec<(String, Vec<usize>)>,
}

impl RegisterLayout {
    pub fn new() -> Self {
        Self::default()
    }

    /// Layout of consecutive registers `names[0] = 0..widths[0]`, and so on.
    pub fn contiguous(entries: &[(&str, usize)]) -> Result<Self> {
        let mut layout = Self::new();
        let mut next = 0;
        for &(name, width) in entries {
            layout.add(name, (next..next + width).collect())?;
            next += width;
        }
        Ok(layout)
    }

    pub fn add(&mut self, name: &str, qubits: Vec<usize>) -> Result<()> {
        if self.registers.iter().any(|(n, _)| n == name) {
            return Err(Error::Argument(format!("register `{name}` already exists")));
        }
        if let Some(q) = qubits.iter().find(|q| self.owner(**q).is_some()) {
            return Err(Error::Argument(format!(
                "qubit {q} already belongs to register `{}`",
                self.owner(*q).unwrap_or_default()
            )));
        }
        let mut sorted = qubits.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Argument(format!("register `{name}` repeats a qubit")));
        }
        self.registers.push((name.to_string(), qubits));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&[usize]> {
        self.registers
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, q)| q.as_slice())
            .ok_or_else(|| Error::UnknownRegister(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.registers.iter().any(|(n, _)| n == name)
    }

    pub fn owner(&self, qubit: usize) -> Option<String> {
        self.registers
            .iter()
            .find(|(_, q)| q.contains(&qubit))
            .map(|(n, _)| n.clone())
    }

    /// Relabels a register without touching its qubits.
    pub fn rename(&mut self, from: &str, to: &str) -> Result<()> {
        if self.contains(to) {
            return Err(Error::Argument(format!("register `{to}` already exists")));
        }
        let entry = self
            .registers
            .iter_mut()
            .find(|(n, _)| n == from)
            .ok_or_else(|| Error::UnknownRegister(from.to_string()))?;
        entry.0 = to.to_string();
        Ok(())
    }

    /// Replaces the qubits of an existing register.
    pub fn reassign(&mut self, name: &str, qubits: Vec<usize>) -> Result<()> {
        let old = self.remove(name)?;
        if let Err(e) = self.add(name, qubits) {
            self.registers.push((name.to_string(), old));
            return Err(e);
        }
        Ok(())
    }

    pub fn remove(&mut self, name: &str) -> Result<Vec<usize>> {
        let pos = self
            .registers
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::UnknownRegister(name.to_string()))?;
        Ok(self.registers.remove(pos).1)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.registers.iter().map(|(n, _)| n.as_str())
    }

    pub fn total_qubits(&self) -> usize {
        self.registers.iter().map(|(_, q)| q.len()).sum()
    }

    /// Checks that the registers cover `0..n` exactly once.
    pub fn validate_cover(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for (name, qubits) in &self.registers {
            for &q in qubits {
                if q >= n {
                    return Err(Error::QubitIndex { index: q, qubits: n });
                }
                if std::mem::replace(&mut seen[q], true) {
                    return Err(Error::Argument(format!("qubit {q} in `{name}` is shared")));
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(q) => Err(Error::Argument(format!("qubit {q} belongs to no register"))),
            None => Ok(()),
        }
    }
}

/// `m` Φ⁺ pairs: `A = 0..m`, `B = m..2m`, pair `j` on qubits `(j, m + j)`.
pub fn prepare_phi_plus_pairs<B: Backend>(
    m: usize,
    seed: u64,
    limits: &Limits,
) -> Result<(B, RegisterLayout)> {
    prepare_ghz_tuples(m, &["A", "B"], seed, limits)
}

/// `m` GHZ₃ triplets: `A = 0..m`, `B = m..2m`, `C = 2m..3m`.
pub fn prepare_ghz3_triplets<B: Backend>(
    m: usize,
    seed: u64,
    limits: &Limits,
) -> Result<(B, RegisterLayout)> {
    prepare_ghz_tuples(m, &["A", "B", "C"], seed, limits)
}

fn prepare_ghz_tuples<B: Backend>(
    m: usize,
    parties: &[&str],
    seed: u64,
    limits: &Limits,
) -> Result<(B, RegisterLayout)> {
    if m == 0 {
        return Err(Error::Argument("need at least one tuple".into()));
    }
    let entries: Vec<(&str, usize)> = parties.iter().map(|p| (*p, m)).collect();
    let layout = RegisterLayout::contiguous(&entries)?;
    let mut state = B::zeroed(m * parties.len(), seed, limits)?;
    for j in 0..m {
        state.h(j)?;
        for r in 1..parties.len() {
            state.cnot(j, r * m + j)?;
        }
    }
    Ok((state, layout))
}

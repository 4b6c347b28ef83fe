//! A collection of independent quantum systems addressed by global qubit ids.
//!
//! Protocol runs create many small product factors (decoys, validation
//! tuples, an adversary's private pairs) next to the data system. Keeping each
//! factor in its own backend instance until a gate couples it to another keeps
//! dense simulations small and tableau updates cheap. A two-qubit gate across
//! systems first tensors them together.

use std::collections::BTreeMap;

use crate::backend::{apply_phase_oracle, Backend, Basis, Limits, OracleMode};
use crate::bitvec::BitVector;
use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// Per system: positions within the queried list and local qubit indices.
type SystemGroups = BTreeMap<usize, (Vec<usize>, Vec<usize>)>;

/// Global qubit identifier within a [`Lab`].
pub type Qid = usize;

/// Largest joint register for which [`Lab::exact_distribution`] builds a table.
pub const MAX_EXACT_QUBITS: usize = 24;

#[derive(Debug, Clone)]
pub struct Lab<B: Backend> {
    systems: Vec<Option<B>>,
    members: Vec<Vec<Qid>>,
    location: Vec<(usize, usize)>,
    seed: u64,
    limits: Limits,
}

impl<B: Backend> Lab<B> {
    pub fn new(seed: u64, limits: Limits) -> Self {
        Self {
            systems: Vec::new(),
            members: Vec::new(),
            location: Vec::new(),
            seed,
            limits,
        }
    }

    pub fn limits(&self) -> &Limits {
        &self.limits
    }

    /// A fresh system of `n` qubits in `|0…0⟩`.
    pub fn create(&mut self, n: usize) -> Result<Vec<Qid>> {
        let seed = derive_seed(self.seed, self.systems.len() as u64);
        let backend = B::zeroed(n, seed, &self.limits)?;
        Ok(self.insert(backend))
    }

    /// Adopts an externally prepared backend as a new system. Its qubit `i`
    /// becomes the `i`-th returned id.
    pub fn insert(&mut self, mut backend: B) -> Vec<Qid> {
        let sys = self.systems.len();
        backend.reseed(derive_seed(self.seed, sys as u64));
        let ids: Vec<Qid> = (self.location.len()..self.location.len() + backend.num_qubits()).collect();
        for (local, _) in ids.iter().enumerate() {
            self.location.push((sys, local));
        }
        self.systems.push(Some(backend));
        self.members.push(ids.clone());
        ids
    }

    /// Adds `count` fresh `|0⟩` qubits to the system that holds `anchor`.
    pub fn extend(&mut self, anchor: Qid, count: usize) -> Result<Vec<Qid>> {
        let (sys, _) = self.locate(anchor)?;
        let range = self.system_mut(sys).allocate(count)?;
        let ids: Vec<Qid> = (self.location.len()..self.location.len() + count).collect();
        for (local, &id) in range.zip(&ids) {
            self.location.push((sys, local));
            self.members[sys].push(id);
        }
        Ok(ids)
    }

    pub fn num_qubits(&self) -> usize {
        self.location.len()
    }

    pub fn num_systems(&self) -> usize {
        self.systems.iter().flatten().count()
    }

    /// Width of the largest live system.
    pub fn largest_system(&self) -> usize {
        self.members
            .iter()
            .zip(&self.systems)
            .filter(|(_, s)| s.is_some())
            .map(|(m, _)| m.len())
            .max()
            .unwrap_or(0)
    }

    fn locate(&self, q: Qid) -> Result<(usize, usize)> {
        self.location.get(q).copied().ok_or(Error::QubitIndex {
            index: q,
            qubits: self.location.len(),
        })
    }

    /// Index of the system currently holding `q`.
    pub fn system_of(&self, q: Qid) -> Result<usize> {
        Ok(self.locate(q)?.0)
    }

    fn system_mut(&mut self, sys: usize) -> &mut B {
        self.systems[sys].as_mut().expect("live system")
    }

    /// The backend holding system `sys`, with qubit ids listed by local index.
    pub fn system(&self, sys: usize) -> Option<(&B, &[Qid])> {
        self.systems
            .get(sys)?
            .as_ref()
            .map(|b| (b, self.members[sys].as_slice()))
    }

    /// Merges every system touched by `qubits` into one and returns that
    /// system with the local indices of `qubits`. If the merge fails (for
    /// example over the dense qubit cap) the lab must be discarded.
    pub fn join(&mut self, qubits: &[Qid]) -> Result<(usize, Vec<usize>)> {
        let mut systems = Vec::new();
        for &q in qubits {
            let (sys, _) = self.locate(q)?;
            if !systems.contains(&sys) {
                systems.push(sys);
            }
        }
        let target = match systems.iter().min() {
            Some(&t) => t,
            None => return Ok((0, Vec::new())),
        };
        let others: Vec<usize> = {
            let mut o: Vec<usize> = systems.into_iter().filter(|&s| s != target).collect();
            o.sort_unstable();
            o
        };
        if !others.is_empty() {
            let parts: Vec<B> = others
                .iter()
                .map(|&s| self.systems[s].take().expect("live system"))
                .collect();
            let offsets = self.system_mut(target).absorb(parts)?;
            for (&s, offset) in others.iter().zip(offsets) {
                let moved = std::mem::take(&mut self.members[s]);
                for (local, &id) in moved.iter().enumerate() {
                    self.location[id] = (target, offset + local);
                }
                self.members[target].extend(moved);
            }
        }
        let locals = qubits.iter().map(|&q| self.location[q].1).collect();
        Ok((target, locals))
    }

    fn single(&mut self, q: Qid) -> Result<(&mut B, usize)> {
        let (sys, local) = self.locate(q)?;
        Ok((self.system_mut(sys), local))
    }

    pub fn h(&mut self, q: Qid) -> Result<()> {
        let (b, l) = self.single(q)?;
        b.h(l)
    }

    pub fn x(&mut self, q: Qid) -> Result<()> {
        let (b, l) = self.single(q)?;
        b.x(l)
    }

    pub fn z(&mut self, q: Qid) -> Result<()> {
        let (b, l) = self.single(q)?;
        b.z(l)
    }

    pub fn h_all(&mut self, qubits: &[Qid]) -> Result<()> {
        qubits.iter().try_for_each(|&q| self.h(q))
    }

    pub fn cnot(&mut self, control: Qid, target: Qid) -> Result<()> {
        if control == target {
            return Err(Error::Argument(format!(
                "CNOT control and target are both qubit {control}"
            )));
        }
        let (sys, locals) = self.join(&[control, target])?;
        self.system_mut(sys).cnot(locals[0], locals[1])
    }

    pub fn measure(&mut self, q: Qid) -> Result<bool> {
        let (b, l) = self.single(q)?;
        b.measure(l)
    }

    pub fn measure_in(&mut self, q: Qid, basis: Basis) -> Result<bool> {
        let (b, l) = self.single(q)?;
        b.measure_in(l, basis)
    }

    /// Measures `qubits` in list order; bit `i` of the result is `qubits[i]`.
    pub fn measure_register(&mut self, qubits: &[Qid], basis: Basis) -> Result<BitVector> {
        let mut bits = Vec::with_capacity(qubits.len());
        for &q in qubits {
            bits.push(self.measure_in(q, basis)?);
        }
        BitVector::from_bits(&bits)
    }

    /// `(−1)^{s·x}` on `qubits`, joining their systems (and the ancilla's) first.
    pub fn phase_oracle(
        &mut self,
        qubits: &[Qid],
        s: &BitVector,
        mode: OracleMode,
        ancilla: Option<Qid>,
    ) -> Result<()> {
        let mut all = qubits.to_vec();
        if let Some(a) = ancilla {
            all.push(a);
        }
        let (sys, locals) = self.join(&all)?;
        let anc = ancilla.map(|_| locals[qubits.len()]);
        apply_phase_oracle(self.system_mut(sys), &locals[..qubits.len()], s, mode, anc)
    }

    pub fn reseed(&mut self, seed: u64) {
        self.seed = seed;
        for (i, sys) in self.systems.iter_mut().enumerate() {
            if let Some(b) = sys {
                b.reseed(derive_seed(seed, i as u64));
            }
        }
    }

    /// Groups `qubits` by system: `(system, positions in qubits, local indices)`.
    fn groups(&self, qubits: &[Qid]) -> Result<SystemGroups> {
        let mut groups = SystemGroups::new();
        for (pos, &q) in qubits.iter().enumerate() {
            let (sys, local) = self.locate(q)?;
            let entry = groups.entry(sys).or_default();
            entry.0.push(pos);
            entry.1.push(local);
        }
        Ok(groups)
    }

    /// Independent computational-basis samples of `qubits` without collapse.
    /// Distinct systems are product factors and are sampled independently.
    pub fn sample(&self, qubits: &[Qid], shots: usize, seed: u64) -> Result<Vec<BitVector>> {
        let mut bits = vec![vec![false; qubits.len()]; shots];
        for (sys, (positions, locals)) in self.groups(qubits)? {
            let backend = self.systems[sys].as_ref().expect("live system");
            let draws = backend.sample(&locals, shots, derive_seed(seed, sys as u64))?;
            for (shot, draw) in draws.iter().enumerate() {
                for (i, &pos) in positions.iter().enumerate() {
                    bits[shot][pos] = draw.get(i);
                }
            }
        }
        bits.iter().map(|b| BitVector::from_bits(b)).collect()
    }

    /// Exact joint distribution of `qubits`, indexed like [`BitVector::to_u64`].
    /// `None` if a backend cannot compute it or the register is too wide.
    pub fn exact_distribution(&self, qubits: &[Qid]) -> Option<Vec<f64>> {
        if qubits.len() > MAX_EXACT_QUBITS {
            return None;
        }
        let mut dist = vec![1.0];
        let mut order: Vec<usize> = Vec::new();
        for (sys, (positions, locals)) in self.groups(qubits).ok()? {
            let part = self.systems[sys].as_ref()?.exact_distribution(&locals)?;
            let shift = order.len();
            let mut next = vec![0.0; dist.len() * part.len()];
            for (i, &p) in dist.iter().enumerate() {
                for (j, &r) in part.iter().enumerate() {
                    next[i | (j << shift)] = p * r;
                }
            }
            dist = next;
            order.extend(positions);
        }
        let mut out = vec![0.0; dist.len()];
        for (key, p) in dist.into_iter().enumerate() {
            let mut idx = 0usize;
            for (bit, &pos) in order.iter().enumerate() {
                idx |= ((key >> bit) & 1) << pos;
            }
            out[idx] = p;
        }
        Some(out)
    }
}

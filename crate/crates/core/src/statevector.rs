//! Exact dense simulation.
//!
//! The state of `n` qubits is a vector of `2^n` complex amplitudes; qubit `q`
//! is bit `q` of the basis index. Registers map onto qubits through a
//! [`RegisterLayout`](crate::backend::RegisterLayout), so `|x⟩_AR |y⟩_BR`
//! with `AR = 0..m`, `BR = m..2m` sits at index `x + (y << m)`.

use std::fmt::Write as _;
use std::ops::Range;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::backend::{check_width, Backend, BackendKind, Limits, DEFAULT_DENSE_QUBIT_CAP};
use crate::bitvec::BitVector;
use crate::error::{Error, Result};
use crate::rng::{sim_rng, SimRng};

const NORM_TOLERANCE: f64 = 1e-9;
const PAR_MIN_QUBITS: usize = 16;
/// Largest register whose joint distribution is tabulated for sampling.
const MAX_MARGINAL_QUBITS: usize = 24;

#[derive(Debug, Clone)]
pub struct DenseState {
    n: usize,
    cap: usize,
    amps: Vec<Complex64>,
    rng: SimRng,
}

impl DenseState {
    /// `|basis_index⟩` on `n` qubits with the default cap.
    pub fn init_basis(n: usize, basis_index: u64) -> Result<Self> {
        Self::init_basis_with_cap(n, basis_index, DEFAULT_DENSE_QUBIT_CAP, 0)
    }

    pub fn init_basis_with_cap(n: usize, basis_index: u64, cap: usize, seed: u64) -> Result<Self> {
        check_cap(n, cap)?;
        if n < 64 && basis_index >> n != 0 {
            return Err(Error::Argument(format!(
                "basis index {basis_index} out of range for {n} qubits"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[basis_index as usize] = Complex64::new(1.0, 0.0);
        Ok(Self {
            n,
            cap,
            amps,
            rng: sim_rng(seed),
        })
    }

    /// Builds a state from explicit amplitudes; the vector is normalised.
    pub fn from_amplitudes(amps: Vec<Complex64>, seed: u64) -> Result<Self> {
        let len = amps.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::Argument(format!(
                "amplitude count {len} is not a power of two"
            )));
        }
        let n = len.trailing_zeros() as usize;
        check_cap(n, DEFAULT_DENSE_QUBIT_CAP.max(n))?;
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Argument("zero vector is not a state".into()));
        }
        Ok(Self {
            n,
            cap: DEFAULT_DENSE_QUBIT_CAP.max(n),
            amps: amps.into_iter().map(|a| a / norm).collect(),
            rng: sim_rng(seed),
        })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amps[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner_product(&self, other: &Self) -> Result<Complex64> {
        if self.n != other.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|⟨self|other⟩|`; 1 means equal up to global phase.
    pub fn overlap(&self, other: &Self) -> Result<f64> {
        Ok(self.inner_product(other)?.norm())
    }

    /// Debug dump: one `index re im` line per amplitude with modulus above 1e-12.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, a) in self.amps.iter().enumerate() {
            if a.norm() > 1e-12 {
                let _ = writeln!(out, "{i} {:.12} {:.12}", a.re, a.im);
            }
        }
        out
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n {
            return Err(Error::QubitIndex {
                index: q,
                qubits: self.n,
            });
        }
        Ok(())
    }

    fn debug_check_norm(&self) {
        debug_assert!(
            (self.norm_sqr() - 1.0).abs() < NORM_TOLERANCE,
            "norm drifted to {}",
            self.norm_sqr()
        );
    }

    fn parallel(&self) -> bool {
        self.n >= PAR_MIN_QUBITS
    }

    /// Applies `f(lo, hi)` to every amplitude pair differing only in bit `q`.
    fn for_pairs(&mut self, q: usize, f: impl Fn(&mut Complex64, &mut Complex64) + Sync) {
        let half = 1usize << q;
        let kernel = |chunk: &mut [Complex64]| {
            let (lo, hi) = chunk.split_at_mut(half);
            lo.iter_mut().zip(hi.iter_mut()).for_each(|(a, b)| f(a, b));
        };
        if self.parallel() {
            self.amps.par_chunks_mut(2 * half).for_each(kernel);
        } else {
            self.amps.chunks_mut(2 * half).for_each(kernel);
        }
    }

    fn marginal(&self, qubits: &[usize]) -> Result<Vec<f64>> {
        for &q in qubits {
            self.check_qubit(q)?;
        }
        if qubits.len() > MAX_MARGINAL_QUBITS {
            return Err(Error::Resource(format!(
                "marginal over {} qubits exceeds {MAX_MARGINAL_QUBITS}",
                qubits.len()
            )));
        }
        let mut dist = vec![0.0; 1 << qubits.len()];
        for (index, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            if p == 0.0 {
                continue;
            }
            let mut key = 0usize;
            for (bit, &q) in qubits.iter().enumerate() {
                key |= ((index >> q) & 1) << bit;
            }
            dist[key] += p;
        }
        Ok(dist)
    }
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::Resource(format!(
            "dense state of {n} qubits exceeds the cap of {cap}"
        )));
    }
    Ok(())
}

impl Backend for DenseState {
    const KIND: BackendKind = BackendKind::Dense;

    fn zeroed(n: usize, seed: u64, limits: &Limits) -> Result<Self> {
        Self::init_basis_with_cap(n, 0, limits.dense_qubit_cap, seed)
    }

    fn num_qubits(&self) -> usize {
        self.n
    }

    fn h(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        self.for_pairs(q, |a, b| {
            let (x, y) = (*a, *b);
            *a = (x + y) * s;
            *b = (x - y) * s;
        });
        self.debug_check_norm();
        Ok(())
    }

    fn x(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        self.for_pairs(q, std::mem::swap);
        Ok(())
    }

    fn z(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        self.for_pairs(q, |_, b| *b = -*b);
        Ok(())
    }

    fn cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::Argument(format!(
                "CNOT control and target are both qubit {control}"
            )));
        }
        let (c, t) = (1usize << control, 1usize << target);
        // Visit each swapped pair once, from its member with the target bit clear.
        let len = self.amps.len();
        let amps = &mut self.amps;
        for i in 0..len {
            if i & c != 0 && i & t == 0 {
                amps.swap(i, i | t);
            }
        }
        Ok(())
    }

    fn measure(&mut self, q: usize) -> Result<bool> {
        self.check_qubit(q)?;
        let bit = 1usize << q;
        let p1: f64 = if self.parallel() {
            self.amps
                .par_iter()
                .enumerate()
                .filter(|(i, _)| i & bit != 0)
                .map(|(_, a)| a.norm_sqr())
                .sum()
        } else {
            self.amps
                .iter()
                .enumerate()
                .filter(|(i, _)| i & bit != 0)
                .map(|(_, a)| a.norm_sqr())
                .sum()
        };
        let outcome = self.rng.gen::<f64>() < p1;
        let p = if outcome { p1 } else { 1.0 - p1 };
        let scale = 1.0 / p.sqrt();
        self.amps.iter_mut().enumerate().for_each(|(i, a)| {
            if ((i & bit) != 0) == outcome {
                *a *= scale;
            } else {
                *a = Complex64::new(0.0, 0.0);
            }
        });
        self.debug_check_norm();
        Ok(outcome)
    }

    fn reseed(&mut self, seed: u64) {
        self.rng = sim_rng(seed);
    }

    fn allocate(&mut self, count: usize) -> Result<Range<usize>> {
        check_cap(self.n + count, self.cap)?;
        // New qubits are the high bits, so existing amplitudes keep their indices.
        self.amps.resize(1 << (self.n + count), Complex64::new(0.0, 0.0));
        let range = self.n..self.n + count;
        self.n += count;
        Ok(range)
    }

    fn absorb(&mut self, others: Vec<Self>) -> Result<Vec<usize>> {
        let total = self.n + others.iter().map(|o| o.n).sum::<usize>();
        check_cap(total, self.cap)?;
        let mut offsets = Vec::with_capacity(others.len());
        for other in others {
            offsets.push(self.n);
            let mut amps = vec![Complex64::new(0.0, 0.0); 1 << (self.n + other.n)];
            let low = self.amps.len();
            for (j, b) in other.amps.iter().enumerate() {
                if b.norm_sqr() == 0.0 {
                    continue;
                }
                let base = j * low;
                for (i, a) in self.amps.iter().enumerate() {
                    amps[base + i] = a * b;
                }
            }
            self.amps = amps;
            self.n += other.n;
        }
        Ok(offsets)
    }

    fn phase_oracle(&mut self, qubits: &[usize], s: &BitVector) -> Result<()> {
        check_width(qubits, s)?;
        let mut mask = 0usize;
        for i in s.ones() {
            self.check_qubit(qubits[i])?;
            mask |= 1 << qubits[i];
        }
        let apply = |(index, a): (usize, &mut Complex64)| {
            if (index & mask).count_ones() & 1 == 1 {
                *a = -*a;
            }
        };
        if self.parallel() {
            self.amps.par_iter_mut().enumerate().for_each(apply);
        } else {
            self.amps.iter_mut().enumerate().for_each(apply);
        }
        Ok(())
    }

    fn sample(&self, qubits: &[usize], shots: usize, seed: u64) -> Result<Vec<BitVector>> {
        let dist = self.marginal(qubits)?;
        let mut cumulative = Vec::with_capacity(dist.len());
        let mut acc = 0.0;
        for p in &dist {
            acc += p;
            cumulative.push(acc);
        }
        let mut rng = sim_rng(seed);
        (0..shots)
            .map(|_| {
                let u = rng.gen::<f64>() * acc;
                let key = cumulative.partition_point(|&c| c <= u).min(dist.len() - 1);
                BitVector::from_fn(qubits.len(), |b| (key >> b) & 1 == 1)
            })
            .collect()
    }

    fn exact_distribution(&self, qubits: &[usize]) -> Option<Vec<f64>> {
        self.marginal(qubits).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{kickback_oracle, prepare_ghz3_triplets, prepare_minus, prepare_phi_plus_pairs};
    use crate::rng::sim_rng;

    const EPS: f64 = 1e-9;
    const R2: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn assert_amps(state: &DenseState, expected: &[Complex64]) {
        assert_eq!(state.amplitudes().len(), expected.len());
        for (i, (a, e)) in state.amplitudes().iter().zip(expected).enumerate() {
            assert!((a - e).norm() < EPS, "amp {i}: {a} vs {e}");
        }
    }

    fn random_state(n: usize, seed: u64) -> DenseState {
        let mut rng = sim_rng(seed);
        let amps = (0..1 << n)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        DenseState::from_amplitudes(amps, seed).unwrap()
    }

    #[test]
    fn basis_states() {
        assert_amps(&DenseState::init_basis(1, 0).unwrap(), &[c(1.0), c(0.0)]);
        let s = DenseState::init_basis(2, 3).unwrap();
        assert_eq!(s.amplitude(3), c(1.0));
        let s = DenseState::init_basis(3, 5).unwrap();
        assert_eq!(s.amplitude(5), c(1.0));
        assert!(DenseState::init_basis(2, 4).is_err());
        assert!(matches!(
            DenseState::init_basis(DEFAULT_DENSE_QUBIT_CAP + 1, 0),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn hadamard_on_zero_and_one() {
        let mut s = DenseState::init_basis(1, 0).unwrap();
        s.h(0).unwrap();
        assert_amps(&s, &[c(R2), c(R2)]);
        let mut s = DenseState::init_basis(1, 1).unwrap();
        s.h(0).unwrap();
        assert_amps(&s, &[c(R2), c(-R2)]);
        assert!(matches!(s.h(1), Err(Error::QubitIndex { .. })));
    }

    // Expanded by hand: H⊗2|10⟩ = ½ Σ_z (−1)^{z·10}|z⟩, signs for z = 00,01,10,11.
    #[test]
    fn hadamard_pair_on_ten() {
        let mut s = DenseState::init_basis(2, 0b10).unwrap();
        s.h_all(&[0, 1]).unwrap();
        assert_amps(&s, &[c(0.5), c(0.5), c(-0.5), c(-0.5)]);
    }

    #[test]
    fn hadamard_transform_identity_exhaustive() {
        for m in 1..=6usize {
            let qubits: Vec<usize> = (0..m).collect();
            for x in 0..(1u64 << m) {
                let mut s = DenseState::init_basis(m, x).unwrap();
                s.h_all(&qubits).unwrap();
                let norm = (1u64 << m) as f64;
                for z in 0..(1u64 << m) {
                    let sign = if (z & x).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                    let expected = sign / norm.sqrt();
                    assert!((s.amplitude(z as usize) - c(expected)).norm() < EPS);
                }
            }
        }
    }

    #[test]
    fn hadamard_is_involution() {
        let original = random_state(4, 3);
        let mut s = original.clone();
        for q in 0..4 {
            s.h(q).unwrap();
            s.h(q).unwrap();
        }
        assert!(s.overlap(&original).unwrap() > 1.0 - EPS);
    }

    #[test]
    fn cnot_rules() {
        // Qubit 1 is the control (left digit of |10⟩), qubit 0 the target.
        let mut s = DenseState::init_basis(2, 0b10).unwrap();
        s.cnot(1, 0).unwrap();
        assert_eq!(s.amplitude(0b11), c(1.0));
        let mut s = DenseState::init_basis(2, 0b01).unwrap();
        s.cnot(1, 0).unwrap();
        assert_eq!(s.amplitude(0b01), c(1.0));
        assert!(matches!(s.cnot(1, 1), Err(Error::Argument(_))));

        let original = random_state(3, 11);
        let mut s = original.clone();
        s.cnot(0, 2).unwrap();
        s.cnot(0, 2).unwrap();
        assert!(s.overlap(&original).unwrap() > 1.0 - EPS);
    }

    #[test]
    fn oracle_modes() {
        let s_zero: BitVector = "0000".parse().unwrap();
        let original = random_state(4, 5);
        let mut s = original.clone();
        s.phase_oracle(&[0, 1, 2, 3], &s_zero).unwrap();
        assert_amps(&s, original.amplitudes());

        let mut s = DenseState::init_basis(1, 0).unwrap();
        s.h(0).unwrap();
        s.phase_oracle(&[0], &"1".parse().unwrap()).unwrap();
        assert_amps(&s, &[c(R2), c(-R2)]);

        let mut s = DenseState::init_basis(2, 0).unwrap();
        assert!(matches!(
            s.phase_oracle(&[0, 1], &"1".parse().unwrap()),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn oracle_diagonal_matches_kickback_on_random_states() {
        let mut rng = sim_rng(17);
        for case in 0..20u64 {
            let m = 1 + (case as usize % 6);
            let secret = BitVector::random(m, &mut rng).unwrap();
            let qubits: Vec<usize> = (0..m).collect();
            let base = random_state(m, 100 + case);

            let mut diagonal = base.clone();
            diagonal.phase_oracle(&qubits, &secret).unwrap();
            diagonal.allocate(1).unwrap();
            prepare_minus(&mut diagonal, m).unwrap();

            let mut circuit = base.clone();
            circuit.allocate(1).unwrap();
            prepare_minus(&mut circuit, m).unwrap();
            kickback_oracle(&mut circuit, &qubits, &secret, m).unwrap();

            assert!(diagonal.overlap(&circuit).unwrap() > 1.0 - EPS);
        }
    }

    #[test]
    fn phi_plus_and_ghz_preparation() {
        let limits = Limits::default();
        let (s, _) = prepare_phi_plus_pairs::<DenseState>(1, 0, &limits).unwrap();
        assert_amps(&s, &[c(R2), c(0.0), c(0.0), c(R2)]);

        let (s, layout) = prepare_ghz3_triplets::<DenseState>(1, 0, &limits).unwrap();
        assert_eq!(layout.get("C").unwrap(), &[2]);
        assert!((s.amplitude(0) - c(R2)).norm() < EPS);
        assert!((s.amplitude(7) - c(R2)).norm() < EPS);

        // ½(|00,00⟩ + |01,01⟩ + |10,10⟩ + |11,11⟩), index = x + 4·x.
        let (s, _) = prepare_phi_plus_pairs::<DenseState>(2, 0, &limits).unwrap();
        for index in 0..16usize {
            let (a, b) = (index & 3, index >> 2);
            let expected = if a == b { 0.5 } else { 0.0 };
            assert!((s.amplitude(index) - c(expected)).norm() < EPS);
        }
    }

    #[test]
    fn measurement() {
        let mut s = DenseState::init_basis(2, 3).unwrap();
        assert_eq!(s.measure_register(&[0, 1], crate::backend::Basis::Computational).unwrap().to_string(), "11");

        let mut s = DenseState::init_basis(1, 0).unwrap();
        s.h(0).unwrap();
        for _ in 0..10 {
            assert!(!s.measure_in(0, crate::backend::Basis::Hadamard).unwrap());
        }

        let limits = Limits::default();
        for seed in 0..50 {
            let (mut s, _) = prepare_phi_plus_pairs::<DenseState>(1, seed, &limits).unwrap();
            assert_eq!(s.measure(0).unwrap(), s.measure(1).unwrap());
        }
    }

    #[test]
    fn allocation_and_absorb() {
        let mut a = DenseState::init_basis(1, 1).unwrap();
        let r = a.allocate(2).unwrap();
        assert_eq!(r, 1..3);
        assert_eq!(a.amplitude(1), c(1.0));
        let b = DenseState::init_basis(2, 2).unwrap();
        let offsets = a.absorb(vec![b]).unwrap();
        assert_eq!(offsets, vec![3]);
        assert_eq!(a.num_qubits(), 5);
        assert_eq!(a.amplitude(1 | (2 << 3)), c(1.0));

        let mut tight = DenseState::init_basis_with_cap(3, 0, 3, 0).unwrap();
        assert!(matches!(tight.allocate(1), Err(Error::Resource(_))));
    }

    #[test]
    fn sampling_matches_distribution() {
        let (s, _) = prepare_phi_plus_pairs::<DenseState>(2, 0, &Limits::default()).unwrap();
        let shots = s.sample(&[0, 1, 2, 3], 500, 9).unwrap();
        for shot in shots {
            let v = shot.to_u64().unwrap();
            assert_eq!(v & 3, v >> 2);
        }
        let d = s.exact_distribution(&[0, 1]).unwrap();
        for p in d {
            assert!((p - 0.25).abs() < EPS);
        }
    }

    #[test]
    fn dump_lists_nonzero_amplitudes() {
        let (s, _) = prepare_phi_plus_pairs::<DenseState>(1, 0, &Limits::default()).unwrap();
        let text = s.dump();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("0 0.707106781187 0.000000000000"));
    }
}

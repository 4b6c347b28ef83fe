//! Clifford simulation in the Aaronson–Gottesman tableau form.
//!
//! An `n`-qubit state is held as `2n` Pauli generators: rows `0..n` are the
//! destabilizers, rows `n..2n` the stabilizers, and row `2n` is scratch space
//! for deterministic measurements. Each row stores its X and Z parts as
//! packed `u64` words plus one sign bit. Gates cost `O(n)` word operations;
//! a measurement costs one column scan plus `O(n/64)` per row product.
//!
//! The random branch of a measurement draws exactly one value from the
//! system's generator. Deterministic outcomes draw nothing, so register
//! measurements in ascending qubit order give reproducible transcripts.

use std::ops::Range;

use rand::Rng;

use crate::backend::{Backend, BackendKind, Limits};
use crate::error::{Error, Result};
use crate::rng::{sim_rng, SimRng};

/// Operations between invariant checks when checking is enabled.
pub const INVARIANT_CHECK_INTERVAL: usize = 1000;
const AUTO_CHECK_MAX_QUBITS: usize = 256;

#[derive(Debug, Clone)]
pub struct StabilizerTableau {
    n: usize,
    words: usize,
    xs: Vec<u64>,
    zs: Vec<u64>,
    signs: Vec<bool>,
    rng: SimRng,
    check_invariants: bool,
    ops_since_check: usize,
}

#[inline]
fn mask(q: usize) -> (usize, u64) {
    (q / 64, 1u64 << (q % 64))
}

impl StabilizerTableau {
    /// `|0…0⟩`: destabilizer `i` is `X_i`, stabilizer `i` is `Z_i`.
    pub fn new(n: usize, seed: u64) -> Self {
        let words = n.div_ceil(64).max(1);
        let rows = 2 * n + 1;
        let mut t = Self {
            n,
            words,
            xs: vec![0; rows * words],
            zs: vec![0; rows * words],
            signs: vec![false; rows],
            rng: sim_rng(seed),
            check_invariants: cfg!(debug_assertions),
            ops_since_check: 0,
        };
        for i in 0..n {
            let (w, b) = mask(i);
            t.xs[i * words + w] |= b;
            t.zs[(n + i) * words + w] |= b;
        }
        t
    }

    /// Enables the periodic symplectic-structure check (on by default in
    /// debug builds for tableaux of at most 256 qubits).
    pub fn with_invariant_checks(mut self, enabled: bool) -> Self {
        self.check_invariants = enabled;
        self
    }

    #[inline]
    fn x_bit(&self, row: usize, q: usize) -> bool {
        let (w, b) = mask(q);
        self.xs[row * self.words + w] & b != 0
    }

    #[inline]
    fn z_bit(&self, row: usize, q: usize) -> bool {
        let (w, b) = mask(q);
        self.zs[row * self.words + w] & b != 0
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

    fn tick(&mut self) {
        if !self.check_invariants || self.n > AUTO_CHECK_MAX_QUBITS {
            return;
        }
        self.ops_since_check += 1;
        if self.ops_since_check >= INVARIANT_CHECK_INTERVAL {
            self.ops_since_check = 0;
            if let Err(e) = self.verify_invariants() {
                panic!("stabilizer tableau invariant violated: {e}");
            }
        }
    }

    fn symplectic(&self, a: usize, b: usize) -> bool {
        let w = self.words;
        let mut parity = 0u32;
        for k in 0..w {
            parity ^= (self.xs[a * w + k] & self.zs[b * w + k]).count_ones();
            parity ^= (self.zs[a * w + k] & self.xs[b * w + k]).count_ones();
        }
        parity & 1 == 1
    }

    /// Checks the canonical pairing: stabilizers commute with each other and
    /// with non-partner destabilizers, destabilizers commute with each other,
    /// and destabilizer `i` anticommutes with stabilizer `i`. Together these
    /// imply the `2n` generators are independent.
    pub fn verify_invariants(&self) -> Result<()> {
        let n = self.n;
        for i in 0..2 * n {
            for j in (i + 1)..2 * n {
                let expected = j == i + n;
                if self.symplectic(i, j) != expected {
                    return Err(Error::Argument(format!(
                        "rows {i} and {j} {} but should {}",
                        if expected { "commute" } else { "anticommute" },
                        if expected { "anticommute" } else { "commute" }
                    )));
                }
            }
        }
        Ok(())
    }

    /// Left-multiplies row `h` by row `i`, tracking the sign.
    fn rowsum(&mut self, h: usize, i: usize) {
        let w = self.words;
        let (mut plus, mut minus) = (0u32, 0u32);
        for k in 0..w {
            let (x1, z1) = (self.xs[i * w + k], self.zs[i * w + k]);
            let (x2, z2) = (self.xs[h * w + k], self.zs[h * w + k]);
            plus += ((x1 & z1 & z2 & !x2) | (x1 & !z1 & x2 & z2) | (!x1 & z1 & x2 & !z2))
                .count_ones();
            minus += ((x1 & z1 & x2 & !z2) | (x1 & !z1 & !x2 & z2) | (!x1 & z1 & x2 & z2))
                .count_ones();
            self.xs[h * w + k] = x2 ^ x1;
            self.zs[h * w + k] = z2 ^ z1;
        }
        let phase = 2 * (self.signs[h] as u32) + 2 * (self.signs[i] as u32) + 4 * w as u32 * 64
            + plus
            - minus;
        debug_assert!(phase.is_multiple_of(2), "row product produced an imaginary phase");
        self.signs[h] = phase % 4 == 2;
    }

    fn clear_row(&mut self, row: usize) {
        let w = self.words;
        self.xs[row * w..(row + 1) * w].fill(0);
        self.zs[row * w..(row + 1) * w].fill(0);
        self.signs[row] = false;
    }

    fn copy_row(&mut self, from: usize, to: usize) {
        let w = self.words;
        self.xs.copy_within(from * w..(from + 1) * w, to * w);
        self.zs.copy_within(from * w..(from + 1) * w, to * w);
        self.signs[to] = self.signs[from];
    }

    /// Stabilizer generators as signed Pauli strings, qubit 0 leftmost.
    pub fn stabilizers(&self) -> Vec<String> {
        (self.n..2 * self.n).map(|r| self.row_string(r)).collect()
    }

    fn row_string(&self, row: usize) -> String {
        let mut s = String::with_capacity(self.n + 1);
        s.push(if self.signs[row] { '-' } else { '+' });
        for q in 0..self.n {
            s.push(match (self.x_bit(row, q), self.z_bit(row, q)) {
                (false, false) => 'I',
                (true, false) => 'X',
                (false, true) => 'Z',
                (true, true) => 'Y',
            });
        }
        s
    }

    /// Block-diagonal tableau of `self` followed by `others`.
    fn tensor(&self, others: &[Self]) -> (Self, Vec<usize>) {
        let mut offsets = Vec::with_capacity(others.len());
        let mut total = self.n;
        for o in others {
            offsets.push(total);
            total += o.n;
        }
        let mut out = Self::new(0, 0);
        out.n = total;
        out.words = total.div_ceil(64).max(1);
        let rows = 2 * total + 1;
        out.xs = vec![0; rows * out.words];
        out.zs = vec![0; rows * out.words];
        out.signs = vec![false; rows];
        out.rng = self.rng.clone();
        out.check_invariants = self.check_invariants;

        let parts = std::iter::once((self, 0usize)).chain(others.iter().zip(offsets.iter().copied()));
        for (part, offset) in parts {
            for i in 0..part.n {
                out.copy_shifted(part, i, offset + i, offset);
                out.copy_shifted(part, part.n + i, total + offset + i, offset);
            }
        }
        (out, offsets)
    }

    fn copy_shifted(&mut self, src: &Self, src_row: usize, dst_row: usize, offset: usize) {
        let (sw, dw) = (src.words, self.words);
        for k in 0..sw {
            for (src_bits, dst) in [(&src.xs, &mut self.xs), (&src.zs, &mut self.zs)] {
                let mut word = src_bits[src_row * sw + k];
                while word != 0 {
                    let j = k * 64 + word.trailing_zeros() as usize;
                    word &= word - 1;
                    let (w, b) = mask(offset + j);
                    dst[dst_row * dw + w] |= b;
                }
            }
        }
        self.signs[dst_row] = src.signs[src_row];
    }
}

impl Backend for StabilizerTableau {
    const KIND: BackendKind = BackendKind::Stabilizer;

    fn zeroed(n: usize, seed: u64, _limits: &Limits) -> Result<Self> {
        Ok(Self::new(n, seed))
    }

    fn num_qubits(&self) -> usize {
        self.n
    }

    fn h(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let (wq, b) = mask(q);
        let w = self.words;
        for row in 0..2 * self.n {
            let idx = row * w + wq;
            let (x, z) = (self.xs[idx] & b, self.zs[idx] & b);
            if x != 0 && z != 0 {
                self.signs[row] ^= true;
            }
            self.xs[idx] = (self.xs[idx] & !b) | z;
            self.zs[idx] = (self.zs[idx] & !b) | x;
        }
        self.tick();
        Ok(())
    }

    fn x(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let (wq, b) = mask(q);
        let w = self.words;
        for row in 0..2 * self.n {
            if self.zs[row * w + wq] & b != 0 {
                self.signs[row] ^= true;
            }
        }
        self.tick();
        Ok(())
    }

    fn z(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let (wq, b) = mask(q);
        let w = self.words;
        for row in 0..2 * self.n {
            if self.xs[row * w + wq] & b != 0 {
                self.signs[row] ^= true;
            }
        }
        self.tick();
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
        let (wc, bc) = mask(control);
        let (wt, bt) = mask(target);
        let w = self.words;
        for row in 0..2 * self.n {
            let xc = self.xs[row * w + wc] & bc != 0;
            let zc = self.zs[row * w + wc] & bc != 0;
            let xt = self.xs[row * w + wt] & bt != 0;
            let zt = self.zs[row * w + wt] & bt != 0;
            if xc && zt && (xt == zc) {
                self.signs[row] ^= true;
            }
            if xc {
                self.xs[row * w + wt] ^= bt;
            }
            if zt {
                self.zs[row * w + wc] ^= bc;
            }
        }
        self.tick();
        Ok(())
    }

    fn measure(&mut self, q: usize) -> Result<bool> {
        self.check_qubit(q)?;
        let n = self.n;
        let outcome = match (n..2 * n).find(|&p| self.x_bit(p, q)) {
            Some(p) => {
                // Row p − n is overwritten below, so it is skipped.
                for i in 0..2 * n {
                    if i != p && i != p - n && self.x_bit(i, q) {
                        self.rowsum(i, p);
                    }
                }
                self.copy_row(p, p - n);
                self.clear_row(p);
                let (w, b) = mask(q);
                self.zs[p * self.words + w] |= b;
                let bit = self.rng.gen::<bool>();
                self.signs[p] = bit;
                bit
            }
            None => {
                let scratch = 2 * n;
                self.clear_row(scratch);
                for i in 0..n {
                    if self.x_bit(i, q) {
                        self.rowsum(scratch, i + n);
                    }
                }
                self.signs[scratch]
            }
        };
        self.tick();
        Ok(outcome)
    }

    fn reseed(&mut self, seed: u64) {
        self.rng = sim_rng(seed);
    }

    fn allocate(&mut self, count: usize) -> Result<Range<usize>> {
        let start = self.n;
        let fresh = Self::new(count, 0);
        let (grown, _) = self.tensor(std::slice::from_ref(&fresh));
        *self = grown;
        Ok(start..start + count)
    }

    fn absorb(&mut self, others: Vec<Self>) -> Result<Vec<usize>> {
        let (joined, offsets) = self.tensor(&others);
        *self = joined;
        Ok(offsets)
    }
}

//! Fixed-length bit vectors over GF(2).
//!
//! A [`BitVector`] of length `m` holds bits `x_{m-1} … x_0`. Index 0 is the
//! least significant bit and is printed rightmost, so `"1011"` has
//! `x_0 = 1, x_1 = 1, x_2 = 0, x_3 = 1` and converts to the integer 11.
//! Bits are packed into `u64` words; unused high bits of the last word are
//! always zero.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const WORD: usize = 64;

/// Largest length accepted by [`cip_census`].
pub const MAX_CENSUS_LEN: usize = 20;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

fn words_for(len: usize) -> usize {
    len.div_ceil(WORD)
}

impl BitVector {
    /// The all-zero vector of length `len`.
    pub fn zeros(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::Argument("bit vectors must have length >= 1".into()));
        }
        Ok(Self {
            len,
            words: vec![0; words_for(len)],
        })
    }

    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> bool) -> Result<Self> {
        let mut v = Self::zeros(len)?;
        for i in 0..len {
            if f(i) {
                v.words[i / WORD] |= 1 << (i % WORD);
            }
        }
        Ok(v)
    }

    /// Builds a vector from bits given index-0 first.
    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        Self::from_fn(bits.len(), |i| bits[i])
    }

    /// Low `len` bits of `value`; bits of `value` above `len` must be zero.
    pub fn from_u64(value: u64, len: usize) -> Result<Self> {
        if len < WORD && value >> len != 0 {
            return Err(Error::Argument(format!(
                "value {value} does not fit in {len} bits"
            )));
        }
        let mut v = Self::zeros(len)?;
        v.words[0] = value;
        Ok(v)
    }

    /// Uniformly random vector of length `len`.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Result<Self> {
        let mut v = Self::zeros(len)?;
        for w in v.words.iter_mut() {
            *w = rng.gen();
        }
        v.mask_tail();
        Ok(v)
    }

    fn mask_tail(&mut self) {
        let rem = self.len % WORD;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    /// Always false; the zero-length vector cannot be constructed.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Indices `i` with `x_i = 1`, ascending.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&i| self.get(i))
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// The integer value, when `len <= 64`.
    pub fn to_u64(&self) -> Option<u64> {
        (self.len <= WORD).then(|| self.words[0])
    }

    fn check_len(&self, other: &Self) -> Result<()> {
        if self.len != other.len {
            return Err(Error::Dimension {
                expected: self.len,
                found: other.len,
            });
        }
        Ok(())
    }

    /// `x · y = x_{m-1} y_{m-1} ⊕ … ⊕ x_0 y_0`.
    pub fn inner_product_mod2(&self, other: &Self) -> Result<bool> {
        self.check_len(other)?;
        let parity = self
            .words
            .iter()
            .zip(&other.words)
            .fold(0u32, |acc, (a, b)| acc ^ (a & b).count_ones());
        Ok(parity & 1 == 1)
    }

    /// Componentwise addition modulo 2.
    pub fn xor(&self, other: &Self) -> Result<Self> {
        self.check_len(other)?;
        Ok(Self {
            len: self.len,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a ^ b)
                .collect(),
        })
    }

    /// Concatenation with `high` placed above `self` (so `self` keeps indices `0..len`).
    pub fn concat(&self, high: &Self) -> Self {
        Self::from_fn(self.len + high.len, |i| {
            if i < self.len {
                self.get(i)
            } else {
                high.get(i - self.len)
            }
        })
        .expect("non-empty")
    }

    /// Hex form: `0x` followed by big-endian nibbles covering all `len` bits.
    pub fn to_hex(&self) -> String {
        let nibbles = self.len.div_ceil(4);
        let mut s = String::with_capacity(nibbles + 2);
        s.push_str("0x");
        for k in (0..nibbles).rev() {
            let mut nib = 0u32;
            for b in 0..4 {
                let i = 4 * k + b;
                if i < self.len && self.get(i) {
                    nib |= 1 << b;
                }
            }
            s.push(char::from_digit(nib, 16).expect("nibble"));
        }
        s
    }

    /// Parses the hex form into a vector of length `len`.
    pub fn parse_hex(s: &str, len: usize) -> Result<Self> {
        let digits = s
            .strip_prefix("0x")
            .or_else(|| s.strip_prefix("0X"))
            .ok_or_else(|| Error::Parse(format!("hex bit vector `{s}` must start with 0x")))?;
        if digits.is_empty() {
            return Err(Error::Parse("empty hex bit vector".into()));
        }
        let mut bits = Vec::with_capacity(digits.len() * 4);
        for c in digits.chars().rev() {
            let nib = c
                .to_digit(16)
                .ok_or_else(|| Error::Parse(format!("invalid hex digit `{c}` in `{s}`")))?;
            bits.extend((0..4).map(|b| (nib >> b) & 1 == 1));
        }
        if bits[len.min(bits.len())..].iter().any(|&b| b) {
            return Err(Error::Parse(format!("`{s}` does not fit in {len} bits")));
        }
        bits.resize(len, false);
        Self::from_bits(&bits)
    }
}

/// Free-function form of [`BitVector::inner_product_mod2`].
pub fn inner_product_mod2(x: &BitVector, y: &BitVector) -> Result<bool> {
    x.inner_product_mod2(y)
}

/// Free-function form of [`BitVector::xor`].
pub fn xor(x: &BitVector, y: &BitVector) -> Result<BitVector> {
    x.xor(y)
}

/// Counts the `x ∈ B^m` with `c · x = 0` and with `c · x = 1` by exhaustive
/// enumeration.
pub fn cip_census(c: &BitVector) -> Result<(u64, u64)> {
    let m = c.len();
    if m > MAX_CENSUS_LEN {
        return Err(Error::Resource(format!(
            "exhaustive census over 2^{m} vectors exceeds the limit of 2^{MAX_CENSUS_LEN}"
        )));
    }
    let mask = c.words()[0];
    let (mut zeros, mut ones) = (0u64, 0u64);
    for x in 0..(1u64 << m) {
        if (x & mask).count_ones() & 1 == 0 {
            zeros += 1;
        } else {
            ones += 1;
        }
    }
    Ok((zeros, ones))
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in (0..self.len).rev() {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector({self})")
    }
}

impl FromStr for BitVector {
    type Err = Error;

    /// Parses the MSB-first binary form (`"1011"`) or, with a `0x` prefix,
    /// the hex form with length `4 × digits`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with("0x") || s.starts_with("0X") {
            let digits = s.len() - 2;
            return Self::parse_hex(s, digits * 4);
        }
        if s.is_empty() {
            return Err(Error::Parse("empty bit vector".into()));
        }
        let mut bits = Vec::with_capacity(s.len());
        for c in s.chars().rev() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                other => {
                    return Err(Error::Parse(format!(
                        "invalid character `{other}` in bit vector `{s}`"
                    )))
                }
            }
        }
        Self::from_bits(&bits)
    }
}

impl Serialize for BitVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

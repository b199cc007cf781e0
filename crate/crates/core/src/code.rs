//! Dendritic parity codes.
//!
//! An `m`-bit input is expanded into `2^m` components, one per subset of the
//! input positions. Component `j` holds the parity of the input bits selected
//! by the binary expansion of `j`: bit `i` of `j` selects input position
//! `i + 1`. Component 0 (the empty subset) is always 0 and the singleton
//! components `2^i` reproduce the raw input bits.
//!
//! After centering every component at 1/2, codes of distinct inputs are
//! orthogonal and a code has squared norm `2^(m-2)`. Retrieval in
//! [`crate::memory`] rests entirely on that identity.

use std::fmt;
use std::str::FromStr;

use crate::error::{LomError, Result};

/// Widest input a [`BinaryVector`] can hold.
pub const MAX_VECTOR_BITS: usize = 64;

/// Default cap on the encoder input width. A code has `2^m` components.
pub const DEFAULT_MAX_INPUT_BITS: usize = 24;

/// A fixed-length vector of {0,1} bits, packed into one word.
///
/// Position `i` (0-based) lives in bit `i` of the packed word, so position 1
/// in one-based notation is the least-significant bit.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct BinaryVector {
    bits: u64,
    len: u8,
}

impl BinaryVector {
    /// Builds a vector from a slice of 0/1 values.
    pub fn new(bits: &[u8]) -> Result<Self> {
        check_len(bits.len())?;
        let mut packed = 0u64;
        for (i, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => packed |= 1 << i,
                other => return Err(LomError::InvalidBit(char::from(b'0'.wrapping_add(other)))),
            }
        }
        Ok(Self {
            bits: packed,
            len: bits.len() as u8,
        })
    }

    /// Builds a vector of `len` bits from a packed word; bits above `len` must be clear.
    pub fn from_packed(bits: u64, len: usize) -> Result<Self> {
        check_len(len)?;
        if len < 64 && bits >> len != 0 {
            return Err(LomError::OutOfRange {
                what: "packed vector",
                value: bits as usize,
                limit: 1 << len,
            });
        }
        Ok(Self { bits, len: len as u8 })
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Self::from_packed(0, len)
    }

    pub fn from_bools(bits: impl IntoIterator<Item = bool>) -> Result<Self> {
        let v: Vec<u8> = bits.into_iter().map(u8::from).collect();
        Self::new(&v)
    }

    /// Concatenates vectors in order: the first vector occupies the lowest positions.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a BinaryVector>) -> Result<Self> {
        let mut bits = 0u64;
        let mut len = 0usize;
        for p in parts {
            if len + p.len() > MAX_VECTOR_BITS {
                return Err(LomError::Capacity {
                    what: "concatenated vector length",
                    value: len + p.len(),
                    limit: MAX_VECTOR_BITS,
                });
            }
            bits |= p.bits << len;
            len += p.len();
        }
        Self::from_packed(bits, len)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn packed(&self) -> u64 {
        self.bits
    }

    /// Bit at 0-based position `i`.
    #[inline]
    pub fn get(&self, i: usize) -> u8 {
        debug_assert!(i < self.len());
        ((self.bits >> i) & 1) as u8
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    pub fn to_vec(&self) -> Vec<u8> {
        self.iter().collect()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn hamming(&self, other: &BinaryVector) -> usize {
        (self.bits ^ other.bits).count_ones() as usize
    }
}

fn check_len(len: usize) -> Result<()> {
    if len == 0 {
        return Err(LomError::OutOfRange {
            what: "vector length",
            value: 0,
            limit: MAX_VECTOR_BITS + 1,
        });
    }
    if len > MAX_VECTOR_BITS {
        return Err(LomError::Capacity {
            what: "vector length",
            value: len,
            limit: MAX_VECTOR_BITS,
        });
    }
    Ok(())
}

impl fmt::Display for BinaryVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BinaryVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinaryVector({self})")
    }
}

impl FromStr for BinaryVector {
    type Err = LomError;

    /// Parses a string such as `"101"`; the first character is position 1.
    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(LomError::InvalidBit(other)),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::new(&bits)
    }
}

/// The standard parity function: sum of the bits modulo 2.
pub fn parity(bits: &[u8]) -> u8 {
    bits.iter().fold(0, |acc, &b| acc ^ (b & 1))
}

/// The dendritic code of an `m`-bit input, `2^m` components packed 64 per word.
#[derive(Clone, PartialEq, Eq)]
pub struct DendriticCode {
    source: BinaryVector,
    words: Vec<u64>,
}

impl DendriticCode {
    /// Input width `m`.
    pub fn input_bits(&self) -> usize {
        self.source.len()
    }

    /// Number of components, `2^m`.
    pub fn len(&self) -> usize {
        1usize << self.input_bits()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The input vector this code was built from.
    pub fn source(&self) -> &BinaryVector {
        &self.source
    }

    #[inline]
    pub fn get(&self, j: usize) -> u8 {
        ((self.words[j >> 6] >> (j & 63)) & 1) as u8
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        (0..self.len()).map(move |j| self.get(j))
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Components shifted by -1/2.
    pub fn centered(&self) -> CenteredCode {
        CenteredCode {
            values: self.iter().map(|b| f64::from(b) - 0.5).collect(),
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }
}

impl fmt::Debug for DendriticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.input_bits() <= 8 {
            let s: String = self.iter().map(|b| if b == 1 { '1' } else { '0' }).collect();
            write!(f, "DendriticCode({s})")
        } else {
            write!(f, "DendriticCode(source={}, len={})", self.source, self.len())
        }
    }
}

impl fmt::Display for DendriticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// A dendritic code with every component shifted by -1/2.
#[derive(Clone, Debug, PartialEq)]
pub struct CenteredCode {
    pub values: Vec<f64>,
}

/// Builds dendritic codes, refusing inputs wider than `max_input_bits`.
#[derive(Clone, Copy, Debug)]
pub struct Encoder {
    pub max_input_bits: usize,
}

impl Default for Encoder {
    fn default() -> Self {
        Self {
            max_input_bits: DEFAULT_MAX_INPUT_BITS,
        }
    }
}

impl Encoder {
    pub fn encode(&self, v: &BinaryVector) -> Result<DendriticCode> {
        let m = v.len();
        if m > self.max_input_bits {
            return Err(LomError::Capacity {
                what: "encoder input width",
                value: m,
                limit: self.max_input_bits,
            });
        }
        let src = v.packed();
        let len = 1usize << m;
        let n_words = len.div_ceil(64);

        // Low word: parity of (j & src) for j < min(64, 2^m).
        let mut low = 0u64;
        for j in 0..len.min(64) {
            low |= u64::from((j as u64 & src).count_ones() & 1) << j;
        }
        // Word w covers j = 64w + l, and parity(j & src) = parity(64w & src) ^ parity(l & src).
        let words = (0..n_words)
            .map(|w| {
                if ((w as u64) << 6 & src).count_ones() & 1 == 1 {
                    !low
                } else {
                    low
                }
            })
            .collect();
        Ok(DendriticCode { source: *v, words })
    }
}

/// Encodes with the default width cap.
pub fn encode(v: &BinaryVector) -> Result<DendriticCode> {
    Encoder::default().encode(v)
}

/// `sum_j (a_j - 1/2)(b_j - 1/2)`, computed as `(agreements - disagreements) / 4`.
pub fn centered_inner_product(a: &DendriticCode, b: &DendriticCode) -> Result<f64> {
    if a.len() != b.len() {
        return Err(LomError::dim("centered inner product", a.len(), b.len()));
    }
    let n = a.len();
    let tail_mask = if n < 64 { (1u64 << n) - 1 } else { u64::MAX };
    let disagree: usize = a
        .words
        .iter()
        .zip(&b.words)
        .map(|(x, y)| ((x ^ y) & tail_mask).count_ones() as usize)
        .sum();
    let agree = n - disagree;
    Ok((agree as f64 - disagree as f64) / 4.0)
}

/// Input positions (one-based, ascending) whose parity sits at code position `index`.
pub fn component_subset(index: usize, input_bits: usize) -> Result<Vec<usize>> {
    if input_bits >= usize::BITS as usize || index >= 1usize << input_bits {
        return Err(LomError::OutOfRange {
            what: "code position",
            value: index,
            limit: 1usize.checked_shl(input_bits as u32).unwrap_or(usize::MAX),
        });
    }
    Ok((0..input_bits).filter(|i| index >> i & 1 == 1).map(|i| i + 1).collect())
}

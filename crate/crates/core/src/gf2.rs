//! Bit vectors and bit matrices over GF(2).
//!
//! Bits are packed little-endian into `u64` limbs: position `i` lives in limb
//! `i / 64` at bit `i % 64`. Unused high bits of the last limb are always zero,
//! which keeps equality and weight cheap.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Gf2Error {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("bit index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("matrix rows must have equal length (row {row} has {found}, expected {expected})")]
    RaggedRows {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("matrix must have at least one row and one column")]
    Empty,
}

const LIMB: usize = 64;

fn limbs_for(len: usize) -> usize {
    len.div_ceil(LIMB)
}

/// Fixed-length binary word.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitWord {
    len: usize,
    limbs: Vec<u64>,
}

impl BitWord {
    pub fn zeros(len: usize) -> Self {
        BitWord {
            len,
            limbs: vec![0; limbs_for(len)],
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut w = BitWord {
            len,
            limbs: vec![u64::MAX; limbs_for(len)],
        };
        w.clear_tail();
        w
    }

    /// Builds a word from explicit bits, position 0 first.
    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let bits: Vec<bool> = bits.into_iter().collect();
        let mut w = BitWord::zeros(bits.len());
        for (i, b) in bits.into_iter().enumerate() {
            if b {
                w.limbs[i / LIMB] |= 1 << (i % LIMB);
            }
        }
        w
    }

    /// Builds a word of length `len` whose bit `i` is bit `i` of `mask`.
    pub fn from_u64(len: usize, mask: u64) -> Self {
        assert!(len <= LIMB, "from_u64 supports at most 64 bits");
        let mut w = BitWord::zeros(len);
        if len > 0 {
            w.limbs[0] = mask;
            w.clear_tail();
        }
        w
    }

    /// Builds a word with ones at the given positions.
    pub fn from_positions(len: usize, positions: &[usize]) -> Result<Self, Gf2Error> {
        let mut w = BitWord::zeros(len);
        for &i in positions {
            w.set(i, true)?;
        }
        Ok(w)
    }

    /// Parses a string of `0`/`1` characters, position 0 first.
    pub fn parse(s: &str) -> Option<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => return None,
            }
        }
        Some(BitWord::from_bits(bits))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(
            i < self.len,
            "bit index {i} out of range for length {}",
            self.len
        );
        self.limbs[i / LIMB] >> (i % LIMB) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) -> Result<(), Gf2Error> {
        if i >= self.len {
            return Err(Gf2Error::IndexOutOfRange {
                index: i,
                len: self.len,
            });
        }
        let mask = 1u64 << (i % LIMB);
        if value {
            self.limbs[i / LIMB] |= mask;
        } else {
            self.limbs[i / LIMB] &= !mask;
        }
        Ok(())
    }

    pub fn flip(&mut self, i: usize) {
        assert!(
            i < self.len,
            "bit index {i} out of range for length {}",
            self.len
        );
        self.limbs[i / LIMB] ^= 1 << (i % LIMB);
    }

    /// Hamming weight: number of set bits.
    pub fn weight(&self) -> usize {
        self.limbs.iter().map(|l| l.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.limbs.iter().all(|&l| l == 0)
    }

    pub fn xor(&self, other: &BitWord) -> Result<BitWord, Gf2Error> {
        self.check_len(other)?;
        Ok(BitWord {
            len: self.len,
            limbs: self
                .limbs
                .iter()
                .zip(&other.limbs)
                .map(|(a, b)| a ^ b)
                .collect(),
        })
    }

    pub fn xor_assign(&mut self, other: &BitWord) -> Result<(), Gf2Error> {
        self.check_len(other)?;
        for (a, b) in self.limbs.iter_mut().zip(&other.limbs) {
            *a ^= b;
        }
        Ok(())
    }

    /// Parity of the inner product `<self, other>`.
    pub fn dot(&self, other: &BitWord) -> Result<bool, Gf2Error> {
        self.check_len(other)?;
        let ones: u32 = self
            .limbs
            .iter()
            .zip(&other.limbs)
            .map(|(a, b)| (a & b).count_ones())
            .sum();
        Ok(ones % 2 == 1)
    }

    /// Positions of the set bits in increasing order.
    pub fn support(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.weight());
        for (li, &limb) in self.limbs.iter().enumerate() {
            let mut l = limb;
            while l != 0 {
                let tz = l.trailing_zeros() as usize;
                out.push(li * LIMB + tz);
                l &= l - 1;
            }
        }
        out
    }

    /// Low 64 bits packed into an integer (bit `i` of the result is position `i`).
    pub fn to_u64(&self) -> u64 {
        self.limbs.first().copied().unwrap_or(0)
    }

    pub(crate) fn limbs(&self) -> &[u64] {
        &self.limbs
    }

    pub(crate) fn limbs_mut(&mut self) -> &mut [u64] {
        &mut self.limbs
    }

    pub(crate) fn clear_tail(&mut self) {
        let rem = self.len % LIMB;
        if rem != 0 {
            if let Some(last) = self.limbs.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    fn check_len(&self, other: &BitWord) -> Result<(), Gf2Error> {
        if self.len != other.len {
            return Err(Gf2Error::LengthMismatch {
                left: self.len,
                right: other.len,
            });
        }
        Ok(())
    }
}

impl fmt::Display for BitWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitWord({self})")
    }
}

/// Dense `m x n` matrix stored as rows.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BitMatrix {
    cols: usize,
    rows: Vec<BitWord>,
}

impl BitMatrix {
    pub fn from_rows(rows: Vec<BitWord>) -> Result<Self, Gf2Error> {
        let cols = rows.first().map(BitWord::len).ok_or(Gf2Error::Empty)?;
        if cols == 0 {
            return Err(Gf2Error::Empty);
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Gf2Error::RaggedRows {
                    row: i,
                    found: r.len(),
                    expected: cols,
                });
            }
        }
        Ok(BitMatrix { cols, rows })
    }

    pub fn zeros(m: usize, n: usize) -> Result<Self, Gf2Error> {
        Self::from_rows((0..m).map(|_| BitWord::zeros(n)).collect())
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> &[BitWord] {
        &self.rows
    }

    pub fn row(&self, j: usize) -> &BitWord {
        &self.rows[j]
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.rows[row].get(col)
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) -> Result<(), Gf2Error> {
        let m = self.rows.len();
        self.rows
            .get_mut(row)
            .ok_or(Gf2Error::IndexOutOfRange { index: row, len: m })?
            .set(col, value)
    }

    /// Column `c` as a word of length m.
    pub fn column(&self, c: usize) -> BitWord {
        BitWord::from_bits(self.rows.iter().map(|r| r.get(c)))
    }

    /// `s_j = <h_j, z>` for every row `h_j`.
    pub fn syndrome(&self, z: &BitWord) -> Result<BitWord, Gf2Error> {
        if z.len() != self.cols {
            return Err(Gf2Error::LengthMismatch {
                left: self.cols,
                right: z.len(),
            });
        }
        let bits: Result<Vec<bool>, _> = self.rows.iter().map(|r| r.dot(z)).collect();
        Ok(BitWord::from_bits(bits?))
    }

    /// Rank over GF(2) by Gaussian elimination on a copy.
    pub fn rank(&self) -> usize {
        let mut rows: Vec<BitWord> = self.rows.clone();
        let mut rank = 0;
        for col in 0..self.cols {
            let Some(pivot) = (rank..rows.len()).find(|&r| rows[r].get(col)) else {
                continue;
            };
            rows.swap(rank, pivot);
            let pivot_row = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && row.get(col) {
                    for (a, b) in row.limbs_mut().iter_mut().zip(pivot_row.limbs()) {
                        *a ^= b;
                    }
                }
            }
            rank += 1;
            if rank == rows.len() {
                break;
            }
        }
        rank
    }
}

impl fmt::Display for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rows {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

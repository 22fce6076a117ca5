//! Square boolean matrices over GF(2), one `u64` word per row.
//!
//! Bit `j` of `rows[i]` holds entry `(i, j)`. Bits at column positions `>= n`
//! are always zero, so row-word equality is matrix equality.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 64;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    n: usize,
    rows: Vec<u64>,
}

#[inline]
fn row_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

fn check_dim(n: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&n) {
        Ok(())
    } else {
        Err(Error::DimensionOutOfRange { n, max: MAX_DIM })
    }
}

impl BitMatrix {
    pub fn zeros(n: usize) -> Result<Self> {
        check_dim(n)?;
        Ok(Self {
            n,
            rows: vec![0; n],
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        check_dim(n)?;
        Ok(Self {
            n,
            rows: (0..n).map(|i| 1u64 << i).collect(),
        })
    }

    /// Builds a matrix from row words; stray bits above column `n` are rejected.
    pub fn from_rows(rows: Vec<u64>) -> Result<Self> {
        let n = rows.len();
        check_dim(n)?;
        let mask = row_mask(n);
        if let Some(i) = rows.iter().position(|r| r & !mask != 0) {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
        Ok(Self { n, rows })
    }

    /// Convenience constructor from nested 0/1 rows.
    pub fn from_bits(bits: &[&[u8]]) -> Result<Self> {
        let n = bits.len();
        check_dim(n)?;
        let mut rows = Vec::with_capacity(n);
        for (i, row) in bits.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    left: n,
                    right: row.len(),
                });
            }
            let mut word = 0u64;
            for (j, &b) in row.iter().enumerate() {
                match b {
                    0 => {}
                    1 => word |= 1 << j,
                    _ => return Err(Error::parse(i + 1, format!("entry {b} is not a bit"))),
                }
            }
            rows.push(word);
        }
        Ok(Self { n, rows })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    #[inline]
    pub fn row(&self, i: usize) -> u64 {
        self.rows[i]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        (self.rows[i] >> j) & 1 == 1
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        assert!(i < self.n && j < self.n);
        if value {
            self.rows[i] |= 1 << j;
        } else {
            self.rows[i] &= !(1 << j);
        }
    }

    pub fn is_identity(&self) -> bool {
        self.rows.iter().enumerate().all(|(i, &r)| r == 1 << i)
    }

    fn check_gate(&self, control: usize, target: usize) -> Result<()> {
        for index in [control, target] {
            if index >= self.n {
                return Err(Error::IndexOutOfRange { index, n: self.n });
            }
        }
        if control == target {
            return Err(Error::SameControlTarget(control));
        }
        Ok(())
    }

    /// CNOT as a row operation: `row[target] ^= row[control]`.
    pub fn apply_cnot(&self, control: usize, target: usize) -> Result<Self> {
        let mut out = self.clone();
        out.apply_cnot_inplace(control, target)?;
        Ok(out)
    }

    pub fn apply_cnot_inplace(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_gate(control, target)?;
        self.rows[target] ^= self.rows[control];
        Ok(())
    }

    /// Unchecked row XOR for hot loops whose indices are already validated.
    #[inline]
    pub(crate) fn xor_row(&mut self, control: usize, target: usize) {
        debug_assert!(control != target && control < self.n && target < self.n);
        self.rows[target] ^= self.rows[control];
    }

    pub fn rank(&self) -> usize {
        let mut rows = self.rows.clone();
        let mut rank = 0;
        for col in 0..self.n {
            let bit = 1u64 << col;
            let Some(p) = (rank..self.n).find(|&r| rows[r] & bit != 0) else {
                continue;
            };
            rows.swap(rank, p);
            let pivot = rows[rank];
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && *row & bit != 0 {
                    *row ^= pivot;
                }
            }
            rank += 1;
        }
        rank
    }

    pub fn is_invertible(&self) -> bool {
        self.rank() == self.n
    }

    pub fn diag_ones(&self) -> usize {
        (0..self.n).filter(|&i| self.get(i, i)).count()
    }

    pub fn offdiag_ones(&self) -> usize {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, &r)| (r & !(1u64 << i)).count_ones() as usize)
            .sum()
    }

    pub fn ones(&self) -> usize {
        self.rows.iter().map(|r| r.count_ones() as usize).sum()
    }

    /// Number of entries that differ from the identity.
    pub fn hamming_to_identity(&self) -> usize {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, &r)| (r ^ (1u64 << i)).count_ones() as usize)
            .sum()
    }

    pub fn transpose(&self) -> Self {
        let mut rows = vec![0u64; self.n];
        for (i, &r) in self.rows.iter().enumerate() {
            let mut bits = r;
            while bits != 0 {
                let j = bits.trailing_zeros() as usize;
                rows[j] |= 1 << i;
                bits &= bits - 1;
            }
        }
        Self { n: self.n, rows }
    }

    /// GF(2) product `self * other`. Row `i` of the product is the XOR of the
    /// rows of `other` selected by the set bits of `self`'s row `i`.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: other.n,
            });
        }
        let rows = self
            .rows
            .iter()
            .map(|&r| {
                let mut acc = 0u64;
                let mut bits = r;
                while bits != 0 {
                    acc ^= other.rows[bits.trailing_zeros() as usize];
                    bits &= bits - 1;
                }
                acc
            })
            .collect();
        Ok(Self { n: self.n, rows })
    }

    /// Square sub-block starting at `(offset, offset)` of size `size`.
    pub fn block(&self, offset: usize, size: usize) -> Result<Self> {
        if offset + size > self.n {
            return Err(Error::IndexOutOfRange {
                index: offset + size - 1,
                n: self.n,
            });
        }
        let mask = row_mask(size);
        let rows = self.rows[offset..offset + size]
            .iter()
            .map(|&r| (r >> offset) & mask)
            .collect();
        Self::from_rows(rows)
    }

    /// `block_diag(identity(pad), inner)`.
    pub fn block_diag_identity(pad: usize, inner: &Self) -> Result<Self> {
        let n = pad + inner.n;
        check_dim(n)?;
        let rows = (0..pad)
            .map(|i| 1u64 << i)
            .chain(inner.rows.iter().map(|&r| r << pad))
            .collect();
        Ok(Self { n, rows })
    }

    /// Flat row-major 0/1 view, the observation layout used by the agent.
    pub fn to_flat_bits(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.n * self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.push(self.get(i, j) as u8);
            }
        }
        out
    }

    /// Pack into an `n*n`-bit key, row-major, row 0 in the low bits.
    pub fn pack_key(&self) -> u64 {
        assert!(self.n <= 8, "pack_key needs n <= 8");
        self.rows
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &r)| acc | (r << (i * self.n)))
    }

    pub fn unpack_key(n: usize, key: u64) -> Result<Self> {
        if n > 8 {
            return Err(Error::DimensionOutOfRange { n, max: 8 });
        }
        let mask = row_mask(n);
        Self::from_rows((0..n).map(|i| (key >> (i * n)) & mask).collect())
    }
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitMatrix(n={}", self.n)?;
        for i in 0..self.n {
            write!(f, " ")?;
            for j in 0..self.n {
                write!(f, "{}", self.get(i, j) as u8)?;
            }
        }
        write!(f, ")")
    }
}

/// Text format: first line `n`, then `n` lines of `n` characters `0`/`1`.
impl fmt::Display for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.n)?;
        for i in 0..self.n {
            for j in 0..self.n {
                f.write_str(if self.get(i, j) { "1" } else { "0" })?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl FromStr for BitMatrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (ln, header) = lines.next().ok_or_else(|| Error::parse(1, "empty input"))?;
        let n: usize = header
            .parse()
            .map_err(|_| Error::parse(ln, format!("bad dimension {header:?}")))?;
        check_dim(n)?;
        let mut rows = Vec::with_capacity(n);
        for (ln, line) in lines.by_ref().take(n) {
            if line.len() != n {
                return Err(Error::parse(ln, format!("expected {n} columns, got {}", line.len())));
            }
            let mut word = 0u64;
            for (j, c) in line.chars().enumerate() {
                match c {
                    '0' => {}
                    '1' => word |= 1 << j,
                    _ => return Err(Error::parse(ln, format!("unexpected character {c:?}"))),
                }
            }
            rows.push(word);
        }
        if rows.len() != n {
            return Err(Error::parse(ln, format!("expected {n} rows, got {}", rows.len())));
        }
        if let Some((ln, _)) = lines.next() {
            return Err(Error::parse(ln, "trailing content"));
        }
        Ok(Self { n, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn m(bits: &[&[u8]]) -> BitMatrix {
        BitMatrix::from_bits(bits).unwrap()
    }

    fn random_invertible(n: usize, rng: &mut Rng) -> BitMatrix {
        loop {
            let rows = (0..n).map(|_| rng.next_u64() & row_mask(n)).collect();
            let a = BitMatrix::from_rows(rows).unwrap();
            if a.is_invertible() {
                return a;
            }
        }
    }

    fn naive_multiply(a: &BitMatrix, b: &BitMatrix) -> BitMatrix {
        let n = a.n();
        let mut out = BitMatrix::zeros(n).unwrap();
        for i in 0..n {
            for j in 0..n {
                let mut acc = false;
                for k in 0..n {
                    acc ^= a.get(i, k) & b.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    #[test]
    fn identity_examples() {
        assert_eq!(BitMatrix::identity(2).unwrap(), m(&[&[1, 0], &[0, 1]]));
        assert_eq!(BitMatrix::identity(1).unwrap(), m(&[&[1]]));
        let i8 = BitMatrix::identity(8).unwrap();
        assert_eq!(i8.diag_ones(), 8);
        assert_eq!(i8.offdiag_ones(), 0);
        assert!(BitMatrix::identity(64).unwrap().is_identity());
    }

    #[test]
    fn identity_rejects_bad_dims() {
        assert!(matches!(
            BitMatrix::identity(0),
            Err(Error::DimensionOutOfRange { .. })
        ));
        assert!(BitMatrix::identity(65).is_err());
    }

    #[test]
    fn apply_cnot_examples() {
        let i2 = BitMatrix::identity(2).unwrap();
        assert_eq!(i2.apply_cnot(0, 1).unwrap(), m(&[&[1, 0], &[1, 1]]));
        assert_eq!(
            m(&[&[1, 1], &[0, 1]]).apply_cnot(1, 0).unwrap(),
            BitMatrix::identity(2).unwrap()
        );
        assert!(matches!(i2.apply_cnot(1, 1), Err(Error::SameControlTarget(1))));
        assert!(matches!(
            i2.apply_cnot(0, 2),
            Err(Error::IndexOutOfRange { index: 2, n: 2 })
        ));
    }

    #[test]
    fn invertibility_examples() {
        assert!(BitMatrix::identity(4).unwrap().is_invertible());
        assert!(!BitMatrix::zeros(3).unwrap().is_invertible());
        assert!(!m(&[&[1, 1], &[1, 1]]).is_invertible());
    }

    #[test]
    fn counting_examples() {
        let a = BitMatrix::identity(3).unwrap().apply_cnot(0, 1).unwrap();
        assert_eq!((a.diag_ones(), a.offdiag_ones(), a.hamming_to_identity()), (3, 1, 1));
        let swap = m(&[&[0, 1], &[1, 0]]);
        assert_eq!(swap.diag_ones(), 0);
        assert_eq!(swap.offdiag_ones(), 2);
        assert_eq!(swap.hamming_to_identity(), 4);
    }

    #[test]
    fn multiply_examples() {
        let a = m(&[&[1, 1], &[0, 1]]);
        assert_eq!(a.multiply(&a).unwrap(), BitMatrix::identity(2).unwrap());
        let b = BitMatrix::identity(3).unwrap();
        assert!(matches!(
            a.multiply(&b),
            Err(Error::DimensionMismatch { left: 2, right: 3 })
        ));
    }

    #[test]
    fn multiply_matches_naive() {
        let mut rng = Rng::seed(11);
        for _ in 0..200 {
            let n = 1 + rng.below(16);
            let a = BitMatrix::from_rows((0..n).map(|_| rng.next_u64() & row_mask(n)).collect())
                .unwrap();
            let b = BitMatrix::from_rows((0..n).map(|_| rng.next_u64() & row_mask(n)).collect())
                .unwrap();
            assert_eq!(a.multiply(&b).unwrap(), naive_multiply(&a, &b));
            assert_eq!(a.multiply(&BitMatrix::identity(n).unwrap()).unwrap(), a);
        }
    }

    #[test]
    fn cnot_preserves_invertibility_and_hamming_identity() {
        let mut rng = Rng::seed(3);
        for _ in 0..1000 {
            let n = 2 + rng.below(15);
            let a = random_invertible(n, &mut rng);
            let c = rng.below(n);
            let t = (c + 1 + rng.below(n - 1)) % n;
            let b = a.apply_cnot(c, t).unwrap();
            assert!(b.is_invertible());
            let d = b.diag_ones() as i64 - a.diag_ones() as i64;
            let dbar = b.offdiag_ones() as i64 - a.offdiag_ones() as i64;
            let dh = b.hamming_to_identity() as i64 - a.hamming_to_identity() as i64;
            assert_eq!(dh, dbar - d);
            assert!(d.abs() <= 1);
            // only row t changes
            for i in (0..n).filter(|&i| i != t) {
                assert_eq!(a.row(i), b.row(i));
            }
            assert_eq!(b.apply_cnot(c, t).unwrap(), a);
        }
    }

    #[test]
    fn transpose_involution() {
        let mut rng = Rng::seed(5);
        for _ in 0..100 {
            let n = 1 + rng.below(64);
            let a = BitMatrix::from_rows((0..n).map(|_| rng.next_u64() & row_mask(n)).collect())
                .unwrap();
            let t = a.transpose();
            assert_eq!(t.transpose(), a);
            for i in 0..n.min(5) {
                for j in 0..n.min(5) {
                    assert_eq!(a.get(i, j), t.get(j, i));
                }
            }
        }
    }

    #[test]
    fn text_round_trip() {
        let mut rng = Rng::seed(9);
        for n in [1, 2, 7, 15, 64] {
            let a = random_invertible(n, &mut rng);
            let text = a.to_string();
            assert_eq!(text.lines().count(), n + 1);
            assert_eq!(text.parse::<BitMatrix>().unwrap(), a);
        }
    }

    #[test]
    fn text_parse_errors() {
        assert!("".parse::<BitMatrix>().is_err());
        assert!("2\n10\n".parse::<BitMatrix>().is_err());
        assert!("2\n10\n0x\n".parse::<BitMatrix>().is_err());
        assert!("2\n100\n01\n".parse::<BitMatrix>().is_err());
        assert!("2\n10\n01\n11\n".parse::<BitMatrix>().is_err());
    }

    #[test]
    fn block_and_embedding() {
        let swap = m(&[&[0, 1], &[1, 0]]);
        let e = BitMatrix::block_diag_identity(1, &swap).unwrap();
        assert_eq!(e, m(&[&[1, 0, 0], &[0, 0, 1], &[0, 1, 0]]));
        assert_eq!(e.block(1, 2).unwrap(), swap);
    }

    #[test]
    fn pack_round_trip() {
        let mut rng = Rng::seed(2);
        for n in 1..=5 {
            let a = random_invertible(n, &mut rng);
            assert_eq!(BitMatrix::unpack_key(n, a.pack_key()).unwrap(), a);
        }
    }
}

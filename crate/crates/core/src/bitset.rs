//! Fixed-size bitsets over the cyclic group `Z_L`.

use crate::error::{size, Result};

/// Largest supported modulus.
pub const MAX_MODULUS: usize = 1 << 26;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CyclicBitset {
    modulus: usize,
    words: Vec<u64>,
}

impl CyclicBitset {
    pub fn new(modulus: usize) -> Result<Self> {
        if modulus == 0 || modulus > MAX_MODULUS {
            return Err(size(format!(
                "cyclic bitset modulus must lie in 1..={MAX_MODULUS}, got {modulus}; reduce K or epsilon"
            )));
        }
        Ok(Self {
            modulus,
            words: vec![0; modulus.div_ceil(64)],
        })
    }

    pub fn from_elements(modulus: usize, elems: impl IntoIterator<Item = i64>) -> Result<Self> {
        let mut s = Self::new(modulus)?;
        for e in elems {
            s.insert(e);
        }
        Ok(s)
    }

    pub fn modulus(&self) -> usize {
        self.modulus
    }

    fn reduce(&self, x: i64) -> usize {
        x.rem_euclid(self.modulus as i64) as usize
    }

    /// Inserts `x mod L`.
    pub fn insert(&mut self, x: i64) {
        let r = self.reduce(x);
        self.words[r / 64] |= 1 << (r % 64);
    }

    pub fn contains(&self, x: i64) -> bool {
        let r = self.reduce(x);
        self.words[r / 64] >> (r % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(i * 64 + b)
            })
        })
    }

    /// `{x + shift mod L : x in self}`.
    pub fn rotated(&self, shift: i64) -> Self {
        let s = self.reduce(shift);
        if s == 0 {
            return self.clone();
        }
        let mut out = Self {
            modulus: self.modulus,
            words: vec![0; self.words.len()],
        };
        // bits [0, L-s) move up by s, bits [L-s, L) wrap to [0, s)
        let split = self.modulus - s;
        out.or_shifted_range(self, 0, split, s);
        out.or_shifted_range(self, split, self.modulus, 0);
        out
    }

    /// ORs bits `[lo, hi)` of `src` into `self` starting at position `dst`.
    fn or_shifted_range(&mut self, src: &Self, lo: usize, hi: usize, dst: usize) {
        let mut pos = lo;
        while pos < hi {
            let chunk = (hi - pos).min(64 - pos % 64).min(64);
            let mut bits = src.words[pos / 64] >> (pos % 64);
            if chunk < 64 {
                bits &= (1u64 << chunk) - 1;
            }
            let d = dst + (pos - lo);
            let (wi, off) = (d / 64, d % 64);
            self.words[wi] |= bits << off;
            if off != 0 && off + chunk > 64 {
                self.words[wi + 1] |= bits >> (64 - off);
            }
            pos += chunk;
        }
    }

    pub fn union_with(&mut self, other: &Self) {
        debug_assert_eq!(self.modulus, other.modulus);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn difference_len(&self, other: &Self) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & !b).count_ones() as usize)
            .sum()
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    /// Minkowski sum `self + other` in `Z_L`.
    pub fn sumset(&self, other: &Self) -> Self {
        let mut out = Self {
            modulus: self.modulus,
            words: vec![0; self.words.len()],
        };
        // rotate the larger set by each element of the smaller one
        let (big, small) = if self.len() >= other.len() { (self, other) } else { (other, self) };
        for x in small.iter() {
            out.union_with(&big.rotated(x as i64));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    #[test]
    fn basic_ops() {
        let mut s = CyclicBitset::new(10).unwrap();
        s.insert(3);
        s.insert(-1);
        s.insert(13);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![3, 9]);
        assert_eq!(s.rotated(2).iter().collect::<Vec<_>>(), vec![1, 5]);
        assert!(CyclicBitset::new(0).is_err());
        assert!(CyclicBitset::new(MAX_MODULUS + 1).is_err());
    }

    proptest! {
        #[test]
        fn rotation_matches_naive(l in 1usize..300, elems in proptest::collection::vec(0i64..300, 0..40), shift in -400i64..400) {
            let s = CyclicBitset::from_elements(l, elems.iter().copied()).unwrap();
            let naive: BTreeSet<usize> = elems.iter().map(|&e| (e + shift).rem_euclid(l as i64) as usize).collect();
            prop_assert_eq!(s.rotated(shift).iter().collect::<BTreeSet<_>>(), naive);
        }

        #[test]
        fn sumset_matches_naive(l in 1usize..200, a in proptest::collection::vec(0i64..200, 0..12), b in proptest::collection::vec(0i64..200, 0..12)) {
            let sa = CyclicBitset::from_elements(l, a.iter().copied()).unwrap();
            let sb = CyclicBitset::from_elements(l, b.iter().copied()).unwrap();
            let mut naive = BTreeSet::new();
            for x in &a {
                for y in &b {
                    naive.insert((x + y).rem_euclid(l as i64) as usize);
                }
            }
            prop_assert_eq!(sa.sumset(&sb).iter().collect::<BTreeSet<_>>(), naive);
        }
    }
}

use rand::Rng;

use crate::bits::BitSet;
use crate::rng::SpinRng;

/// A configuration of ±1 spins, bit-packed; a set bit means +1.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct SpinConfig(BitSet);

impl SpinConfig {
    pub fn all_plus(n: usize) -> Self {
        Self(BitSet::full(n))
    }

    pub fn all_minus(n: usize) -> Self {
        Self(BitSet::new(n))
    }

    /// Configuration whose plus spins are the set bits of `bits` (n ≤ 64).
    pub fn from_bits(n: usize, bits: u64) -> Self {
        Self(BitSet::from_u64(n, bits))
    }

    pub fn from_spins(spins: &[i8]) -> Self {
        let mut b = BitSet::new(spins.len());
        for (i, &s) in spins.iter().enumerate() {
            debug_assert!(s == 1 || s == -1);
            b.set(i, s > 0);
        }
        Self(b)
    }

    pub fn random(n: usize, rng: &mut SpinRng) -> Self {
        let mut b = BitSet::new(n);
        for i in 0..n {
            b.set(i, rng.gen::<bool>());
        }
        Self(b)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, v: usize) -> i8 {
        if self.0.contains(v) {
            1
        } else {
            -1
        }
    }

    #[inline]
    pub fn is_plus(&self, v: usize) -> bool {
        self.0.contains(v)
    }

    #[inline]
    pub fn set(&mut self, v: usize, spin: i8) {
        self.0.set(v, spin > 0)
    }

    #[inline]
    pub fn flip(&mut self, v: usize) {
        self.0.toggle(v)
    }

    pub fn to_bits(&self) -> u64 {
        self.0.as_u64()
    }

    pub fn bits(&self) -> &BitSet {
        &self.0
    }

    pub fn from_bitset(bits: BitSet) -> Self {
        Self(bits)
    }

    /// Total spin Σσ_v.
    pub fn total(&self) -> i64 {
        2 * self.0.count() as i64 - self.len() as i64
    }

    pub fn spins(&self) -> Vec<i8> {
        (0..self.len()).map(|v| self.get(v)).collect()
    }

    /// Number of sites where the two configurations differ.
    pub fn hamming(&self, other: &SpinConfig) -> usize {
        self.0
            .words()
            .iter()
            .zip(other.0.words())
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spins_roundtrip_and_total() {
        let c = SpinConfig::from_spins(&[1, -1, -1, 1, 1]);
        assert_eq!(c.spins(), vec![1, -1, -1, 1, 1]);
        assert_eq!(c.total(), 1);
        assert_eq!(c.to_bits(), 0b11001);
        let mut d = c.clone();
        d.flip(1);
        assert_eq!(c.hamming(&d), 1);
    }
}

//! Seed-derived pseudo-random bit interleaver.

use crate::rng::rng_from_seed;
use rand::seq::SliceRandom;

/// Permutation with `out[i] = in[perm[i]]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interleaver {
    perm: Vec<usize>,
}

impl Interleaver {
    pub fn from_seed(len: usize, seed: u64) -> Self {
        let mut perm: Vec<usize> = (0..len).collect();
        perm.shuffle(&mut rng_from_seed(seed));
        Interleaver { perm }
    }

    pub fn identity(len: usize) -> Self {
        Interleaver {
            perm: (0..len).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn interleave<T: Copy>(&self, data: &[T]) -> Vec<T> {
        assert_eq!(data.len(), self.perm.len(), "interleaver length");
        self.perm.iter().map(|&p| data[p]).collect()
    }

    pub fn deinterleave<T: Copy + Default>(&self, data: &[T]) -> Vec<T> {
        assert_eq!(data.len(), self.perm.len(), "interleaver length");
        let mut out = vec![T::default(); data.len()];
        for (&p, &x) in self.perm.iter().zip(data) {
            out[p] = x;
        }
        out
    }
}

pub fn interleave(bits: &[u8], seed: u64) -> Vec<u8> {
    Interleaver::from_seed(bits.len(), seed).interleave(bits)
}

pub fn deinterleave(bits: &[u8], seed: u64) -> Vec<u8> {
    Interleaver::from_seed(bits.len(), seed).deinterleave(bits)
}

//! Reproducible random streams.
//!
//! Every random draw in the simulator comes from a ChaCha8 generator whose
//! seed is derived from a master seed, a purpose tag and an index. The
//! derivation is `splitmix64(master ^ splitmix64(tag << 32 ^ index))`, so any
//! `(master, tag, index)` triple names one independent stream regardless of
//! the order in which parallel workers consume them.

use crate::{CMatrix, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type SimRng = ChaCha8Rng;

/// Purpose tags for derived seeds.
pub mod tag {
    pub const BASE_CHANNEL: u64 = 1;
    pub const CSIT_ERROR: u64 = 2;
    pub const SAA_SAMPLES: u64 = 3;
    pub const TRUE_CHANNEL: u64 = 4;
    pub const MESSAGE: u64 = 5;
    pub const NOISE: u64 = 6;
    pub const INTERLEAVER: u64 = 7;
    pub const OPT_INIT: u64 = 8;
    pub const SATELLITE: u64 = 9;
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64((tag << 32) ^ index))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One draw from CN(0, variance).
pub fn complex_gaussian<R: rand::Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(s * re, s * im)
}

/// `rows x cols` matrix of i.i.d. CN(0, variance) entries, filled column by column.
pub fn complex_gaussian_matrix<R: rand::Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    variance: f64,
) -> CMatrix {
    let mut m = CMatrix::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            m[(r, c)] = complex_gaussian(rng, variance);
        }
    }
    m
}

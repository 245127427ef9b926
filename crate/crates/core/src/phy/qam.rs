//! Square QAM with per-axis reflected Gray labeling.
//!
//! A label of `m` bits is split in two: the first `m/2` bits pick the in-phase
//! level, the last `m/2` the quadrature level. On each axis the `m/2` bits are
//! read MSB first as a Gray code `g`; with `i = gray^-1(g)` the amplitude is
//! `2^(m/2) - 1 - 2i`, so an all-zero label sits in the positive corner.
//! Points are scaled by `sqrt(2/3 (M - 1))` (`sqrt 2`, `sqrt 10`, `sqrt 42`,
//! `sqrt 170`) for unit average energy.

use crate::error::{Error, Result};
use crate::C64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Modulation {
    #[serde(rename = "4qam")]
    Qam4,
    #[serde(rename = "16qam")]
    Qam16,
    #[serde(rename = "64qam")]
    Qam64,
    #[serde(rename = "256qam")]
    Qam256,
}

impl Modulation {
    /// All supported alphabets, smallest first.
    pub const ALL: [Modulation; 4] = [
        Modulation::Qam4,
        Modulation::Qam16,
        Modulation::Qam64,
        Modulation::Qam256,
    ];

    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qam4 => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
            Modulation::Qam256 => 8,
        }
    }

    pub fn order(self) -> usize {
        1 << self.bits_per_symbol()
    }

    pub fn from_bits_per_symbol(m: usize) -> Option<Modulation> {
        Self::ALL.into_iter().find(|q| q.bits_per_symbol() == m)
    }

    pub fn name(self) -> &'static str {
        match self {
            Modulation::Qam4 => "4qam",
            Modulation::Qam16 => "16qam",
            Modulation::Qam64 => "64qam",
            Modulation::Qam256 => "256qam",
        }
    }
}

impl std::fmt::Display for Modulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Modulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|q| q.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown modulation {s:?}")))
    }
}

/// Constellation of one alphabet; `points[label]` is the symbol for the
/// label read MSB first.
#[derive(Clone, Debug, PartialEq)]
pub struct ModulationScheme {
    pub modulation: Modulation,
    pub points: Vec<C64>,
    /// Normalized amplitudes of one axis, indexed by the axis label.
    axis_levels: Vec<f64>,
}

fn gray_inverse(mut g: usize) -> usize {
    let mut i = g;
    while g > 0 {
        g >>= 1;
        i ^= g;
    }
    i
}

impl ModulationScheme {
    pub fn new(modulation: Modulation) -> Self {
        let m = modulation.bits_per_symbol();
        let half = m / 2;
        let side = 1usize << half;
        let scale = (2.0 / 3.0 * (modulation.order() as f64 - 1.0)).sqrt();
        let axis_levels: Vec<f64> = (0..side)
            .map(|g| (side as f64 - 1.0 - 2.0 * gray_inverse(g) as f64) / scale)
            .collect();
        let points = (0..modulation.order())
            .map(|label| C64::new(axis_levels[label >> half], axis_levels[label & (side - 1)]))
            .collect();
        ModulationScheme {
            modulation,
            points,
            axis_levels,
        }
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.modulation.bits_per_symbol()
    }

    /// Maps `bits` (length a multiple of `m`) to symbols.
    pub fn modulate(&self, bits: &[u8]) -> Result<Vec<C64>> {
        let m = self.bits_per_symbol();
        if bits.len() % m != 0 {
            return Err(Error::DimensionMismatch {
                what: "bits per symbol multiple",
                expected: bits.len().next_multiple_of(m),
                found: bits.len(),
            });
        }
        Ok(bits
            .chunks_exact(m)
            .map(|c| self.points[c.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize)])
            .collect())
    }

    /// Exact per-bit LLRs, `ln P(b=0)/P(b=1)`, for `y = a s + n` with
    /// `n ~ CN(0, noise_var)`.
    ///
    /// Dividing by `a` leaves circular noise, so the two axes separate and
    /// each bit only needs a sum over one axis.
    pub fn demodulate_llr(&self, ys: &[C64], gain: C64, noise_var: f64) -> Vec<f64> {
        let m = self.bits_per_symbol();
        let half = m / 2;
        let mut out = Vec::with_capacity(ys.len() * m);
        let g2 = gain.norm_sqr();
        if g2 == 0.0 || !g2.is_finite() {
            out.resize(ys.len() * m, 0.0);
            return out;
        }
        let c = g2 / noise_var.max(1e-300);
        let mut metric = vec![0.0; self.axis_levels.len()];
        for y in ys {
            let z = y / gain;
            for x in [z.re, z.im] {
                for (t, l) in metric.iter_mut().zip(&self.axis_levels) {
                    *t = -c * (x - l) * (x - l);
                }
                for bit in 0..half {
                    let shift = half - 1 - bit;
                    let (zero, one) = split_lse(&metric, |label| (label >> shift) & 1 == 0);
                    out.push(zero - one);
                }
            }
        }
        out
    }

    /// Nearest-point hard decisions, returned as bits.
    pub fn hard_decide(&self, ys: &[C64]) -> Vec<u8> {
        let m = self.bits_per_symbol();
        let mut out = Vec::with_capacity(ys.len() * m);
        for y in ys {
            let label = (0..self.points.len())
                .min_by(|&a, &b| (y - self.points[a]).norm_sqr().total_cmp(&(y - self.points[b]).norm_sqr()))
                .unwrap_or(0);
            out.extend((0..m).rev().map(|s| ((label >> s) & 1) as u8));
        }
        out
    }
}

/// Log-sum-exp of `metric` over labels where `is_zero` holds, and over the rest.
fn split_lse(metric: &[f64], is_zero: impl Fn(usize) -> bool) -> (f64, f64) {
    let mut max = [f64::NEG_INFINITY; 2];
    for (label, &t) in metric.iter().enumerate() {
        let s = usize::from(!is_zero(label));
        max[s] = max[s].max(t);
    }
    let mut acc = [0.0; 2];
    for (label, &t) in metric.iter().enumerate() {
        let s = usize::from(!is_zero(label));
        acc[s] += (t - max[s]).exp();
    }
    (max[0] + acc[0].ln(), max[1] + acc[1].ln())
}

//! Finite-length polar codes with an outer CRC.
//!
//! Encoding follows `nu = u G_N` with `G_N = B_N F^{(x)n}`, `F = [1 0; 1 1]`
//! and `B_N` the bit-reversal permutation. Info-set indices refer to `u`
//! (0-based). Since `B_N` commutes with the Kronecker power, `nu` is the
//! natural-order transform of `u' = u B_N`; the decoder works on `u'`.
//!
//! Lengths that are not powers of two are reached by shortening: the last
//! `N - N_target` bits of `nu` are never transmitted. Their `u'` inputs are
//! frozen, which forces those code bits to zero, so the decoder treats them
//! as perfectly known.

mod construct;
mod crc;
mod decoder;

pub use construct::{bhattacharyya_profile, construct_info_set, design_z_from_snr, design_z_for_rate};
pub use crc::CrcSpec;
pub use decoder::{decode_sc_list, DecodeOutput};

use crate::error::{check_dim, Error, Result};
use serde::{Deserialize, Serialize};

/// LLR that stands in for a perfectly known bit.
pub(crate) const KNOWN_LLR: f64 = 1e12;

/// Full description of one polar code instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarCodeConfig {
    pub mother_block_length: usize,
    pub code_block_length: usize,
    pub num_info_bits: usize,
    /// Sorted positions in `u` carrying message and CRC bits.
    pub info_set: Vec<usize>,
    pub crc: CrcSpec,
    pub list_size: usize,
}

/// Transmitted (rate-matched) codeword.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Codeword {
    pub bits: Vec<u8>,
}

/// Smallest power of two `>= n`.
pub fn mother_length_for(n_target: usize) -> usize {
    n_target.next_power_of_two()
}

pub fn bit_reverse(index: usize, num_bits: u32) -> usize {
    if num_bits == 0 {
        0
    } else {
        index.reverse_bits() >> (usize::BITS - num_bits)
    }
}

/// In-place natural-order transform `x = x F^{(x)n}` over GF(2). It is an
/// involution.
pub fn polar_transform(bits: &mut [u8]) {
    let n = bits.len();
    let mut half = 1;
    while half < n {
        for block in (0..n).step_by(2 * half) {
            for i in block..block + half {
                bits[i] ^= bits[i + half];
            }
        }
        half *= 2;
    }
}

/// `v B_N`: entry `i` of the result is entry `bitrev(i)` of the input.
pub fn bit_reverse_permute<T: Copy>(v: &[T]) -> Vec<T> {
    let n = v.len();
    let bits = n.trailing_zeros();
    (0..n).map(|i| v[bit_reverse(i, bits)]).collect()
}

/// `nu = u G_N` with bit reversal.
pub fn encode_u(u: &[u8]) -> Vec<u8> {
    let mut x = bit_reverse_permute(u);
    polar_transform(&mut x);
    x
}

/// Inverse of [`encode_u`].
pub fn decode_u(nu: &[u8]) -> Vec<u8> {
    let mut x = nu.to_vec();
    polar_transform(&mut x);
    bit_reverse_permute(&x)
}

/// Drops the last `N - N_target` bits of a mother codeword.
pub fn rate_match(mother: &[u8], n_target: usize) -> Result<Codeword> {
    check_rate_match(mother.len(), n_target)?;
    Ok(Codeword {
        bits: mother[..n_target].to_vec(),
    })
}

/// Restores mother-length LLRs, marking shortened positions as known zeros.
pub fn rate_dematch(llrs: &[f64], mother_len: usize) -> Result<Vec<f64>> {
    check_rate_match(mother_len, llrs.len())?;
    let mut out = llrs.to_vec();
    out.resize(mother_len, KNOWN_LLR);
    Ok(out)
}

fn check_rate_match(mother_len: usize, n_target: usize) -> Result<()> {
    if !mother_len.is_power_of_two() {
        return Err(Error::InvalidConfig(format!("mother length {mother_len} is not a power of two")));
    }
    if n_target > mother_len || (mother_len > 1 && n_target <= mother_len / 2) {
        return Err(Error::InvalidConfig(format!(
            "target length {n_target} outside ({}, {mother_len}]; choose a smaller mother code",
            mother_len / 2
        )));
    }
    Ok(())
}

impl PolarCodeConfig {
    /// Builds a code of length `n_target` carrying `num_info_bits` message
    /// bits plus the CRC, choosing the info set by Bhattacharyya recursion
    /// from base-channel parameter `design_z`.
    pub fn new(
        n_target: usize,
        num_info_bits: usize,
        crc: CrcSpec,
        list_size: usize,
        design_z: f64,
    ) -> Result<Self> {
        if n_target == 0 {
            return Err(Error::InvalidConfig("empty code".into()));
        }
        let mother = mother_length_for(n_target);
        Self::with_mother(mother, n_target, num_info_bits, crc, list_size, design_z)
    }

    pub fn with_mother(
        mother: usize,
        n_target: usize,
        num_info_bits: usize,
        crc: CrcSpec,
        list_size: usize,
        design_z: f64,
    ) -> Result<Self> {
        check_rate_match(mother, n_target)?;
        if list_size == 0 {
            return Err(Error::InvalidConfig("list size must be positive".into()));
        }
        let k = num_info_bits + crc.len();
        if k > n_target {
            return Err(Error::InvalidConfig(format!(
                "{num_info_bits} info + {} CRC bits exceed block length {n_target}",
                crc.len()
            )));
        }
        let info_set = construct::info_set_shortened(mother, n_target, k, design_z)?;
        Ok(PolarCodeConfig {
            mother_block_length: mother,
            code_block_length: n_target,
            num_info_bits,
            info_set,
            crc,
            list_size,
        })
    }

    pub fn validate(&self) -> Result<()> {
        check_rate_match(self.mother_block_length, self.code_block_length)?;
        check_dim(
            "info set size",
            self.num_info_bits + self.crc.len(),
            self.info_set.len(),
        )?;
        let bits = self.mother_block_length.trailing_zeros();
        for w in self.info_set.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidConfig("info set must be strictly increasing".into()));
            }
        }
        for &i in &self.info_set {
            if i >= self.mother_block_length {
                return Err(Error::InvalidConfig(format!("info index {i} out of range")));
            }
            if bit_reverse(i, bits) >= self.code_block_length {
                return Err(Error::InvalidConfig(format!("info index {i} is shortened")));
            }
        }
        Ok(())
    }

    /// `true` at frozen positions of `u`.
    pub fn frozen_mask(&self) -> Vec<bool> {
        let mut mask = vec![true; self.mother_block_length];
        for &i in &self.info_set {
            mask[i] = false;
        }
        mask
    }

    /// Message + CRC bits placed into `u` (frozen bits zero).
    pub fn build_u(&self, message: &[u8]) -> Result<Vec<u8>> {
        check_dim("message length", self.num_info_bits, message.len())?;
        let block = self.crc.attach(message);
        let mut u = vec![0u8; self.mother_block_length];
        for (&pos, &b) in self.info_set.iter().zip(&block) {
            u[pos] = b;
        }
        Ok(u)
    }

    /// CRC-extend, place into `u`, transform, shorten.
    pub fn encode(&self, message: &[u8]) -> Result<Codeword> {
        let u = self.build_u(message)?;
        rate_match(&encode_u(&u), self.code_block_length)
    }

    /// CRC-aided successive-cancellation list decoding. LLRs are positive
    /// when bit 0 is more likely.
    pub fn decode(&self, llrs: &[f64]) -> Result<DecodeOutput> {
        check_dim("LLR length", self.code_block_length, llrs.len())?;
        let full = rate_dematch(llrs, self.mother_block_length)?;
        Ok(decode_sc_list(self, &full))
    }
}

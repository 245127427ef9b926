//! Info-set construction by Bhattacharyya-parameter recursion.
//!
//! The base channel is an erasure proxy with parameter `z0`. One polarization
//! step maps `z` to `2z - z^2` (check node) and `z^2` (variable node). The
//! recursion runs in the log domain so that very reliable channels keep
//! distinct, ordered values instead of underflowing to zero.

use super::bit_reverse;
use crate::error::{Error, Result};

/// `ln Z` of each synthetic channel, indexed by the natural-order input `u'`.
fn natural_log_profile(n: usize, z0: f64) -> Vec<f64> {
    let mut lz = vec![z0.max(f64::MIN_POSITIVE).ln()];
    while lz.len() < n {
        let mut next = Vec::with_capacity(lz.len() * 2);
        for &l in &lz {
            next.push(l + (2.0 - l.exp()).ln());
            next.push(2.0 * l);
        }
        lz = next;
    }
    lz
}

/// `ln Z` of the synthetic channel seen by each position of `u`.
pub fn bhattacharyya_profile(n: usize, z0: f64) -> Vec<f64> {
    let natural = natural_log_profile(n, z0);
    let bits = n.trailing_zeros();
    (0..n).map(|i| natural[bit_reverse(i, bits)]).collect()
}

/// Sorted `u` positions of the `k` most reliable synthetic channels.
pub fn construct_info_set(n: usize, k: usize, z0: f64) -> Result<Vec<usize>> {
    if !n.is_power_of_two() {
        return Err(Error::InvalidConfig(format!("block length {n} is not a power of two")));
    }
    info_set_shortened(n, n, k, z0)
}

/// As [`construct_info_set`], excluding the `u` positions that must stay
/// frozen when the code is shortened to `n_target`.
pub(crate) fn info_set_shortened(n: usize, n_target: usize, k: usize, z0: f64) -> Result<Vec<usize>> {
    if k > n_target {
        return Err(Error::InvalidConfig(format!("{k} info bits do not fit in {n_target}")));
    }
    let natural = natural_log_profile(n, z0);
    let mut order: Vec<usize> = (0..n_target).collect();
    // Most reliable first; ties go to the higher index.
    order.sort_by(|&a, &b| natural[a].total_cmp(&natural[b]).then(b.cmp(&a)));
    let bits = n.trailing_zeros();
    let mut set: Vec<usize> = order[..k].iter().map(|&j| bit_reverse(j, bits)).collect();
    set.sort_unstable();
    Ok(set)
}

/// Base-channel parameter of a BPSK-AWGN channel at `snr_db` per coded bit:
/// `Z = exp(-Es/N0)`.
pub fn design_z_from_snr(snr_db: f64) -> f64 {
    (-(10f64.powf(snr_db / 10.0))).exp()
}

/// Erasure proxy whose capacity equals the code rate.
pub fn design_z_for_rate(rate: f64) -> f64 {
    (1.0 - rate).clamp(1e-6, 1.0 - 1e-6)
}

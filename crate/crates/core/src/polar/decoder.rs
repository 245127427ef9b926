//! LLR-domain successive-cancellation list (SCL) decoding with CRC selection.
//!
//! The decoder walks the code tree of the natural-order transform
//! recursively. Each call returns the partial sums of its sub-code for every
//! surviving path together with a lineage vector: `lineage[p]` is the path
//! slot, at call entry, from which current slot `p` descends. Parents use it to
//! gather their stored LLRs, so paths are never copied wholesale. Decided
//! information bits live in an append-only arena of `(parent, bit)` nodes.
//!
//! Check nodes use the min-sum rule and path metrics use the usual
//! approximation `PM += |llr|` when a decision disagrees with the LLR sign.

use super::{bit_reverse, PolarCodeConfig};

/// Outcome of decoding one block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodeOutput {
    /// Decoded message bits (CRC removed).
    pub message: Vec<u8>,
    pub crc_pass: bool,
}

const NO_PARENT: u32 = u32::MAX;

#[inline]
fn check_node(a: f64, b: f64) -> f64 {
    let m = a.abs().min(b.abs());
    if (a < 0.0) != (b < 0.0) {
        -m
    } else {
        m
    }
}

#[inline]
fn var_node(a: f64, b: f64, partial: u8) -> f64 {
    if partial == 0 {
        b + a
    } else {
        b - a
    }
}

struct ListDecoder<'a> {
    /// Frozen flags indexed by the natural-order input `u'`.
    frozen: &'a [bool],
    /// Number of information bits in each aligned subtree, for rate-0 skips.
    list_size: usize,
    metrics: Vec<f64>,
    heads: Vec<u32>,
    arena: Vec<(u32, u8)>,
}

impl<'a> ListDecoder<'a> {
    fn node(&mut self, alpha: &[f64], n: usize, first: usize) -> (Vec<u8>, Vec<usize>) {
        let paths = self.metrics.len();
        if self.frozen[first..first + n].iter().all(|f| *f) {
            return self.rate_zero(alpha, n, paths);
        }
        if n == 1 {
            return self.info_leaf(alpha);
        }
        let half = n / 2;
        let mut left_llr = Vec::with_capacity(paths * half);
        for p in 0..paths {
            let a = &alpha[p * n..(p + 1) * n];
            left_llr.extend((0..half).map(|i| check_node(a[i], a[i + half])));
        }
        let (left, lin1) = self.node(&left_llr, half, first);

        let mut right_llr = Vec::with_capacity(lin1.len() * half);
        for (q, &src) in lin1.iter().enumerate() {
            let a = &alpha[src * n..(src + 1) * n];
            let b = &left[q * half..(q + 1) * half];
            right_llr.extend((0..half).map(|i| var_node(a[i], a[i + half], b[i])));
        }
        let (right, lin2) = self.node(&right_llr, half, first + half);

        let mut beta = Vec::with_capacity(lin2.len() * n);
        let mut lineage = Vec::with_capacity(lin2.len());
        for (r, &q) in lin2.iter().enumerate() {
            let l = &left[q * half..(q + 1) * half];
            let rr = &right[r * half..(r + 1) * half];
            beta.extend(l.iter().zip(rr).map(|(x, y)| x ^ y));
            beta.extend_from_slice(rr);
            lineage.push(lin1[q]);
        }
        (beta, lineage)
    }

    /// Every input in the subtree is a frozen zero: the sub-codeword is all
    /// zeros and each path pays for the negative LLRs.
    fn rate_zero(&mut self, alpha: &[f64], n: usize, paths: usize) -> (Vec<u8>, Vec<usize>) {
        for p in 0..paths {
            let penalty: f64 = alpha[p * n..(p + 1) * n]
                .iter()
                .filter(|a| **a < 0.0)
                .map(|a| -a)
                .sum();
            self.metrics[p] += penalty;
        }
        (vec![0u8; paths * n], (0..paths).collect())
    }

    fn info_leaf(&mut self, alpha: &[f64]) -> (Vec<u8>, Vec<usize>) {
        let paths = self.metrics.len();
        let mut candidates: Vec<(f64, usize, u8)> = Vec::with_capacity(2 * paths);
        for (p, &a) in alpha.iter().enumerate() {
            let hard = (a < 0.0) as u8;
            for bit in [hard, 1 - hard] {
                let cost = if bit == hard { 0.0 } else { a.abs() };
                candidates.push((self.metrics[p] + cost, p, bit));
            }
        }
        candidates.sort_by(|x, y| x.0.total_cmp(&y.0));
        candidates.truncate(self.list_size);

        let mut metrics = Vec::with_capacity(candidates.len());
        let mut heads = Vec::with_capacity(candidates.len());
        let mut beta = Vec::with_capacity(candidates.len());
        let mut lineage = Vec::with_capacity(candidates.len());
        for (m, p, bit) in candidates {
            self.arena.push((self.heads[p], bit));
            heads.push((self.arena.len() - 1) as u32);
            metrics.push(m);
            beta.push(bit);
            lineage.push(p);
        }
        self.metrics = metrics;
        self.heads = heads;
        (beta, lineage)
    }

    /// Information bits of one path, in decoding (natural `u'`) order.
    fn path_bits(&self, slot: usize, count: usize) -> Vec<u8> {
        let mut out = vec![0u8; count];
        let mut node = self.heads[slot];
        for i in (0..count).rev() {
            let (parent, bit) = self.arena[node as usize];
            out[i] = bit;
            node = parent;
        }
        out
    }
}

/// Decodes mother-length LLRs of `code`. Paths are ranked by metric; the best
/// CRC-passing path wins, otherwise the best path is returned with
/// `crc_pass = false`.
pub fn decode_sc_list(code: &PolarCodeConfig, llrs: &[f64]) -> DecodeOutput {
    let n = code.mother_block_length;
    let bits = n.trailing_zeros();
    let frozen_u = code.frozen_mask();
    let frozen: Vec<bool> = (0..n).map(|i| frozen_u[bit_reverse(i, bits)]).collect();
    let k = code.info_set.len();

    let mut dec = ListDecoder {
        frozen: &frozen,
        list_size: code.list_size,
        metrics: vec![0.0],
        heads: vec![NO_PARENT],
        arena: Vec::with_capacity(k * code.list_size * 2),
    };
    if k == 0 {
        return DecodeOutput {
            message: Vec::new(),
            crc_pass: code.crc.check(&[]),
        };
    }
    dec.node(llrs, n, 0);

    // Natural-order info positions u'_j, with the u position each maps to.
    let natural_info: Vec<usize> = (0..n).filter(|&j| !frozen[j]).collect();
    let rank_in_info_set = |u_pos: usize| code.info_set.binary_search(&u_pos).unwrap();

    let mut order: Vec<usize> = (0..dec.metrics.len()).collect();
    order.sort_by(|&a, &b| dec.metrics[a].total_cmp(&dec.metrics[b]));
    let block_of = |slot: usize| {
        let decided = dec.path_bits(slot, k);
        let mut block = vec![0u8; k];
        for (&j, &b) in natural_info.iter().zip(&decided) {
            block[rank_in_info_set(bit_reverse(j, bits))] = b;
        }
        block
    };
    let mut first_block = None;
    for &slot in &order {
        let block = block_of(slot);
        if code.crc.check(&block) {
            return DecodeOutput {
                message: block[..code.num_info_bits].to_vec(),
                crc_pass: true,
            };
        }
        first_block.get_or_insert(block);
    }
    let block = first_block.unwrap();
    DecodeOutput {
        message: block[..code.num_info_bits].to_vec(),
        crc_pass: false,
    }
}

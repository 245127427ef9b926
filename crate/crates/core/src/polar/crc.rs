//! Outer CRC codes, bit-serial, MSB first.

use serde::{Deserialize, Serialize};

/// CRC parameters. `width == 0` disables the outer code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrcSpec {
    pub width: u32,
    /// Generator polynomial without the leading `x^width` term.
    pub poly: u64,
    /// Initial register value. A nonzero value keeps all-zero blocks from
    /// passing the check.
    pub init: u64,
}

impl CrcSpec {
    /// CRC-16 with polynomial `0x1021` and initial value `0xFFFF`.
    pub const CCITT16: CrcSpec = CrcSpec {
        width: 16,
        poly: 0x1021,
        init: 0xFFFF,
    };

    pub const NONE: CrcSpec = CrcSpec {
        width: 0,
        poly: 0,
        init: 0,
    };

    pub fn len(&self) -> usize {
        self.width as usize
    }

    pub fn is_none(&self) -> bool {
        self.width == 0
    }

    fn mask(&self) -> u64 {
        if self.width >= 64 {
            u64::MAX
        } else {
            (1u64 << self.width) - 1
        }
    }

    /// Register value after shifting in `bits`.
    pub fn remainder(&self, bits: &[u8]) -> u64 {
        if self.is_none() {
            return 0;
        }
        let top = 1u64 << (self.width - 1);
        let mut reg = self.init & self.mask();
        for &b in bits {
            let feedback = ((reg & top) != 0) ^ (b & 1 == 1);
            reg = (reg << 1) & self.mask();
            if feedback {
                reg ^= self.poly;
            }
        }
        reg
    }

    /// CRC of `bits` as `width` bits, MSB first.
    pub fn checksum_bits(&self, bits: &[u8]) -> Vec<u8> {
        let r = self.remainder(bits);
        (0..self.width)
            .rev()
            .map(|i| ((r >> i) & 1) as u8)
            .collect()
    }

    /// `bits || crc(bits)`.
    pub fn attach(&self, bits: &[u8]) -> Vec<u8> {
        let mut out = bits.to_vec();
        out.extend(self.checksum_bits(bits));
        out
    }

    /// Verifies a block produced by [`CrcSpec::attach`].
    pub fn check(&self, block: &[u8]) -> bool {
        if self.is_none() {
            return true;
        }
        if block.len() < self.len() {
            return false;
        }
        let (msg, crc) = block.split_at(block.len() - self.len());
        self.checksum_bits(msg) == crc
    }
}

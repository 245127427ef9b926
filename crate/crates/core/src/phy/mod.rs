//! Symbol-level chain: per-stream encoding (CRC, polar code, interleaver,
//! QAM), MMSE equalization, exact LLR demodulation and the SIC receiver.

mod equalizer;
mod interleave;
mod qam;

pub use equalizer::{
    common_denominator, equalize_common, equalize_private, mse, private_denominator, Equalizer,
};
pub use interleave::{deinterleave, interleave, Interleaver};
pub use qam::{Modulation, ModulationScheme};

use crate::error::{check_dim, Error, Result};
use crate::polar::{DecodeOutput, PolarCodeConfig};
use crate::sysmodel::{inner, PrecoderSet};
use crate::{CVector, C64};
use std::ops::Range;

/// Everything a transmitter and receiver share about one stream in one frame.
/// A stream without a code is disabled and sends zero symbols.
#[derive(Clone, Debug)]
pub struct StreamSpec {
    pub scheme: ModulationScheme,
    pub code: Option<PolarCodeConfig>,
    pub interleaver: Interleaver,
    pub num_symbols: usize,
}

/// Intermediate products of encoding one stream.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamFrame {
    pub message: Vec<u8>,
    pub codeword: Vec<u8>,
    pub interleaved: Vec<u8>,
    pub symbols: Vec<C64>,
}

impl StreamSpec {
    pub fn new(
        modulation: Modulation,
        code: Option<PolarCodeConfig>,
        num_symbols: usize,
        interleaver_seed: u64,
    ) -> Result<Self> {
        let scheme = ModulationScheme::new(modulation);
        let n = num_symbols * modulation.bits_per_symbol();
        let interleaver = match &code {
            Some(c) => {
                check_dim("code block length (N = m S)", n, c.code_block_length)?;
                c.validate()?;
                Interleaver::from_seed(n, interleaver_seed)
            }
            None => Interleaver::identity(0),
        };
        Ok(StreamSpec {
            scheme,
            code,
            interleaver,
            num_symbols,
        })
    }

    pub fn disabled(num_symbols: usize) -> Self {
        StreamSpec {
            scheme: ModulationScheme::new(Modulation::Qam4),
            code: None,
            interleaver: Interleaver::identity(0),
            num_symbols,
        }
    }

    pub fn is_enabled(&self) -> bool {
        self.code.is_some()
    }

    pub fn payload_bits(&self) -> usize {
        self.code.as_ref().map_or(0, |c| c.num_info_bits)
    }

    /// CRC + polar encoding, interleaving and modulation.
    pub fn encode(&self, message: &[u8]) -> Result<StreamFrame> {
        let Some(code) = &self.code else {
            check_dim("disabled stream payload", 0, message.len())?;
            return Ok(StreamFrame {
                message: Vec::new(),
                codeword: Vec::new(),
                interleaved: Vec::new(),
                symbols: vec![C64::new(0.0, 0.0); self.num_symbols],
            });
        };
        let codeword = code.encode(message)?.bits;
        let interleaved = self.interleaver.interleave(&codeword);
        let symbols = self.scheme.modulate(&interleaved)?;
        Ok(StreamFrame {
            message: message.to_vec(),
            codeword,
            interleaved,
            symbols,
        })
    }

    /// Equalize, demodulate, deinterleave and decode. `None` for a disabled
    /// stream.
    pub fn receive(&self, ys: &[C64], eq: &Equalizer) -> Result<Option<DecodeOutput>> {
        let Some(code) = &self.code else {
            return Ok(None);
        };
        check_dim("received samples", self.num_symbols, ys.len())?;
        let llrs = self
            .scheme
            .demodulate_llr(&eq.apply(ys), eq.effective_gain, eq.noise_var);
        let llrs = self.interleaver.deinterleave(&llrs);
        code.decode(&llrs).map(Some)
    }
}

/// Per-user output of the SIC receiver.
#[derive(Clone, Debug)]
pub struct SicOutput {
    /// Decoded common message, `None` when the common stage was skipped.
    pub common: Option<DecodeOutput>,
    pub private: Option<DecodeOutput>,
    /// Samples fed to the private stage (common reconstruction removed).
    pub private_input: Vec<C64>,
}

/// `y - (h^H p_c) s_c` per sample.
pub fn cancel_common(ys: &[C64], h: &CVector, common_precoder: &CVector, symbols: &[C64]) -> Vec<C64> {
    let a = inner(h, common_precoder);
    ys.iter().zip(symbols).map(|(y, s)| y - a * s).collect()
}

/// Two-stage receiver of one user: decode the common stream treating all
/// private streams as noise, rebuild its symbols from the decoded bits and
/// subtract them, then decode the own-group private stream.
///
/// A failed common decode is still reconstructed and subtracted; the caller
/// sees both CRC flags. With no common precoder or a disabled common stream
/// the receiver reduces to a single stage.
pub fn sic_receive(
    ys: &[C64],
    h: &CVector,
    precoders: &PrecoderSet,
    group: usize,
    noise_variance: f64,
    common: &StreamSpec,
    private: &StreamSpec,
) -> Result<SicOutput> {
    if group >= precoders.num_groups() {
        return Err(Error::InvalidConfig(format!("group {group} has no precoder")));
    }
    let has_common = common.is_enabled() && !precoders.common.iter().all(|c| c.norm_sqr() == 0.0);
    let (common_out, private_input) = if has_common {
        let eq = equalize_common(h, precoders, noise_variance);
        let out = common
            .receive(ys, &eq)?
            .expect("enabled stream decodes");
        let rebuilt = common.encode(&out.message)?;
        let rest = cancel_common(ys, h, &precoders.common, &rebuilt.symbols);
        (Some(out), rest)
    } else {
        (None, ys.to_vec())
    };
    let eq = equalize_private(h, precoders, group, noise_variance);
    let private_out = private.receive(&private_input, &eq)?;
    Ok(SicOutput {
        common: common_out,
        private: private_out,
        private_input,
    })
}

/// Bit ranges of each group's share inside the concatenated common message.
pub fn common_segments(sizes: &[usize]) -> Vec<Range<usize>> {
    let mut start = 0;
    sizes
        .iter()
        .map(|&s| {
            let r = start..start + s;
            start += s;
            r
        })
        .collect()
}

/// A group's full message: its common share followed by its private part.
pub fn combine_message(common_part: &[u8], private_part: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(common_part.len() + private_part.len());
    out.extend_from_slice(common_part);
    out.extend_from_slice(private_part);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polar::{design_z_for_rate, CrcSpec};
    use crate::rng::{complex_gaussian, rng_from_seed};
    use rand::Rng;

    fn spec(q: Modulation, s: usize, k: usize, seed: u64) -> StreamSpec {
        let n = s * q.bits_per_symbol();
        let code = PolarCodeConfig::new(n, k, CrcSpec::CCITT16, 8, design_z_for_rate(k as f64 / n as f64)).unwrap();
        StreamSpec::new(q, Some(code), s, seed).unwrap()
    }

    fn random_bits(rng: &mut crate::rng::SimRng, n: usize) -> Vec<u8> {
        (0..n).map(|_| rng.gen_range(0..2)).collect()
    }

    fn two_group_setup(rng: &mut crate::rng::SimRng) -> (CVector, PrecoderSet) {
        let v = |rng: &mut crate::rng::SimRng, s: f64| CVector::from_fn(2, |_, _| complex_gaussian(rng, s));
        let h = v(rng, 1.0);
        let set = PrecoderSet {
            common: v(rng, 1.0),
            private: vec![v(rng, 0.01), v(rng, 0.01)],
            common_rate_split: vec![0.0; 2],
        };
        (h, set)
    }

    #[test]
    fn stream_length_must_match() {
        let code = PolarCodeConfig::new(512, 100, CrcSpec::CCITT16, 8, 0.5).unwrap();
        assert!(StreamSpec::new(Modulation::Qam16, Some(code), 256, 0).is_err());
    }

    #[test]
    fn noiseless_stream_round_trip() {
        let mut rng = rng_from_seed(1);
        for q in Modulation::ALL {
            let sp = spec(q, 64, 40, 7);
            let msg = random_bits(&mut rng, 40);
            let frame = sp.encode(&msg).unwrap();
            assert_eq!(frame.symbols.len(), 64);
            let eq = Equalizer {
                weight: C64::new(1.0, 0.0),
                effective_gain: C64::new(1.0, 0.0),
                noise_var: 1e-6,
            };
            let out = sp.receive(&frame.symbols, &eq).unwrap().unwrap();
            assert!(out.crc_pass);
            assert_eq!(out.message, msg);
        }
    }

    #[test]
    fn sic_cancels_common_stream_exactly() {
        let mut rng = rng_from_seed(2);
        for trial in 0..10 {
            let (h, set) = two_group_setup(&mut rng);
            let common = spec(Modulation::Qam4, 128, 60, 100 + trial);
            let private = spec(Modulation::Qam4, 128, 30, 200 + trial);
            let other = spec(Modulation::Qam4, 128, 30, 300 + trial);
            let fc = common.encode(&random_bits(&mut rng, 60)).unwrap();
            let f0 = private.encode(&random_bits(&mut rng, 30)).unwrap();
            let f1 = other.encode(&random_bits(&mut rng, 30)).unwrap();
            let noise_var = 1e-4;
            let mut rest = Vec::new();
            let mut ys = Vec::new();
            for i in 0..128 {
                let n = complex_gaussian(&mut rng, noise_var);
                let r = inner(&h, &set.private[0]) * f0.symbols[i] + inner(&h, &set.private[1]) * f1.symbols[i] + n;
                rest.push(r);
                ys.push(inner(&h, &set.common) * fc.symbols[i] + r);
            }
            let out = sic_receive(&ys, &h, &set, 0, noise_var, &common, &private).unwrap();
            let c = out.common.unwrap();
            assert!(c.crc_pass);
            assert_eq!(c.message, fc.message);
            let energy: f64 = rest.iter().map(|r| r.norm_sqr()).sum();
            let resid: f64 = out.private_input.iter().zip(&rest).map(|(a, b)| (a - b).norm_sqr()).sum();
            assert!(resid <= 1e-12 * energy, "relative residual {}", resid / energy);
        }
    }

    #[test]
    fn sdma_reduces_to_single_stage() {
        let mut rng = rng_from_seed(3);
        let (h, mut set) = two_group_setup(&mut rng);
        set.common = CVector::zeros(2);
        set.private[0] *= C64::new(5.0, 0.0);
        let common = spec(Modulation::Qam4, 64, 20, 1);
        let private = spec(Modulation::Qam4, 64, 20, 2);
        let f0 = private.encode(&random_bits(&mut rng, 20)).unwrap();
        let ys: Vec<C64> = f0.symbols.iter().map(|s| inner(&h, &set.private[0]) * s).collect();
        let out = sic_receive(&ys, &h, &set, 0, 1e-6, &common, &private).unwrap();
        assert!(out.common.is_none());
        assert_eq!(out.private_input, ys);
        let single = private
            .receive(&ys, &equalize_private(&h, &set, 0, 1e-6))
            .unwrap()
            .unwrap();
        assert_eq!(out.private.unwrap(), single);
        assert_eq!(single.message, f0.message);
    }

    #[test]
    fn disabled_stream_sends_silence() {
        let sp = StreamSpec::disabled(16);
        let f = sp.encode(&[]).unwrap();
        assert_eq!(f.symbols, vec![C64::new(0.0, 0.0); 16]);
        assert!(sp.encode(&[1]).is_err());
        assert_eq!(sp.payload_bits(), 0);
    }

    #[test]
    fn segments_and_combination() {
        let segs = common_segments(&[3, 0, 2]);
        assert_eq!(segs, vec![0..3, 3..3, 3..5]);
        assert_eq!(combine_message(&[1, 0], &[1]), vec![1, 0, 1]);
    }
}

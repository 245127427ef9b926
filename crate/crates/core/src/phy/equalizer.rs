//! Scalar MMSE equalizers and the effective post-equalization channel.
//!
//! For a stream with precoder `p` received through `h`, the MMSE weight is
//! `g = p^H h / T` where `T` is the received power of everything still present
//! plus noise. After equalization the sample is modeled as `a s + eta` with
//! `a = g h^H p` and Gaussian `eta` of variance `|g|^2 (T - |h^H p|^2)`.

use crate::sysmodel::{inner, PrecoderSet};
use crate::{CVector, C64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Equalizer {
    pub weight: C64,
    /// `g h^H p`.
    pub effective_gain: C64,
    /// Interference plus noise after equalization.
    pub noise_var: f64,
}

impl Equalizer {
    fn build(signal: C64, total: f64) -> Self {
        let weight = signal.conj() / total;
        let residual = (total - signal.norm_sqr()).max(0.0);
        Equalizer {
            weight,
            effective_gain: weight * signal,
            noise_var: weight.norm_sqr() * residual,
        }
    }

    pub fn apply(&self, ys: &[C64]) -> Vec<C64> {
        ys.iter().map(|y| self.weight * y).collect()
    }
}

/// `T_{c,k} = |h^H p_c|^2 + sum_j |h^H p_j|^2 + sigma^2`.
pub fn common_denominator(h: &CVector, precoders: &PrecoderSet, noise_variance: f64) -> f64 {
    inner(h, &precoders.common).norm_sqr() + private_denominator(h, precoders, noise_variance)
}

/// `T_k = sum_j |h^H p_j|^2 + sigma^2`.
pub fn private_denominator(h: &CVector, precoders: &PrecoderSet, noise_variance: f64) -> f64 {
    precoders
        .private
        .iter()
        .map(|p| inner(h, p).norm_sqr())
        .sum::<f64>()
        + noise_variance
}

/// Common-stream equalizer with every private stream treated as noise.
pub fn equalize_common(h: &CVector, precoders: &PrecoderSet, noise_variance: f64) -> Equalizer {
    Equalizer::build(
        inner(h, &precoders.common),
        common_denominator(h, precoders, noise_variance),
    )
}

/// Own-group private equalizer once the common stream has been removed.
pub fn equalize_private(h: &CVector, precoders: &PrecoderSet, group: usize, noise_variance: f64) -> Equalizer {
    Equalizer::build(
        inner(h, &precoders.private[group]),
        private_denominator(h, precoders, noise_variance),
    )
}

/// `E|g y - s|^2` for unit-energy `s`, given `h^H p` and the total power `T`.
pub fn mse(weight: C64, signal: C64, total: f64) -> f64 {
    weight.norm_sqr() * total - 2.0 * (weight * signal).re + 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_gaussian, rng_from_seed};
    use crate::sysmodel::{sinr_common, sinr_private};

    fn scalar(v: f64) -> CVector {
        CVector::from_element(1, C64::new(v, 0.0))
    }

    fn random_set(rng: &mut crate::rng::SimRng, nt: usize, m: usize) -> PrecoderSet {
        let v = |rng: &mut crate::rng::SimRng| CVector::from_fn(nt, |_, _| complex_gaussian(rng, 1.0));
        PrecoderSet {
            common: v(rng),
            private: (0..m).map(|_| v(rng)).collect(),
            common_rate_split: vec![0.0; m],
        }
    }

    #[test]
    fn scalar_examples() {
        let mut set = PrecoderSet::zeros(1, 1);
        set.common = scalar(1.0);
        assert!((equalize_common(&scalar(1.0), &set, 1.0).weight - 0.5).norm() < 1e-15);
        let mut set = PrecoderSet::zeros(1, 1);
        set.private[0] = scalar(1.0);
        assert!((equalize_private(&scalar(1.0), &set, 0, 1.0).weight - 0.5).norm() < 1e-15);
        assert_eq!(equalize_common(&scalar(1.0), &set, 1.0).weight, C64::new(0.0, 0.0));
    }

    #[test]
    fn orthogonal_private_gives_zero_weight() {
        let mut set = PrecoderSet::zeros(2, 1);
        set.private[0] = CVector::from_vec(vec![C64::new(0.0, 1.0), C64::new(0.0, 0.0)]);
        let h = CVector::from_vec(vec![C64::new(0.0, 0.0), C64::new(1.0, 2.0)]);
        assert_eq!(equalize_private(&h, &set, 0, 1.0).weight, C64::new(0.0, 0.0));
    }

    #[test]
    fn denominators_differ_by_common_power() {
        let mut rng = rng_from_seed(5);
        for _ in 0..100 {
            let set = random_set(&mut rng, 4, 3);
            let h = CVector::from_fn(4, |_, _| complex_gaussian(&mut rng, 1.0));
            let diff = common_denominator(&h, &set, 0.7) - private_denominator(&h, &set, 0.7);
            let pc = inner(&h, &set.common).norm_sqr();
            assert!((diff - pc).abs() <= 1e-12 * pc.max(1.0));
        }
    }

    #[test]
    fn weights_are_stationary_points_of_the_mse() {
        let mut rng = rng_from_seed(8);
        for _ in 0..100 {
            let set = random_set(&mut rng, 3, 2);
            let h = CVector::from_fn(3, |_, _| complex_gaussian(&mut rng, 1.0));
            let cases = [
                (equalize_common(&h, &set, 1.3), inner(&h, &set.common), common_denominator(&h, &set, 1.3)),
                (equalize_private(&h, &set, 1, 1.3), inner(&h, &set.private[1]), private_denominator(&h, &set, 1.3)),
            ];
            for (eq, signal, total) in cases {
                let base = mse(eq.weight, signal, total);
                for eps in [1e-3, 1e-5] {
                    for d in [C64::new(eps, 0.0), C64::new(-eps, 0.0), C64::new(0.0, eps), C64::new(0.0, -eps)] {
                        let up = mse(eq.weight + d, signal, total);
                        assert!(up > base, "perturbation {d} lowered the MSE");
                        // Quadratic with curvature T: the increase is exactly T eps^2.
                        assert!(((up - base) - total * eps * eps).abs() <= 1e-9 * total * eps * eps + 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn post_equalization_sinr_matches_rate_model() {
        let mut rng = rng_from_seed(9);
        for _ in 0..50 {
            let set = random_set(&mut rng, 4, 3);
            let h = CVector::from_fn(4, |_, _| complex_gaussian(&mut rng, 1.0));
            let c = equalize_common(&h, &set, 0.5);
            let snr = c.effective_gain.norm_sqr() / c.noise_var;
            let want = sinr_common(&h, &set, 0, 0.5);
            assert!((snr - want).abs() <= 1e-9 * want.max(1.0));
            let p = equalize_private(&h, &set, 2, 0.5);
            let snr = p.effective_gain.norm_sqr() / p.noise_var;
            let want = sinr_private(&h, &set, 2, 0.5);
            assert!((snr - want).abs() <= 1e-9 * want.max(1.0));
        }
    }
}

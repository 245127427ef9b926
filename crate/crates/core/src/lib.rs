//! Link-level simulation of rate-splitting multiple access (RSMA) for
//! multigroup multicast downlinks.
//!
//! The crate covers the full chain: channel generation with imperfect CSIT,
//! max-min-fair precoder optimization, adaptive modulation and coding, CRC-aided
//! polar coding, Gray-mapped QAM, MMSE equalization with successive
//! interference cancellation, and the Monte-Carlo campaign that measures
//! max-min-fair throughput against the Shannon bound.

pub mod amc;
pub mod channel;
pub mod error;
pub mod phy;
pub mod polar;
pub mod precoder;
pub mod presets;
pub mod rng;
pub mod sim;
pub mod sysmodel;

pub use error::{Error, Result};

/// Complex baseband sample.
pub type C64 = num_complex::Complex64;
/// Column vector of complex samples (precoders, channel columns).
pub type CVector = nalgebra::DVector<C64>;
/// Complex matrix; channel matrices are `N_t x K` with column `k` equal to `h_k`.
pub type CMatrix = nalgebra::DMatrix<C64>;

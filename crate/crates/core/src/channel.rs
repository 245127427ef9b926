//! Channel realizations: i.i.d. Rayleigh (cellular), a GEO multibeam model
//! (satellite), the imperfect-CSIT error model and AWGN.
//!
//! The CSIT error `H~` has i.i.d. CN(0, P^-alpha) entries and the transmitter
//! sees `H^ = H - H~`. The error is drawn once per realization.
//!
//! Satellite channels are expressed in noise units: every entry is divided by
//! `sqrt(k T B)`, so the receiver noise variance is 1 and transmit power is in
//! watts.

use crate::error::{Error, Result};
use crate::rng::{complex_gaussian, complex_gaussian_matrix, rng_from_seed};
use crate::sysmodel::ChannelRealization;
use crate::{CMatrix, CVector, C64};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

const BOLTZMANN: f64 = 1.380_649e-23;
const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelModel {
    RayleighIid,
    MultibeamGeo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub model: ChannelModel,
    pub csit_alpha: f64,
    /// Power `P` in `sigma_e^2 = P^-alpha`: the sum power for cellular
    /// scenarios, `N_t` times the per-antenna budget for satellite ones.
    pub power_for_error_scaling: f64,
    pub satellite: Option<SatelliteParams>,
    pub seed: u64,
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.csit_alpha) {
            return Err(Error::InvalidConfig(format!("csit_alpha {} outside [0, 1]", self.csit_alpha)));
        }
        if !(self.power_for_error_scaling > 0.0) {
            return Err(Error::InvalidConfig("error-scaling power must be positive".into()));
        }
        if self.model == ChannelModel::MultibeamGeo && self.satellite.is_none() {
            return Err(Error::InvalidConfig("satellite model needs satellite parameters".into()));
        }
        Ok(())
    }

    pub fn error_variance(&self) -> f64 {
        csit_error_variance(self.power_for_error_scaling, self.csit_alpha)
    }
}

/// GEO multibeam geometry and link budget, single feed per beam.
///
/// Beam centres sit on a hexagonal lattice (one central beam and rings
/// around it) with spacing `sqrt(3) * theta_3db`. Positions are angles in
/// degrees as seen from the satellite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SatelliteParams {
    pub num_beams: usize,
    pub users_per_beam: usize,
    pub max_beam_gain_dbi: f64,
    pub theta_3db_deg: f64,
    pub rx_gain_dbi: f64,
    pub altitude_km: f64,
    pub carrier_ghz: f64,
    pub noise_temperature_k: f64,
    pub bandwidth_hz: f64,
    /// Rain attenuation `A` in dB is lognormal: `ln(A_dB) ~ N(mean, std)`.
    pub rain_ln_mean: f64,
    pub rain_ln_std: f64,
}

impl Default for SatelliteParams {
    fn default() -> Self {
        SatelliteParams {
            num_beams: 7,
            users_per_beam: 2,
            max_beam_gain_dbi: 52.0,
            theta_3db_deg: 0.4,
            rx_gain_dbi: 41.7,
            altitude_km: 35_786.0,
            carrier_ghz: 20.0,
            noise_temperature_k: 517.0,
            bandwidth_hz: 500e6,
            rain_ln_mean: -2.6,
            rain_ln_std: 1.63,
        }
    }
}

impl SatelliteParams {
    pub fn num_users(&self) -> usize {
        self.num_beams * self.users_per_beam
    }

    /// Free-space path loss as a linear power ratio.
    pub fn free_space_loss(&self) -> f64 {
        let d = self.altitude_km * 1e3;
        let f = self.carrier_ghz * 1e9;
        (4.0 * std::f64::consts::PI * d * f / SPEED_OF_LIGHT).powi(2)
    }

    pub fn noise_power(&self) -> f64 {
        BOLTZMANN * self.noise_temperature_k * self.bandwidth_hz
    }

    /// Beam centres in degrees: the origin, then hexagonal rings.
    pub fn beam_centers(&self) -> Vec<(f64, f64)> {
        let spacing = 3f64.sqrt() * self.theta_3db_deg;
        let mut centers = vec![(0.0, 0.0)];
        let mut ring = 1;
        while centers.len() < self.num_beams {
            // Walk the hexagon of radius `ring` side by side.
            let corners: Vec<(f64, f64)> = (0..6)
                .map(|i| {
                    let a = std::f64::consts::PI / 3.0 * i as f64;
                    (ring as f64 * a.cos(), ring as f64 * a.sin())
                })
                .collect();
            for side in 0..6 {
                let (x0, y0) = corners[side];
                let (x1, y1) = corners[(side + 1) % 6];
                for step in 0..ring {
                    let t = step as f64 / ring as f64;
                    centers.push((
                        spacing * (x0 + t * (x1 - x0)),
                        spacing * (y0 + t * (y1 - y0)),
                    ));
                }
            }
            ring += 1;
        }
        centers.truncate(self.num_beams);
        centers
    }

    fn validate(&self) -> Result<()> {
        if self.num_beams == 0 || self.users_per_beam == 0 {
            return Err(Error::InvalidConfig("satellite needs beams and users".into()));
        }
        if !(self.theta_3db_deg > 0.0) {
            return Err(Error::InvalidConfig("theta_3db must be positive".into()));
        }
        Ok(())
    }
}

pub fn csit_error_variance(power: f64, alpha: f64) -> f64 {
    power.powf(-alpha)
}

/// `N_t x K` matrix with i.i.d. CN(0, 1) entries.
pub fn gen_rayleigh(num_tx: usize, num_users: usize, seed: u64) -> CMatrix {
    let mut rng = rng_from_seed(seed);
    complex_gaussian_matrix(&mut rng, num_tx, num_users, 1.0)
}

/// Draws `H~` with CN(0, P^-alpha) entries and sets `H^ = H - H~`.
///
/// The returned true channel is recomputed as `H^ + H~`, so the triple
/// satisfies the decomposition exactly; it differs from the input by at most
/// one rounding per entry.
pub fn apply_csit_error(true_channel: &CMatrix, alpha: f64, power: f64, seed: u64) -> ChannelRealization {
    let var = csit_error_variance(power, alpha);
    let error = scaled_error(true_channel.nrows(), true_channel.ncols(), var, seed);
    let estimate = true_channel - &error;
    ChannelRealization {
        true_channel: &estimate + &error,
        estimate,
        error,
    }
}

/// A channel consistent with the transmitter's estimate: `H = H^ + H~` with
/// a fresh CSIT error draw.
pub fn draw_true_channel(estimate: &CMatrix, error_variance: f64, seed: u64) -> ChannelRealization {
    let error = scaled_error(estimate.nrows(), estimate.ncols(), error_variance, seed);
    ChannelRealization {
        true_channel: estimate + &error,
        estimate: estimate.clone(),
        error,
    }
}

/// Unit-variance draws scaled by `sqrt(var)`, so that one seed produces
/// proportional errors for every variance.
fn scaled_error(rows: usize, cols: usize, var: f64, seed: u64) -> CMatrix {
    let mut rng = rng_from_seed(seed);
    complex_gaussian_matrix(&mut rng, rows, cols, 1.0) * C64::new(var.sqrt(), 0.0)
}

/// Bessel function of the first kind, integer order, via the trapezoidal rule
/// on `J_n(x) = (1/pi) int_0^pi cos(n t - x sin t) dt`, which converges
/// geometrically for this periodic integrand.
pub fn bessel_j(order: u32, x: f64) -> f64 {
    const PANELS: usize = 256;
    let n = order as f64;
    let h = std::f64::consts::PI / PANELS as f64;
    let f = |t: f64| (n * t - x * t.sin()).cos();
    let mut acc = 0.5 * (f(0.0) + f(std::f64::consts::PI));
    for i in 1..PANELS {
        acc += f(i as f64 * h);
    }
    acc * h / std::f64::consts::PI
}

/// Normalized radiation pattern `(J1(u)/(2u) + 36 J3(u)/u^3)^2` with
/// `u = 2.07123 sin(theta) / sin(theta_3db)`; equals 1 at boresight.
pub fn beam_pattern(off_axis_deg: f64, theta_3db_deg: f64) -> f64 {
    let u = 2.07123 * off_axis_deg.to_radians().sin() / theta_3db_deg.to_radians().sin();
    if u.abs() < 1e-6 {
        return 1.0;
    }
    let a = bessel_j(1, u) / (2.0 * u) + 36.0 * bessel_j(3, u) / u.powi(3);
    a * a
}

/// Linear beam gain `G_max * pattern(theta)`.
pub fn beam_gain(params: &SatelliteParams, off_axis_deg: f64) -> f64 {
    10f64.powf(params.max_beam_gain_dbi / 10.0) * beam_pattern(off_axis_deg, params.theta_3db_deg)
}

/// User positions for a satellite drop: `users_per_beam` users uniform in
/// the 3 dB disc of each beam, beam by beam (user `k` belongs to beam
/// `k / users_per_beam`).
pub fn draw_user_positions<R: Rng>(params: &SatelliteParams, rng: &mut R) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(params.num_users());
    for (cx, cy) in params.beam_centers() {
        for _ in 0..params.users_per_beam {
            let r = params.theta_3db_deg * rng.gen::<f64>().sqrt();
            let a = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
            out.push((cx + r * a.cos(), cy + r * a.sin()));
        }
    }
    out
}

/// Satellite channel for explicit user positions.
///
/// `h_{n,k} = sqrt(G_rx G_beam(n,k) / (L_fs k T B)) * xi_k * exp(j phi_k)` with
/// rain amplitude `xi_k = 10^(-A_k/20)` and a uniform phase per user.
pub fn satellite_channel_for_positions<R: Rng>(
    params: &SatelliteParams,
    positions: &[(f64, f64)],
    rng: &mut R,
) -> Result<CMatrix> {
    params.validate()?;
    let centers = params.beam_centers();
    let rx_gain = 10f64.powf(params.rx_gain_dbi / 10.0);
    let scale = rx_gain / (params.free_space_loss() * params.noise_power());
    let rain = Normal::new(params.rain_ln_mean, params.rain_ln_std)
        .map_err(|e| Error::InvalidConfig(format!("rain distribution: {e}")))?;
    let mut h = CMatrix::zeros(params.num_beams, positions.len());
    for (k, &(x, y)) in positions.iter().enumerate() {
        let offsets: Vec<f64> = centers
            .iter()
            .map(|&(cx, cy)| ((x - cx).powi(2) + (y - cy).powi(2)).sqrt())
            .collect();
        if offsets.iter().all(|d| *d > params.theta_3db_deg * (1.0 + 1e-9)) {
            return Err(Error::InvalidGeometry(format!(
                "user {k} at ({x:.3}, {y:.3}) deg lies outside every beam footprint"
            )));
        }
        let attenuation_db = rain.sample(rng).exp();
        let fading = 10f64.powf(-attenuation_db / 20.0);
        let phase = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
        let rot = C64::from_polar(fading, phase);
        for (n, d) in offsets.iter().enumerate() {
            h[(n, k)] = rot * (scale * beam_gain(params, *d)).sqrt();
        }
    }
    Ok(h)
}

/// One satellite drop: positions then fading, all from `seed`.
pub fn gen_satellite_channel(params: &SatelliteParams, seed: u64) -> Result<CMatrix> {
    params.validate()?;
    let mut rng = rng_from_seed(seed);
    let positions = draw_user_positions(params, &mut rng);
    satellite_channel_for_positions(params, &positions, &mut rng)
}

/// Adds i.i.d. CN(0, noise_variance) samples.
pub fn awgn(signal: &[C64], noise_variance: f64, seed: u64) -> Vec<C64> {
    let mut rng = rng_from_seed(seed);
    awgn_with(signal, noise_variance, &mut rng)
}

pub fn awgn_with<R: Rng>(signal: &[C64], noise_variance: f64, rng: &mut R) -> Vec<C64> {
    if noise_variance == 0.0 {
        return signal.to_vec();
    }
    signal
        .iter()
        .map(|s| s + complex_gaussian(rng, noise_variance))
        .collect()
}

/// Column `k` of a channel matrix as an owned vector.
pub fn user_channel(channel: &CMatrix, k: usize) -> CVector {
    channel.column(k).into_owned()
}

//! Ready-made campaigns for the five evaluation scenarios.
//!
//! | name   | channel    | N_t | K  | M | alpha | axis              |
//! |--------|------------|-----|----|---|-------|-------------------|
//! | `fig2` | Rayleigh   | 6   | 6  | 3 | 0.8   | SNR 0..40 dB      |
//! | `fig3` | Rayleigh   | 6   | 6  | 3 | 0.6   | SNR 0..40 dB      |
//! | `fig4` | Rayleigh   | 4   | 6  | 3 | 0.8   | SNR 0..40 dB      |
//! | `fig5` | Rayleigh   | 4   | 6  | 3 | 0.6   | SNR 0..40 dB      |
//! | `fig6` | GEO beams  | 7   | 14 | 7 | 0.8   | 0..30 dBW/antenna |
//!
//! All use 100 realizations of 256 channel uses with a calibrated back-off.
//! [`ci_scale`] shrinks any of them to 20 realizations at {10, 20, 30}.

use crate::amc::AmcConfig;
use crate::channel::{ChannelConfig, ChannelModel, SatelliteParams};
use crate::error::{Error, Result};
use crate::precoder::OptimizerConfig;
use crate::sim::{BackoffSettings, CampaignConfig, PowerAxis, Scenario};
use crate::sysmodel::{GroupMap, PowerConstraintSet, Strategy, SystemConfig};

pub const PRESET_NAMES: [&str; 5] = ["fig2", "fig3", "fig4", "fig5", "fig6"];

fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step).round() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}

fn cellular(name: &str, num_tx: usize, alpha: f64) -> CampaignConfig {
    let system = SystemConfig {
        num_tx_antennas: num_tx,
        groups: GroupMap::uniform(3, 2).expect("static group map"),
        power: PowerConstraintSet::sum_power(num_tx, 1.0),
        csit_alpha: alpha,
        strategy: Strategy::Rsma,
        noise_variance: 1.0,
        perfect_csit: false,
    };
    let channel = ChannelConfig {
        model: ChannelModel::RayleighIid,
        csit_alpha: alpha,
        power_for_error_scaling: 1.0,
        satellite: None,
        seed: 0,
    };
    campaign(name, system, channel, PowerAxis::SnrDb, grid(0.0, 40.0, 5.0))
}

fn satellite(name: &str, alpha: f64) -> CampaignConfig {
    let params = SatelliteParams::default();
    let num_tx = params.num_beams;
    let system = SystemConfig {
        num_tx_antennas: num_tx,
        groups: GroupMap::uniform(params.num_beams, params.users_per_beam).expect("static group map"),
        power: PowerConstraintSet::per_antenna(vec![1.0; num_tx]),
        csit_alpha: alpha,
        strategy: Strategy::Rsma,
        noise_variance: 1.0,
        perfect_csit: false,
    };
    let channel = ChannelConfig {
        model: ChannelModel::MultibeamGeo,
        csit_alpha: alpha,
        power_for_error_scaling: num_tx as f64,
        satellite: Some(params),
        seed: 0,
    };
    campaign(name, system, channel, PowerAxis::PerAntennaDbw, grid(0.0, 30.0, 5.0))
}

fn campaign(name: &str, system: SystemConfig, channel: ChannelConfig, axis: PowerAxis, points: Vec<f64>) -> CampaignConfig {
    CampaignConfig {
        scenario: Scenario {
            name: name.to_string(),
            system,
            channel,
            amc: AmcConfig::default(),
            optimizer: OptimizerConfig::default(),
        },
        strategies: vec![Strategy::Rsma, Strategy::Sdma],
        num_realizations: 100,
        axis,
        operating_points: points,
        master_seed: 0,
        backoff: BackoffSettings::default(),
        redraw_estimate: false,
        precoder_file: None,
    }
}

/// The named preset, or an error listing the valid names.
pub fn preset(name: &str) -> Result<CampaignConfig> {
    match name {
        "fig2" => Ok(cellular(name, 6, 0.8)),
        "fig3" => Ok(cellular(name, 6, 0.6)),
        "fig4" => Ok(cellular(name, 4, 0.8)),
        "fig5" => Ok(cellular(name, 4, 0.6)),
        "fig6" => Ok(satellite(name, 0.8)),
        other => Err(Error::InvalidConfig(format!(
            "unknown scenario '{other}'; valid presets: {}",
            PRESET_NAMES.join(", ")
        ))),
    }
}

/// 20 realizations of 256 channel uses at three points: {10, 20, 30} dB for
/// SNR axes, {10, 20, 30} dBW for per-antenna power.
pub fn ci_scale(mut config: CampaignConfig) -> CampaignConfig {
    config.num_realizations = 20;
    config.scenario.amc.stream_length = 256;
    config.operating_points = vec![10.0, 20.0, 30.0];
    config
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn captions_match() {
        for (name, nt, k, m, alpha) in [
            ("fig2", 6, 6, 3, 0.8),
            ("fig3", 6, 6, 3, 0.6),
            ("fig4", 4, 6, 3, 0.8),
            ("fig5", 4, 6, 3, 0.6),
            ("fig6", 7, 14, 7, 0.8),
        ] {
            let c = preset(name).unwrap();
            c.validate().unwrap();
            let s = &c.scenario.system;
            assert_eq!((s.num_tx_antennas, s.num_users(), s.num_groups(), s.csit_alpha), (nt, k, m, alpha));
            assert!((0..k).all(|u| s.groups.members(s.groups.group_of(u)).count() == 2));
            assert_eq!((c.num_realizations, c.channel_uses()), (100, 256));
        }
    }

    #[test]
    fn unknown_name_lists_presets() {
        let msg = preset("fig9").unwrap_err().to_string();
        assert!(PRESET_NAMES.iter().all(|n| msg.contains(n)), "{msg}");
    }

    #[test]
    fn ci_scale_shrinks() {
        let c = ci_scale(preset("fig4").unwrap());
        assert_eq!((c.num_realizations, c.channel_uses()), (20, 256));
        assert_eq!(c.operating_points, vec![10.0, 20.0, 30.0]);
    }
}

//! Monte-Carlo campaigns: channel, precoder, AMC, coded chain and SIC
//! receivers end to end, aggregated into per-user BLER and the max-min-fair
//! throughput `min_k sum_l D_k^(l) / sum_l S^(l)`.
//!
//! Per operating point the transmitter sees one estimate `H^` (drawn once
//! from a base channel and a CSIT error scaled to the point's power),
//! optimizes precoders on it and fixes the MCS from the resulting average
//! rates. Each realization then redraws the true channel as `H^ + H~`.
//! Setting `redraw_estimate` instead draws a fresh base channel and estimate
//! per realization and re-optimizes for each one.
//!
//! Realizations run in parallel on the rayon pool and are merged by index,
//! so results do not depend on the worker count.

mod report;

pub use report::{read_csv, write_csv, PointSummary};

use crate::amc::{
    assign_mcs, calibrate_backoff, default_backoff_grid, AmcConfig, Backoff, BackoffMode, BackoffTrial,
    McsAssignment,
};
use crate::channel::{apply_csit_error, draw_true_channel, gen_rayleigh, gen_satellite_channel, user_channel};
use crate::channel::{ChannelConfig, ChannelModel};
use crate::error::{check_dim, Error, Result};
use crate::phy::{common_segments, sic_receive, StreamSpec};
use crate::polar::PolarCodeConfig;
use crate::precoder::{
    average_rates, load_precoders, optimize_mmf, waterfill, AverageRateReport, MmfSolution, OptimizerConfig,
    Termination,
};
use crate::rng::{complex_gaussian, derive_seed, rng_from_seed, tag};
use crate::sysmodel::{inner, PowerConstraintSet, PrecoderSet, Strategy, SystemConfig};
use crate::{CMatrix, C64};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// What the operating-point values mean.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerAxis {
    /// Total transmit power over the noise variance, in dB. The constraint
    /// family of the scenario is kept and rescaled.
    #[default]
    SnrDb,
    /// Per-antenna power in dBW, one constraint per antenna.
    PerAntennaDbw,
}

impl PowerAxis {
    pub fn column(self) -> &'static str {
        match self {
            PowerAxis::SnrDb => "snr_db",
            PowerAxis::PerAntennaDbw => "power_dbw",
        }
    }

    pub fn from_column(name: &str) -> Option<Self> {
        match name {
            "snr_db" => Some(PowerAxis::SnrDb),
            "power_dbw" => Some(PowerAxis::PerAntennaDbw),
            _ => None,
        }
    }

    /// Power constraints at operating point `value`.
    pub fn constraints(self, system: &SystemConfig, value: f64) -> PowerConstraintSet {
        let linear = 10f64.powf(value / 10.0);
        match self {
            PowerAxis::SnrDb => system.power.scaled_to_total(linear * system.noise_variance),
            PowerAxis::PerAntennaDbw => PowerConstraintSet::per_antenna(vec![linear; system.num_tx_antennas]),
        }
    }
}

/// Everything that defines the downlink of one scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub system: SystemConfig,
    pub channel: ChannelConfig,
    pub amc: AmcConfig,
    pub optimizer: OptimizerConfig,
}

/// Back-off handling: a fixed value or a search for the largest throughput
/// meeting the BLER target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackoffSettings {
    pub calibrate: bool,
    /// Used as is when `calibrate` is off.
    pub fixed: Backoff,
    pub grid_db: Vec<f64>,
    pub target_bler: f64,
    pub mode: BackoffMode,
}

impl Default for BackoffSettings {
    fn default() -> Self {
        BackoffSettings {
            calibrate: true,
            fixed: Backoff::default(),
            grid_db: default_backoff_grid(),
            target_bler: 0.1,
            mode: BackoffMode::PerClass,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub scenario: Scenario,
    pub strategies: Vec<Strategy>,
    /// `L_mc`.
    pub num_realizations: usize,
    pub axis: PowerAxis,
    pub operating_points: Vec<f64>,
    pub master_seed: u64,
    #[serde(default)]
    pub backoff: BackoffSettings,
    /// Redraw `H^` (and re-optimize) per realization instead of fixing it
    /// per operating point.
    #[serde(default)]
    pub redraw_estimate: bool,
    /// Externally computed precoders used at every point instead of the
    /// optimizer.
    #[serde(default)]
    pub precoder_file: Option<PathBuf>,
}

impl CampaignConfig {
    /// Channel uses per realization `S`.
    pub fn channel_uses(&self) -> usize {
        self.scenario.amc.stream_length
    }

    pub fn validate(&self) -> Result<()> {
        let sc = &self.scenario;
        sc.system.validate()?;
        sc.channel.validate()?;
        sc.amc.validate()?;
        sc.optimizer.validate()?;
        if self.num_realizations == 0 {
            return Err(Error::InvalidConfig("need at least one realization".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::InvalidConfig("no strategy selected".into()));
        }
        if self.operating_points.is_empty() || self.operating_points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("operating points must be finite and nonempty".into()));
        }
        if sc.system.csit_alpha != sc.channel.csit_alpha {
            return Err(Error::InvalidConfig(format!(
                "csit_alpha differs between system ({}) and channel ({})",
                sc.system.csit_alpha, sc.channel.csit_alpha
            )));
        }
        if let Some(p) = &sc.channel.satellite {
            if sc.channel.model == ChannelModel::MultibeamGeo {
                check_dim("satellite users", p.num_users(), sc.system.num_users())?;
                check_dim("satellite beams (antennas)", p.num_beams, sc.system.num_tx_antennas)?;
            }
        }
        let b = &self.backoff;
        if b.calibrate {
            if b.grid_db.is_empty() || b.grid_db.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
                return Err(Error::InvalidConfig("back-off grid must be nonempty and nonnegative".into()));
            }
            if !(0.0..=1.0).contains(&b.target_bler) {
                return Err(Error::InvalidConfig(format!("target BLER {} outside [0, 1]", b.target_bler)));
            }
        }
        Ok(())
    }
}

/// Per-realization outcome for every user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationRecord {
    pub index: u64,
    /// `D_k`: information bits of the user's group message recovered exactly.
    pub recovered_bits: Vec<usize>,
    /// Bits the user should have recovered (common share plus private).
    pub payload_bits: Vec<usize>,
    /// Common stage: CRC passed and own share matched. `None` when the user
    /// has nothing to decode there.
    pub common_ok: Vec<Option<bool>>,
    pub private_ok: Vec<Option<bool>>,
    pub block_error: Vec<bool>,
}

/// `min_k sum_l D_k / (L S)`; zero without realizations.
pub fn mmf_throughput(records: &[RealizationRecord], channel_uses: usize) -> f64 {
    let Some(first) = records.first() else {
        return 0.0;
    };
    let total_uses = (records.len() * channel_uses) as f64;
    (0..first.recovered_bits.len())
        .map(|k| records.iter().map(|r| r.recovered_bits[k] as f64).sum::<f64>() / total_uses)
        .fold(f64::INFINITY, f64::min)
}

/// Fraction of realizations in which a user missed a required stream.
pub fn bler_per_user(records: &[RealizationRecord]) -> Vec<f64> {
    let Some(first) = records.first() else {
        return Vec::new();
    };
    (0..first.block_error.len())
        .map(|k| records.iter().filter(|r| r.block_error[k]).count() as f64 / records.len() as f64)
        .collect()
}

/// Fixed part of a frame: precoders, MCS and the derived polar codes.
#[derive(Clone, Debug)]
pub struct FrameSetup {
    pub system: SystemConfig,
    pub estimate: CMatrix,
    pub precoders: PrecoderSet,
    pub mcs: McsAssignment,
    pub stream_length: usize,
    common_code: Option<PolarCodeConfig>,
    private_codes: Vec<Option<PolarCodeConfig>>,
}

impl FrameSetup {
    pub fn new(
        system: &SystemConfig,
        estimate: &CMatrix,
        precoders: &PrecoderSet,
        mcs: &McsAssignment,
        amc: &AmcConfig,
    ) -> Result<Self> {
        check_dim("MCS private streams", system.num_groups(), mcs.private.len())?;
        check_dim("estimate users", system.num_users(), estimate.ncols())?;
        precoders.validate(system)?;
        Ok(FrameSetup {
            system: system.clone(),
            estimate: estimate.clone(),
            precoders: precoders.clone(),
            mcs: mcs.clone(),
            stream_length: amc.stream_length,
            common_code: mcs.common.polar_code(amc)?,
            private_codes: mcs.private.iter().map(|s| s.polar_code(amc)).collect::<Result<_>>()?,
        })
    }

    fn stream(&self, code: &Option<PolarCodeConfig>, modulation: crate::phy::Modulation, seed: u64) -> Result<StreamSpec> {
        match code {
            Some(_) => StreamSpec::new(modulation, code.clone(), self.stream_length, seed),
            None => Ok(StreamSpec::disabled(self.stream_length)),
        }
    }
}

fn random_bits(rng: &mut impl Rng, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.gen_range(0..2u8)).collect()
}

/// One frame: true channel draw, messages, encoding, superposition, AWGN and
/// the SIC receiver of every user.
pub fn run_realization(index: u64, setup: &FrameSetup, master_seed: u64) -> Result<RealizationRecord> {
    let system = &setup.system;
    let m = system.num_groups();
    let s = setup.stream_length;
    let truth = draw_true_channel(
        &setup.estimate,
        system.csit_error_variance(),
        derive_seed(master_seed, tag::TRUE_CHANNEL, index),
    );

    let stream_seed = |j: u64| derive_seed(master_seed, tag::INTERLEAVER, index * (m as u64 + 1) + j);
    let common = setup.stream(&setup.common_code, setup.mcs.common.modulation, stream_seed(0))?;
    let private: Vec<StreamSpec> = (0..m)
        .map(|g| setup.stream(&setup.private_codes[g], setup.mcs.private[g].modulation, stream_seed(g as u64 + 1)))
        .collect::<Result<_>>()?;

    let mut rng = rng_from_seed(derive_seed(master_seed, tag::MESSAGE, index));
    let shares: Vec<Vec<u8>> = setup.mcs.common_split_bits.iter().map(|&n| random_bits(&mut rng, n)).collect();
    let private_msgs: Vec<Vec<u8>> = private.iter().map(|p| random_bits(&mut rng, p.payload_bits())).collect();
    let segments = common_segments(&setup.mcs.common_split_bits);

    let mut symbols = vec![common.encode(&shares.concat())?.symbols];
    for (spec, msg) in private.iter().zip(&private_msgs) {
        symbols.push(spec.encode(msg)?.symbols);
    }

    let mut noise_rng = rng_from_seed(derive_seed(master_seed, tag::NOISE, index));
    let k_users = system.num_users();
    let mut record = RealizationRecord {
        index,
        recovered_bits: Vec::with_capacity(k_users),
        payload_bits: Vec::with_capacity(k_users),
        common_ok: Vec::with_capacity(k_users),
        private_ok: Vec::with_capacity(k_users),
        block_error: Vec::with_capacity(k_users),
    };
    for k in 0..k_users {
        let g = system.groups.group_of(k);
        let h = user_channel(&truth.true_channel, k);
        let gains: Vec<C64> = std::iter::once(&setup.precoders.common)
            .chain(&setup.precoders.private)
            .map(|p| inner(&h, p))
            .collect();
        let ys: Vec<C64> = (0..s)
            .map(|i| {
                let signal: C64 = gains.iter().zip(&symbols).map(|(a, x)| a * x[i]).sum();
                signal + complex_gaussian(&mut noise_rng, system.noise_variance)
            })
            .collect();
        let out = sic_receive(&ys, &h, &setup.precoders, g, system.noise_variance, &common, &private[g])?;

        let share = &shares[g];
        let common_ok = match &out.common {
            Some(d) => Some(d.crc_pass && d.message[segments[g].clone()] == share[..]),
            None if !share.is_empty() => Some(false),
            None => None,
        };
        let private_ok = out
            .private
            .as_ref()
            .map(|d| d.crc_pass && d.message == private_msgs[g]);
        let mut recovered = 0;
        if common_ok == Some(true) {
            recovered += share.len();
        }
        if private_ok == Some(true) {
            recovered += private_msgs[g].len();
        }
        let missed_common = !share.is_empty() && common_ok != Some(true);
        let missed_private = !private_msgs[g].is_empty() && private_ok != Some(true);
        record.recovered_bits.push(recovered);
        record.payload_bits.push(share.len() + private_msgs[g].len());
        record.common_ok.push(common_ok);
        record.private_ok.push(private_ok);
        record.block_error.push(missed_common || missed_private);
    }
    Ok(record)
}

/// Outcome of one (strategy, operating point) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct PointResult {
    pub strategy: Strategy,
    pub point: f64,
    /// `Err` holds the failure that invalidated the point.
    pub status: std::result::Result<(), String>,
    /// MMF value of the average rates (mean over estimates when redrawn),
    /// from the optimum of the strategy.
    pub shannon_bound: f64,
    /// `min_k sum_l (payload of k) / (L S)`.
    pub assigned_rate: f64,
    pub mmf_throughput: f64,
    pub bler: Vec<f64>,
    /// `sum_l D_k` per user.
    pub recovered_bits: Vec<u64>,
    pub channel_uses: u64,
    pub backoff: Backoff,
    /// Calibration found no back-off meeting the BLER target.
    pub backoff_violation: bool,
    pub calibration: Vec<BackoffTrial>,
    /// The transmitted precoders carry a common stream. An RSMA point
    /// without one fell back to its SDMA special case.
    pub common_stream: bool,
    /// Precoders, average rates and MCS of the first (or only) estimate.
    pub precoders: Option<PrecoderSet>,
    pub average_rates: Option<AverageRateReport>,
    pub termination: Option<Termination>,
    pub mcs: Option<McsAssignment>,
    /// Set when redrawn estimates led to differing MCS.
    pub mcs_varies: bool,
    pub records: Vec<RealizationRecord>,
}

impl PointResult {
    fn invalid(strategy: Strategy, point: f64, message: String) -> Self {
        PointResult {
            strategy,
            point,
            status: Err(message),
            shannon_bound: f64::NAN,
            assigned_rate: f64::NAN,
            mmf_throughput: f64::NAN,
            bler: Vec::new(),
            recovered_bits: Vec::new(),
            channel_uses: 0,
            backoff: Backoff::default(),
            backoff_violation: false,
            calibration: Vec::new(),
            common_stream: false,
            precoders: None,
            average_rates: None,
            termination: None,
            mcs: None,
            mcs_varies: false,
            records: Vec::new(),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.status.is_ok()
    }

    pub fn mcs_summary(&self) -> String {
        match (&self.mcs, self.mcs_varies) {
            (_, true) => "varies".into(),
            (Some(m), false) => m.summary(),
            (None, false) => String::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CampaignResult {
    pub scenario: String,
    pub axis: PowerAxis,
    pub master_seed: u64,
    pub num_realizations: usize,
    pub num_users: usize,
    /// Ordered by strategy (as configured), then operating point.
    pub points: Vec<PointResult>,
}

impl CampaignResult {
    pub fn summaries(&self) -> Vec<PointSummary> {
        self.points
            .iter()
            .map(|p| PointSummary::from_point(self, p))
            .collect()
    }
}

/// Channel `index` of a campaign before the CSIT error: the same for every
/// operating point and strategy.
pub fn base_channel(config: &CampaignConfig, index: u64) -> Result<CMatrix> {
    let ch = &config.scenario.channel;
    let system = &config.scenario.system;
    let seed = derive_seed(config.master_seed, tag::BASE_CHANNEL, ch.seed.wrapping_add(index));
    match ch.model {
        ChannelModel::RayleighIid => Ok(gen_rayleigh(system.num_tx_antennas, system.num_users(), seed)),
        ChannelModel::MultibeamGeo => {
            let params = ch
                .satellite
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("satellite model needs satellite parameters".into()))?;
            gen_satellite_channel(params, seed)
        }
    }
}

/// The transmitter's estimate `H^` of channel `index` under the power of
/// `system`. The error draw is shared by all operating points and scaled to
/// each point's variance.
pub fn channel_estimate(config: &CampaignConfig, system: &SystemConfig, index: u64) -> Result<CMatrix> {
    let base = base_channel(config, index)?;
    if system.perfect_csit {
        return Ok(base);
    }
    Ok(apply_csit_error(
        &base,
        system.csit_alpha,
        system.power.total_power(),
        derive_seed(config.master_seed, tag::CSIT_ERROR, index),
    )
    .estimate)
}

/// An estimate with the precoders chosen for it.
#[derive(Clone)]
struct Link {
    estimate: CMatrix,
    precoders: PrecoderSet,
    report: AverageRateReport,
    termination: Option<Termination>,
}

impl Link {
    fn from_solution(estimate: &CMatrix, sol: &MmfSolution) -> Self {
        Link {
            estimate: estimate.clone(),
            precoders: sol.precoders.clone(),
            report: sol.report.clone(),
            termination: Some(sol.termination),
        }
    }
}

/// Links of both strategies at one operating point; `None` where not needed.
struct PointLinks {
    rsma: Option<Vec<Link>>,
    sdma: Option<Vec<Link>>,
}

fn link_pair(config: &CampaignConfig, system: &SystemConfig, index: u64, loaded: Option<&PrecoderSet>) -> Result<(Option<Link>, Option<Link>)> {
    let estimate = channel_estimate(config, system, index)?;
    let opt = &config.scenario.optimizer;
    let seed = derive_seed(config.master_seed, tag::OPT_INIT, index);
    if let Some(set) = loaded {
        let mut set = set.clone();
        let mut report = average_rates(&set, &estimate, system, opt.num_sample_channels, seed)?;
        let usable_split = set.total_split() > 0.0 && set.total_split() <= report.common_rate + 1e-9;
        if !set.is_sdma() && !usable_split {
            set.common_rate_split = waterfill(report.common_rate, &report.private_rates);
            report = average_rates(&set, &estimate, system, opt.num_sample_channels, seed)?;
        }
        let link = Link {
            estimate,
            report,
            termination: None,
            precoders: set.clone(),
        };
        return Ok(if set.is_sdma() { (None, Some(link)) } else { (Some(link), None) });
    }
    if config.strategies.contains(&Strategy::Rsma) {
        let o = OptimizerConfig {
            strategy: Strategy::Rsma,
            ..opt.clone()
        };
        let sol = optimize_mmf(&estimate, system, &o, seed)?;
        let sdma = sol.sdma_baseline.as_deref().map(|b| Link::from_solution(&estimate, b));
        Ok((Some(Link::from_solution(&estimate, &sol)), sdma))
    } else {
        let o = OptimizerConfig {
            strategy: Strategy::Sdma,
            ..opt.clone()
        };
        let sol = optimize_mmf(&estimate, system, &o, seed)?;
        Ok((None, Some(Link::from_solution(&estimate, &sol))))
    }
}

fn point_links(config: &CampaignConfig, system: &SystemConfig, loaded: Option<&PrecoderSet>) -> Result<PointLinks> {
    let num_links = if config.redraw_estimate { config.num_realizations } else { 1 };
    let pairs: Vec<(Option<Link>, Option<Link>)> = (0..num_links as u64)
        .into_par_iter()
        .map(|i| link_pair(config, system, i, loaded))
        .collect::<Result<_>>()?;
    let (rsma, sdma): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    Ok(PointLinks {
        rsma: rsma.into_iter().collect(),
        sdma: sdma.into_iter().collect(),
    })
}

/// Realizations simulated between early-stop checks.
const CHUNK: usize = 16;

#[derive(Clone)]
struct Evaluation {
    mcs: Vec<McsAssignment>,
    records: Vec<RealizationRecord>,
    /// False if stopped early; see [`BackoffTrial::complete`].
    complete: bool,
}

/// Early-stop rule: quit once a user has more block errors than the target
/// allows over all realizations, or when even error-free decoding could not
/// beat `incumbent`.
struct Prune {
    target: f64,
    incumbent: Option<f64>,
}

fn evaluate(config: &CampaignConfig, system: &SystemConfig, links: &[Link], backoff: Backoff, prune: Option<Prune>) -> Result<Evaluation> {
    let amc = AmcConfig {
        backoff,
        ..config.scenario.amc.clone()
    };
    let setups: Vec<FrameSetup> = links
        .iter()
        .map(|l| {
            let r = &l.report;
            let mcs = assign_mcs(r.common_rate, &r.private_rates, &r.common_rate_split, &amc)?;
            FrameSetup::new(system, &l.estimate, &l.precoders, &mcs, &amc)
        })
        .collect::<Result<_>>()?;
    let num = config.num_realizations;
    let setup_of = |l: usize| &setups[l % setups.len()];
    let mut eval = Evaluation {
        mcs: setups.iter().map(|s| s.mcs.clone()).collect(),
        records: Vec::with_capacity(num),
        complete: true,
    };

    let k_users = system.num_users();
    let allowed = prune.as_ref().map(|p| (p.target * num as f64 + 1e-9).floor() as usize);
    if let Some(incumbent) = prune.as_ref().and_then(|p| p.incumbent) {
        let ceiling = (0..k_users)
            .map(|k| {
                let g = system.groups.group_of(k);
                (0..num).map(|l| setup_of(l).mcs.group_payload(g) as f64).sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
            / (num * config.channel_uses()) as f64;
        if ceiling <= incumbent {
            eval.complete = false;
            return Ok(eval);
        }
    }
    let mut errors = vec![0usize; k_users];
    let step = if allowed.is_some() { CHUNK } else { num };
    for start in (0..num).step_by(step) {
        let end = (start + step).min(num);
        let chunk = (start..end)
            .into_par_iter()
            .map(|l| run_realization(l as u64, setup_of(l), config.master_seed))
            .collect::<Result<Vec<_>>>()?;
        for r in &chunk {
            for (e, b) in errors.iter_mut().zip(&r.block_error) {
                *e += usize::from(*b);
            }
        }
        eval.records.extend(chunk);
        if allowed.is_some_and(|a| errors.iter().any(|e| *e > a)) && end < num {
            eval.complete = false;
            return Ok(eval);
        }
    }
    Ok(eval)
}

#[derive(Clone)]
struct Calibrated {
    backoff: Backoff,
    violation: bool,
    trials: Vec<BackoffTrial>,
    eval: Evaluation,
    throughput: f64,
}

fn calibrated(config: &CampaignConfig, system: &SystemConfig, links: &[Link]) -> Result<Calibrated> {
    let s = config.channel_uses();
    let settings = &config.backoff;
    let finish = |backoff, violation, trials, eval: Evaluation| Calibrated {
        backoff,
        violation,
        trials,
        throughput: mmf_throughput(&eval.records, s),
        eval,
    };
    if !settings.calibrate {
        let eval = evaluate(config, system, links, settings.fixed, None)?;
        return Ok(finish(settings.fixed, false, Vec::new(), eval));
    }
    let mut cache: Vec<(Backoff, Evaluation)> = Vec::new();
    let cal = calibrate_backoff(&settings.grid_db, settings.target_bler, settings.mode, |b, incumbent| {
        let prune = Prune {
            target: settings.target_bler,
            incumbent,
        };
        let ev = evaluate(config, system, links, b, Some(prune))?;
        let trial = BackoffTrial {
            backoff: b,
            throughput: mmf_throughput(&ev.records, s),
            bler: bler_per_user(&ev.records),
            complete: ev.complete,
        };
        if ev.complete {
            cache.push((b, ev));
        }
        Ok(trial)
    })?;
    let eval = match cache.iter().position(|(b, _)| *b == cal.backoff) {
        Some(pos) => cache.swap_remove(pos).1,
        None => evaluate(config, system, links, cal.backoff, None)?,
    };
    Ok(finish(cal.backoff, cal.violation, cal.trials, eval))
}

fn point_result(strategy: Strategy, point: f64, system: &SystemConfig, cal: Calibrated, links: &[Link], optimum: &[Link], s: usize) -> PointResult {
    let eval = cal.eval;
    let k_users = system.num_users();
    let recovered_bits: Vec<u64> = (0..k_users)
        .map(|k| eval.records.iter().map(|r| r.recovered_bits[k] as u64).sum())
        .collect();
    let total_uses = (eval.records.len() * s) as f64;
    let assigned_rate = (0..k_users)
        .map(|k| eval.records.iter().map(|r| r.payload_bits[k] as f64).sum::<f64>() / total_uses)
        .fold(f64::INFINITY, f64::min);
    let first = &links[0];
    PointResult {
        strategy,
        point,
        status: Ok(()),
        shannon_bound: optimum.iter().map(|l| l.report.mmf_value).sum::<f64>() / optimum.len() as f64,
        assigned_rate,
        mmf_throughput: cal.throughput,
        bler: bler_per_user(&eval.records),
        recovered_bits,
        channel_uses: total_uses as u64,
        backoff: cal.backoff,
        backoff_violation: cal.violation,
        calibration: cal.trials,
        common_stream: links.iter().any(|l| !l.precoders.is_sdma()),
        precoders: Some(first.precoders.clone()),
        average_rates: Some(first.report.clone()),
        termination: first.termination,
        mcs_varies: eval.mcs.iter().any(|m| *m != eval.mcs[0]),
        mcs: eval.mcs.into_iter().next(),
        records: eval.records,
    }
}

/// Every requested strategy at one operating point.
///
/// Precoders are optimized once: the RSMA search carries the SDMA optimum
/// along, which serves both the SDMA rows and the RSMA fallback. An RSMA
/// transmitter may run its SDMA special case (`p_c = 0`); the configuration
/// with the larger calibrated throughput is kept.
fn run_point(config: &CampaignConfig, strategies: &[Strategy], point: f64, loaded: Option<&PrecoderSet>) -> Result<Vec<PointResult>> {
    let mut system = config.scenario.system.clone();
    system.power = config.axis.constraints(&system, point);
    let links = point_links(config, &system, loaded)?;
    let s = config.channel_uses();
    let for_strategy = |st: Strategy| -> SystemConfig {
        let mut sys = system.clone();
        sys.strategy = st;
        sys
    };

    let sdma_cal = match &links.sdma {
        Some(l) => Some(calibrated(config, &for_strategy(Strategy::Sdma), l)?),
        None => None,
    };
    let missing = |what: &str| Error::Optimizer(format!("no {what} precoders"));
    let mut out = Vec::new();
    for &st in strategies {
        let sys = for_strategy(st);
        match st {
            Strategy::Sdma => {
                let l = links.sdma.as_ref().ok_or_else(|| missing("SDMA"))?;
                let cal = sdma_cal.clone().ok_or_else(|| missing("SDMA"))?;
                out.push(point_result(st, point, &sys, cal, l, l, s));
            }
            Strategy::Rsma => {
                let l = links.rsma.as_ref().ok_or_else(|| missing("RSMA"))?;
                let own = calibrated(config, &sys, l)?;
                let has_common = l.iter().any(|x| !x.precoders.is_sdma());
                let fallback_wins = |f: &Calibrated| {
                    (!f.violation && own.violation) || (f.violation == own.violation && f.throughput > own.throughput)
                };
                match (&links.sdma, &sdma_cal) {
                    (Some(sl), Some(f)) if has_common && fallback_wins(f) => {
                        out.push(point_result(st, point, &sys, f.clone(), sl, l, s));
                    }
                    _ => out.push(point_result(st, point, &sys, own, l, l, s)),
                }
            }
        }
    }
    Ok(out)
}

/// Runs every (strategy, operating point) pair. Configuration errors are
/// returned; failures at a single point mark that point invalid.
pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignResult> {
    config.validate()?;
    let loaded = match &config.precoder_file {
        Some(path) => Some(load_precoders(path, &config.scenario.system)?),
        None => None,
    };
    let strategies: Vec<Strategy> = match &loaded {
        Some(set) => vec![if set.is_sdma() { Strategy::Sdma } else { Strategy::Rsma }],
        None => config.strategies.clone(),
    };
    let per_point: Vec<Vec<PointResult>> = config
        .operating_points
        .par_iter()
        .map(|&p| {
            run_point(config, &strategies, p, loaded.as_ref()).unwrap_or_else(|e| {
                strategies
                    .iter()
                    .map(|&st| PointResult::invalid(st, p, e.to_string()))
                    .collect()
            })
        })
        .collect();
    let mut points = Vec::new();
    for st in &strategies {
        for row in &per_point {
            points.extend(row.iter().filter(|r| r.strategy == *st).cloned());
        }
    }
    Ok(CampaignResult {
        scenario: config.scenario.name.clone(),
        axis: config.axis,
        master_seed: config.master_seed,
        num_realizations: config.num_realizations,
        num_users: config.scenario.system.num_users(),
        points,
    })
}

//! Domain types and the closed-form signal, SINR and rate expressions of the
//! one-layer rate-splitting multigroup multicast downlink.
//!
//! The transmitter superposes one common stream `s_c` and `M` private
//! (per-group) streams: `x = p_c s_c + sum_m p_m s_m`. Every user decodes the
//! common stream first, cancels it, then decodes its own group's private
//! stream. Rates are in bps/Hz (log base 2).

use crate::error::{check_dim, Error, Result};
use crate::{CMatrix, CVector, C64};
use serde::{Deserialize, Serialize};

/// Multiple-access strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Rsma,
    Sdma,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Rsma => "rsma",
            Strategy::Sdma => "sdma",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rsma" => Ok(Strategy::Rsma),
            "sdma" => Ok(Strategy::Sdma),
            other => Err(Error::InvalidConfig(format!("unknown strategy '{other}'"))),
        }
    }
}

/// Assignment of users to multicast groups. Users and groups are 0-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupMap {
    user_group: Vec<usize>,
    num_groups: usize,
}

impl GroupMap {
    /// Builds the map `user -> group`, requiring every group to be nonempty.
    pub fn new(user_group: Vec<usize>, num_groups: usize) -> Result<Self> {
        if num_groups == 0 || user_group.is_empty() {
            return Err(Error::InvalidConfig("need at least one user and one group".into()));
        }
        let mut seen = vec![false; num_groups];
        for (k, &g) in user_group.iter().enumerate() {
            if g >= num_groups {
                return Err(Error::InvalidConfig(format!(
                    "user {k} mapped to group {g}, only {num_groups} groups"
                )));
            }
            seen[g] = true;
        }
        if let Some(m) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidConfig(format!("group {m} has no users")));
        }
        Ok(GroupMap {
            user_group,
            num_groups,
        })
    }

    /// `num_groups` groups of `users_per_group` consecutive users each.
    pub fn uniform(num_groups: usize, users_per_group: usize) -> Result<Self> {
        let map = (0..num_groups * users_per_group)
            .map(|k| k / users_per_group.max(1))
            .collect();
        GroupMap::new(map, num_groups)
    }

    pub fn num_users(&self) -> usize {
        self.user_group.len()
    }

    pub fn num_groups(&self) -> usize {
        self.num_groups
    }

    pub fn group_of(&self, user: usize) -> usize {
        self.user_group[user]
    }

    pub fn members(&self, group: usize) -> impl Iterator<Item = usize> + '_ {
        self.user_group
            .iter()
            .enumerate()
            .filter(move |(_, &g)| g == group)
            .map(|(k, _)| k)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.user_group
    }
}

/// Which family of transmit power constraints is in force.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PowerBudget {
    /// `||p_c||^2 + sum_m ||p_m||^2 <= P_t`.
    SumPower(f64),
    /// `(P P^H)_{n,n} <= P_n` for every antenna.
    PerAntenna(Vec<f64>),
}

/// One generalized constraint `p_c^H D p_c + sum_m p_m^H D p_m <= limit`
/// with diagonal shaping matrix `D`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerConstraint {
    pub shaping: Vec<f64>,
    pub limit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerConstraintSet {
    budget: PowerBudget,
    constraints: Vec<PowerConstraint>,
}

impl PowerConstraintSet {
    pub fn sum_power(num_tx: usize, total: f64) -> Self {
        PowerConstraintSet {
            budget: PowerBudget::SumPower(total),
            constraints: vec![PowerConstraint {
                shaping: vec![1.0; num_tx],
                limit: total,
            }],
        }
    }

    pub fn per_antenna(limits: Vec<f64>) -> Self {
        let n = limits.len();
        let constraints = limits
            .iter()
            .enumerate()
            .map(|(l, &limit)| {
                let mut shaping = vec![0.0; n];
                shaping[l] = 1.0;
                PowerConstraint { shaping, limit }
            })
            .collect();
        PowerConstraintSet {
            budget: PowerBudget::PerAntenna(limits),
            constraints,
        }
    }

    pub fn budget(&self) -> &PowerBudget {
        &self.budget
    }

    pub fn constraints(&self) -> &[PowerConstraint] {
        &self.constraints
    }

    pub fn num_tx(&self) -> usize {
        self.constraints[0].shaping.len()
    }

    /// Total power budget: `P_t` for a sum constraint, `sum_n P_n` otherwise.
    pub fn total_power(&self) -> f64 {
        match &self.budget {
            PowerBudget::SumPower(p) => *p,
            PowerBudget::PerAntenna(v) => v.iter().sum(),
        }
    }

    /// Same family and proportions, rescaled to a new total budget.
    pub fn scaled_to_total(&self, total: f64) -> Self {
        match &self.budget {
            PowerBudget::SumPower(_) => Self::sum_power(self.num_tx(), total),
            PowerBudget::PerAntenna(v) => {
                let f = total / v.iter().sum::<f64>();
                Self::per_antenna(v.iter().map(|p| p * f).collect())
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.constraints {
            if !(c.limit > 0.0) || !c.limit.is_finite() {
                return Err(Error::InfeasiblePower(format!("limit {} must be positive", c.limit)));
            }
            if c.shaping.iter().any(|d| *d < 0.0 || !d.is_finite()) {
                return Err(Error::InfeasiblePower("negative shaping entry".into()));
            }
        }
        Ok(())
    }
}

/// Static description of the downlink.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub num_tx_antennas: usize,
    pub groups: GroupMap,
    pub power: PowerConstraintSet,
    /// CSIT scaling factor: the CSIT error variance is `P^-alpha`.
    pub csit_alpha: f64,
    pub strategy: Strategy,
    pub noise_variance: f64,
    /// Zero CSIT error regardless of `csit_alpha`.
    #[serde(default)]
    pub perfect_csit: bool,
}

impl SystemConfig {
    pub fn num_users(&self) -> usize {
        self.groups.num_users()
    }

    pub fn num_groups(&self) -> usize {
        self.groups.num_groups()
    }

    /// Error variance `sigma_e^2 = P^-alpha` with `P` the total power budget.
    pub fn csit_error_variance(&self) -> f64 {
        if self.perfect_csit {
            0.0
        } else {
            self.power.total_power().powf(-self.csit_alpha)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_tx_antennas == 0 {
            return Err(Error::InvalidConfig("num_tx_antennas must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.csit_alpha) {
            return Err(Error::InvalidConfig(format!(
                "csit_alpha {} outside [0, 1]",
                self.csit_alpha
            )));
        }
        if !(self.noise_variance > 0.0) {
            return Err(Error::InvalidConfig("noise variance must be positive".into()));
        }
        check_dim("power shaping", self.num_tx_antennas, self.power.num_tx())?;
        self.power.validate()
    }
}

/// Realization of the channel: `true_channel = estimate + error` element-wise.
#[derive(Clone, Debug)]
pub struct ChannelRealization {
    pub true_channel: CMatrix,
    pub estimate: CMatrix,
    pub error: CMatrix,
}

/// Common precoder, one private precoder per group, and the split of the
/// common rate among groups (`C_m`, bps/Hz).
#[derive(Clone, Debug, PartialEq)]
pub struct PrecoderSet {
    pub common: CVector,
    pub private: Vec<CVector>,
    pub common_rate_split: Vec<f64>,
}

impl PrecoderSet {
    pub fn zeros(num_tx: usize, num_groups: usize) -> Self {
        PrecoderSet {
            common: CVector::zeros(num_tx),
            private: vec![CVector::zeros(num_tx); num_groups],
            common_rate_split: vec![0.0; num_groups],
        }
    }

    pub fn num_tx(&self) -> usize {
        self.common.len()
    }

    pub fn num_groups(&self) -> usize {
        self.private.len()
    }

    /// True when the set is an SDMA point: no common precoder, no split.
    pub fn is_sdma(&self) -> bool {
        self.common.iter().all(|c| *c == C64::new(0.0, 0.0))
            && self.common_rate_split.iter().all(|c| *c == 0.0)
    }

    /// Sum of `C_m`.
    pub fn total_split(&self) -> f64 {
        self.common_rate_split.iter().sum()
    }

    /// Power spent under shaping `D`: `p_c^H D p_c + sum_m p_m^H D p_m`.
    pub fn shaped_power(&self, shaping: &[f64]) -> f64 {
        std::iter::once(&self.common)
            .chain(self.private.iter())
            .map(|p| {
                p.iter()
                    .zip(shaping)
                    .map(|(x, d)| d * x.norm_sqr())
                    .sum::<f64>()
            })
            .sum()
    }

    pub fn validate(&self, config: &SystemConfig) -> Result<()> {
        check_dim("precoder groups", config.num_groups(), self.num_groups())?;
        check_dim("rate split groups", config.num_groups(), self.common_rate_split.len())?;
        check_dim("common precoder length", config.num_tx_antennas, self.common.len())?;
        for p in &self.private {
            check_dim("private precoder length", config.num_tx_antennas, p.len())?;
        }
        if self.common_rate_split.iter().any(|c| *c < 0.0 || !c.is_finite()) {
            return Err(Error::InvalidConfig("negative common-rate split".into()));
        }
        Ok(())
    }
}

/// Instantaneous rates of all streams at all users for one channel.
#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    pub common_rates_per_user: Vec<f64>,
    pub common_rate: f64,
    pub private_rates_per_user: Vec<f64>,
    pub group_private_rates: Vec<f64>,
    pub group_rates: Vec<f64>,
    /// `sum_m C_m` of the evaluated precoder set.
    pub total_split: f64,
}

impl RateReport {
    /// Whether `sum_m C_m <= R_c` (with a small absolute slack).
    pub fn split_feasible(&self) -> bool {
        self.total_split <= self.common_rate + 1e-12
    }

    /// Errors out when the common-rate split overshoots the common rate.
    pub fn require_feasible_split(&self) -> Result<()> {
        if self.split_feasible() {
            Ok(())
        } else {
            Err(Error::InfeasibleSplit {
                split: self.total_split,
                common_rate: self.common_rate,
            })
        }
    }

    pub fn min_group_rate(&self) -> f64 {
        self.group_rates.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `h^H p`.
pub fn inner(h: &CVector, p: &CVector) -> C64 {
    h.iter().zip(p.iter()).map(|(a, b)| a.conj() * b).sum()
}

/// `x = p_c s_c + sum_m p_m s_m` for symbols ordered `[s_c, s_1, ..., s_M]`.
pub fn superpose(precoders: &PrecoderSet, symbols: &[C64]) -> Result<CVector> {
    check_dim("symbol count", precoders.num_groups() + 1, symbols.len())?;
    let mut x = &precoders.common * symbols[0];
    for (p, s) in precoders.private.iter().zip(&symbols[1..]) {
        x += p * *s;
    }
    Ok(x)
}

/// Result of checking the generalized power constraints.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerCheck {
    pub satisfied: bool,
    /// `P_l - used_l` per constraint.
    pub slack: Vec<f64>,
}

/// Checks every constraint with relative tolerance: `used_l <= P_l (1 + tol)`.
pub fn check_power(
    precoders: &PrecoderSet,
    constraints: &PowerConstraintSet,
    tolerance: f64,
) -> PowerCheck {
    let mut satisfied = true;
    let slack = constraints
        .constraints()
        .iter()
        .map(|c| {
            let used = precoders.shaped_power(&c.shaping);
            if used > c.limit * (1.0 + tolerance) {
                satisfied = false;
            }
            c.limit - used
        })
        .collect();
    PowerCheck { satisfied, slack }
}

/// Received powers `|h^H p_c|^2` and `|h^H p_m|^2` for all groups.
pub fn stream_gains(h: &CVector, precoders: &PrecoderSet) -> (f64, Vec<f64>) {
    let common = inner(h, &precoders.common).norm_sqr();
    let private = precoders
        .private
        .iter()
        .map(|p| inner(h, p).norm_sqr())
        .collect();
    (common, private)
}

/// SINR of the common stream at a user whose group is `group`; every private
/// stream (own group included) is treated as noise.
pub fn sinr_common(h: &CVector, precoders: &PrecoderSet, group: usize, noise_variance: f64) -> f64 {
    let _ = group;
    let (common, private) = stream_gains(h, precoders);
    let interference: f64 = private.iter().sum();
    common / (interference + noise_variance)
}

/// SINR of the own-group private stream after the common stream was removed.
pub fn sinr_private(h: &CVector, precoders: &PrecoderSet, group: usize, noise_variance: f64) -> f64 {
    let (_, private) = stream_gains(h, precoders);
    let signal = private[group];
    let interference: f64 = private
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != group)
        .map(|(_, g)| g)
        .sum();
    signal / (interference + noise_variance)
}

pub fn rate_from_sinr(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

/// Evaluates all stream rates and group rates for one channel matrix
/// (`N_t x K`, column `k` is `h_k`).
///
/// An infeasible split (`sum C_m > R_c`) is reported through
/// [`RateReport::split_feasible`], never clipped.
pub fn evaluate_group_rates(
    channel: &CMatrix,
    precoders: &PrecoderSet,
    config: &SystemConfig,
) -> Result<RateReport> {
    check_dim("channel users", config.num_users(), channel.ncols())?;
    check_dim("channel antennas", precoders.num_tx(), channel.nrows())?;
    check_dim("precoder groups", config.num_groups(), precoders.num_groups())?;
    let sigma2 = config.noise_variance;
    let mut common_rates = Vec::with_capacity(channel.ncols());
    let mut private_rates = Vec::with_capacity(channel.ncols());
    for k in 0..channel.ncols() {
        let h: CVector = channel.column(k).into_owned();
        let g = config.groups.group_of(k);
        common_rates.push(rate_from_sinr(sinr_common(&h, precoders, g, sigma2)));
        private_rates.push(rate_from_sinr(sinr_private(&h, precoders, g, sigma2)));
    }
    Ok(assemble_report(
        common_rates,
        private_rates,
        &config.groups,
        &precoders.common_rate_split,
    ))
}

/// Builds a [`RateReport`] from per-user common and private rates.
pub fn assemble_report(
    common_rates_per_user: Vec<f64>,
    private_rates_per_user: Vec<f64>,
    groups: &GroupMap,
    split: &[f64],
) -> RateReport {
    let common_rate = common_rates_per_user
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let group_private_rates: Vec<f64> = (0..groups.num_groups())
        .map(|m| {
            groups
                .members(m)
                .map(|k| private_rates_per_user[k])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let group_rates = group_private_rates
        .iter()
        .zip(split)
        .map(|(r, c)| c + r)
        .collect();
    RateReport {
        common_rates_per_user,
        common_rate,
        private_rates_per_user,
        group_private_rates,
        group_rates,
        total_split: split.iter().sum(),
    }
}

//! Adaptive modulation and coding driven by average rates.
//!
//! Each stream `l` with average rate `R` gets the smallest alphabet with
//! `log2|M| >= min(R / beta, m')`, block length `N = S log2|M|` and code rate
//! `r = ceil(N min(R / log2|M|, beta)) / N`. Of the `r N` bits, the CRC takes
//! its share and the rest is payload. Back-off de-rates the average rate
//! before all of this: `R_eff = R 10^(-dB/10)`.

use crate::error::{Error, Result};
use crate::phy::Modulation;
use crate::polar::{design_z_for_rate, CrcSpec, PolarCodeConfig};
use serde::{Deserialize, Serialize};

/// Slack for the ceiling in the code-rate rule, so that `N R / m` landing a
/// rounding error above an integer does not add a bit.
const CEIL_SLACK: f64 = 1e-9;

/// Back-off in dB for each stream class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Backoff {
    pub common_db: f64,
    pub private_db: f64,
}

impl Backoff {
    pub fn uniform(db: f64) -> Self {
        Backoff {
            common_db: db,
            private_db: db,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.common_db == 0.0 && self.private_db == 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmcConfig {
    /// Candidate alphabets, any order.
    pub alphabets: Vec<Modulation>,
    /// Maximum code rate `beta`.
    pub max_code_rate: f64,
    /// `m'`, the cap on `R / beta` (8 for 256-QAM).
    pub max_order_log: usize,
    /// Channel uses per frame `S`.
    pub stream_length: usize,
    pub backoff: Backoff,
    pub crc: CrcSpec,
    pub list_size: usize,
    #[serde(default)]
    pub common_split: CommonSplit,
}

/// How the common payload is divided among groups.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommonSplit {
    /// In proportion to the optimizer's common-rate split `C_m`.
    #[default]
    Proportional,
    /// Equal shares, remainder to the first group.
    Equal,
}

impl Default for AmcConfig {
    fn default() -> Self {
        AmcConfig {
            alphabets: Modulation::ALL.to_vec(),
            max_code_rate: 0.9,
            max_order_log: 8,
            stream_length: 256,
            backoff: Backoff::default(),
            crc: CrcSpec::CCITT16,
            list_size: 8,
            common_split: CommonSplit::Proportional,
        }
    }
}

impl AmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alphabets.is_empty() {
            return Err(Error::InvalidConfig("empty alphabet set".into()));
        }
        if !(self.max_code_rate > 0.0 && self.max_code_rate <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "max code rate {} outside (0, 1]",
                self.max_code_rate
            )));
        }
        if self.stream_length == 0 {
            return Err(Error::InvalidConfig("stream length must be positive".into()));
        }
        if self.list_size == 0 {
            return Err(Error::InvalidConfig("list size must be positive".into()));
        }
        for db in [self.backoff.common_db, self.backoff.private_db] {
            if !(db >= 0.0 && db.is_finite()) {
                return Err(Error::InvalidConfig(format!("back-off {db} dB must be >= 0")));
            }
        }
        Ok(())
    }

    fn sorted_alphabets(&self) -> Vec<Modulation> {
        let mut a = self.alphabets.clone();
        a.sort();
        a.dedup();
        a
    }
}

/// Smallest alphabet with `log2|M| >= min(R / beta, m')`; the largest one if
/// none qualifies. Nonpositive rates get the smallest alphabet.
pub fn select_modulation(rate: f64, amc: &AmcConfig) -> Modulation {
    let alphabets = amc.sorted_alphabets();
    let need = (rate.max(0.0) / amc.max_code_rate).min(amc.max_order_log as f64);
    alphabets
        .iter()
        .copied()
        .find(|q| q.bits_per_symbol() as f64 >= need)
        .unwrap_or(*alphabets.last().expect("validated alphabet set"))
}

/// Block length and code rate of one stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeParams {
    pub block_length: usize,
    /// `r N`, the number of coded-rate bits (payload plus CRC).
    pub rate_bits: usize,
}

impl CodeParams {
    pub fn rate(&self) -> f64 {
        self.rate_bits as f64 / self.block_length as f64
    }
}

/// `N = S log2|M|` and `r = ceil(N min(R / log2|M|, beta)) / N`.
pub fn code_params(rate: f64, modulation: Modulation, stream_length: usize, max_code_rate: f64) -> CodeParams {
    let m = modulation.bits_per_symbol() as f64;
    let block_length = stream_length * modulation.bits_per_symbol();
    let target = block_length as f64 * (rate.max(0.0) / m).min(max_code_rate);
    let rate_bits = ((target - CEIL_SLACK).ceil().max(0.0) as usize).min(block_length);
    CodeParams {
        block_length,
        rate_bits,
    }
}

/// Modulation and coding of one stream.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamMcs {
    pub modulation: Modulation,
    pub params: CodeParams,
    /// Payload bits `r N - crc_len`; zero disables the stream.
    pub info_bits: usize,
    /// Average rate after back-off.
    pub effective_rate: f64,
}

impl StreamMcs {
    pub fn is_enabled(&self) -> bool {
        self.info_bits > 0
    }

    /// The polar code carrying this stream, `None` when disabled.
    pub fn polar_code(&self, amc: &AmcConfig) -> Result<Option<PolarCodeConfig>> {
        if !self.is_enabled() {
            return Ok(None);
        }
        let n = self.params.block_length;
        let z = design_z_for_rate(self.params.rate());
        PolarCodeConfig::new(n, self.info_bits, amc.crc, amc.list_size, z).map(Some)
    }

    /// Short label such as `16qam:768/1024`.
    pub fn label(&self) -> String {
        format!(
            "{}:{}/{}",
            self.modulation, self.params.rate_bits, self.params.block_length
        )
    }
}

fn stream_mcs(rate: f64, backoff_db: f64, amc: &AmcConfig) -> StreamMcs {
    let effective_rate = rate.max(0.0) * 10f64.powf(-backoff_db / 10.0);
    let modulation = select_modulation(effective_rate, amc);
    let params = code_params(effective_rate, modulation, amc.stream_length, amc.max_code_rate);
    StreamMcs {
        modulation,
        params,
        info_bits: params.rate_bits.saturating_sub(amc.crc.len()),
        effective_rate,
    }
}

/// Per-stream MCS of one operating point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McsAssignment {
    pub common: StreamMcs,
    pub private: Vec<StreamMcs>,
    /// Payload bits of the common message owned by each group.
    pub common_split_bits: Vec<usize>,
    pub backoff: Backoff,
}

impl McsAssignment {
    /// Payload of group `m`: its common share plus its private stream.
    pub fn group_payload(&self, group: usize) -> usize {
        self.common_split_bits[group] + self.private[group].info_bits
    }

    /// Compact description, e.g. `c=4qam:128/512 p=16qam:700/1024|...`.
    pub fn summary(&self) -> String {
        let private: Vec<String> = self.private.iter().map(StreamMcs::label).collect();
        format!("c={} p={}", self.common.label(), private.join("|"))
    }
}

/// Splits `total` bits in proportion to `weights`, rounding down and giving
/// the remainder to the first group. Zero total weight splits evenly.
pub fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    if weights.is_empty() {
        return Vec::new();
    }
    let sum: f64 = weights.iter().map(|w| w.max(0.0)).sum();
    let mut out: Vec<usize> = if sum > 0.0 {
        weights
            .iter()
            .map(|w| ((total as f64) * w.max(0.0) / sum).floor() as usize)
            .collect()
    } else {
        vec![total / weights.len(); weights.len()]
    };
    let used: usize = out.iter().sum();
    out[0] += total.saturating_sub(used);
    out
}

/// Applies back-off and the MCS rules to every stream. The common payload is
/// apportioned across groups in proportion to `common_rate_split`.
pub fn assign_mcs(
    common_rate: f64,
    private_rates: &[f64],
    common_rate_split: &[f64],
    amc: &AmcConfig,
) -> Result<McsAssignment> {
    amc.validate()?;
    if common_rate_split.len() != private_rates.len() {
        return Err(Error::DimensionMismatch {
            what: "common rate split",
            expected: private_rates.len(),
            found: common_rate_split.len(),
        });
    }
    let common = stream_mcs(common_rate, amc.backoff.common_db, amc);
    let private = private_rates
        .iter()
        .map(|&r| stream_mcs(r, amc.backoff.private_db, amc))
        .collect();
    let weights = match amc.common_split {
        CommonSplit::Proportional => common_rate_split.to_vec(),
        CommonSplit::Equal => vec![1.0; common_rate_split.len()],
    };
    Ok(McsAssignment {
        common_split_bits: apportion(common.info_bits, &weights),
        common,
        private,
        backoff: amc.backoff,
    })
}

/// Outcome of evaluating one back-off candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct BackoffTrial {
    pub backoff: Backoff,
    pub throughput: f64,
    pub bler: Vec<f64>,
    /// False when the evaluation stopped early because the candidate could
    /// not meet the target or beat the incumbent. Figures then cover only
    /// the part that was simulated.
    pub complete: bool,
}

impl BackoffTrial {
    pub fn meets(&self, target: f64) -> bool {
        self.complete && self.bler.iter().all(|b| *b <= target)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub backoff: Backoff,
    /// No candidate met the BLER target; `backoff` is then the largest one.
    pub violation: bool,
    pub trials: Vec<BackoffTrial>,
}

/// How back-off values are searched.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackoffMode {
    /// One value for both stream classes.
    Joint,
    /// Joint search, then each class is lowered separately while the target
    /// still holds.
    #[default]
    PerClass,
}

/// Picks the back-off maximizing MMF throughput among candidates whose
/// every user BLER is at most `target`. Ties go to the smaller back-off.
///
/// `evaluate` runs a short campaign for one candidate and also receives the
/// throughput of the best feasible candidate so far. It may stop early and
/// return an incomplete trial once the candidate cannot win. The grid is
/// searched in ascending order; see [`BackoffMode`] for the per-class
/// refinement.
pub fn calibrate_backoff<F>(grid: &[f64], target: f64, mode: BackoffMode, mut evaluate: F) -> Result<Calibration>
where
    F: FnMut(Backoff, Option<f64>) -> Result<BackoffTrial>,
{
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty back-off grid".into()));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut trials: Vec<BackoffTrial> = Vec::new();
    let mut run = |b: Backoff, incumbent: Option<f64>, trials: &mut Vec<BackoffTrial>| -> Result<BackoffTrial> {
        if let Some(t) = trials.iter().find(|t| t.backoff == b) {
            return Ok(t.clone());
        }
        let t = evaluate(b, incumbent)?;
        trials.push(t.clone());
        Ok(t)
    };
    let better = |a: &BackoffTrial, best: &Option<BackoffTrial>| match best {
        None => true,
        Some(b) => a.throughput > b.throughput,
    };

    let mut best: Option<BackoffTrial> = None;
    for &db in &grid {
        let t = run(Backoff::uniform(db), best.as_ref().map(|t| t.throughput), &mut trials)?;
        if t.meets(target) && better(&t, &best) {
            best = Some(t);
        }
    }
    let Some(mut best) = best else {
        let max = *grid.last().expect("nonempty grid");
        return Ok(Calibration {
            backoff: Backoff::uniform(max),
            violation: true,
            trials,
        });
    };
    if mode == BackoffMode::PerClass {
        for class in 0..2 {
            let start = best.backoff;
            let current = if class == 0 { start.common_db } else { start.private_db };
            for &db in grid.iter().filter(|&&d| d < current) {
                let mut b = start;
                if class == 0 {
                    b.common_db = db;
                } else {
                    b.private_db = db;
                }
                let t = run(b, Some(best.throughput), &mut trials)?;
                if t.meets(target) && t.throughput > best.throughput {
                    best = t;
                }
            }
        }
    }
    Ok(Calibration {
        backoff: best.backoff,
        violation: false,
        trials,
    })
}

/// `{0, 0.5, ..., 8}` dB.
pub fn default_backoff_grid() -> Vec<f64> {
    (0..=16).map(|i| i as f64 * 0.5).collect()
}

//! One CSV row per (strategy, operating point). Floats use the shortest
//! representation that parses back to the same value.

use super::{CampaignResult, PointResult, PowerAxis};
use crate::error::{Error, Result};
use crate::sysmodel::Strategy;
use std::io::{Read, Write};

/// The numeric and descriptive content of one CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSummary {
    pub scenario_id: String,
    pub strategy: Strategy,
    pub axis: PowerAxis,
    pub point: f64,
    pub mmf_throughput: f64,
    pub shannon_bound: f64,
    pub assigned_rate: f64,
    pub bler: Vec<f64>,
    pub mcs: String,
    pub backoff_common_db: f64,
    pub backoff_private_db: f64,
    pub backoff_violation: bool,
    pub realizations: usize,
    pub seed: u64,
    /// `ok` or the failure message of an invalid point.
    pub status: String,
}

impl PointSummary {
    pub(super) fn from_point(result: &CampaignResult, p: &PointResult) -> Self {
        let bler = if p.bler.is_empty() {
            vec![f64::NAN; result.num_users]
        } else {
            p.bler.clone()
        };
        PointSummary {
            scenario_id: result.scenario.clone(),
            strategy: p.strategy,
            axis: result.axis,
            point: p.point,
            mmf_throughput: p.mmf_throughput,
            shannon_bound: p.shannon_bound,
            assigned_rate: p.assigned_rate,
            bler,
            mcs: p.mcs_summary(),
            backoff_common_db: p.backoff.common_db,
            backoff_private_db: p.backoff.private_db,
            backoff_violation: p.backoff_violation,
            realizations: p.records.len(),
            seed: result.master_seed,
            status: match &p.status {
                Ok(()) => "ok".into(),
                Err(e) => format!("invalid: {e}"),
            },
        }
    }
}

fn header(axis: PowerAxis, num_users: usize) -> Vec<String> {
    let mut h: Vec<String> = ["scenario_id", "strategy", axis.column(), "mmf_throughput", "shannon_bound", "assigned_rate"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((1..=num_users).map(|k| format!("bler_user_{k}")));
    h.extend(
        [
            "mcs",
            "backoff_common_db",
            "backoff_private_db",
            "backoff_violation",
            "realizations",
            "seed",
            "status",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    h
}

/// Writes the rows of `summaries`; all rows must share axis and user count.
pub fn write_csv<W: Write>(summaries: &[PointSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let Some(first) = summaries.first() else {
        w.flush()?;
        return Ok(());
    };
    let k = first.bler.len();
    w.write_record(header(first.axis, k))?;
    for s in summaries {
        if s.bler.len() != k || s.axis != first.axis {
            return Err(Error::InvalidConfig("rows with different layouts in one CSV".into()));
        }
        let mut row = vec![
            s.scenario_id.clone(),
            s.strategy.name().to_string(),
            s.point.to_string(),
            s.mmf_throughput.to_string(),
            s.shannon_bound.to_string(),
            s.assigned_rate.to_string(),
        ];
        row.extend(s.bler.iter().map(f64::to_string));
        row.extend([
            s.mcs.clone(),
            s.backoff_common_db.to_string(),
            s.backoff_private_db.to_string(),
            s.backoff_violation.to_string(),
            s.realizations.to_string(),
            s.seed.to_string(),
            s.status.clone(),
        ]);
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    rec.get(i)
        .ok_or_else(|| Error::Malformed(format!("missing column {name}")))?
        .parse()
        .map_err(|_| Error::Malformed(format!("bad value in column {name}: {:?}", rec.get(i))))
}

/// Parses a file written by [`write_csv`].
pub fn read_csv<R: Read>(input: R) -> Result<Vec<PointSummary>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    let axis = headers
        .get(2)
        .and_then(PowerAxis::from_column)
        .ok_or_else(|| Error::Malformed("third column must be snr_db or power_dbw".into()))?;
    let k = headers.iter().filter(|h| h.starts_with("bler_user_")).count();
    if headers.iter().collect::<Vec<_>>() != header(axis, k) {
        return Err(Error::Malformed("unexpected CSV header".into()));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let strategy: Strategy = rec
            .get(1)
            .unwrap_or_default()
            .parse()
            .map_err(|_| Error::Malformed("bad strategy".into()))?;
        let tail = 6 + k;
        out.push(PointSummary {
            scenario_id: field(&rec, 0, "scenario_id")?,
            strategy,
            axis,
            point: field(&rec, 2, axis.column())?,
            mmf_throughput: field(&rec, 3, "mmf_throughput")?,
            shannon_bound: field(&rec, 4, "shannon_bound")?,
            assigned_rate: field(&rec, 5, "assigned_rate")?,
            bler: (0..k).map(|i| field(&rec, 6 + i, "bler")).collect::<Result<_>>()?,
            mcs: field(&rec, tail, "mcs")?,
            backoff_common_db: field(&rec, tail + 1, "backoff_common_db")?,
            backoff_private_db: field(&rec, tail + 2, "backoff_private_db")?,
            backoff_violation: field(&rec, tail + 3, "backoff_violation")?,
            realizations: field(&rec, tail + 4, "realizations")?,
            seed: field(&rec, tail + 5, "seed")?,
            status: field(&rec, tail + 6, "status")?,
        });
    }
    Ok(out)
}

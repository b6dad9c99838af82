//! File formats passed between pipeline stages.
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! reproduces the in-memory values bit for bit.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{compute_batch, ExclusionReport};
use crate::model::{MatchingKeyMode, MonthStamp, Ratio, SectorCategory, SortinoStats, WageSeries};
use crate::valuation::bracket_key;

#[derive(Debug, Serialize, Deserialize)]
struct SeriesRow {
    person_id: String,
    category: SectorCategory,
    year: i32,
    month: u32,
    wage: f64,
}

/// Long format, one row per observation: `person_id,category,year,month,wage`.
pub fn write_series_csv(series: &[WageSeries], writer: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for s in series {
        for &(stamp, wage) in s.observations() {
            wtr.serialize(SeriesRow {
                person_id: s.person_id().to_owned(),
                category: s.category(),
                year: stamp.year(),
                month: stamp.month(),
                wage,
            })?;
        }
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

type PendingSeries = (String, SectorCategory, Vec<(MonthStamp, f64)>);

/// Reads series written by [`write_series_csv`]; rows of a person must be contiguous.
pub fn read_series_csv(reader: impl Read) -> Result<Vec<WageSeries>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    let mut current: Option<PendingSeries> = None;
    for row in rdr.deserialize::<SeriesRow>() {
        let row = row?;
        let stamp = MonthStamp::new(row.year, row.month)?;
        match &mut current {
            Some((id, category, obs)) if *id == row.person_id => {
                if *category != row.category {
                    return Err(Error::series(id, "category changes within series"));
                }
                obs.push((stamp, row.wage));
            }
            _ => {
                if let Some((id, category, obs)) = current.take() {
                    out.push(WageSeries::new(id, category, obs)?);
                }
                current = Some((row.person_id, row.category, vec![(stamp, row.wage)]));
            }
        }
    }
    if let Some((id, category, obs)) = current {
        out.push(WageSeries::new(id, category, obs)?);
    }
    Ok(out)
}

/// A worker's stats together with both possible bracket keys.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerStats {
    pub person_id: String,
    pub category: SectorCategory,
    pub months_observed: usize,
    pub stats: SortinoStats,
    pub key_mean_2005: Option<f64>,
    pub key_first_three: Option<f64>,
}

impl WorkerStats {
    pub fn from_series(series: &WageSeries, stats: SortinoStats) -> Self {
        Self {
            person_id: series.person_id().to_owned(),
            category: series.category(),
            months_observed: series.len(),
            stats,
            key_mean_2005: bracket_key(series, MatchingKeyMode::Mean2005Wage).ok(),
            key_first_three: bracket_key(series, MatchingKeyMode::FirstThreeWageSum).ok(),
        }
    }

    pub fn key(&self, mode: MatchingKeyMode) -> Option<f64> {
        match mode {
            MatchingKeyMode::Mean2005Wage => self.key_mean_2005,
            MatchingKeyMode::FirstThreeWageSum => self.key_first_three,
        }
    }
}

/// Stats for every series plus exclusions, in input order.
pub fn worker_stats(series: &[WageSeries]) -> (Vec<WorkerStats>, ExclusionReport) {
    let batch = compute_batch(series);
    let workers = batch.computed.iter().map(|(s, st)| WorkerStats::from_series(s, *st)).collect();
    (workers, batch.exclusions)
}

#[derive(Debug, Serialize, Deserialize)]
struct StatsRow {
    person_id: String,
    category: SectorCategory,
    months_observed: usize,
    k: f64,
    total_wages: f64,
    return_rate: f64,
    downside_deviation: f64,
    sortino: String,
    key_mean_2005: Option<f64>,
    key_first_three: Option<f64>,
}

/// `person_id,category,months_observed,k,total_wages,return_rate,downside_deviation,sortino,key_mean_2005,key_first_three`.
/// An infinite Sortino ratio is written `inf`; a missing key is left empty.
pub fn write_stats_csv(workers: &[WorkerStats], writer: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for w in workers {
        wtr.serialize(StatsRow {
            person_id: w.person_id.clone(),
            category: w.category,
            months_observed: w.months_observed,
            k: w.stats.k(),
            total_wages: w.stats.total_wages(),
            return_rate: w.stats.return_rate(),
            downside_deviation: w.stats.downside_deviation(),
            sortino: w.stats.sortino().to_string(),
            key_mean_2005: w.key_mean_2005,
            key_first_three: w.key_first_three,
        })?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_stats_csv(reader: impl Read) -> Result<Vec<WorkerStats>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<StatsRow>().enumerate() {
        let row = row?;
        let line = i as u64 + 2;
        let stats = SortinoStats::from_parts(row.k, row.total_wages, row.downside_deviation)?;
        let stored: Ratio = row.sortino.parse()?;
        if stored.is_infinite() != stats.sortino().is_infinite() || stats.return_rate() != row.return_rate {
            return Err(Error::Malformed { line, reason: "stored ratios disagree with k, total and DD".into() });
        }
        out.push(WorkerStats {
            person_id: row.person_id,
            category: row.category,
            months_observed: row.months_observed,
            stats,
            key_mean_2005: row.key_mean_2005,
            key_first_three: row.key_first_three,
        });
    }
    Ok(out)
}

/// Per-stage JSON summary of the stats computation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsReport {
    pub workers_in: usize,
    pub workers_out: usize,
    pub infinite_sortino: BTreeMap<SectorCategory, usize>,
    pub exclusions: ExclusionReport,
}

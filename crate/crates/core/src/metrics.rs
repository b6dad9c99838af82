//! Per-worker return and downside-risk figures.
//!
//! Wages play two roles here. The wage *total* is the payoff earned on the
//! human-capital proxy `k`, while month-over-month *relative* changes are the
//! price fluctuations that drive downside deviation. The risk-free rate is
//! fixed at zero throughout.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Ratio, SortinoStats, WageSeries};

/// Multiplier applied to the mean of the first three wages to obtain `k`.
pub const HUMAN_CAPITAL_MULTIPLIER: f64 = 100.0;

/// `k = 100 × mean(first three wages)`.
pub fn human_capital_proxy(series: &WageSeries) -> Result<f64> {
    if series.len() < 3 {
        return Err(Error::InsufficientForK);
    }
    let first_three: f64 = series.wages().take(3).sum();
    Ok(HUMAN_CAPITAL_MULTIPLIER * first_three / 3.0)
}

/// `((k + total) / k) - 1`, evaluated as `total / k`.
pub fn return_rate(series: &WageSeries, k: f64) -> Result<f64> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::InvalidConfig(format!("k must be positive, got {k}")));
    }
    Ok(series.total() / k)
}

/// Relative changes `w[t+1] / w[t] - 1` between adjacent observations.
/// Gaps are not special: the pair spanning a gap is an ordinary change.
pub fn monthly_changes(series: &WageSeries) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(Error::NoChanges);
    }
    let obs = series.observations();
    Ok(obs.windows(2).map(|w| w[1].1 / w[0].1 - 1.0).collect())
}

/// Square root of the summed squared negative changes over the count of *all* changes.
pub fn downside_deviation(changes: &[f64]) -> Result<f64> {
    if changes.is_empty() {
        return Err(Error::EmptyChanges);
    }
    let downside: f64 = changes.iter().filter(|&&r| r < 0.0).map(|r| r * r).sum();
    Ok((downside / changes.len() as f64).sqrt())
}

pub fn sortino(return_rate: f64, downside_deviation: f64) -> Ratio {
    if downside_deviation == 0.0 {
        Ratio::Infinite
    } else {
        Ratio::Finite(return_rate / downside_deviation)
    }
}

/// Population standard deviation.
pub fn std_dev(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyChanges);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Ok((values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt())
}

/// Reference Sharpe ratio; not used for valuation.
pub fn sharpe(return_rate: f64, std_dev: f64) -> Ratio {
    if std_dev == 0.0 {
        Ratio::Infinite
    } else {
        Ratio::Finite(return_rate / std_dev)
    }
}

pub fn compute_stats(series: &WageSeries) -> Result<SortinoStats> {
    let k = human_capital_proxy(series)?;
    let changes = monthly_changes(series)?;
    let dd = downside_deviation(&changes)?;
    SortinoStats::from_parts(k, series.total(), dd)
}

/// Outcome of computing stats over many workers.
#[derive(Debug, Clone, Default)]
pub struct StatsBatch<'a> {
    pub computed: Vec<(&'a WageSeries, SortinoStats)>,
    pub exclusions: ExclusionReport,
}

/// Workers dropped for failing a precondition, counted by reason.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionReport {
    pub by_reason: BTreeMap<String, usize>,
    pub excluded_ids: Vec<String>,
}

impl ExclusionReport {
    pub fn record(&mut self, person_id: &str, reason: &str) {
        *self.by_reason.entry(reason.to_owned()).or_default() += 1;
        self.excluded_ids.push(person_id.to_owned());
    }

    pub fn total(&self) -> usize {
        self.by_reason.values().sum()
    }

    pub fn merge(mut self, other: ExclusionReport) -> ExclusionReport {
        for (reason, count) in other.by_reason {
            *self.by_reason.entry(reason).or_default() += count;
        }
        self.excluded_ids.extend(other.excluded_ids);
        self
    }
}

/// Computes stats for every series in parallel. Failures become exclusions;
/// the output order follows the input order.
pub fn compute_batch(series: &[WageSeries]) -> StatsBatch<'_> {
    let results: Vec<_> = series.par_iter().map(|s| (s, compute_stats(s))).collect();
    let mut batch = StatsBatch::default();
    for (s, result) in results {
        match result {
            Ok(stats) => batch.computed.push((s, stats)),
            Err(e) => batch.exclusions.record(s.person_id(), &e.to_string()),
        }
    }
    batch
}

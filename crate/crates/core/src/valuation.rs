//! Private-sector income brackets and the tenure valuation of government workers.
//!
//! A government worker is matched to the private bracket containing their
//! salary key. The return that would bring their Sortino ratio down to the
//! bracket's mean is `bracket_mean × DD`; the wage total implied by that
//! return is the risk-adjusted total, and tenure is worth the difference.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jenks::{jenks_breaks, to_bracket_table};
use crate::model::{
    Bracket, BracketTable, Cents, MatchingKeyMode, Ratio, SectorCategory, SortinoStats, TenureValuation,
    ValuationFlags, ValuationMode, WageSeries,
};

/// Year whose salaries define a worker's bracket under `MatchingKeyMode::Mean2005Wage`.
pub const BRACKET_BASE_YEAR: i32 = 2005;

/// Income brackets published for the 2005 private-sector sample, December 2019 R$.
pub const PUBLISHED_BOUNDS: [f64; 11] =
    [2.0, 1079.0, 2185.0, 4101.0, 7115.0, 11593.0, 18087.0, 28369.0, 46357.0, 72539.0, 154022.0];

/// Mean Sortino ratio of each published bracket.
pub const PUBLISHED_MEANS: [f64; 10] = [23.03, 13.37, 13.00, 13.50, 13.41, 13.21, 11.62, 10.54, 7.34, 5.27];

const PUBLISHED_CSV: &str = include_str!("../fixtures/published_brackets.csv");

/// The ten published private-sector brackets, loaded from the shipped CSV fixture.
pub fn published_bracket_table() -> BracketTable {
    read_brackets_csv(PUBLISHED_CSV.as_bytes()).expect("shipped bracket fixture is valid")
}

/// Salary statistic placing a worker in an income bracket.
pub fn bracket_key(series: &WageSeries, mode: MatchingKeyMode) -> Result<f64> {
    match mode {
        MatchingKeyMode::Mean2005Wage => {
            let (n, sum) = series
                .observations()
                .iter()
                .filter(|(s, _)| s.year() == BRACKET_BASE_YEAR)
                .fold((0usize, 0.0), |(n, sum), &(_, w)| (n + 1, sum + w));
            if n == 0 {
                return Err(Error::series(series.person_id(), format!("no {BRACKET_BASE_YEAR} observations")));
            }
            Ok(sum / n as f64)
        }
        MatchingKeyMode::FirstThreeWageSum => {
            if series.len() < 3 {
                return Err(Error::series(series.person_id(), "fewer than three observations"));
            }
            Ok(series.wages().take(3).sum())
        }
    }
}

/// Bookkeeping from building the private bracket table.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BracketBuildReport {
    pub workers_used: usize,
    /// Workers with zero downside deviation cannot enter an arithmetic mean.
    pub excluded_infinite_sortino: usize,
    pub class_sizes: Vec<usize>,
}

/// Clusters the private-sector keys and averages Sortino ratios per class.
pub fn build_private_brackets(
    private_stats: &[(f64, SortinoStats)],
    k_classes: usize,
) -> Result<(BracketTable, BracketBuildReport)> {
    let finite: Vec<(f64, f64)> =
        private_stats.iter().filter_map(|(key, s)| s.sortino().finite().map(|v| (*key, v))).collect();
    let keys: Vec<f64> = finite.iter().map(|&(k, _)| k).collect();
    if keys.is_empty() {
        return Err(Error::InvalidBrackets("no private workers with a finite Sortino ratio".into()));
    }
    let breaks = jenks_breaks(&keys, k_classes)?;
    let classes = breaks.class_count();
    let mut sums = vec![0.0; classes];
    let mut counts = vec![0usize; classes];
    for (&class, &(_, sortino)) in breaks.partition().iter().zip(&finite) {
        sums[class] += sortino;
        counts[class] += 1;
    }
    let means: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    let table = to_bracket_table(&breaks, &means)?;
    let report = BracketBuildReport {
        workers_used: finite.len(),
        excluded_infinite_sortino: private_stats.len() - finite.len(),
        class_sizes: counts,
    };
    Ok((table, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clamp {
    None,
    Below,
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketMatch {
    pub index: usize,
    pub bracket: Bracket,
    pub clamp: Clamp,
}

/// Bracket containing `key`. Keys outside the table go to the nearest end bracket.
pub fn lookup_bracket(table: &BracketTable, key: f64) -> BracketMatch {
    let brackets = table.brackets();
    let last = brackets.len() - 1;
    let (index, clamp) = if key < brackets[0].lower {
        (0, Clamp::Below)
    } else if key > brackets[last].upper {
        (last, Clamp::Above)
    } else {
        (brackets.partition_point(|b| b.lower <= key) - 1, Clamp::None)
    };
    BracketMatch { index, bracket: brackets[index], clamp }
}

/// Return rate equalizing the worker's Sortino ratio with the bracket mean.
pub fn required_return(bracket_mean_sortino: f64, downside_deviation: f64) -> f64 {
    bracket_mean_sortino * downside_deviation
}

pub fn risk_adjusted_total(required_return: f64, k: f64, actual_total: f64, mode: ValuationMode) -> f64 {
    match mode {
        ValuationMode::FormulaConsistent => required_return * k,
        ValuationMode::PaperExample => required_return * actual_total,
    }
}

/// Prices tenure for one worker given their stats and salary key.
pub fn value_tenure(
    person_id: &str,
    category: SectorCategory,
    months_observed: usize,
    stats: &SortinoStats,
    key: f64,
    table: &BracketTable,
    mode: ValuationMode,
) -> Result<TenureValuation> {
    let matched = lookup_bracket(table, key);
    let mut flags = ValuationFlags {
        clamped_below: matched.clamp == Clamp::Below,
        clamped_above: matched.clamp == Clamp::Above,
        ..ValuationFlags::default()
    };
    let required = match stats.sortino() {
        Ratio::Infinite => {
            flags.infinite_sortino = true;
            0.0
        }
        Ratio::Finite(_) => required_return(matched.bracket.mean_sortino, stats.downside_deviation()),
    };
    let adjusted = risk_adjusted_total(required, stats.k(), stats.total_wages(), mode);
    TenureValuation::new(
        person_id,
        category,
        months_observed,
        Cents::from_f64(stats.total_wages()),
        Cents::from_f64(adjusted),
        mode,
        flags,
    )
}

/// `value_tenure` taking the months and key straight from the series.
pub fn value_series(
    series: &WageSeries,
    stats: &SortinoStats,
    key_mode: MatchingKeyMode,
    table: &BracketTable,
    mode: ValuationMode,
) -> Result<TenureValuation> {
    let key = bracket_key(series, key_mode)?;
    value_tenure(series.person_id(), series.category(), series.len(), stats, key, table, mode)
}

/// `lower,upper,mean_sortino`
pub fn read_brackets_csv(reader: impl Read) -> Result<BracketTable> {
    let mut rdr = csv::Reader::from_reader(reader);
    let brackets = rdr.deserialize().collect::<std::result::Result<Vec<Bracket>, _>>()?;
    BracketTable::new(brackets)
}

pub fn write_brackets_csv(table: &BracketTable, writer: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for b in table.brackets() {
        wtr.serialize(b)?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_brackets_json(reader: impl Read) -> Result<BracketTable> {
    Ok(serde_json::from_reader(reader)?)
}

pub fn write_brackets_json(table: &BracketTable, writer: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(writer, table)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct ValuationRecord {
    person_id: String,
    category: SectorCategory,
    months_observed: usize,
    actual_total: Cents,
    risk_adjusted_total: Cents,
    tenure_total: Cents,
    tenure_monthly: f64,
    tenure_pct_of_salary: f64,
    mode: ValuationMode,
    flags: String,
}

pub fn write_valuations_csv(valuations: &[TenureValuation], writer: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for v in valuations {
        wtr.serialize(ValuationRecord {
            person_id: v.person_id.clone(),
            category: v.category,
            months_observed: v.months_observed,
            actual_total: v.actual_total,
            risk_adjusted_total: v.risk_adjusted_total,
            tenure_total: v.tenure_total,
            tenure_monthly: v.tenure_monthly,
            tenure_pct_of_salary: v.tenure_pct_of_salary,
            mode: v.mode,
            flags: v.flags.to_string(),
        })?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads valuations back, re-deriving tenure fields from the two wage totals
/// and rejecting rows whose stored tenure disagrees.
pub fn read_valuations_csv(reader: impl Read) -> Result<Vec<TenureValuation>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<ValuationRecord>().enumerate() {
        let rec = rec?;
        let v = TenureValuation::new(
            rec.person_id,
            rec.category,
            rec.months_observed,
            rec.actual_total,
            rec.risk_adjusted_total,
            rec.mode,
            rec.flags.parse()?,
        )?;
        if v.tenure_total != rec.tenure_total {
            return Err(Error::Malformed {
                line: i as u64 + 2,
                reason: format!("tenure_total {} != actual - risk-adjusted {}", rec.tenure_total, v.tenure_total),
            });
        }
        out.push(v);
    }
    Ok(out)
}

//! Seeded synthetic wage panels in the ingest CSV schema.
//!
//! Private workers follow a log-normal starting wage, multiplicative monthly
//! shocks and layoff spells. Public workers keep a fixed nominal wage that
//! steps up on the raise schedule, so once deflated their only cuts come from
//! inflation. A deterministic number of workers per category switch category
//! midway, and optional malformed rows exercise row-level rejection.

use std::collections::BTreeMap;
use std::io::Write;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MonthStamp, PriceIndex, SectorCategory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub rng_seed: u64,
    pub private_count: usize,
    pub federal_count: usize,
    pub state_count: usize,
    pub municipal_count: usize,
    pub private_layoff_monthly_prob: f64,
    pub private_wage_shock_sd: f64,
    pub private_wage_drift: f64,
    /// `(calendar month, nominal multiplier)` applied every year.
    pub public_raise_schedule: Vec<(u32, f64)>,
    /// Chance that a worker has one random absence spell.
    pub gap_prob: f64,
    /// Log-normal parameters of the starting real wage.
    pub base_wage_log_mean: f64,
    pub base_wage_log_sd: f64,
    pub federal_wage_multiplier: f64,
    pub state_wage_multiplier: f64,
    pub municipal_wage_multiplier: f64,
    pub monthly_inflation: f64,
    /// Share of each category's workers planted as category switchers.
    pub switcher_fraction: f64,
    pub malformed_rows: usize,
    pub first_month: MonthStamp,
    pub last_month: MonthStamp,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            rng_seed: 7,
            private_count: 1000,
            federal_count: 1000,
            state_count: 1000,
            municipal_count: 1000,
            private_layoff_monthly_prob: 0.01,
            private_wage_shock_sd: 0.04,
            private_wage_drift: 0.002,
            public_raise_schedule: vec![(1, 1.06)],
            gap_prob: 0.1,
            base_wage_log_mean: 7.8,
            base_wage_log_sd: 0.7,
            federal_wage_multiplier: 2.5,
            state_wage_multiplier: 1.6,
            municipal_wage_multiplier: 0.9,
            monthly_inflation: 0.004,
            switcher_fraction: 0.05,
            malformed_rows: 0,
            first_month: MonthStamp::new(2005, 1).unwrap(),
            last_month: MonthStamp::new(2019, 12).unwrap(),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse {value:?}")))
}

fn parse_schedule(value: &str) -> Result<Vec<(u32, f64)>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|entry| {
            let (month, mult) = entry
                .split_once(':')
                .ok_or_else(|| Error::InvalidConfig(format!("raise entry {entry:?} is not month:multiplier")))?;
            Ok((
                parse_value("public_raise_schedule", month.trim())?,
                parse_value("public_raise_schedule", mult.trim())?,
            ))
        })
        .collect()
}

impl GeneratorConfig {
    /// Same counts for every category.
    pub fn with_workers(mut self, per_category: usize) -> Self {
        self.private_count = per_category;
        self.federal_count = per_category;
        self.state_count = per_category;
        self.municipal_count = per_category;
        self
    }

    pub fn count(&self, category: SectorCategory) -> usize {
        match category {
            SectorCategory::Private => self.private_count,
            SectorCategory::Federal => self.federal_count,
            SectorCategory::State => self.state_count,
            SectorCategory::Municipal => self.municipal_count,
        }
    }

    fn wage_multiplier(&self, category: SectorCategory) -> f64 {
        match category {
            SectorCategory::Private => 1.0,
            SectorCategory::Federal => self.federal_wage_multiplier,
            SectorCategory::State => self.state_wage_multiplier,
            SectorCategory::Municipal => self.municipal_wage_multiplier,
        }
    }

    /// Switchers planted in a category: `round(switcher_fraction × count)`.
    pub fn switchers_in(&self, category: SectorCategory) -> usize {
        (self.switcher_fraction * self.count(category) as f64).round() as usize
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment;
    /// the raise schedule is written `1:1.06, 7:1.02`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = GeneratorConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key = value", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "rng_seed" => config.rng_seed = parse_value(key, value)?,
                "private_count" => config.private_count = parse_value(key, value)?,
                "federal_count" => config.federal_count = parse_value(key, value)?,
                "state_count" => config.state_count = parse_value(key, value)?,
                "municipal_count" => config.municipal_count = parse_value(key, value)?,
                "private_layoff_monthly_prob" => config.private_layoff_monthly_prob = parse_value(key, value)?,
                "private_wage_shock_sd" => config.private_wage_shock_sd = parse_value(key, value)?,
                "private_wage_drift" => config.private_wage_drift = parse_value(key, value)?,
                "public_raise_schedule" => config.public_raise_schedule = parse_schedule(value)?,
                "gap_prob" => config.gap_prob = parse_value(key, value)?,
                "base_wage_log_mean" => config.base_wage_log_mean = parse_value(key, value)?,
                "base_wage_log_sd" => config.base_wage_log_sd = parse_value(key, value)?,
                "federal_wage_multiplier" => config.federal_wage_multiplier = parse_value(key, value)?,
                "state_wage_multiplier" => config.state_wage_multiplier = parse_value(key, value)?,
                "municipal_wage_multiplier" => config.municipal_wage_multiplier = parse_value(key, value)?,
                "monthly_inflation" => config.monthly_inflation = parse_value(key, value)?,
                "switcher_fraction" => config.switcher_fraction = parse_value(key, value)?,
                "malformed_rows" => config.malformed_rows = parse_value(key, value)?,
                "first_month" => config.first_month = parse_value(key, value)?,
                "last_month" => config.last_month = parse_value(key, value)?,
                other => return Err(Error::InvalidConfig(format!("line {}: unknown key {other:?}", n + 1))),
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("private_layoff_monthly_prob", self.private_layoff_monthly_prob),
            ("gap_prob", self.gap_prob),
            ("switcher_fraction", self.switcher_fraction),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} = {p} outside [0, 1]")));
            }
        }
        let positive = [
            ("federal_wage_multiplier", self.federal_wage_multiplier),
            ("state_wage_multiplier", self.state_wage_multiplier),
            ("municipal_wage_multiplier", self.municipal_wage_multiplier),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if let Some(&(month, mult)) =
            self.public_raise_schedule.iter().find(|(m, x)| !(1..=12).contains(m) || !(x.is_finite() && *x > 0.0))
        {
            return Err(Error::InvalidConfig(format!("raise {month}:{mult} needs month 1-12 and multiplier > 0")));
        }
        if !(self.private_wage_shock_sd >= 0.0 && self.base_wage_log_sd >= 0.0) {
            return Err(Error::InvalidConfig("standard deviations must be non-negative".into()));
        }
        if self.monthly_inflation.is_nan() || self.monthly_inflation <= -1.0 {
            return Err(Error::InvalidConfig("monthly_inflation must exceed -1".into()));
        }
        if self.first_month > self.last_month {
            return Err(Error::InvalidConfig("first_month after last_month".into()));
        }
        Ok(())
    }

    fn months(&self) -> Vec<MonthStamp> {
        self.first_month.range_inclusive(self.last_month).collect()
    }

    /// Price index compounding `monthly_inflation` from 100 at the first month,
    /// referenced to the last month.
    pub fn price_index(&self) -> Result<PriceIndex> {
        let entries: BTreeMap<_, _> = self
            .months()
            .into_iter()
            .enumerate()
            .map(|(t, s)| (s, 100.0 * (1.0 + self.monthly_inflation).powi(t as i32)))
            .collect();
        PriceIndex::new(self.last_month, entries)
    }
}

/// What the generator planted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub rows_written: usize,
    pub workers: BTreeMap<SectorCategory, usize>,
    pub switchers_planted: usize,
    pub switcher_ids: Vec<String>,
    pub malformed_rows: usize,
}

fn id_prefix(category: SectorCategory) -> char {
    match category {
        SectorCategory::Private => 'P',
        SectorCategory::Federal => 'F',
        SectorCategory::State => 'S',
        SectorCategory::Municipal => 'M',
    }
}

/// Real wages of one worker, `None` for absent months.
fn wage_path(
    config: &GeneratorConfig,
    category: SectorCategory,
    months: &[MonthStamp],
    index: &PriceIndex,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Option<f64>>> {
    let reference = index.get(index.reference())?;
    let base = LogNormal::new(config.base_wage_log_mean, config.base_wage_log_sd)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?
        .sample(rng)
        * config.wage_multiplier(category);
    let mut path = Vec::with_capacity(months.len());
    if category.is_government() {
        // nominal wage fixed between raises
        let mut nominal = base * index.get(months[0])? / reference;
        for (t, &stamp) in months.iter().enumerate() {
            if t > 0 {
                for &(month, mult) in &config.public_raise_schedule {
                    if stamp.month() == month {
                        nominal *= mult;
                    }
                }
            }
            path.push(Some(nominal * reference / index.get(stamp)?));
        }
    } else {
        let shock = Normal::new(config.private_wage_drift, config.private_wage_shock_sd)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let rehire = Normal::new(-0.05f64, 0.15).expect("valid constants");
        let mut wage = base;
        let mut unemployed_for = 0u32;
        for _ in months {
            if unemployed_for > 0 {
                unemployed_for -= 1;
                path.push(None);
                if unemployed_for == 0 {
                    wage *= rehire.sample(rng).exp();
                }
                continue;
            }
            path.push(Some(wage));
            if rng.gen_bool(config.private_layoff_monthly_prob) {
                unemployed_for = rng.gen_range(1..=24);
            } else {
                wage *= shock.sample(rng).exp();
            }
        }
    }
    if rng.gen_bool(config.gap_prob) && months.len() > 1 {
        let len = rng.gen_range(1..=24.min(months.len() - 1));
        let start = rng.gen_range(0..=months.len() - len);
        path[start..start + len].iter_mut().for_each(|w| *w = None);
    }
    Ok(path)
}

/// Writes a panel CSV (header `person_id,year,month,wage,employer_nature`).
/// Output depends only on the config, seed included.
pub fn generate_panel(config: &GeneratorConfig, writer: impl Write) -> Result<GenerationSummary> {
    config.validate()?;
    let index = config.price_index()?;
    let reference = index.get(index.reference())?;
    let months = config.months();
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut summary = GenerationSummary::default();
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(crate::ingest::PANEL_HEADER)?;

    for category in SectorCategory::ALL {
        let count = config.count(category);
        let planted: Vec<usize> = {
            let mut v = index::sample(&mut rng, count, config.switchers_in(category)).into_vec();
            v.sort_unstable();
            v
        };
        summary.workers.insert(category, count);
        for worker in 0..count {
            let person_id = format!("{}{:06}", id_prefix(category), worker + 1);
            let mut path = wage_path(config, category, &months, &index, &mut rng)?;
            let switch = if planted.binary_search(&worker).is_ok() && months.len() > 1 {
                // the switch lands on an observed month so it shows in the panel
                let mut present: Vec<usize> = (0..path.len()).filter(|&t| path[t].is_some()).collect();
                if present.len() < 2 {
                    let t = present[0];
                    let other = if t + 1 < path.len() { t + 1 } else { t - 1 };
                    path[other] = path[t];
                    present = vec![t.min(other), t.max(other)];
                }
                let at = present[rng.gen_range(1..present.len())];
                let others: Vec<_> = SectorCategory::ALL.into_iter().filter(|&c| c != category).collect();
                let to = others[rng.gen_range(0..others.len())];
                summary.switcher_ids.push(person_id.clone());
                Some((at, to))
            } else {
                None
            };
            for (t, (&stamp, real)) in months.iter().zip(&path).enumerate() {
                let Some(real) = real else { continue };
                let nominal = real * index.get(stamp)? / reference;
                let label = match switch {
                    Some((at, to)) if t >= at => to,
                    _ => category,
                };
                wtr.write_record([
                    person_id.as_str(),
                    &stamp.year().to_string(),
                    &stamp.month().to_string(),
                    &format!("{nominal:.2}"),
                    label.as_str(),
                ])?;
                summary.rows_written += 1;
            }
        }
    }
    for i in 0..config.malformed_rows {
        let id = format!("X{:06}", i + 1);
        wtr.write_record([id.as_str(), "2005", "13", "1000.00", "PRIVATE"])?;
        summary.rows_written += 1;
    }
    summary.switchers_planted = summary.switcher_ids.len();
    summary.malformed_rows = config.malformed_rows;
    wtr.flush().map_err(csv::Error::from)?;
    Ok(summary)
}

/// Writes the generator's price index as `year,month,index`.
pub fn generate_price_index(config: &GeneratorConfig, writer: impl Write) -> Result<()> {
    let index = config.price_index()?;
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(crate::ingest::INDEX_HEADER)?;
    for (stamp, value) in index.entries() {
        wtr.write_record([stamp.year().to_string(), stamp.month().to_string(), value.to_string()])?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

//! Panel ingestion: CSV parsing, deflation, sampling, switcher filtering and
//! construction of gap-concatenated wage series.
//!
//! Structural problems (wrong header, wrong field count, unparsable numbers)
//! abort with the offending line. Rows that parse but cannot be used (month
//! out of range, unknown employer nature, outside the observation window) are
//! rejected individually and recorded in the [`IngestReport`].

use std::collections::BTreeMap;
use std::io::Read;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MonthStamp, PriceIndex, SectorCategory, WageObservation, WageSeries};

pub const PANEL_HEADER: [&str; 5] = ["person_id", "year", "month", "wage", "employer_nature"];
pub const INDEX_HEADER: [&str; 3] = ["year", "month", "index"];

/// One parsed panel row with its employer nature resolved to a category.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPanelRow {
    pub line: u64,
    pub person_id: String,
    pub observation: WageObservation,
}

/// Employer-nature code to sector category.
///
/// The default map accepts `PRIVATE`, `FEDERAL`, `STATE` and `MUNICIPAL`.
/// Extra codes (for instance RAIS numeric codes) come from a `code,category`
/// CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct NatureMap {
    codes: BTreeMap<String, SectorCategory>,
}

impl Default for NatureMap {
    fn default() -> Self {
        let codes = SectorCategory::ALL.iter().map(|c| (c.as_str().to_owned(), *c)).collect();
        Self { codes }
    }
}

impl NatureMap {
    /// Default names plus every `code,category` row of `reader`.
    pub fn with_codes(reader: impl Read) -> Result<Self> {
        let mut map = NatureMap::default();
        let mut rdr = csv::Reader::from_reader(reader);
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let (Some(code), Some(category), 2) = (record.get(0), record.get(1), record.len()) else {
                return Err(Error::Malformed { line, reason: "expected code,category".into() });
            };
            let category = category
                .parse()
                .map_err(|_| Error::Malformed { line, reason: format!("unknown category {category:?}") })?;
            map.codes.insert(code.trim().to_owned(), category);
        }
        Ok(map)
    }

    pub fn resolve(&self, code: &str) -> Option<SectorCategory> {
        self.codes.get(code.trim()).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategorySampling {
    pub available: usize,
    pub quota: Option<usize>,
    pub selected: usize,
    pub clamped: bool,
}

/// Counts of everything ingestion kept, dropped or merged.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_parsed: usize,
    pub rows_rejected: usize,
    pub rejected_by_reason: BTreeMap<String, usize>,
    pub rejections: Vec<Rejection>,
    /// Zero or negative wages, treated as absences.
    pub absences_dropped: usize,
    /// Rows discarded because another row had the same person and month.
    pub duplicates_resolved: usize,
    pub persons_seen: usize,
    pub sampling: BTreeMap<SectorCategory, CategorySampling>,
    pub switchers_discarded: usize,
    pub switcher_ids: Vec<String>,
    pub series_built: usize,
    pub series_per_category: BTreeMap<SectorCategory, usize>,
}

impl IngestReport {
    fn reject(&mut self, line: u64, reason: impl Into<String>) {
        let reason = reason.into();
        *self.rejected_by_reason.entry(reason.clone()).or_default() += 1;
        self.rows_rejected += 1;
        self.rejections.push(Rejection { line, reason });
    }
}

fn check_header(headers: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let found: Vec<&str> = headers.iter().map(str::trim).collect();
    if found != expected {
        return Err(Error::Malformed {
            line: 1,
            reason: format!("header {:?}, expected {:?}", found.join(","), expected.join(",")),
        });
    }
    Ok(())
}

fn field<T: std::str::FromStr>(record: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<T> {
    let raw = record.get(idx).unwrap_or("").trim();
    raw.parse().map_err(|_| Error::Malformed { line, reason: format!("{name}: cannot parse {raw:?}") })
}

/// Outcome of parsing a panel: usable rows plus the report so far.
#[derive(Debug, Clone, Default)]
pub struct ParsedPanel {
    pub rows: Vec<RawPanelRow>,
    pub report: IngestReport,
}

/// Parses a panel CSV with header `person_id,year,month,wage,employer_nature`.
///
/// Non-positive wages are absences: they are counted and dropped, not rejected.
pub fn parse_panel(reader: impl Read, natures: &NatureMap) -> Result<ParsedPanel> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    check_header(rdr.headers()?, &PANEL_HEADER)?;
    let mut out = ParsedPanel::default();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        out.report.rows_read += 1;
        if record.len() != PANEL_HEADER.len() {
            return Err(Error::Malformed {
                line,
                reason: format!("expected {} fields, found {}", PANEL_HEADER.len(), record.len()),
            });
        }
        let person_id = record[0].trim().to_owned();
        if person_id.is_empty() {
            return Err(Error::Malformed { line, reason: "empty person_id".into() });
        }
        let year: i32 = field(&record, 1, "year", line)?;
        let month: u32 = field(&record, 2, "month", line)?;
        let wage: f64 = field(&record, 3, "wage", line)?;
        if !wage.is_finite() {
            return Err(Error::Malformed { line, reason: format!("wage: non-finite {wage}") });
        }
        let Ok(stamp) = MonthStamp::new(year, month) else {
            out.report.reject(line, "month out of range");
            continue;
        };
        let Some(category) = natures.resolve(&record[4]) else {
            out.report.reject(line, format!("unknown employer nature {:?}", record[4].trim()));
            continue;
        };
        if wage <= 0.0 {
            out.report.absences_dropped += 1;
            continue;
        }
        out.report.rows_parsed += 1;
        let observation = WageObservation::new(stamp, wage, category)?;
        out.rows.push(RawPanelRow { line, person_id, observation });
    }
    Ok(out)
}

/// Parses a price index CSV with header `year,month,index`.
pub fn parse_price_index(reader: impl Read, reference: MonthStamp) -> Result<PriceIndex> {
    let mut rdr = csv::Reader::from_reader(reader);
    check_header(rdr.headers()?, &INDEX_HEADER)?;
    let mut entries = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let year: i32 = field(&record, 0, "year", line)?;
        let month: u32 = field(&record, 1, "month", line)?;
        let value: f64 = field(&record, 2, "index", line)?;
        let stamp = MonthStamp::new(year, month).map_err(|e| Error::Malformed { line, reason: e.to_string() })?;
        if entries.insert(stamp, value).is_some() {
            return Err(Error::Malformed { line, reason: format!("duplicate index entry for {stamp}") });
        }
    }
    PriceIndex::new(reference, entries)
}

/// Nominal wage in reference-month currency.
pub fn deflate(nominal_wage: f64, stamp: MonthStamp, index: &PriceIndex) -> Result<f64> {
    let at = index.get(stamp)?;
    let reference = index.get(index.reference())?;
    Ok(nominal_wage * reference / at)
}

/// All rows of one person, sorted by stamp with one row per month.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonRows {
    pub person_id: String,
    pub observations: Vec<WageObservation>,
}

impl PersonRows {
    /// Category of the earliest observation, the one the person was sampled under.
    pub fn initial_category(&self) -> SectorCategory {
        self.observations[0].category
    }

    pub fn is_switcher(&self) -> bool {
        let first = self.initial_category();
        self.observations.iter().any(|o| o.category != first)
    }
}

/// Groups rows by person in id order, sorts each person's months and keeps
/// the highest wage when a month repeats. Returns the number of rows dropped
/// as duplicates.
pub fn group_by_person(rows: Vec<RawPanelRow>) -> (Vec<PersonRows>, usize) {
    let mut by_person: BTreeMap<String, BTreeMap<MonthStamp, WageObservation>> = BTreeMap::new();
    let mut duplicates = 0;
    for row in rows {
        let months = by_person.entry(row.person_id).or_default();
        let obs = row.observation;
        match months.get(&obs.stamp) {
            Some(existing) => {
                duplicates += 1;
                if obs.nominal_wage > existing.nominal_wage {
                    months.insert(obs.stamp, obs);
                }
            }
            None => {
                months.insert(obs.stamp, obs);
            }
        }
    }
    let persons = by_person
        .into_iter()
        .map(|(person_id, months)| PersonRows { person_id, observations: months.into_values().collect() })
        .collect();
    (persons, duplicates)
}

/// Keeps persons whose observations all share one category; also returns
/// the ids of the discarded switchers.
pub fn filter_switchers(persons: Vec<PersonRows>) -> (Vec<PersonRows>, Vec<String>) {
    let (switchers, retained): (Vec<_>, Vec<_>) = persons.into_iter().partition(PersonRows::is_switcher);
    (retained, switchers.into_iter().map(|p| p.person_id).collect())
}

/// Per-category sample sizes and the seed of the sampling generator.
///
/// Categories without a quota are kept whole. The generator is ChaCha8,
/// which produces the same stream on every platform for a given seed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub per_category_quota: BTreeMap<SectorCategory, usize>,
    pub rng_seed: u64,
}

impl SamplingPlan {
    pub fn uniform(quota: usize, rng_seed: u64) -> Self {
        let per_category_quota = SectorCategory::ALL.iter().map(|&c| (c, quota)).collect();
        Self { per_category_quota, rng_seed }
    }
}

/// Draws a simple random sample of persons per initial category. The output
/// keeps the input order.
pub fn sample_per_category(
    persons: Vec<PersonRows>,
    plan: &SamplingPlan,
) -> (Vec<PersonRows>, BTreeMap<SectorCategory, CategorySampling>) {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.rng_seed);
    let mut keep = vec![false; persons.len()];
    let mut summary = BTreeMap::new();
    for category in SectorCategory::ALL {
        let members: Vec<usize> =
            persons.iter().enumerate().filter(|(_, p)| p.initial_category() == category).map(|(i, _)| i).collect();
        let quota = plan.per_category_quota.get(&category).copied();
        let available = members.len();
        let take = quota.map_or(available, |q| q.min(available));
        if take == available {
            members.iter().for_each(|&i| keep[i] = true);
        } else {
            for pick in rand::seq::index::sample(&mut rng, available, take) {
                keep[members[pick]] = true;
            }
        }
        let clamped = quota.is_some_and(|q| q > available);
        summary.insert(category, CategorySampling { available, quota, selected: take, clamped });
    }
    let sampled = persons.into_iter().zip(keep).filter_map(|(p, k)| k.then_some(p)).collect();
    (sampled, summary)
}

/// Deflates and concatenates one person's observations into a series.
pub fn build_series(person_id: &str, observations: &[WageObservation], index: &PriceIndex) -> Result<WageSeries> {
    let first = observations.first().ok_or_else(|| Error::series(person_id, "empty observation set"))?;
    let category = first.category;
    if observations.iter().any(|o| o.category != category) {
        return Err(Error::series(person_id, "observations span several categories"));
    }
    let mut sorted = observations.to_vec();
    sorted.sort_by_key(|o| o.stamp);
    let deflated =
        sorted.iter().map(|o| Ok((o.stamp, deflate(o.nominal_wage, o.stamp, index)?))).collect::<Result<Vec<_>>>()?;
    WageSeries::new(person_id, category, deflated)
}

/// Options for [`ingest`].
#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub natures: NatureMap,
    /// First and last month of the observation window, inclusive.
    pub window: (MonthStamp, MonthStamp),
    pub sampling: SamplingPlan,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self { natures: NatureMap::default(), window: default_window(), sampling: SamplingPlan::default() }
    }
}

/// Jan/2005 to Dec/2019.
pub fn default_window() -> (MonthStamp, MonthStamp) {
    (MonthStamp::new(2005, 1).unwrap(), MonthStamp::new(2019, 12).unwrap())
}

/// Runs the full ingest: parse, window, group, sample by initial category,
/// drop switchers, deflate and build series.
///
/// Sampling happens before switcher filtering, so sampled switchers count
/// against their category's quota.
pub fn ingest(
    panel: impl Read,
    index: &PriceIndex,
    options: &IngestOptions,
) -> Result<(Vec<WageSeries>, IngestReport)> {
    let ParsedPanel { rows, mut report } = parse_panel(panel, &options.natures)?;
    let (first, last) = options.window;
    let mut in_window = Vec::with_capacity(rows.len());
    for row in rows {
        let stamp = row.observation.stamp;
        if stamp < first || stamp > last {
            report.reject(row.line, "outside observation window");
            report.rows_parsed -= 1;
        } else {
            in_window.push(row);
        }
    }
    let (persons, duplicates) = group_by_person(in_window);
    report.duplicates_resolved = duplicates;
    report.persons_seen = persons.len();

    let (sampled, sampling) = sample_per_category(persons, &options.sampling);
    report.sampling = sampling;
    let (retained, switchers) = filter_switchers(sampled);
    report.switchers_discarded = switchers.len();
    report.switcher_ids = switchers;

    let series =
        retained.iter().map(|p| build_series(&p.person_id, &p.observations, index)).collect::<Result<Vec<_>>>()?;
    report.series_built = series.len();
    for s in &series {
        *report.series_per_category.entry(s.category()).or_default() += 1;
    }
    Ok((series, report))
}

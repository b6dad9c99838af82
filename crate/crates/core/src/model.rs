//! Domain types shared by the whole pipeline.
//!
//! Everything here is immutable after construction. Constructors enforce the
//! invariants, so any value that exists is valid.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of months in the Jan/2005 to Dec/2019 observation window.
pub const MAX_SERIES_MONTHS: usize = 180;

/// A calendar month. Orders lexicographically by (year, month).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MonthStamp {
    year: i32,
    month: u32,
}

impl MonthStamp {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::MonthOutOfRange { year, month });
        }
        Ok(Self { year, month })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u32 {
        self.month
    }

    /// Months elapsed since January of year 0; differences give month distances.
    pub fn ordinal(self) -> i64 {
        i64::from(self.year) * 12 + i64::from(self.month) - 1
    }

    pub fn from_ordinal(ordinal: i64) -> Self {
        let year = ordinal.div_euclid(12) as i32;
        let month = ordinal.rem_euclid(12) as u32 + 1;
        Self { year, month }
    }

    pub fn succ(self) -> Self {
        Self::from_ordinal(self.ordinal() + 1)
    }

    /// Every month from `self` to `last`, both inclusive.
    pub fn range_inclusive(self, last: MonthStamp) -> impl Iterator<Item = MonthStamp> {
        (self.ordinal()..=last.ordinal()).map(MonthStamp::from_ordinal)
    }
}

impl fmt::Display for MonthStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for MonthStamp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::BadStamp(s.to_owned());
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        let year = y.parse().map_err(|_| bad())?;
        let month = m.parse().map_err(|_| bad())?;
        MonthStamp::new(year, month)
    }
}

impl TryFrom<String> for MonthStamp {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MonthStamp> for String {
    fn from(s: MonthStamp) -> String {
        s.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SectorCategory {
    Private,
    Federal,
    State,
    Municipal,
}

impl SectorCategory {
    pub const ALL: [SectorCategory; 4] =
        [SectorCategory::Private, SectorCategory::Federal, SectorCategory::State, SectorCategory::Municipal];

    pub const GOVERNMENT: [SectorCategory; 3] =
        [SectorCategory::Federal, SectorCategory::State, SectorCategory::Municipal];

    pub fn as_str(self) -> &'static str {
        match self {
            SectorCategory::Private => "PRIVATE",
            SectorCategory::Federal => "FEDERAL",
            SectorCategory::State => "STATE",
            SectorCategory::Municipal => "MUNICIPAL",
        }
    }

    pub fn is_government(self) -> bool {
        self != SectorCategory::Private
    }
}

impl fmt::Display for SectorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SectorCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "PRIVATE" => Ok(SectorCategory::Private),
            "FEDERAL" => Ok(SectorCategory::Federal),
            "STATE" => Ok(SectorCategory::State),
            "MUNICIPAL" => Ok(SectorCategory::Municipal),
            other => Err(Error::UnknownNature(other.to_owned())),
        }
    }
}

/// An amount of currency in integer cents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Cents(pub i64);

impl Cents {
    /// Rounds half away from zero.
    pub fn from_f64(amount: f64) -> Self {
        Cents((amount * 100.0).round() as i64)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl std::ops::Sub for Cents {
    type Output = Cents;

    fn sub(self, rhs: Cents) -> Cents {
        Cents(self.0 - rhs.0)
    }
}

impl std::ops::Add for Cents {
    type Output = Cents;

    fn add(self, rhs: Cents) -> Cents {
        Cents(self.0 + rhs.0)
    }
}

impl fmt::Display for Cents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:02}", abs / 100, abs % 100)
    }
}

impl FromStr for Cents {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("not a currency amount: {s:?}"));
        let s = s.trim();
        let (neg, digits) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
        if whole.is_empty() || frac.len() > 2 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let whole: i64 = whole.parse().map_err(|_| bad())?;
        let frac: i64 = match frac.len() {
            0 => 0,
            1 => frac.parse::<i64>().map_err(|_| bad())? * 10,
            _ => frac.parse().map_err(|_| bad())?,
        };
        let value = whole * 100 + frac;
        Ok(Cents(if neg { -value } else { value }))
    }
}

impl Serialize for Cents {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Cents {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One nominal monthly wage record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WageObservation {
    pub stamp: MonthStamp,
    pub nominal_wage: f64,
    pub category: SectorCategory,
}

impl WageObservation {
    pub fn new(stamp: MonthStamp, nominal_wage: f64, category: SectorCategory) -> Result<Self> {
        if !(nominal_wage.is_finite() && nominal_wage > 0.0) {
            return Err(Error::InvalidConfig(format!("wage must be positive, got {nominal_wage} at {stamp}")));
        }
        Ok(Self { stamp, nominal_wage, category })
    }
}

/// A worker's gap-concatenated deflated monthly wages.
///
/// Observations are strictly increasing by stamp, but not necessarily
/// consecutive: months the worker was absent are simply missing.
#[derive(Debug, Clone, PartialEq)]
pub struct WageSeries {
    person_id: String,
    category: SectorCategory,
    observations: Vec<(MonthStamp, f64)>,
}

impl WageSeries {
    pub fn new(
        person_id: impl Into<String>,
        category: SectorCategory,
        observations: Vec<(MonthStamp, f64)>,
    ) -> Result<Self> {
        let person_id = person_id.into();
        if observations.is_empty() {
            return Err(Error::series(&person_id, "empty observation set"));
        }
        if observations.len() > MAX_SERIES_MONTHS {
            return Err(Error::series(
                &person_id,
                format!("{} observations exceed {MAX_SERIES_MONTHS} months", observations.len()),
            ));
        }
        if let Some(w) = observations.windows(2).find(|w| w[0].0 >= w[1].0) {
            return Err(Error::series(
                &person_id,
                format!("stamps not strictly increasing at {} -> {}", w[0].0, w[1].0),
            ));
        }
        if let Some((stamp, wage)) = observations.iter().find(|(_, w)| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::series(&person_id, format!("non-positive wage {wage} at {stamp}")));
        }
        Ok(Self { person_id, category, observations })
    }

    pub fn person_id(&self) -> &str {
        &self.person_id
    }

    pub fn category(&self) -> SectorCategory {
        self.category
    }

    pub fn observations(&self) -> &[(MonthStamp, f64)] {
        &self.observations
    }

    pub fn wages(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.observations.iter().map(|&(_, w)| w)
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn total(&self) -> f64 {
        self.wages().sum()
    }

    /// Same worker with every wage multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let obs = self.observations.iter().map(|&(s, w)| (s, w * factor)).collect();
        WageSeries::new(self.person_id.clone(), self.category, obs)
    }
}

/// Month-indexed deflator with a reference month.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceIndex {
    reference: MonthStamp,
    entries: BTreeMap<MonthStamp, f64>,
}

impl PriceIndex {
    pub fn new(reference: MonthStamp, entries: BTreeMap<MonthStamp, f64>) -> Result<Self> {
        if let Some((stamp, v)) = entries.iter().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidIndex(format!("non-positive index {v} at {stamp}")));
        }
        if !entries.contains_key(&reference) {
            return Err(Error::MissingIndex(reference));
        }
        Ok(Self { reference, entries })
    }

    /// An index that is 1.0 at every month of `first..=last`.
    pub fn flat(first: MonthStamp, last: MonthStamp, reference: MonthStamp) -> Result<Self> {
        let entries = first.range_inclusive(last).map(|s| (s, 1.0)).collect();
        PriceIndex::new(reference, entries)
    }

    pub fn reference(&self) -> MonthStamp {
        self.reference
    }

    pub fn get(&self, stamp: MonthStamp) -> Result<f64> {
        self.entries.get(&stamp).copied().ok_or(Error::MissingIndex(stamp))
    }

    pub fn entries(&self) -> &BTreeMap<MonthStamp, f64> {
        &self.entries
    }

    /// Same entries, deflating to a different reference month.
    pub fn with_reference(&self, reference: MonthStamp) -> Result<Self> {
        PriceIndex::new(reference, self.entries.clone())
    }
}

/// A ratio that is either finite or flagged infinite (zero denominator).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ratio {
    Finite(f64),
    Infinite,
}

impl Ratio {
    pub fn finite(self) -> Option<f64> {
        match self {
            Ratio::Finite(v) => Some(v),
            Ratio::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Ratio::Infinite)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ratio::Finite(v) => write!(f, "{v}"),
            Ratio::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Ratio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" => Ok(Ratio::Infinite),
            v => v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(Ratio::Finite)
                .ok_or_else(|| Error::InvalidConfig(format!("not a ratio: {s:?}"))),
        }
    }
}

/// Per-worker return and downside-risk figures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SortinoStats {
    k: f64,
    total_wages: f64,
    return_rate: f64,
    downside_deviation: f64,
    sortino: Ratio,
}

impl SortinoStats {
    /// Derives the return rate and Sortino ratio from `k`, the wage total and
    /// the downside deviation. The risk-free rate is zero.
    pub fn from_parts(k: f64, total_wages: f64, downside_deviation: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidConfig(format!("k must be positive, got {k}")));
        }
        if !(downside_deviation.is_finite() && downside_deviation >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "downside deviation must be non-negative, got {downside_deviation}"
            )));
        }
        let return_rate = total_wages / k;
        let sortino =
            if downside_deviation == 0.0 { Ratio::Infinite } else { Ratio::Finite(return_rate / downside_deviation) };
        Ok(Self { k, total_wages, return_rate, downside_deviation, sortino })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn total_wages(&self) -> f64 {
        self.total_wages
    }

    pub fn return_rate(&self) -> f64 {
        self.return_rate
    }

    pub fn downside_deviation(&self) -> f64 {
        self.downside_deviation
    }

    pub fn sortino(&self) -> Ratio {
        self.sortino
    }
}

/// Income bracket `[lower, upper)`; the topmost bracket of a table is `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lower: f64,
    pub upper: f64,
    pub mean_sortino: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Bracket>", into = "Vec<Bracket>")]
pub struct BracketTable {
    brackets: Vec<Bracket>,
}

impl BracketTable {
    /// Brackets must be non-empty, contiguous and strictly increasing. Only
    /// the topmost bracket may be degenerate (`lower == upper`), since it is
    /// closed on both ends.
    pub fn new(brackets: Vec<Bracket>) -> Result<Self> {
        if brackets.is_empty() {
            return Err(Error::InvalidBrackets("no brackets".into()));
        }
        let last = brackets.len() - 1;
        for (j, b) in brackets.iter().enumerate() {
            if !(b.lower.is_finite() && b.upper.is_finite() && b.mean_sortino.is_finite()) {
                return Err(Error::InvalidBrackets(format!("bracket {j} has non-finite fields")));
            }
            let ordered = if j == last { b.lower <= b.upper } else { b.lower < b.upper };
            if !ordered {
                return Err(Error::InvalidBrackets(format!(
                    "bracket {j}: lower {} not below upper {}",
                    b.lower, b.upper
                )));
            }
        }
        if let Some(j) = brackets.windows(2).position(|w| w[0].upper != w[1].lower) {
            return Err(Error::InvalidBrackets(format!("brackets {j} and {} not contiguous", j + 1)));
        }
        Ok(Self { brackets })
    }

    pub fn brackets(&self) -> &[Bracket] {
        &self.brackets
    }

    pub fn len(&self) -> usize {
        self.brackets.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl TryFrom<Vec<Bracket>> for BracketTable {
    type Error = Error;

    fn try_from(brackets: Vec<Bracket>) -> Result<Self> {
        BracketTable::new(brackets)
    }
}

impl From<BracketTable> for Vec<Bracket> {
    fn from(t: BracketTable) -> Self {
        t.brackets
    }
}

/// How the risk-adjusted wage total is recovered from the required return.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ValuationMode {
    /// `required_return × k`, the inverse of the return-rate definition.
    #[default]
    #[serde(rename = "formula")]
    FormulaConsistent,
    /// `required_return × actual_total`, the arithmetic of the worked example.
    #[serde(rename = "paper-example")]
    PaperExample,
}

impl ValuationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ValuationMode::FormulaConsistent => "formula",
            ValuationMode::PaperExample => "paper-example",
        }
    }
}

impl fmt::Display for ValuationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ValuationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "formula" => Ok(ValuationMode::FormulaConsistent),
            "paper-example" => Ok(ValuationMode::PaperExample),
            _ => Err(Error::InvalidConfig(format!("unknown valuation mode {s:?}"))),
        }
    }
}

/// Which per-worker salary statistic places a worker in an income bracket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MatchingKeyMode {
    /// Mean deflated wage over the 2005 observations.
    #[default]
    #[serde(rename = "mean-2005")]
    Mean2005Wage,
    /// Sum of the first three deflated wages.
    #[serde(rename = "first-three-sum")]
    FirstThreeWageSum,
}

impl MatchingKeyMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MatchingKeyMode::Mean2005Wage => "mean-2005",
            MatchingKeyMode::FirstThreeWageSum => "first-three-sum",
        }
    }
}

impl fmt::Display for MatchingKeyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MatchingKeyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean-2005" => Ok(MatchingKeyMode::Mean2005Wage),
            "first-three-sum" => Ok(MatchingKeyMode::FirstThreeWageSum),
            _ => Err(Error::InvalidConfig(format!("unknown matching key {s:?}"))),
        }
    }
}

/// Conditions worth surfacing next to a valuation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ValuationFlags {
    /// Zero downside deviation: the whole wage total counts as tenure value.
    pub infinite_sortino: bool,
    /// Key below the bottom bracket; matched to the bottom bracket.
    pub clamped_below: bool,
    /// Key above the top bracket; matched to the top bracket.
    pub clamped_above: bool,
}

impl ValuationFlags {
    const NAMES: [&'static str; 3] = ["infinite-sortino", "clamped-below", "clamped-above"];

    fn bits(self) -> [bool; 3] {
        [self.infinite_sortino, self.clamped_below, self.clamped_above]
    }
}

impl fmt::Display for ValuationFlags {
    /// `;`-separated flag names, empty when no flag is set.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = Self::NAMES.iter().zip(self.bits()).filter_map(|(n, on)| on.then_some(*n)).collect();
        f.write_str(&names.join(";"))
    }
}

impl FromStr for ValuationFlags {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut flags = ValuationFlags::default();
        for name in s.split(';').map(str::trim).filter(|n| !n.is_empty()) {
            match name {
                "infinite-sortino" => flags.infinite_sortino = true,
                "clamped-below" => flags.clamped_below = true,
                "clamped-above" => flags.clamped_above = true,
                other => return Err(Error::InvalidConfig(format!("unknown flag {other:?}"))),
            }
        }
        Ok(flags)
    }
}

/// Value of tenure for one government worker.
#[derive(Debug, Clone, PartialEq)]
pub struct TenureValuation {
    pub person_id: String,
    pub category: SectorCategory,
    pub months_observed: usize,
    pub actual_total: Cents,
    pub risk_adjusted_total: Cents,
    pub tenure_total: Cents,
    pub tenure_monthly: f64,
    pub tenure_pct_of_salary: f64,
    pub mode: ValuationMode,
    pub flags: ValuationFlags,
}

impl TenureValuation {
    /// Derives tenure totals from the actual and risk-adjusted wage totals.
    pub fn new(
        person_id: impl Into<String>,
        category: SectorCategory,
        months_observed: usize,
        actual_total: Cents,
        risk_adjusted_total: Cents,
        mode: ValuationMode,
        flags: ValuationFlags,
    ) -> Result<Self> {
        if months_observed == 0 {
            return Err(Error::InvalidConfig("months_observed must be at least 1".into()));
        }
        let tenure_total = actual_total - risk_adjusted_total;
        let tenure_monthly = tenure_total.to_f64() / months_observed as f64;
        // monthly tenure over monthly salary; the month counts cancel
        let tenure_pct_of_salary =
            if actual_total.0 == 0 { 0.0 } else { tenure_total.0 as f64 / actual_total.0 as f64 };
        Ok(Self {
            person_id: person_id.into(),
            category,
            months_observed,
            actual_total,
            risk_adjusted_total,
            tenure_total,
            tenure_monthly,
            tenure_pct_of_salary,
            mode,
            flags,
        })
    }
}

//! Prices civil-service tenure as the gap between what a government worker
//! was paid and what a private-sector worker with the same downside risk
//! would have needed to earn.
//!
//! The pipeline runs in four steps:
//!
//! 1. Sortino ratios for private-sector workers ([`metrics`]).
//! 2. Natural-breaks income brackets over private salaries, each carrying
//!    the mean Sortino ratio of its members ([`jenks`], [`valuation`]).
//! 3. Sortino ratios for government workers.
//! 4. For each government worker, the wage total that would equalize their
//!    Sortino ratio with their bracket's mean; tenure is worth the rest
//!    ([`valuation`]).
//!
//! [`ingest`] turns panel CSVs into wage series, [`synth`] generates such
//! panels, and [`report`] summarizes valuations per government level.

pub mod error;
pub mod handoff;
pub mod ingest;
pub mod jenks;
pub mod metrics;
pub mod model;
pub mod report;
pub mod synth;
pub mod valuation;

pub use error::{Error, Result};
pub use model::{
    Bracket, BracketTable, Cents, MatchingKeyMode, MonthStamp, PriceIndex, Ratio, SectorCategory, SortinoStats,
    TenureValuation, ValuationFlags, ValuationMode, WageObservation, WageSeries,
};

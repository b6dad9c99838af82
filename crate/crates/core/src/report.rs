//! Per-level summaries and trimmed histograms of tenure values.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SectorCategory, TenureValuation};

pub const DEFAULT_TRIM: f64 = 0.025;
pub const DEFAULT_BINS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub category: SectorCategory,
    pub median_tenure_monthly: f64,
    pub negative_share: f64,
    pub median_pct_of_salary: f64,
    pub worker_count: usize,
}

/// Lower median: the element at `(n - 1) / 2` of the sorted values.
pub fn lower_median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(sorted[(sorted.len() - 1) / 2])
}

/// One summary per category present, in category order. Government levels
/// with no workers are reported as warnings instead.
pub fn summarize(valuations: &[TenureValuation]) -> (Vec<LevelSummary>, Vec<String>) {
    let mut summaries = Vec::new();
    let mut warnings = Vec::new();
    for category in SectorCategory::ALL {
        let group: Vec<&TenureValuation> = valuations.iter().filter(|v| v.category == category).collect();
        if group.is_empty() {
            if category.is_government() {
                warnings.push(format!("no valuations for {category}; level omitted"));
            }
            continue;
        }
        let monthly: Vec<f64> = group.iter().map(|v| v.tenure_monthly).collect();
        let pct: Vec<f64> = group.iter().map(|v| v.tenure_pct_of_salary).collect();
        let negative = group.iter().filter(|v| v.tenure_total.0 < 0).count();
        summaries.push(LevelSummary {
            category,
            median_tenure_monthly: lower_median(&monthly).unwrap(),
            negative_share: negative as f64 / group.len() as f64,
            median_pct_of_salary: lower_median(&pct).unwrap(),
            worker_count: group.len(),
        });
    }
    (summaries, warnings)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    #[serde(rename = "bin_lower")]
    pub lower: f64,
    #[serde(rename = "bin_upper")]
    pub upper: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bins: Vec<Bin>,
    pub dropped_per_tail: usize,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }
}

/// Drops `floor(trim × n)` values from each tail of the sorted data and bins
/// the rest into `bin_count` equal-width bins over the remaining range. The
/// last bin is closed. If every remaining value is equal there is one bin.
pub fn trimmed_histogram(values: &[f64], trim_fraction: f64, bin_count: usize) -> Result<Histogram> {
    if !(0.0..0.5).contains(&trim_fraction) {
        return Err(Error::InvalidConfig(format!("trim fraction {trim_fraction} outside [0, 0.5)")));
    }
    if bin_count == 0 {
        return Err(Error::InvalidConfig("bin count must be positive".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("histogram values must be finite".into()));
    }
    let n = values.len();
    let dropped = (trim_fraction * n as f64).floor() as usize;
    if n <= 2 * dropped {
        return Err(Error::EmptyTrim(format!("{n} values, {dropped} dropped per tail")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let kept = &sorted[dropped..n - dropped];
    let (min, max) = (kept[0], kept[kept.len() - 1]);
    if min == max {
        let bins = vec![Bin { lower: min, upper: max, count: kept.len() }];
        return Ok(Histogram { bins, dropped_per_tail: dropped });
    }
    let width = (max - min) / bin_count as f64;
    let mut bins: Vec<Bin> = (0..bin_count)
        .map(|i| Bin {
            lower: min + i as f64 * width,
            upper: if i + 1 == bin_count { max } else { min + (i + 1) as f64 * width },
            count: 0,
        })
        .collect();
    for &v in kept {
        let idx = (((v - min) / width).floor() as usize).min(bin_count - 1);
        bins[idx].count += 1;
    }
    Ok(Histogram { bins, dropped_per_tail: dropped })
}

/// `bin_lower,bin_upper,count`
pub fn write_histogram_csv(histogram: &Histogram, writer: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for b in &histogram.bins {
        wtr.serialize(b)?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_histogram_csv(reader: impl Read) -> Result<Vec<Bin>> {
    let mut rdr = csv::Reader::from_reader(reader);
    Ok(rdr.deserialize().collect::<std::result::Result<Vec<Bin>, _>>()?)
}

fn file_stem(category: SectorCategory) -> String {
    format!("tenure_monthly_{}", category.as_str().to_lowercase())
}

/// Bar chart of a histogram as a standalone SVG document.
pub fn histogram_svg(title: &str, histogram: &Histogram) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 48.0;
    let peak = histogram.bins.iter().map(|b| b.count).max().unwrap_or(0).max(1) as f64;
    let bar_w = (W - 2.0 * PAD) / histogram.bins.len() as f64;
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{title}</text>"#,
        W / 2.0
    );
    for (i, b) in histogram.bins.iter().enumerate() {
        let h = (H - 2.0 * PAD) * b.count as f64 / peak;
        let _ = writeln!(
            svg,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="steelblue" stroke="white" stroke-width="0.5"><title>[{}, {}): {}</title></rect>"#,
            PAD + i as f64 * bar_w,
            H - PAD - h,
            bar_w,
            h,
            b.lower,
            b.upper,
            b.count
        );
    }
    let _ =
        writeln!(svg, r#"<line x1="{PAD}" y1="{y}" x2="{x2}" y2="{y}" stroke="black"/>"#, y = H - PAD, x2 = W - PAD);
    if let (Some(first), Some(last)) = (histogram.bins.first(), histogram.bins.last()) {
        let _ = writeln!(
            svg,
            r#"<text x="{PAD}" y="{}" font-family="sans-serif" font-size="12">{:.2}</text>"#,
            H - PAD + 18.0,
            first.lower
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end" font-family="sans-serif" font-size="12">{:.2}</text>"#,
            W - PAD,
            H - PAD + 18.0,
            last.upper
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">monthly value of tenure (R$)</text>"#,
        W / 2.0,
        H - 12.0
    );
    svg.push_str("</svg>\n");
    svg
}

/// Writes one SVG and one CSV per histogram into `out_dir` and returns the
/// paths written. Nothing is written for an empty input.
pub fn emit_plots(histograms: &[(SectorCategory, Histogram)], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if histograms.is_empty() {
        return Ok(written);
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for (category, histogram) in histograms {
        let stem = file_stem(*category);
        let svg_path = out_dir.join(format!("{stem}.svg"));
        let title = format!("Monthly value of tenure, {}", category.as_str().to_lowercase());
        fs::write(&svg_path, histogram_svg(&title, histogram)).map_err(|e| Error::io(&svg_path, e))?;
        written.push(svg_path);

        let csv_path = out_dir.join(format!("{stem}.csv"));
        let mut buf = Vec::new();
        write_histogram_csv(histogram, &mut buf)?;
        fs::write(&csv_path, buf).map_err(|e| Error::io(&csv_path, e))?;
        written.push(csv_path);
    }
    Ok(written)
}

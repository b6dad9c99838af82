//! One function per subcommand. Each reads its inputs from files, writes its
//! outputs plus a JSON report and a manifest, and returns what it wrote.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use tenure_core::handoff::{self, StatsReport, WorkerStats};
use tenure_core::ingest::{self, IngestOptions, IngestReport, NatureMap, SamplingPlan};
use tenure_core::metrics::ExclusionReport;
use tenure_core::report::{self, Histogram, LevelSummary};
use tenure_core::synth::{self, GenerationSummary, GeneratorConfig};
use tenure_core::valuation::{self, BracketBuildReport};
use tenure_core::{BracketTable, MatchingKeyMode, SectorCategory, TenureValuation};

use crate::args::{AllArgs, BracketsArgs, IngestArgs, ReportArgs, StatsArgs, SynthArgs, ValueArgs};
use crate::manifest::RunManifest;

fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(file))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_file(path, &bytes)
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new("")).join(name)
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn write_manifest(manifest: &RunManifest, next_to: &Path) -> Result<()> {
    write_json(&sibling(next_to, &manifest.file_name()), manifest)
}

pub fn synth(args: &SynthArgs) -> Result<GenerationSummary> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            GeneratorConfig::parse(&text).with_context(|| format!("in config {}", path.display()))?
        }
        None => GeneratorConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.rng_seed = seed;
    }
    if let Some(workers) = args.workers {
        config = config.with_workers(workers);
    }
    let index_out = args.index_out.clone().unwrap_or_else(|| sibling(&args.out, "price_index.csv"));
    let summary_out = sibling(&args.out, "synth_summary.json");

    let mut panel = Vec::new();
    let summary = synth::generate_panel(&config, &mut panel)?;
    write_file(&args.out, &panel)?;
    let mut index = Vec::new();
    synth::generate_price_index(&config, &mut index)?;
    write_file(&index_out, &index)?;
    write_json(&summary_out, &summary)?;

    let mut manifest = RunManifest::new("synth")
        .output("panel", &args.out)
        .output("price_index", &index_out)
        .output("summary", &summary_out);
    if let Some(path) = &args.config {
        manifest = manifest.input("config", path);
    }
    manifest.seed = Some(config.rng_seed);
    write_manifest(&manifest, &args.out)?;
    println!(
        "synth: {} rows, {} workers, {} switchers planted",
        summary.rows_written,
        summary.workers.values().sum::<usize>(),
        summary.switchers_planted
    );
    Ok(summary)
}

pub fn ingest(args: &IngestArgs) -> Result<IngestReport> {
    let index = ingest::parse_price_index(open(&args.index)?, args.deflate_to)
        .with_context(|| format!("in price index {}", args.index.display()))?;
    let natures = match &args.nature_map {
        Some(path) => {
            NatureMap::with_codes(open(path)?).with_context(|| format!("in nature map {}", path.display()))?
        }
        None => NatureMap::default(),
    };
    let sampling = match args.sample {
        Some(quota) => SamplingPlan::uniform(quota, args.seed),
        None => SamplingPlan { rng_seed: args.seed, ..SamplingPlan::default() },
    };
    let options = IngestOptions { natures, window: ingest::default_window(), sampling };
    let (series, report) = ingest::ingest(open(&args.input)?, &index, &options)
        .with_context(|| format!("in panel {}", args.input.display()))?;

    let report_out = args.report.clone().unwrap_or_else(|| sibling(&args.out, "ingest_report.json"));
    let mut buf = Vec::new();
    handoff::write_series_csv(&series, &mut buf)?;
    write_file(&args.out, &buf)?;
    write_json(&report_out, &report)?;

    let mut manifest = RunManifest::new("ingest")
        .input("panel", &args.input)
        .input("price_index", &args.index)
        .output("series", &args.out)
        .output("report", &report_out);
    if let Some(path) = &args.nature_map {
        manifest = manifest.input("nature_map", path);
    }
    manifest.seed = Some(args.seed);
    manifest.deflate_to = Some(args.deflate_to);
    write_manifest(&manifest, &args.out)?;
    println!(
        "ingest: {} series from {} rows, {} rejected, {} switchers discarded",
        report.series_built, report.rows_read, report.rows_rejected, report.switchers_discarded
    );
    Ok(report)
}

pub fn stats(args: &StatsArgs) -> Result<StatsReport> {
    let series =
        handoff::read_series_csv(open(&args.input)?).with_context(|| format!("in series {}", args.input.display()))?;
    let (workers, exclusions) = handoff::worker_stats(&series);
    let mut infinite_sortino = BTreeMap::new();
    for w in workers.iter().filter(|w| w.stats.sortino().is_infinite()) {
        *infinite_sortino.entry(w.category).or_default() += 1;
    }
    let report = StatsReport { workers_in: series.len(), workers_out: workers.len(), infinite_sortino, exclusions };

    let report_out = args.report.clone().unwrap_or_else(|| sibling(&args.out, "stats_report.json"));
    let mut buf = Vec::new();
    handoff::write_stats_csv(&workers, &mut buf)?;
    write_file(&args.out, &buf)?;
    write_json(&report_out, &report)?;

    let manifest =
        RunManifest::new("stats").input("series", &args.input).output("stats", &args.out).output("report", &report_out);
    write_manifest(&manifest, &args.out)?;
    println!("stats: {} of {} workers", report.workers_out, report.workers_in);
    Ok(report)
}

fn read_stats(path: &Path) -> Result<Vec<WorkerStats>> {
    handoff::read_stats_csv(open(path)?).with_context(|| format!("in stats {}", path.display()))
}

fn read_brackets(path: &Path) -> Result<BracketTable> {
    let table = if is_json(path) {
        valuation::read_brackets_json(open(path)?)
    } else {
        valuation::read_brackets_csv(open(path)?)
    };
    table.with_context(|| format!("in bracket table {}", path.display()))
}

#[derive(Debug, Clone, Serialize)]
pub struct BracketsReport {
    pub private_workers: usize,
    pub matching_key: MatchingKeyMode,
    pub k_classes: usize,
    pub without_key: ExclusionReport,
    #[serde(flatten)]
    pub build: BracketBuildReport,
}

pub fn brackets(args: &BracketsArgs) -> Result<(BracketTable, BracketsReport)> {
    let workers = read_stats(&args.input)?;
    let mut without_key = ExclusionReport::default();
    let mut keyed = Vec::new();
    let private: Vec<&WorkerStats> = workers.iter().filter(|w| w.category == SectorCategory::Private).collect();
    for w in &private {
        match w.key(args.matching_key) {
            Some(key) => keyed.push((key, w.stats)),
            None => without_key.record(&w.person_id, &format!("no {} key", args.matching_key.as_str())),
        }
    }
    if keyed.is_empty() {
        bail!("no private-sector workers with a {} key in {}", args.matching_key.as_str(), args.input.display());
    }
    let (table, build) = valuation::build_private_brackets(&keyed, args.k_classes)
        .with_context(|| format!("with {} classes; try a smaller --k-classes", args.k_classes))?;
    let report = BracketsReport {
        private_workers: private.len(),
        matching_key: args.matching_key,
        k_classes: args.k_classes,
        without_key,
        build,
    };

    let report_out = args.report.clone().unwrap_or_else(|| sibling(&args.out, "brackets_report.json"));
    let mut buf = Vec::new();
    if is_json(&args.out) {
        valuation::write_brackets_json(&table, &mut buf)?;
    } else {
        valuation::write_brackets_csv(&table, &mut buf)?;
    }
    write_file(&args.out, &buf)?;
    write_json(&report_out, &report)?;

    let mut manifest = RunManifest::new("brackets")
        .input("stats", &args.input)
        .output("brackets", &args.out)
        .output("report", &report_out);
    manifest.k_classes = Some(args.k_classes);
    manifest.matching_key = Some(args.matching_key);
    write_manifest(&manifest, &args.out)?;
    println!("brackets: {} brackets from {} private workers", table.brackets().len(), report.build.workers_used);
    Ok((table, report))
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ValueReport {
    pub government_workers: usize,
    pub valued: usize,
    pub infinite_sortino: usize,
    pub clamped_below: usize,
    pub clamped_above: usize,
    pub exclusions: ExclusionReport,
}

pub fn value(args: &ValueArgs) -> Result<ValueReport> {
    let workers = read_stats(&args.stats)?;
    let table = match &args.brackets {
        Some(path) => read_brackets(path)?,
        None => valuation::published_bracket_table(),
    };
    let government: Vec<&WorkerStats> = workers.iter().filter(|w| w.category.is_government()).collect();
    let results: Vec<(&WorkerStats, std::result::Result<TenureValuation, String>)> = government
        .par_iter()
        .map(|w| {
            let outcome = match w.key(args.matching_key) {
                None => Err(format!("no {} key", args.matching_key.as_str())),
                Some(key) => valuation::value_tenure(
                    &w.person_id,
                    w.category,
                    w.months_observed,
                    &w.stats,
                    key,
                    &table,
                    args.mode,
                )
                .map_err(|e| e.to_string()),
            };
            (*w, outcome)
        })
        .collect();

    let mut report = ValueReport { government_workers: government.len(), ..ValueReport::default() };
    let mut valuations = Vec::with_capacity(results.len());
    for (w, outcome) in results {
        match outcome {
            Ok(v) => {
                report.infinite_sortino += usize::from(v.flags.infinite_sortino);
                report.clamped_below += usize::from(v.flags.clamped_below);
                report.clamped_above += usize::from(v.flags.clamped_above);
                valuations.push(v);
            }
            Err(reason) => report.exclusions.record(&w.person_id, &reason),
        }
    }
    report.valued = valuations.len();

    let report_out = args.report.clone().unwrap_or_else(|| sibling(&args.out, "value_report.json"));
    let mut buf = Vec::new();
    valuation::write_valuations_csv(&valuations, &mut buf)?;
    write_file(&args.out, &buf)?;
    write_json(&report_out, &report)?;

    let mut manifest = RunManifest::new("value")
        .input("stats", &args.stats)
        .output("valuations", &args.out)
        .output("report", &report_out);
    if let Some(path) = &args.brackets {
        manifest = manifest.input("brackets", path);
    }
    manifest.mode = Some(args.mode);
    manifest.matching_key = Some(args.matching_key);
    write_manifest(&manifest, &args.out)?;
    println!("value: {} of {} government workers valued", report.valued, report.government_workers);
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct HistogramInfo {
    pub category: SectorCategory,
    pub values: usize,
    pub dropped_per_tail: usize,
    pub plotted: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportSummary {
    pub trim: f64,
    pub bins: usize,
    pub levels: Vec<LevelSummary>,
    pub histograms: Vec<HistogramInfo>,
    pub warnings: Vec<String>,
}

pub fn report(args: &ReportArgs) -> Result<ReportSummary> {
    let valuations = valuation::read_valuations_csv(open(&args.input)?)
        .with_context(|| format!("in valuations {}", args.input.display()))?;
    let (levels, warnings) = report::summarize(&valuations);
    let mut histograms: Vec<(SectorCategory, Histogram)> = Vec::new();
    let mut info = Vec::new();
    for category in SectorCategory::GOVERNMENT {
        let monthly: Vec<f64> =
            valuations.iter().filter(|v| v.category == category).map(|v| v.tenure_monthly).collect();
        if monthly.is_empty() {
            continue;
        }
        let h = report::trimmed_histogram(&monthly, args.trim, args.bins)
            .with_context(|| format!("histogram for {category}"))?;
        info.push(HistogramInfo {
            category,
            values: monthly.len(),
            dropped_per_tail: h.dropped_per_tail,
            plotted: h.total(),
        });
        histograms.push((category, h));
    }
    let written = report::emit_plots(&histograms, &args.out_dir)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let summary = ReportSummary { trim: args.trim, bins: args.bins, levels, histograms: info, warnings };
    let summary_out = args.out_dir.join("summary.json");
    write_json(&summary_out, &summary)?;

    let mut manifest = RunManifest::new("report").input("valuations", &args.input).output("summary", &summary_out);
    for path in &written {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        manifest = manifest.output(&name, path);
    }
    write_manifest(&manifest, &summary_out)?;
    for level in &summary.levels {
        println!(
            "report: {} median monthly {:.2}, {:.1}% negative, median {:.1}% of salary",
            level.category,
            level.median_tenure_monthly,
            100.0 * level.negative_share,
            100.0 * level.median_pct_of_salary
        );
    }
    Ok(summary)
}

/// Paths used by `all` inside its output directory.
#[derive(Debug, Clone)]
pub struct RunLayout {
    pub panel: PathBuf,
    pub price_index: PathBuf,
    pub series: PathBuf,
    pub stats: PathBuf,
    pub brackets: PathBuf,
    pub valuations: PathBuf,
    pub report_dir: PathBuf,
}

impl RunLayout {
    pub fn new(dir: &Path) -> Self {
        Self {
            panel: dir.join("panel.csv"),
            price_index: dir.join("price_index.csv"),
            series: dir.join("series.csv"),
            stats: dir.join("stats.csv"),
            brackets: dir.join("brackets.csv"),
            valuations: dir.join("valuations.csv"),
            report_dir: dir.join("report"),
        }
    }
}

/// Runs the stages in order. Errors carry the name of the failing stage.
pub fn all(args: &AllArgs) -> std::result::Result<(), crate::Failure> {
    use crate::Failure;
    let layout = RunLayout::new(&args.out_dir);
    synth(&SynthArgs {
        config: args.config.clone(),
        seed: Some(args.seed),
        workers: Some(args.workers),
        out: layout.panel.clone(),
        index_out: Some(layout.price_index.clone()),
    })
    .map_err(Failure::at("synth"))?;
    ingest(&IngestArgs {
        input: layout.panel.clone(),
        index: layout.price_index.clone(),
        deflate_to: args.deflate_to,
        nature_map: None,
        sample: args.sample,
        seed: args.seed,
        out: layout.series.clone(),
        report: None,
    })
    .map_err(Failure::at("ingest"))?;
    stats(&StatsArgs { input: layout.series.clone(), out: layout.stats.clone(), report: None })
        .map_err(Failure::at("stats"))?;
    brackets(&BracketsArgs {
        input: layout.stats.clone(),
        k_classes: args.k_classes,
        matching_key: args.matching_key,
        out: layout.brackets.clone(),
        report: None,
    })
    .map_err(Failure::at("brackets"))?;
    value(&ValueArgs {
        stats: layout.stats.clone(),
        brackets: Some(layout.brackets.clone()),
        mode: args.mode,
        matching_key: args.matching_key,
        out: layout.valuations.clone(),
        report: None,
    })
    .map_err(Failure::at("value"))?;
    report(&ReportArgs {
        input: layout.valuations.clone(),
        out_dir: layout.report_dir.clone(),
        trim: args.trim,
        bins: args.bins,
    })
    .map_err(Failure::at("report"))?;

    let mut manifest = RunManifest::new("all")
        .output("panel", &layout.panel)
        .output("price_index", &layout.price_index)
        .output("series", &layout.series)
        .output("stats", &layout.stats)
        .output("brackets", &layout.brackets)
        .output("valuations", &layout.valuations)
        .output("report", &layout.report_dir);
    if let Some(path) = &args.config {
        manifest = manifest.input("config", path);
    }
    manifest.seed = Some(args.seed);
    manifest.mode = Some(args.mode);
    manifest.matching_key = Some(args.matching_key);
    manifest.k_classes = Some(args.k_classes);
    manifest.deflate_to = Some(args.deflate_to);
    write_manifest(&manifest, &layout.panel).map_err(Failure::at("all"))
}

//! Acceptance criteria, one line each. Runs without the libtest harness so the
//! lines come out in order and uncaptured; exits nonzero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tenure_core::handoff::read_stats_csv;
use tenure_core::jenks::{brute_force_breaks, jenks_breaks};
use tenure_core::metrics::{compute_stats, downside_deviation, human_capital_proxy, monthly_changes, return_rate};
use tenure_core::report::{lower_median, trimmed_histogram};
use tenure_core::valuation::{
    bracket_key, lookup_bracket, published_bracket_table, required_return, risk_adjusted_total, value_tenure, Clamp,
};
use tenure_core::{Cents, MatchingKeyMode, MonthStamp, SectorCategory, SortinoStats, ValuationMode, WageSeries};

type Outcome = Result<(), String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let held: bool = $cond;
        if !held {
            return Err(format!($($fmt)+));
        }
    };
}

fn series(category: SectorCategory, wages: &[f64]) -> WageSeries {
    let start = MonthStamp::new(2005, 1).unwrap().ordinal();
    let obs = wages.iter().enumerate().map(|(i, &w)| (MonthStamp::from_ordinal(start + i as i64), w)).collect();
    WageSeries::new("w", category, obs).unwrap()
}

fn jane() -> Outcome {
    // 4000, 5000, 6000, then 177 integer wages summing to 285000
    let mut wages = vec![4000.0, 5000.0, 6000.0];
    wages.extend(std::iter::repeat_n(1611.0, 30));
    wages.extend(std::iter::repeat_n(1610.0, 147));
    let s = series(SectorCategory::Federal, &wages);
    ensure!(s.len() == 180 && s.total() == 300_000.0, "series setup: {} months, total {}", s.len(), s.total());
    let k = human_capital_proxy(&s).map_err(|e| e.to_string())?;
    ensure!(k == 500_000.0, "k = {k}");
    let r = return_rate(&s, k).map_err(|e| e.to_string())?;
    ensure!(r == 0.6, "R = {r}");
    let key = bracket_key(&s, MatchingKeyMode::FirstThreeWageSum).map_err(|e| e.to_string())?;
    ensure!(key == 15_000.0, "key = {key}");

    let stats = SortinoStats::from_parts(k, s.total(), 0.025).map_err(|e| e.to_string())?;
    let sortino = stats.sortino().finite().ok_or("infinite Sortino")?;
    ensure!((sortino - 24.0).abs() < 1e-12, "Sortino = {sortino}");
    let table = published_bracket_table();
    let matched = lookup_bracket(&table, key);
    ensure!(matched.bracket.mean_sortino == 13.21, "bracket mean {}", matched.bracket.mean_sortino);
    let required = required_return(matched.bracket.mean_sortino, stats.downside_deviation());
    ensure!((required - 0.33025).abs() < 1e-15, "required return {required}");

    let example = value_tenure("jane", s.category(), s.len(), &stats, key, &table, ValuationMode::PaperExample)
        .map_err(|e| e.to_string())?;
    ensure!(
        example.risk_adjusted_total == Cents(9_907_500),
        "example-mode risk-adjusted {}",
        example.risk_adjusted_total
    );
    ensure!(example.tenure_total == Cents(20_092_500), "example-mode tenure {}", example.tenure_total);
    ensure!(example.tenure_monthly == 1116.25, "example-mode monthly {}", example.tenure_monthly);

    let formula = value_tenure("jane", s.category(), s.len(), &stats, key, &table, ValuationMode::FormulaConsistent)
        .map_err(|e| e.to_string())?;
    ensure!(formula.risk_adjusted_total == Cents(16_512_500), "formula risk-adjusted {}", formula.risk_adjusted_total);
    ensure!(formula.tenure_total == Cents(13_487_500), "formula tenure {}", formula.tenure_total);
    Ok(())
}

/// Exact rational with a positive denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Frac(i128, i128);

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Frac {
    fn new(num: i128, den: i128) -> Frac {
        let g = gcd(num, den).max(1);
        Frac(num / g, den / g)
    }

    fn add(self, o: Frac) -> Frac {
        Frac::new(self.0 * o.1 + o.0 * self.1, self.1 * o.1)
    }

    fn less(self, o: Frac) -> bool {
        self.0 * o.1 < o.0 * self.1
    }
}

/// Within-class SSD of integers: `(n Σx² − (Σx)²) / n`.
fn exact_ssd(values: &[i64]) -> Frac {
    let n = values.len() as i128;
    let sum: i128 = values.iter().map(|&v| v as i128).sum();
    let sq: i128 = values.iter().map(|&v| (v as i128) * (v as i128)).sum();
    Frac::new(n * sq - sum * sum, n)
}

/// Minimum total SSD over every way of cutting the sorted values into `k` runs.
fn exact_brute_force(sorted: &[i64], k: usize) -> Frac {
    fn go(sorted: &[i64], k: usize) -> Frac {
        if k == 1 {
            return exact_ssd(sorted);
        }
        let mut best: Option<Frac> = None;
        for cut in 1..=sorted.len() - (k - 1) {
            let total = exact_ssd(&sorted[..cut]).add(go(&sorted[cut..], k - 1));
            if best.is_none_or(|b| total.less(b)) {
                best = Some(total);
            }
        }
        best.unwrap()
    }
    go(sorted, k)
}

fn jenks_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2005);
    let mut done = 0;
    while done < 500 {
        let k = rng.gen_range(2..=4);
        let n = rng.gen_range(k..=12);
        let values: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=1000)).collect();
        if values.iter().collect::<BTreeSet<_>>().len() < k {
            continue;
        }
        let floats: Vec<f64> = values.iter().map(|&v| v as f64).collect();
        let dp = jenks_breaks(&floats, k).map_err(|e| e.to_string())?;
        let mut dp_total = Frac(0, 1);
        for class in 0..k {
            let members: Vec<i64> =
                values.iter().zip(dp.partition()).filter(|(_, &c)| c == class).map(|(&v, _)| v).collect();
            dp_total = dp_total.add(exact_ssd(&members));
        }
        let mut sorted = values.clone();
        sorted.sort_unstable();
        let oracle = exact_brute_force(&sorted, k);
        ensure!(dp_total == oracle, "instance {done}: {values:?} k={k}: DP {dp_total:?} vs brute force {oracle:?}");

        let brute = brute_force_breaks(&floats, k).map_err(|e| e.to_string())?;
        let (a, b) = (dp.total_within_class_ssd(), brute.total_within_class_ssd());
        ensure!((a - b).abs() <= 1e-9 * b.max(1.0), "instance {done}: float SSD {a} vs {b}");
        done += 1;
    }
    Ok(())
}

fn downside_suite() -> Outcome {
    let flat = series(SectorCategory::Municipal, &[2500.0; 180]);
    let stats = compute_stats(&flat).map_err(|e| e.to_string())?;
    ensure!(stats.downside_deviation() == 0.0, "constant DD {}", stats.downside_deviation());
    ensure!(stats.sortino().is_infinite(), "constant series Sortino not infinite");
    let v =
        value_tenure("c", flat.category(), 180, &stats, 2500.0, &published_bracket_table(), ValuationMode::default())
            .map_err(|e| e.to_string())?;
    ensure!(v.flags.infinite_sortino, "infinite-Sortino flag missing");

    let dd = downside_deviation(&monthly_changes(&series(SectorCategory::Private, &[1000.0, 900.0, 990.0])).unwrap())
        .map_err(|e| e.to_string())?;
    ensure!((dd - 0.005f64.sqrt()).abs() <= 1e-12, "DD {dd} vs sqrt(0.005)");

    let mut rng = ChaCha8Rng::seed_from_u64(1979);
    for i in 0..1000 {
        let n = rng.gen_range(2..=180);
        let wages: Vec<f64> = (0..n).map(|_| rng.gen_range(100.0..20_000.0)).collect();
        let s = series(SectorCategory::Private, &wages);
        let base = downside_deviation(&monthly_changes(&s).unwrap()).unwrap();
        for c in [0.5, 2.0, 10.0] {
            let scaled = downside_deviation(&monthly_changes(&s.scaled(c).unwrap()).unwrap()).unwrap();
            ensure!((scaled - base).abs() <= 1e-12, "series {i}, c = {c}: {scaled} vs {base}");
        }
    }
    Ok(())
}

fn valuation_algebra() -> Outcome {
    let table = published_bracket_table();
    let mut rng = ChaCha8Rng::seed_from_u64(1116);
    for i in 0..1000 {
        let k = rng.gen_range(1e4..1e7);
        let total = rng.gen_range(1e4..1e7);
        let dd = rng.gen_range(1e-4..0.3);
        let key = rng.gen_range(0.0..250_000.0);
        let months = rng.gen_range(1..=180);
        let mode = if rng.gen_bool(0.5) { ValuationMode::PaperExample } else { ValuationMode::FormulaConsistent };
        let stats = SortinoStats::from_parts(k, total, dd).map_err(|e| e.to_string())?;
        let v =
            value_tenure("w", SectorCategory::State, months, &stats, key, &table, mode).map_err(|e| e.to_string())?;
        ensure!(v.tenure_total + v.risk_adjusted_total == v.actual_total, "worker {i}: {v:?}");

        // same worker, total chosen so its Sortino equals the bracket mean
        let mean = lookup_bracket(&table, key).bracket.mean_sortino;
        let matched_total = required_return(mean, dd) * k;
        let matched = SortinoStats::from_parts(k, matched_total, dd).map_err(|e| e.to_string())?;
        let sortino = matched.sortino().finite().unwrap();
        ensure!((sortino - mean).abs() <= 1e-9 * mean, "worker {i}: Sortino {sortino} vs mean {mean}");
        let unrounded = matched_total
            - risk_adjusted_total(required_return(mean, dd), k, matched_total, ValuationMode::FormulaConsistent);
        ensure!(unrounded.abs() <= 1e-9 * matched_total, "worker {i}: unrounded tenure {unrounded}");
        let v =
            value_tenure("w", SectorCategory::State, months, &matched, key, &table, ValuationMode::FormulaConsistent)
                .map_err(|e| e.to_string())?;
        ensure!(
            (v.tenure_total.0 as f64).abs() <= 1e-9 * v.actual_total.0 as f64,
            "worker {i}: tenure {} on actual {}",
            v.tenure_total,
            v.actual_total
        );
    }
    Ok(())
}

fn table_fixture() -> Outcome {
    let table = published_bracket_table();
    let m = lookup_bracket(&table, 15_000.0);
    ensure!(m.bracket.mean_sortino == 13.21 && m.clamp == Clamp::None, "15000 -> {m:?}");
    let m = lookup_bracket(&table, 200_000.0);
    ensure!(m.bracket.mean_sortino == 5.27 && m.clamp == Clamp::Above, "200000 -> {m:?}");
    let m = lookup_bracket(&table, 1.0);
    ensure!(m.bracket.mean_sortino == 23.03 && m.clamp == Clamp::Below, "1 -> {m:?}");
    Ok(())
}

/// Every non-manifest file under `dir`, keyed by relative path.
fn outputs(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if !path.to_string_lossy().ends_with(".manifest.json") {
                files.insert(path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn run_all(dir: &Path) -> Result<Duration, String> {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_tenure"))
        .args(["all", "--seed", "7", "--workers", "1000", "--out-dir"])
        .arg(dir)
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure!(out.status.success(), "run failed: {}", String::from_utf8_lossy(&out.stderr));
    Ok(elapsed)
}

fn end_to_end() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let took = run_all(dir)?;
        ensure!(took < Duration::from_secs(60), "run took {took:?}");
    }

    let workers = read_stats_csv(fs::File::open(a.join("stats.csv")).unwrap()).map_err(|e| e.to_string())?;
    let median_dd = |public: bool| {
        let v: Vec<f64> = workers
            .iter()
            .filter(|w| w.category.is_government() == public)
            .map(|w| w.stats.downside_deviation())
            .collect();
        lower_median(&v).unwrap_or(f64::NAN)
    };
    let (public, private) = (median_dd(true), median_dd(false));
    ensure!(public < private, "median DD public {public} vs private {private}");

    let read_json = |p: PathBuf| -> serde_json::Value { serde_json::from_slice(&fs::read(p).unwrap()).unwrap() };
    let planted = read_json(a.join("synth_summary.json"));
    let report = read_json(a.join("ingest_report.json"));
    let ids = |v: &serde_json::Value| -> BTreeSet<String> {
        v.as_array().unwrap().iter().map(|s| s.as_str().unwrap().to_owned()).collect()
    };
    let (planted_ids, dropped_ids) = (ids(&planted["switcher_ids"]), ids(&report["switcher_ids"]));
    ensure!(!planted_ids.is_empty(), "no switchers planted");
    ensure!(planted_ids == dropped_ids, "planted {} switchers, discarded {}", planted_ids.len(), dropped_ids.len());
    ensure!(report["switchers_discarded"] == planted["switchers_planted"], "switcher counts disagree");

    let (fa, fb) = (outputs(&a), outputs(&b));
    ensure!(fa.keys().eq(fb.keys()), "different file sets");
    for (name, bytes) in &fa {
        ensure!(bytes == &fb[name], "{} differs between runs", name.display());
    }
    Ok(())
}

fn trim_rule() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let forty: Vec<f64> = (0..40).map(|_| rng.gen_range(-1000.0..5000.0)).collect();
    let h = trimmed_histogram(&forty, 0.025, 50).map_err(|e| e.to_string())?;
    ensure!(h.dropped_per_tail == 1 && h.total() == 38, "n = 40: dropped {}, kept {}", h.dropped_per_tail, h.total());
    for _ in 0..300 {
        let n = rng.gen_range(10..=10_000);
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-5000.0..20_000.0)).collect();
        let h = trimmed_histogram(&values, 0.025, 50).map_err(|e| e.to_string())?;
        let expected = n - 2 * (0.025 * n as f64).floor() as usize;
        ensure!(h.total() == expected, "n = {n}: histogram holds {}, expected {expected}", h.total());
    }
    Ok(())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("Jane golden test", jane, Duration::from_secs(1)),
        ("Jenks oracle equivalence", jenks_oracle, Duration::from_secs(10)),
        ("downside-deviation suite", downside_suite, Duration::from_secs(5)),
        ("valuation algebra", valuation_algebra, Duration::from_secs(5)),
        ("bracket table fixture", table_fixture, Duration::from_secs(1)),
        ("end-to-end synthetic run", end_to_end, Duration::from_secs(120)),
        ("trim rule", trim_rule, Duration::from_secs(5)),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let outcome =
            outcome.and_then(
                |()| {
                    if took <= budget {
                        Ok(())
                    } else {
                        Err(format!("took {took:?}, budget {budget:?}"))
                    }
                },
            );
        match outcome {
            Ok(()) => println!("criterion {}: PASS {name} ({:.2?})", i + 1, took),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({:.2?}): {why}", i + 1, took);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

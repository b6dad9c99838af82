use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tenure_cli::RunManifest;
use tenure_core::valuation::{read_brackets_csv, read_valuations_csv};
use tenure_core::Cents;

const JANE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/jane_stats.csv");

fn tenure(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tenure")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = tenure(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
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

#[test]
fn jane_paper_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("valuations.csv");
    ok(&["value", "--stats", JANE, "--mode", "paper-example", "--matching-key", "first-three-sum", "--out", s(&out)]);
    let v = read_valuations_csv(fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].risk_adjusted_total, Cents(9_907_500));
    assert_eq!(v[0].tenure_total, Cents(20_092_500));
    assert_eq!(v[0].tenure_monthly, 1116.25);
    assert!(dir.path().join("value.manifest.json").exists());
}

#[test]
fn jane_formula_mode() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.csv");
    ok(&["value", "--stats", JANE, "--matching-key", "first-three-sum", "--out", s(&out)]);
    let v = read_valuations_csv(fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(v[0].risk_adjusted_total, Cents(16_512_500));
    assert_eq!(v[0].tenure_total, Cents(13_487_500));
}

#[test]
fn jane_without_2005_key_is_excluded() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.csv");
    ok(&["value", "--stats", JANE, "--out", s(&out)]);
    assert!(read_valuations_csv(fs::File::open(&out).unwrap()).unwrap().is_empty());
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("value_report.json")).unwrap()).unwrap();
    assert_eq!(report["exclusions"]["by_reason"]["no mean-2005 key"], 1);
}

#[test]
fn all_equals_composed_stages() {
    let dir = tempfile::tempdir().unwrap();
    let chained = dir.path().join("chained");
    let staged = dir.path().join("staged");
    ok(&["all", "--seed", "11", "--workers", "80", "--k-classes", "5", "--out-dir", s(&chained)]);

    let p = |name: &str| staged.join(name);
    ok(&["synth", "--seed", "11", "--workers", "80", "--out", s(&p("panel.csv"))]);
    ok(&[
        "ingest",
        "--input",
        s(&p("panel.csv")),
        "--index",
        s(&p("price_index.csv")),
        "--seed",
        "11",
        "--out",
        s(&p("series.csv")),
    ]);
    ok(&["stats", "--input", s(&p("series.csv")), "--out", s(&p("stats.csv"))]);
    ok(&["brackets", "--input", s(&p("stats.csv")), "--k", "5", "--out", s(&p("brackets.csv"))]);
    ok(&[
        "value",
        "--stats",
        s(&p("stats.csv")),
        "--brackets",
        s(&p("brackets.csv")),
        "--out",
        s(&p("valuations.csv")),
    ]);
    ok(&["report", "--input", s(&p("valuations.csv")), "--out-dir", s(&p("report"))]);

    let a = outputs(&chained);
    let b = outputs(&staged);
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (name, bytes) in &a {
        assert!(bytes == &b[name], "{} differs", name.display());
    }
}

#[test]
fn brackets_on_synthetic_private_data() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["all", "--seed", "3", "--workers", "200", "--out-dir", s(dir.path())]);
    let table = read_brackets_csv(fs::File::open(dir.path().join("brackets.csv")).unwrap()).unwrap();
    let b = table.brackets();
    assert_eq!(b.len(), 10);
    assert!(b.windows(2).all(|w| w[0].upper == w[1].lower && w[0].lower < w[0].upper));

    let json = dir.path().join("brackets.json");
    ok(&["brackets", "--input", s(&dir.path().join("stats.csv")), "--k", "10", "--out", s(&json)]);
    let from_json = tenure_core::valuation::read_brackets_json(fs::File::open(&json).unwrap()).unwrap();
    assert_eq!(from_json, table);
}

#[test]
fn stages_are_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["all", "--seed", "5", "--workers", "50", "--out-dir", s(dir.path())]);
    let before = outputs(dir.path());
    let stats = dir.path().join("stats.csv");
    ok(&["stats", "--input", s(&dir.path().join("series.csv")), "--out", s(&stats)]);
    ok(&[
        "--threads",
        "1",
        "value",
        "--stats",
        s(&stats),
        "--brackets",
        s(&dir.path().join("brackets.csv")),
        "--out",
        s(&dir.path().join("valuations.csv")),
    ]);
    assert_eq!(outputs(dir.path()), before);
}

#[test]
fn manifests_describe_runs() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["all", "--seed", "9", "--workers", "30", "--mode", "paper-example", "--out-dir", s(dir.path())]);
    for stage in ["synth", "ingest", "stats", "brackets", "value", "all"] {
        let text = fs::read(dir.path().join(format!("{stage}.manifest.json"))).unwrap();
        let m: RunManifest = serde_json::from_slice(&text).unwrap();
        assert_eq!(m.subcommand, stage);
        assert!(!m.outputs.is_empty());
    }
    let all: RunManifest = serde_json::from_slice(&fs::read(dir.path().join("all.manifest.json")).unwrap()).unwrap();
    assert_eq!(all.seed, Some(9));
    assert_eq!(all.mode, Some(tenure_core::ValuationMode::PaperExample));
    assert_eq!(all.k_classes, Some(10));
    assert_eq!(all.deflate_to.map(|m| m.to_string()).as_deref(), Some("2019-12"));
    assert!(dir.path().join("report/report.manifest.json").exists());
}

#[test]
fn failures_report_structured_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = tenure(&[
        "ingest",
        "--input",
        "/definitely/missing.csv",
        "--index",
        JANE,
        "--out",
        s(&dir.path().join("x.csv")),
    ]);
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["stage"], "ingest");
    assert!(err["error"]["message"].as_str().unwrap().contains("price index"));

    let bad_panel = dir.path().join("panel.csv");
    fs::write(&bad_panel, "id,when,pay\n1,2,3\n").unwrap();
    let index = dir.path().join("index.csv");
    fs::write(&index, "year,month,index\n2019,12,100\n").unwrap();
    let out =
        tenure(&["ingest", "--input", s(&bad_panel), "--index", s(&index), "--out", s(&dir.path().join("x.csv"))]);
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["stage"], "ingest");

    let out = tenure(&["brackets", "--input", JANE, "--out", s(&dir.path().join("b.csv"))]);
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["stage"], "brackets");

    assert!(!tenure(&["value", "--stats", JANE, "--mode", "bogus"]).status.success());
}

#[test]
fn too_many_classes_suggests_fewer() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["all", "--seed", "2", "--workers", "20", "--k", "3", "--out-dir", s(dir.path())]);
    let out = tenure(&[
        "brackets",
        "--input",
        s(&dir.path().join("stats.csv")),
        "--k",
        "500",
        "--out",
        s(&dir.path().join("b.csv")),
    ]);
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"]["message"].as_str().unwrap().contains("smaller --k-classes"));
}

//! Artifact names and the small flat-file formats owned by the CLI.

use anyhow::{bail, Context, Result};
use crashaudit::audit::CountyRates;
use crashaudit::AlcoholRel;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

pub const DATASET: &str = "dataset.csv";
pub const INGEST_REPORT: &str = "ingest_report.json";
pub const TRUTH: &str = "truth.csv";
pub const REVIEW_LABELS: &str = "review_labels.csv";
pub const TFIDF_MODEL: &str = "tfidf.model";
pub const CLASSIFIER_MODEL: &str = "classifier.model";
pub const TABLE5: &str = "table5.tsv";
pub const TRAIN_METRICS: &str = "train_metrics.json";
pub const PREDICTIONS: &str = "predictions.csv";
pub const CLASSIFY_REPORT: &str = "classify_report.json";
pub const MISMATCH_LABELS: &str = "mismatch_labels.csv";
pub const AIM_REPORT: &str = "aim_report.json";
pub const REPORTED_TABLE: &str = "reported_table.tsv";
pub const AIM_TABLE: &str = "aim_table.tsv";
pub const YEAR_SERIES: &str = "year_series.tsv";
pub const SEVERITY_SERIES: &str = "severity_series.tsv";
pub const COUNTY_SERIES: &str = "county_series.tsv";
pub const COUNTY_RATES: &str = "county_rates.csv";
pub const LISA_FULL: &str = "lisa.csv";
pub const TABLE6: &str = "table6.tsv";
pub const LISA_MAP: &str = "lisa_map.csv";
pub const GLMM_FIT: &str = "glmm_fit.json";
pub const TABLE8: &str = "table8.tsv";
pub const GLMM_RUNS: &str = "glmm_runs.csv";
pub const GLMM_DESIGN: &str = "glmm_design.json";
pub const ANOMALIES: &str = "anomalies.csv";
pub const REPORT_DIR: &str = "report";
pub const SUMMARY: &str = "report/summary.txt";

pub fn render_review_labels(labels: &BTreeMap<i64, bool>) -> String {
    let mut out = String::from("CRASH_KEY,LABEL\n");
    for (k, &alc) in labels {
        let _ = writeln!(out, "{k},{}", AlcoholRel::from_bool(alc));
    }
    out
}

/// `CRASH_KEY,LABEL` with Alcohol/NonAlcohol (or 1/0) labels.
pub fn read_review_labels(path: &Path) -> Result<BTreeMap<i64, bool>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.to_ascii_uppercase().starts_with("CRASH_KEY")) {
            continue;
        }
        let (k, l) = line.split_once(',').with_context(|| format!("{}:{}: expected CRASH_KEY,LABEL", path.display(), i + 1))?;
        let key: i64 = k.trim().parse().with_context(|| format!("{}:{}: bad crash key {k:?}", path.display(), i + 1))?;
        let label = match l.trim() {
            "1" => true,
            "0" => false,
            other => match AlcoholRel::parse(other) {
                Some(a) => a.is_alcohol(),
                None => bail!("{}:{}: unknown label {other:?}", path.display(), i + 1),
            },
        };
        if out.insert(key, label).is_some() {
            bail!("{}: crash key {key} labelled twice", path.display());
        }
    }
    Ok(out)
}

/// `County,AIM,NonAIM,Rate` with `NA` for counties without a rate.
pub fn render_county_rates(counts: &BTreeMap<String, (u64, u64)>, rates: &CountyRates) -> String {
    let mut out = String::from("County,AIM,NonAIM,Rate\n");
    for (county, (aim, non)) in counts {
        let rate = rates.rates.get(county).map_or("NA".to_string(), |r| format!("{r:?}"));
        let _ = writeln!(out, "{county},{aim},{non},{rate}");
    }
    out
}

/// County → rate for counties with a defined rate, plus all counties seen.
pub fn read_county_rates(path: &Path) -> Result<(BTreeMap<String, f64>, Vec<String>)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    if lines.next() != Some("County,AIM,NonAIM,Rate") {
        bail!("{}: unexpected header", path.display());
    }
    let mut rates = BTreeMap::new();
    let mut all = Vec::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            bail!("{}: bad row {line:?}", path.display());
        }
        all.push(f[0].to_string());
        if f[3] != "NA" {
            rates.insert(f[0].to_string(), f[3].parse::<f64>().with_context(|| format!("bad rate in {line:?}"))?);
        }
    }
    Ok((rates, all))
}

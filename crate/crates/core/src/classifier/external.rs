use super::model::{PredictedLabel, Prediction, PredictionSet, PredictionSource};
use crate::corpus::Dataset;
use crate::{Error, Result};
use serde::Serialize;
use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

/// Outcome of loading an external scores file.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExternalReport {
    /// `(line, reason)` for rows that were skipped.
    pub rejected: Vec<(u64, String)>,
    /// Keys in the file with no record in the dataset.
    pub unmatched: Vec<i64>,
    /// Dataset keys the file did not score.
    pub missing: Vec<i64>,
}

/// Reads `(crash_key, score)` rows. A header row is optional. Scores
/// outside [0, 1] are rejected per row; a key scored twice is fatal.
pub fn load_external_predictions(path: &Path, ds: &Dataset, threshold: f64) -> Result<(PredictionSet, ExternalReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let mut set = PredictionSet::new();
    let mut report = ExternalReport::default();
    let mut seen = HashSet::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(i as u64 + 1);
        let key_field = row.get(0).unwrap_or("");
        let key: i64 = match key_field.parse() {
            Ok(k) => k,
            Err(_) if i == 0 => continue,
            Err(_) => {
                report.rejected.push((line, format!("unreadable crash key {key_field:?}")));
                continue;
            }
        };
        if !seen.insert(key) {
            return Err(Error::DuplicateKey { table: "external scores".into(), key });
        }
        let score = match row.get(1).map(str::parse::<f64>) {
            Some(Ok(s)) if (0.0..=1.0).contains(&s) => s,
            Some(Ok(s)) => {
                report.rejected.push((line, format!("score {s} outside [0, 1]")));
                continue;
            }
            _ => {
                report.rejected.push((line, "missing or unreadable score".into()));
                continue;
            }
        };
        if !ds.contains(key) {
            report.unmatched.push(key);
            continue;
        }
        let label = PredictedLabel::from_score(score, threshold);
        set.insert(key, Prediction { label, score, source: PredictionSource::External })?;
    }
    report.missing = ds.iter().map(|r| r.crash_key).filter(|k| set.get(*k).is_none()).collect();
    Ok((set, report))
}

/// Writes `CRASH_KEY,LABEL,SCORE,SOURCE` rows in key order.
pub fn write_predictions<W: Write>(preds: &PredictionSet, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let werr = |e: csv::Error| Error::format("predictions", e.to_string());
    out.write_record(["CRASH_KEY", "LABEL", "SCORE", "SOURCE"]).map_err(werr)?;
    for (k, p) in preds.iter() {
        out.write_record([k.to_string(), p.label.to_string(), format!("{:?}", p.score), p.source.as_str().to_string()])
            .map_err(werr)?;
    }
    out.flush().map_err(|e| Error::format("predictions", e.to_string()))?;
    Ok(())
}

/// Reads a file written by [`write_predictions`].
pub fn read_predictions(path: &Path) -> Result<PredictionSet> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let bad = |d: String| Error::format("predictions", d);
    let mut set = PredictionSet::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        if row.len() != 4 {
            return Err(bad(format!("expected 4 fields, got {}", row.len())));
        }
        let key = row[0].parse().map_err(|_| bad(format!("bad key {:?}", &row[0])))?;
        let label = PredictedLabel::parse(&row[1]).ok_or_else(|| bad(format!("bad label {:?}", &row[1])))?;
        let score = row[2].parse().map_err(|_| bad(format!("bad score {:?}", &row[2])))?;
        let source = PredictionSource::parse(&row[3]).ok_or_else(|| bad(format!("bad source {:?}", &row[3])))?;
        set.insert(key, Prediction { label, score, source })?;
    }
    Ok(set)
}

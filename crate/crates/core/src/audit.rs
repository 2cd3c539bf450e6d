//! Mismatch categories and AIM rates.
//!
//! Only crashes the classifier calls Alcoholic are categorized: AIM when the
//! recorded flag is NonAlcohol, NonAIM when it is Alcohol. Everything
//! predicted NonAlcoholic is NotApplicable and stays out of every rate.

use crate::classifier::PredictionSet;
use crate::corpus::{Dataset, Severity};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MismatchCategory {
    #[serde(rename = "AIM")]
    Aim,
    #[serde(rename = "NonAIM")]
    NonAim,
    NotApplicable,
}

impl MismatchCategory {
    pub fn of(predicted_alcoholic: bool, recorded_alcohol: bool) -> Self {
        match (predicted_alcoholic, recorded_alcohol) {
            (true, false) => MismatchCategory::Aim,
            (true, true) => MismatchCategory::NonAim,
            (false, _) => MismatchCategory::NotApplicable,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MismatchCategory::Aim => "AIM",
            MismatchCategory::NonAim => "NonAIM",
            MismatchCategory::NotApplicable => "NotApplicable",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "AIM" => Some(MismatchCategory::Aim),
            "NonAIM" => Some(MismatchCategory::NonAim),
            "NotApplicable" => Some(MismatchCategory::NotApplicable),
            _ => None,
        }
    }
}

impl fmt::Display for MismatchCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MismatchLabel {
    pub crash_key: i64,
    pub category: MismatchCategory,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AimCounts {
    pub aim: u64,
    pub non_aim: u64,
}

impl AimCounts {
    pub fn add(&mut self, category: MismatchCategory) {
        match category {
            MismatchCategory::Aim => self.aim += 1,
            MismatchCategory::NonAim => self.non_aim += 1,
            MismatchCategory::NotApplicable => {}
        }
    }

    pub fn denominator(&self) -> u64 {
        self.aim + self.non_aim
    }

    /// AIM share in [0, 1]; `None` when nothing was predicted Alcoholic.
    pub fn rate(&self) -> Option<f64> {
        (self.denominator() > 0).then(|| self.aim as f64 / self.denominator() as f64)
    }

    /// AIM percentage, `100 · aim / (aim + non_aim)`.
    pub fn pct(&self) -> Option<f64> {
        (self.denominator() > 0).then(|| 100.0 * self.aim as f64 / self.denominator() as f64)
    }
}

impl std::ops::AddAssign for AimCounts {
    fn add_assign(&mut self, other: AimCounts) {
        self.aim += other.aim;
        self.non_aim += other.non_aim;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AimReport {
    pub overall: AimCounts,
    pub not_applicable: u64,
    pub by_year: BTreeMap<i32, AimCounts>,
    pub by_severity: BTreeMap<Severity, AimCounts>,
    pub by_county: BTreeMap<String, AimCounts>,
    #[serde(skip)]
    pub by_year_severity: BTreeMap<(i32, Severity), AimCounts>,
}

/// One label per prediction, in key order.
pub fn categorize(preds: &PredictionSet, ds: &Dataset) -> Result<Vec<MismatchLabel>> {
    preds
        .iter()
        .map(|(key, p)| {
            let rec = ds
                .get(key)
                .ok_or_else(|| Error::KeyMismatch(format!("prediction for crash {key} has no record")))?;
            let category = MismatchCategory::of(p.label.is_alcoholic(), rec.alcohol_rel.is_alcohol());
            Ok(MismatchLabel { crash_key: key, category })
        })
        .collect()
}

/// Counts per stratum. Every year, severity and county present in `ds`
/// gets a row, even when its counts are zero.
pub fn aggregate(labels: &[MismatchLabel], ds: &Dataset) -> Result<AimReport> {
    let mut report = AimReport::default();
    for r in ds {
        report.by_year.entry(r.crash_year).or_default();
        report.by_severity.entry(r.severity).or_default();
        report.by_county.entry(r.county.clone()).or_default();
    }
    for l in labels {
        let r = ds
            .get(l.crash_key)
            .ok_or_else(|| Error::KeyMismatch(format!("label for crash {} has no record", l.crash_key)))?;
        if l.category == MismatchCategory::NotApplicable {
            report.not_applicable += 1;
            continue;
        }
        report.overall.add(l.category);
        report.by_year.entry(r.crash_year).or_default().add(l.category);
        report.by_severity.entry(r.severity).or_default().add(l.category);
        report.by_county.entry(r.county.clone()).or_default().add(l.category);
        report.by_year_severity.entry((r.crash_year, r.severity)).or_default().add(l.category);
    }
    Ok(report)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CountyRates {
    /// AIM share in [0, 1] for counties with a defined rate.
    pub rates: BTreeMap<String, f64>,
    /// Counties with no predicted-Alcoholic crash.
    pub excluded: Vec<String>,
}

pub fn county_rates(report: &AimReport) -> CountyRates {
    let mut out = CountyRates::default();
    for (county, c) in &report.by_county {
        match c.rate() {
            Some(r) => {
                out.rates.insert(county.clone(), r);
            }
            None => out.excluded.push(county.clone()),
        }
    }
    out
}

/// Severity columns in the order used by the stratified count tables.
pub const SEVERITY_COLUMNS: [Severity; 5] = [
    Severity::PropertyDamageOnly,
    Severity::PossibleUnknown,
    Severity::MinorInjury,
    Severity::MajorInjury,
    Severity::Fatal,
];

fn severity_title(s: Severity) -> &'static str {
    match s {
        Severity::PropertyDamageOnly => "Property Damage Only",
        Severity::PossibleUnknown => "Possible/Unknown",
        Severity::MinorInjury => "Minor Injury",
        Severity::MajorInjury => "Major Injury",
        Severity::Fatal => "Fatal",
    }
}

fn pct_cell(num: u64, den: u64) -> String {
    if den == 0 {
        "NA".into()
    } else {
        format!("{:.2}", 100.0 * num as f64 / den as f64)
    }
}

/// Years × severity table of (first, second) counts with a total column
/// pair and a closing percentage row.
fn year_severity_table(cells: &BTreeMap<(i32, Severity), (u64, u64)>, names: (&str, &str), pct_label: &str) -> String {
    let mut out = String::from("Year");
    for s in SEVERITY_COLUMNS.iter().map(|&s| severity_title(s)).chain(["Total"]) {
        let _ = write!(out, "\t{s} {}\t{s} {}", names.0, names.1);
    }
    out.push('\n');
    let years: std::collections::BTreeSet<i32> = cells.keys().map(|k| k.0).collect();
    let mut col_totals = [(0u64, 0u64); 6];
    for y in years {
        let _ = write!(out, "{y}");
        let mut row = (0, 0);
        for (i, s) in SEVERITY_COLUMNS.iter().enumerate() {
            let c = cells.get(&(y, *s)).copied().unwrap_or_default();
            let _ = write!(out, "\t{}\t{}", c.0, c.1);
            row.0 += c.0;
            row.1 += c.1;
            col_totals[i].0 += c.0;
            col_totals[i].1 += c.1;
        }
        col_totals[5].0 += row.0;
        col_totals[5].1 += row.1;
        let _ = writeln!(out, "\t{}\t{}", row.0, row.1);
    }
    let _ = write!(out, "{pct_label}");
    for (a, b) in col_totals {
        let _ = write!(out, "\t{}\t", pct_cell(a, a + b));
    }
    out.push('\n');
    out
}

/// Recorded Alcohol / Non-Alcohol counts by year and severity.
pub fn render_reported_table(ds: &Dataset) -> String {
    let mut cells: BTreeMap<(i32, Severity), (u64, u64)> = BTreeMap::new();
    for r in ds {
        let c = cells.entry((r.crash_year, r.severity)).or_default();
        if r.alcohol_rel.is_alcohol() {
            c.0 += 1;
        } else {
            c.1 += 1;
        }
    }
    year_severity_table(&cells, ("Alcohol", "Non-Alcohol"), "% alcohol crashes")
}

/// AIM / Non-AIM counts by year and severity.
pub fn render_aim_table(report: &AimReport) -> String {
    let cells = report.by_year_severity.iter().map(|(k, c)| (*k, (c.aim, c.non_aim))).collect();
    year_severity_table(&cells, ("AIM", "Non-AIM"), "% AIM")
}

fn series<K: fmt::Display>(title: &str, rows: impl Iterator<Item = (K, AimCounts)>) -> String {
    let mut out = format!("{title}\tAIM\tNonAIM\tAIM_pct\n");
    for (k, c) in rows {
        let pct = c.pct().map(|p| format!("{p:.2}")).unwrap_or_else(|| "NA".into());
        let _ = writeln!(out, "{k}\t{}\t{}\t{pct}", c.aim, c.non_aim);
    }
    out
}

/// AIM rate by year.
pub fn render_year_series(report: &AimReport) -> String {
    series("Year", report.by_year.iter().map(|(k, c)| (*k, *c)))
}

/// AIM rate by severity, least to most severe.
pub fn render_severity_series(report: &AimReport) -> String {
    let rows = SEVERITY_COLUMNS.iter().filter_map(|s| report.by_severity.get(s).map(|c| (s.as_str(), *c)));
    series("Severity", rows)
}

pub fn render_county_series(report: &AimReport) -> String {
    series("County", report.by_county.iter().map(|(k, c)| (k.as_str(), *c)))
}

impl AimReport {
    /// Summary as JSON, with percentages alongside counts.
    pub fn to_json(&self) -> serde_json::Value {
        fn entry(c: &AimCounts) -> serde_json::Value {
            serde_json::json!({ "aim": c.aim, "non_aim": c.non_aim, "aim_pct": c.pct() })
        }
        fn group<K: ToString>(m: impl Iterator<Item = (K, AimCounts)>) -> serde_json::Value {
            serde_json::Value::Object(m.map(|(k, c)| (k.to_string(), entry(&c))).collect())
        }
        serde_json::json!({
            "overall": entry(&self.overall),
            "not_applicable": self.not_applicable,
            "by_year": group(self.by_year.iter().map(|(k, c)| (*k, *c))),
            "by_severity": group(self.by_severity.iter().map(|(k, c)| (k.as_str(), *c))),
            "by_county": group(self.by_county.iter().map(|(k, c)| (k.clone(), *c))),
        })
    }
}

/// Writes `CRASH_KEY,CATEGORY` rows.
pub fn render_labels(labels: &[MismatchLabel]) -> String {
    let mut out = String::from("CRASH_KEY,CATEGORY\n");
    for l in labels {
        let _ = writeln!(out, "{},{}", l.crash_key, l.category);
    }
    out
}

pub fn parse_labels(text: &str) -> Result<Vec<MismatchLabel>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("CRASH_KEY,CATEGORY") {
        return Err(Error::format("mismatch labels", "missing header"));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (k, c) = l.split_once(',').ok_or_else(|| Error::format("mismatch labels", format!("bad row {l:?}")))?;
            let crash_key = k.trim().parse().map_err(|_| Error::format("mismatch labels", format!("bad key {k:?}")))?;
            let category = MismatchCategory::parse(c).ok_or_else(|| Error::format("mismatch labels", format!("bad category {c:?}")))?;
            Ok(MismatchLabel { crash_key, category })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{PredictedLabel, Prediction, PredictionSource};
    use crate::corpus::{synthesize, AlcoholRel, CrashRecord, Provenance, SynthSpec};

    fn base() -> Vec<CrashRecord> {
        synthesize(&SynthSpec { n_records: 40, seed: 2, ..Default::default() }).unwrap().dataset.records().to_vec()
    }

    fn labels(cats: &[(i64, MismatchCategory)]) -> Vec<MismatchLabel> {
        cats.iter().map(|&(crash_key, category)| MismatchLabel { crash_key, category }).collect()
    }

    #[test]
    fn category_table() {
        assert_eq!(MismatchCategory::of(true, false), MismatchCategory::Aim);
        assert_eq!(MismatchCategory::of(true, true), MismatchCategory::NonAim);
        assert_eq!(MismatchCategory::of(false, true), MismatchCategory::NotApplicable);
        assert_eq!(MismatchCategory::of(false, false), MismatchCategory::NotApplicable);
    }

    #[test]
    fn headline_rate() {
        let c = AimCounts { aim: 2767, non_aim: 8750 };
        assert!((c.pct().unwrap() - 24.03).abs() < 0.005);
        assert_eq!(AimCounts::default().pct(), None);
    }

    #[test]
    fn two_county_fixture() {
        let mut recs = base();
        recs.truncate(8);
        for (i, r) in recs.iter_mut().enumerate() {
            r.county = if i < 4 { "A".into() } else { "B".into() };
        }
        let ds = Dataset::new(recs.clone(), Provenance::default()).unwrap();
        let k: Vec<i64> = recs.iter().map(|r| r.crash_key).collect();
        use MismatchCategory::*;
        let l = labels(&[(k[0], Aim), (k[1], NonAim), (k[2], NonAim), (k[3], NonAim), (k[4], Aim), (k[5], Aim), (k[6], NonAim), (k[7], NonAim)]);
        let rep = aggregate(&l, &ds).unwrap();
        assert_eq!(rep.by_county["A"].pct(), Some(25.0));
        assert_eq!(rep.by_county["B"].pct(), Some(50.0));
        let rates = county_rates(&rep);
        assert_eq!(rates.rates["A"], 0.25);
        assert!(rates.excluded.is_empty());
    }

    #[test]
    fn all_not_applicable() {
        let ds = Dataset::new(base(), Provenance::default()).unwrap();
        let l: Vec<MismatchLabel> = ds.iter().map(|r| MismatchLabel { crash_key: r.crash_key, category: MismatchCategory::NotApplicable }).collect();
        let rep = aggregate(&l, &ds).unwrap();
        assert_eq!(rep.overall.pct(), None);
        assert!(rep.by_year.values().chain(rep.by_severity.values()).all(|c| c.pct().is_none()));
        let rates = county_rates(&rep);
        assert!(rates.rates.is_empty());
        assert_eq!(rates.excluded.len(), rep.by_county.len());
        assert_eq!(rep.not_applicable as usize, ds.len());
    }

    #[test]
    fn categorize_and_partition() {
        let ds = Dataset::new(base(), Provenance::default()).unwrap();
        let mut preds = PredictionSet::new();
        for (i, r) in ds.iter().enumerate() {
            let label = if i % 3 == 0 { PredictedLabel::NonAlcoholic } else { PredictedLabel::Alcoholic };
            preds.insert(r.crash_key, Prediction { label, score: 0.5, source: PredictionSource::Native }).unwrap();
        }
        let l = categorize(&preds, &ds).unwrap();
        let rep = aggregate(&l, &ds).unwrap();
        assert_eq!(rep.overall.aim + rep.overall.non_aim + rep.not_applicable, preds.len() as u64);
        let mut sum = AimCounts::default();
        rep.by_year.values().for_each(|c| sum += *c);
        assert_eq!(sum, rep.overall);
        let mut sum = AimCounts::default();
        rep.by_county.values().for_each(|c| sum += *c);
        assert_eq!(sum, rep.overall);

        let mut bad = PredictionSet::new();
        bad.insert(-1, Prediction { label: PredictedLabel::Alcoholic, score: 0.9, source: PredictionSource::External }).unwrap();
        assert!(categorize(&bad, &ds).is_err());
    }

    #[test]
    fn flipping_a_non_aim_record_raises_the_rate() {
        let mut recs = base();
        for (i, r) in recs.iter_mut().enumerate() {
            r.alcohol_rel = if i % 2 == 0 { AlcoholRel::Alcohol } else { AlcoholRel::NonAlcohol };
        }
        let mut preds = PredictionSet::new();
        for r in &recs {
            preds.insert(r.crash_key, Prediction { label: PredictedLabel::Alcoholic, score: 0.9, source: PredictionSource::Native }).unwrap();
        }
        let ds = Dataset::new(recs.clone(), Provenance::default()).unwrap();
        let before = aggregate(&categorize(&preds, &ds).unwrap(), &ds).unwrap().overall.pct().unwrap();
        recs[0].alcohol_rel = AlcoholRel::NonAlcohol;
        let ds = Dataset::new(recs, Provenance::default()).unwrap();
        let after = aggregate(&categorize(&preds, &ds).unwrap(), &ds).unwrap().overall.pct().unwrap();
        assert!(after > before);
    }

    #[test]
    fn tables_and_roundtrip() {
        let ds = Dataset::new(base(), Provenance::default()).unwrap();
        let t = render_reported_table(&ds);
        let header = t.lines().next().unwrap();
        assert!(header.starts_with("Year\tProperty Damage Only Alcohol\tProperty Damage Only Non-Alcohol"));
        assert!(t.lines().last().unwrap().starts_with("% alcohol crashes"));
        let l = labels(&[(1, MismatchCategory::Aim), (2, MismatchCategory::NotApplicable)]);
        assert_eq!(parse_labels(&render_labels(&l)).unwrap(), l);
    }
}

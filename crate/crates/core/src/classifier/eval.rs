use super::model::PredictionSet;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Counts with Alcohol as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// The same counts seen with No Alcohol as the positive class.
    pub fn flipped(&self) -> Confusion {
        Confusion { tp: self.tn, fp: self.fn_, fn_: self.fp, tn: self.tp }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: Confusion,
    pub alcohol: ClassMetrics,
    pub no_alcohol: ClassMetrics,
    pub accuracy: f64,
    pub total: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn positive_metrics(c: &Confusion) -> ClassMetrics {
    ClassMetrics {
        precision: ratio(c.tp, c.tp + c.fp),
        recall: ratio(c.tp, c.tp + c.fn_),
        // equals the harmonic mean of precision and recall
        f1: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
        support: c.tp + c.fn_,
    }
}

impl EvalReport {
    pub fn from_confusion(confusion: Confusion) -> Self {
        EvalReport {
            confusion,
            alcohol: positive_metrics(&confusion),
            no_alcohol: positive_metrics(&confusion.flipped()),
            accuracy: ratio(confusion.tp + confusion.tn, confusion.total()),
            total: confusion.total(),
        }
    }
}

/// Scores predictions against true labels (true = Alcohol). The key sets
/// must be identical.
pub fn evaluate(preds: &PredictionSet, truth: &BTreeMap<i64, bool>) -> Result<EvalReport> {
    if preds.len() != truth.len() || preds.keys().any(|k| !truth.contains_key(&k)) {
        let missing: Vec<i64> = truth.keys().copied().filter(|k| preds.get(*k).is_none()).take(5).collect();
        let extra: Vec<i64> = preds.keys().filter(|k| !truth.contains_key(k)).take(5).collect();
        return Err(Error::KeyMismatch(format!(
            "predictions and truth disagree on keys (missing predictions e.g. {missing:?}, unlabeled predictions e.g. {extra:?})"
        )));
    }
    let mut c = Confusion::default();
    for (key, p) in preds.iter() {
        match (p.label.is_alcoholic(), truth[&key]) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(EvalReport::from_confusion(c))
}

/// Tab-separated metrics in the Precision / Recall / F1-Score / Support
/// layout, one block per named section (e.g. Training, Testing).
pub fn render_table5(sections: &[(&str, &EvalReport)]) -> String {
    let mut out = String::new();
    for (name, r) in sections {
        let _ = writeln!(out, "{name}\tPrecision\tRecall\tF1-Score\tSupport");
        for (label, m) in [("Alcohol", &r.alcohol), ("No Alcohol", &r.no_alcohol)] {
            let _ = writeln!(out, "{label}\t{:.2}\t{:.2}\t{:.2}\t{}", m.precision, m.recall, m.f1, m.support);
        }
        let _ = writeln!(out, "Accuracy\t\t\t{:.2}\t{}", r.accuracy, r.total);
    }
    out
}

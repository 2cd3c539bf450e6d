use super::link::Link;
use crate::vectorizer::SparseVector;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

const MODEL_HEADER: &str = "linear-classifier v1";
/// Largest double below 1, so a score never reaches a threshold of 1.
const MAX_SCORE: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
    pub link: Link,
    pub iterations: usize,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PredictedLabel {
    Alcoholic,
    NonAlcoholic,
}

impl PredictedLabel {
    pub fn is_alcoholic(self) -> bool {
        self == PredictedLabel::Alcoholic
    }

    pub fn from_score(score: f64, threshold: f64) -> Self {
        if score >= threshold {
            PredictedLabel::Alcoholic
        } else {
            PredictedLabel::NonAlcoholic
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PredictedLabel::Alcoholic => "Alcoholic",
            PredictedLabel::NonAlcoholic => "NonAlcoholic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "Alcoholic" => Some(PredictedLabel::Alcoholic),
            "NonAlcoholic" => Some(PredictedLabel::NonAlcoholic),
            _ => None,
        }
    }
}

impl fmt::Display for PredictedLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictionSource {
    Native,
    External,
}

impl PredictionSource {
    pub fn as_str(self) -> &'static str {
        match self {
            PredictionSource::Native => "native",
            PredictionSource::External => "external",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "native" => Some(PredictionSource::Native),
            "external" => Some(PredictionSource::External),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: PredictedLabel,
    pub score: f64,
    pub source: PredictionSource,
}

/// One prediction per crash key, ordered by key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictionSet {
    entries: BTreeMap<i64, Prediction>,
}

impl PredictionSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a prediction; a repeated key is an error.
    pub fn insert(&mut self, crash_key: i64, prediction: Prediction) -> Result<()> {
        if self.entries.insert(crash_key, prediction).is_some() {
            return Err(Error::DuplicateKey { table: "predictions".into(), key: crash_key });
        }
        Ok(())
    }

    pub fn get(&self, crash_key: i64) -> Option<&Prediction> {
        self.entries.get(&crash_key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &Prediction)> + '_ {
        self.entries.iter().map(|(&k, p)| (k, p))
    }

    pub fn keys(&self) -> impl Iterator<Item = i64> + '_ {
        self.entries.keys().copied()
    }

    /// Keeps only the given keys.
    pub fn restrict(&self, keys: &[i64]) -> PredictionSet {
        let entries = keys.iter().filter_map(|k| self.entries.get(k).map(|p| (*k, *p))).collect();
        PredictionSet { entries }
    }
}

impl ClassifierModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn linear(&self, x: &SparseVector) -> Result<f64> {
        if x.dim != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.dim });
        }
        Ok(x.dot(&self.weights) + self.bias)
    }

    /// Probability of alcohol involvement, strictly inside (0, 1).
    pub fn score(&self, x: &SparseVector) -> Result<f64> {
        Ok(self.link.cdf(self.linear(x)?).clamp(f64::MIN_POSITIVE, MAX_SCORE))
    }

    pub fn predict(&self, keys: &[i64], docs: &[SparseVector], threshold: f64) -> Result<PredictionSet> {
        if keys.len() != docs.len() {
            return Err(Error::DimensionMismatch { expected: keys.len(), got: docs.len() });
        }
        let scores: Vec<f64> = docs.par_iter().map(|d| self.score(d)).collect::<Result<_>>()?;
        let mut set = PredictionSet::new();
        for (&k, score) in keys.iter().zip(scores) {
            let label = PredictedLabel::from_score(score, threshold);
            set.insert(k, Prediction { label, score, source: PredictionSource::Native })?;
        }
        Ok(set)
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{MODEL_HEADER}")?;
        writeln!(w, "link\t{}", self.link)?;
        writeln!(w, "lambda\t{:?}", self.lambda)?;
        writeln!(w, "iterations\t{}", self.iterations)?;
        writeln!(w, "gradient_norm\t{:?}", self.gradient_norm)?;
        writeln!(w, "bias\t{:?}", self.bias)?;
        writeln!(w, "dim\t{}", self.dim())?;
        for v in &self.weights {
            writeln!(w, "{v:?}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let bad = |d: String| Error::format("classifier model", d);
        let lines: Vec<String> = r.lines().collect::<std::io::Result<_>>().map_err(|e| bad(e.to_string()))?;
        if lines.first().map(|l| l.trim_end()) != Some(MODEL_HEADER) {
            return Err(bad("missing or unsupported header".into()));
        }
        let field = |i: usize, key: &str| -> Result<&str> {
            lines
                .get(i)
                .and_then(|l| l.strip_prefix(key))
                .and_then(|l| l.strip_prefix('\t'))
                .map(str::trim)
                .ok_or_else(|| bad(format!("expected {key} on line {}", i + 1)))
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number {s:?}")));
        let link = Link::parse(field(1, "link")?).ok_or_else(|| bad("unknown link".into()))?;
        let lambda = num(field(2, "lambda")?)?;
        let iterations = field(3, "iterations")?.parse().map_err(|_| bad("bad iterations".into()))?;
        let gradient_norm = num(field(4, "gradient_norm")?)?;
        let bias = num(field(5, "bias")?)?;
        let dim: usize = field(6, "dim")?.parse().map_err(|_| bad("bad dim".into()))?;
        if lines.len() != 7 + dim {
            return Err(bad(format!("expected {dim} weights, found {}", lines.len().saturating_sub(7))));
        }
        let weights = lines[7..].iter().map(|l| num(l.trim())).collect::<Result<_>>()?;
        Ok(ClassifierModel { weights, bias, lambda, link, iterations, gradient_norm })
    }
}

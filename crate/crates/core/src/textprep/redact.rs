//! Rule-based PII redaction.
//!
//! Rules are regular expressions tagged with a category. Each match (or the
//! rule's capture group) is replaced with the category placeholder, e.g.
//! `<PHONE>`. Rules are applied in order and the whole rule list is repeated
//! until the text stops changing, which makes redaction idempotent.

use crate::{Error, Result};
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PiiCategory {
    Name,
    Phone,
    Plate,
    Number,
    Date,
}

impl PiiCategory {
    pub fn placeholder(self) -> &'static str {
        match self {
            PiiCategory::Name => "<NAME>",
            PiiCategory::Phone => "<PHONE>",
            PiiCategory::Plate => "<PLATE>",
            PiiCategory::Number => "<NUMBER>",
            PiiCategory::Date => "<DATE>",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "NAME" => Some(PiiCategory::Name),
            "PHONE" => Some(PiiCategory::Phone),
            "PLATE" => Some(PiiCategory::Plate),
            "NUMBER" => Some(PiiCategory::Number),
            "DATE" => Some(PiiCategory::Date),
            _ => None,
        }
    }
}

impl fmt::Display for PiiCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.placeholder();
        f.write_str(&p[1..p.len() - 1])
    }
}

/// Byte range of a placeholder in the redacted text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedactionSpan {
    pub start: usize,
    pub end: usize,
    pub category: PiiCategory,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedactedNarrative {
    pub crash_key: i64,
    pub text: String,
    pub redaction_log: Vec<RedactionSpan>,
}

#[derive(Debug, Clone)]
pub struct RedactionRule {
    pub category: PiiCategory,
    pub pattern: Regex,
    /// Capture group to replace; 0 replaces the whole match.
    pub group: usize,
}

impl RedactionRule {
    pub fn new(category: PiiCategory, pattern: &str, group: usize) -> Result<Self> {
        let pattern = Regex::new(pattern).map_err(|e| Error::format("redaction pattern", e.to_string()))?;
        if group >= pattern.captures_len() {
            return Err(Error::format("redaction pattern", format!("no capture group {group}")));
        }
        Ok(RedactionRule { category, pattern, group })
    }
}

const HONORIFICS: &str = r"Mr|Mrs|Ms|Miss|Dr|Officer|Ofc|Deputy|Trooper|Sgt|Sergeant|Det|Detective";
const GIVEN_NAMES: &str = include_str!("../../data/given_names.txt");
const MAX_PASSES: usize = 16;

#[derive(Debug, Clone)]
pub struct Redactor {
    rules: Vec<RedactionRule>,
}

impl Default for Redactor {
    fn default() -> Self {
        let given: Vec<&str> = GIVEN_NAMES.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        let rules = vec![
            RedactionRule::new(PiiCategory::Phone, r"(?:\(\d{3}\)[ ]?|\b\d{3}[-. ])\d{3}[-.]\d{4}\b", 0),
            RedactionRule::new(PiiCategory::Date, r"\b\d{1,2}/\d{1,2}/\d{2,4}\b|\b\d{4}-\d{2}-\d{2}\b", 0),
            RedactionRule::new(PiiCategory::Plate, r"\b[A-Z]{2,3}-?\d{3,4}\b|\b\d{3}-?[A-Z]{3}\b", 0),
            RedactionRule::new(PiiCategory::Number, r"\d{5,}", 0),
            RedactionRule::new(
                PiiCategory::Name,
                &format!(r"\b(?:{HONORIFICS})\.?[ \t]+([A-Z][a-z]+(?:[ \t]+[A-Z][a-z]+)*)"),
                1,
            ),
            RedactionRule::new(
                PiiCategory::Name,
                &format!(r"\b(?:{})\b(?:[ \t]+[A-Z][a-z]+)*", given.join("|")),
                0,
            ),
        ];
        Redactor { rules: rules.into_iter().collect::<Result<_>>().expect("built-in rules compile") }
    }
}

impl Redactor {
    pub fn with_rules(rules: Vec<RedactionRule>) -> Self {
        Redactor { rules }
    }

    pub fn rules(&self) -> &[RedactionRule] {
        &self.rules
    }

    /// Default rules followed by the rules in `path`, one per line as
    /// `CATEGORY<TAB>pattern`. Blank lines and `#` comments are skipped.
    pub fn with_rule_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut redactor = Redactor::default();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (cat, pattern) = line
                .split_once('\t')
                .ok_or_else(|| Error::format("redaction rule file", format!("line {}: expected CATEGORY<TAB>pattern", n + 1)))?;
            let category = PiiCategory::parse(cat)
                .ok_or_else(|| Error::format("redaction rule file", format!("line {}: unknown category {cat:?}", n + 1)))?;
            redactor.rules.push(RedactionRule::new(category, pattern, 0)?);
        }
        Ok(redactor)
    }

    pub fn redact(&self, crash_key: i64, narrative: &str) -> RedactedNarrative {
        let mut text = narrative.to_string();
        let mut spans: Vec<RedactionSpan> = Vec::new();
        for _ in 0..MAX_PASSES {
            let mut changed = false;
            for rule in &self.rules {
                if let Some(next) = apply_rule(&text, &mut spans, rule) {
                    text = next;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        spans.sort_by_key(|s| s.start);
        RedactedNarrative { crash_key, text, redaction_log: spans }
    }
}

/// Applies one rule, shifting existing spans. `None` when nothing matched.
fn apply_rule(text: &str, spans: &mut Vec<RedactionSpan>, rule: &RedactionRule) -> Option<String> {
    let placeholder = rule.category.placeholder();
    let overlaps = |s: usize, e: usize| spans.iter().any(|sp| s < sp.end && sp.start < e);
    let hits: Vec<(usize, usize)> = rule
        .pattern
        .captures_iter(text)
        .filter_map(|c| c.get(rule.group))
        .map(|m| (m.start(), m.end()))
        .filter(|&(s, e)| e > s && !overlaps(s, e))
        .collect();
    if hits.is_empty() {
        return None;
    }

    let shift = |offset: usize| -> usize {
        let mut out = offset as isize;
        for &(s, e) in &hits {
            if e <= offset {
                out += placeholder.len() as isize - (e - s) as isize;
            }
        }
        out as usize
    };
    for sp in spans.iter_mut() {
        let new_start = shift(sp.start);
        sp.end = new_start + (sp.end - sp.start);
        sp.start = new_start;
    }

    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for &(s, e) in &hits {
        out.push_str(&text[last..s]);
        spans.push(RedactionSpan { start: out.len(), end: out.len() + placeholder.len(), category: rule.category });
        out.push_str(placeholder);
        last = e;
    }
    out.push_str(&text[last..]);
    Some(out)
}

fn default_redactor() -> &'static Redactor {
    static DEFAULT: OnceLock<Redactor> = OnceLock::new();
    DEFAULT.get_or_init(Redactor::default)
}

/// Redacts with the built-in rule set. The crash key is left as 0.
pub fn redact(narrative: &str) -> RedactedNarrative {
    default_redactor().redact(0, narrative)
}

//! Narrative scrubbing and tokenization.

mod normalize;
mod redact;

pub use normalize::{normalize, stem, Stopwords, TokenizedDoc};
pub use redact::{redact, PiiCategory, RedactedNarrative, RedactionRule, RedactionSpan, Redactor};

use crate::corpus::Dataset;
use rayon::prelude::*;

/// Redacts and normalizes every narrative of `ds` in parallel, in dataset
/// order.
pub fn prepare_all(ds: &Dataset, redactor: &Redactor, stopwords: &Stopwords) -> Vec<TokenizedDoc> {
    ds.records()
        .par_iter()
        .map(|r| normalize(&redactor.redact(r.crash_key, &r.narration), stopwords))
        .collect()
}

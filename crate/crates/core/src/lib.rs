//! Auditing crash databases for alcohol inference mismatch (AIM).
//!
//! A crash is an AIM crash when its narrative indicates alcohol involvement
//! while the recorded alcohol flag says otherwise. The crate covers the whole
//! audit: loading and joining crash tables ([`corpus`]), scrubbing and
//! tokenizing narratives ([`textprep`]), TF-IDF features ([`vectorizer`]), a
//! regularized linear narrative classifier ([`classifier`]), mismatch
//! categorization and rates ([`audit`]), county-level Local Moran's I
//! ([`spatial`]) and a random-intercept probit model of the mismatch outcome
//! ([`inference`]).

pub mod audit;
pub mod classifier;
pub mod corpus;
mod error;
pub mod inference;
pub mod seed;
pub mod spatial;
pub mod stats;
pub mod textprep;
pub mod vectorizer;

pub use error::{Error, Result};

pub use audit::{AimCounts, AimReport, MismatchCategory, MismatchLabel};
pub use classifier::{ClassifierModel, EvalReport, Link, PredictedLabel, PredictionSet};
pub use corpus::{AlcoholRel, CrashRecord, Dataset, Severity, SynthSpec};
pub use inference::{DesignMatrix, GlmmFit};
pub use spatial::{LisaCluster, LisaResult, SpatialWeights};
pub use textprep::{RedactedNarrative, TokenizedDoc};
pub use vectorizer::{SparseVector, TfidfModel};

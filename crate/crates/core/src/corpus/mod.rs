//! Crash data model, table ingest and synthetic corpora.

mod counties;
mod ingest;
mod record;
pub(crate) mod sample;
mod synth;

pub use counties::IOWA_COUNTIES;
pub use ingest::{
    ingest, read_dataset, write_dataset, write_source_tables, IngestOptions, IngestReport, Rejection,
    SourceTables,
};
pub use record::{
    columns, AgeBand, AlcoholRel, CrashRecord, FunctionalClass, Gender, Light, RoadType, RoadUser,
    RuralUrban, Season, Severity, SpeedBand, VehicleType, Weather,
};
pub use sample::{stratified_sample, StrataField};
pub use synth::{synthesize, write_truth, GroundTruth, StrataWeights, SynthOutput, SynthSpec, TruthRow};

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Where a dataset came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub sources: Vec<String>,
    /// Free-form; ingest records wall-clock time, synthesis records the spec.
    pub created: String,
}

/// An ordered, immutable collection of crash records with unique keys.
#[derive(Debug, Clone)]
pub struct Dataset {
    records: Vec<CrashRecord>,
    index: HashMap<i64, usize>,
    provenance: Provenance,
}

impl Dataset {
    pub fn new(records: Vec<CrashRecord>, provenance: Provenance) -> Result<Self> {
        let mut index = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if index.insert(r.crash_key, i).is_some() {
                return Err(Error::DuplicateKey { table: "dataset".into(), key: r.crash_key });
            }
        }
        Ok(Dataset { records, index, provenance })
    }

    pub fn records(&self) -> &[CrashRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, crash_key: i64) -> Option<&CrashRecord> {
        self.index.get(&crash_key).map(|&i| &self.records[i])
    }

    pub fn contains(&self, crash_key: i64) -> bool {
        self.index.contains_key(&crash_key)
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn iter(&self) -> std::slice::Iter<'_, CrashRecord> {
        self.records.iter()
    }

    /// Sub-dataset holding the records at `indices`, in the given order.
    pub fn select(&self, indices: &[usize], created: impl Into<String>) -> Dataset {
        let records: Vec<CrashRecord> = indices.iter().map(|&i| self.records[i].clone()).collect();
        let provenance = Provenance { sources: self.provenance.sources.clone(), created: created.into() };
        Dataset::new(records, provenance).expect("subset of a valid dataset has unique keys")
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a CrashRecord;
    type IntoIter = std::slice::Iter<'a, CrashRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

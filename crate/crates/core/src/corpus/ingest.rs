use super::record::{columns, record_from_fields};
use super::{Dataset, Provenance};
use crate::{Error, Result};
use csv::StringRecord;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy)]
pub struct IngestOptions {
    pub delimiter: u8,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { delimiter: b',' }
    }
}

/// Paths of the three source tables linked by CRASH_KEY.
#[derive(Debug, Clone)]
pub struct SourceTables {
    pub driver: PathBuf,
    pub crash: PathBuf,
    pub narrative: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub crash_key: Option<i64>,
    /// Table and 1-based line for rows rejected before the join.
    pub table: Option<String>,
    pub line: Option<u64>,
    pub reason: String,
}

/// Accounting for one ingest. Every input unit (a distinct crash key, or a
/// row whose key could not be read) is either accepted or rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub sources: Vec<String>,
    pub raw_rows: BTreeMap<String, usize>,
    pub total: usize,
    pub accepted: usize,
    pub rejected: Vec<Rejection>,
}

impl IngestReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

struct Table {
    name: &'static str,
    header: HashMap<String, usize>,
    rows: Vec<StringRecord>,
    by_key: HashMap<i64, usize>,
    order: Vec<i64>,
    bad_rows: Vec<Rejection>,
}

impl Table {
    fn get<'a>(&'a self, key: i64, column: &str) -> Option<&'a str> {
        let row = &self.rows[*self.by_key.get(&key)?];
        row.get(*self.header.get(column)?)
    }

    fn has_column(&self, column: &str) -> bool {
        self.header.contains_key(column)
    }
}

fn read_table(path: &Path, name: &'static str, required: &[&str], opts: IngestOptions) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let header: HashMap<String, usize> = reader
        .headers()
        .map_err(|e| Error::csv(path, e))?
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim().trim_start_matches('\u{feff}').to_ascii_uppercase(), i))
        .collect();
    for &col in required {
        if !header.contains_key(col) && !columns::OPTIONAL.contains(&col) {
            return Err(Error::MissingColumn { table: name.into(), column: col.into() });
        }
    }
    let key_col = header[columns::CRASH_KEY];

    let mut table = Table {
        name,
        header,
        rows: Vec::new(),
        by_key: HashMap::new(),
        order: Vec::new(),
        bad_rows: Vec::new(),
    };
    for result in reader.records() {
        let row = result.map_err(|e| Error::csv(path, e))?;
        let line = row.position().map(|p| p.line());
        let raw_key = row.get(key_col).unwrap_or("").trim();
        match raw_key.parse::<i64>() {
            Ok(key) => {
                if table.by_key.insert(key, table.rows.len()).is_some() {
                    return Err(Error::DuplicateKey { table: name.into(), key });
                }
                table.order.push(key);
                table.rows.push(row);
            }
            Err(_) => table.bad_rows.push(Rejection {
                crash_key: None,
                table: Some(name.into()),
                line,
                reason: format!("unreadable {} {raw_key:?}", columns::CRASH_KEY),
            }),
        }
    }
    Ok(table)
}

fn finish(tables: &[&Table], accepted_and_rejected: Vec<std::result::Result<super::CrashRecord, Rejection>>, sources: Vec<String>) -> Result<(Dataset, IngestReport)> {
    let mut records = Vec::new();
    let mut rejected: Vec<Rejection> = tables.iter().flat_map(|t| t.bad_rows.iter().cloned()).collect();
    for r in accepted_and_rejected {
        match r {
            Ok(rec) => records.push(rec),
            Err(rej) => rejected.push(rej),
        }
    }
    let raw_rows = tables.iter().map(|t| (t.name.to_string(), t.rows.len() + t.bad_rows.len())).collect();
    let accepted = records.len();
    let report = IngestReport { sources: sources.clone(), raw_rows, total: accepted + rejected.len(), accepted, rejected };
    let provenance = Provenance { sources, created: String::new() };
    Ok((Dataset::new(records, provenance)?, report))
}

/// Inner-joins the driver, crash and narrative tables on CRASH_KEY.
///
/// Structural problems (unreadable file, missing column, duplicate key within
/// a table) are fatal. Keys missing from any table and rows with invalid
/// field values are rejected individually and listed in the report.
pub fn ingest(tables: &SourceTables, opts: IngestOptions) -> Result<(Dataset, IngestReport)> {
    let driver = read_table(&tables.driver, "driver", columns::DRIVER_TABLE, opts)?;
    let crash = read_table(&tables.crash, "crash", columns::CRASH_TABLE, opts)?;
    let narrative = read_table(&tables.narrative, "narrative", columns::NARRATIVE_TABLE, opts)?;

    let mut seen: HashSet<i64> = HashSet::new();
    let mut keys = Vec::new();
    for &k in crash.order.iter().chain(&driver.order).chain(&narrative.order) {
        if seen.insert(k) {
            keys.push(k);
        }
    }

    let all = [&driver, &crash, &narrative];
    let joined: Vec<_> = keys
        .par_iter()
        .map(|&key| {
            let mut missing = Vec::new();
            if !crash.by_key.contains_key(&key) {
                missing.push("no crash record");
            }
            if !driver.by_key.contains_key(&key) {
                missing.push("no driver record");
            }
            if !narrative.by_key.contains_key(&key) {
                missing.push("no narrative");
            }
            let reject = |reason: String| Rejection { crash_key: Some(key), table: None, line: None, reason };
            if !missing.is_empty() {
                return Err(reject(missing.join("; ")));
            }
            record_from_fields(key, |col| {
                all.iter().filter(|t| t.has_column(col)).find_map(|t| t.get(key, col))
            })
            .map_err(reject)
        })
        .collect();

    let sources = [&tables.driver, &tables.crash, &tables.narrative]
        .iter()
        .map(|p| p.display().to_string())
        .collect();
    finish(&all, joined, sources)
}

/// Column order of the joined dataset file.
pub fn dataset_columns() -> Vec<&'static str> {
    let mut cols: Vec<&'static str> = columns::DRIVER_TABLE.to_vec();
    cols.extend(columns::CRASH_TABLE.iter().skip(1));
    cols.push(columns::CRASH_NARRATION);
    cols
}

/// Reads a joined dataset file written by [`write_dataset`] (or any file with
/// the same columns).
pub fn read_dataset(path: &Path, opts: IngestOptions) -> Result<(Dataset, IngestReport)> {
    let table = read_table(path, "dataset", &dataset_columns(), opts)?;
    let parsed: Vec<_> = table
        .order
        .par_iter()
        .map(|&key| {
            record_from_fields(key, |col| table.get(key, col))
                .map_err(|reason| Rejection { crash_key: Some(key), table: None, line: None, reason })
        })
        .collect();
    finish(&[&table], parsed, vec![path.display().to_string()])
}

fn write_table(ds: &Dataset, path: &Path, cols: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(cols).map_err(|e| Error::csv(path, e))?;
    for r in ds {
        w.write_record(cols.iter().map(|c| r.field(c))).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    write_table(ds, path, &dataset_columns())
}

/// Splits a dataset back into the three linked source tables under `dir`.
pub fn write_source_tables(ds: &Dataset, dir: &Path) -> Result<SourceTables> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tables = SourceTables {
        driver: dir.join("driver.csv"),
        crash: dir.join("crash.csv"),
        narrative: dir.join("narrative.csv"),
    };
    write_table(ds, &tables.driver, columns::DRIVER_TABLE)?;
    write_table(ds, &tables.crash, columns::CRASH_TABLE)?;
    write_table(ds, &tables.narrative, columns::NARRATIVE_TABLE)?;
    Ok(tables)
}

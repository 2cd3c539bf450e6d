use crashaudit::corpus::{
    ingest, read_dataset, stratified_sample, synthesize, write_dataset, write_source_tables, write_truth, IngestOptions,
    StrataField, SynthSpec,
};
use crashaudit::AlcoholRel;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

fn spec(n: usize, seed: u64) -> SynthSpec {
    SynthSpec { n_records: n, seed, ..Default::default() }
}

fn dataset_bytes(spec: &SynthSpec, dir: &Path, name: &str) -> Vec<u8> {
    let out = synthesize(spec).unwrap();
    let path = dir.join(name);
    write_dataset(&out.dataset, &path).unwrap();
    let mut bytes = fs::read(&path).unwrap();
    let truth = dir.join(format!("{name}.truth"));
    write_truth(&out.truth, &truth).unwrap();
    bytes.extend(fs::read(&truth).unwrap());
    bytes
}

#[test]
fn synthesis_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dataset_bytes(&spec(3000, 7), dir.path(), "a.csv");
    let b = dataset_bytes(&spec(3000, 7), dir.path(), "b.csv");
    let c = dataset_bytes(&spec(3000, 8), dir.path(), "c.csv");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn different_seeds_give_different_narratives() {
    let a = synthesize(&spec(200, 1)).unwrap().dataset;
    let b = synthesize(&spec(200, 2)).unwrap().dataset;
    let same = a.iter().zip(b.iter()).filter(|(x, y)| x.narration == y.narration).count();
    assert!(same < 20, "{same} identical narratives");
}

#[test]
fn full_scale_ingest_accounts_for_every_crash() {
    let n = 371_062;
    let dir = tempfile::tempdir().unwrap();
    let out = synthesize(&spec(n, 2016)).unwrap();
    let tables = write_source_tables(&out.dataset, dir.path()).unwrap();
    let (ds, report) = ingest(&tables, IngestOptions::default()).unwrap();
    assert_eq!(report.total, n);
    assert_eq!(report.accepted, n);
    assert!(report.rejected.is_empty());
    assert_eq!(ds.len(), n);
    let years: BTreeSet<i32> = ds.iter().map(|r| r.crash_year).collect();
    assert_eq!(years.len(), 7);
}

fn shuffle_lines(path: &Path, seed: u64) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let header = lines.remove(0);
    lines.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    fs::write(path, format!("{header}\n{}\n", lines.join("\n"))).unwrap();
}

#[test]
fn join_ignores_row_order_and_counts_reconcile() {
    let dir = tempfile::tempdir().unwrap();
    let out = synthesize(&spec(1500, 3)).unwrap();
    let tables = write_source_tables(&out.dataset, dir.path()).unwrap();
    let (ordered, _) = ingest(&tables, IngestOptions::default()).unwrap();

    // drop some narrative rows so rejections appear too
    let narr = fs::read_to_string(&tables.narrative).unwrap();
    let kept: Vec<&str> = narr.lines().enumerate().filter(|(i, _)| *i == 0 || i % 50 != 0).map(|(_, l)| l).collect();
    fs::write(&tables.narrative, kept.join("\n") + "\n").unwrap();
    for (k, p) in [&tables.driver, &tables.crash, &tables.narrative].into_iter().enumerate() {
        shuffle_lines(p, k as u64);
    }
    let (ds, report) = ingest(&tables, IngestOptions::default()).unwrap();
    let a: BTreeSet<i64> = ordered.iter().map(|r| r.crash_key).collect();
    let b: BTreeSet<i64> = ds.iter().map(|r| r.crash_key).collect();
    assert!(b.is_subset(&a));
    assert_eq!(report.accepted + report.rejected.len(), report.total);
    assert_eq!(report.total, 1500);
    assert_eq!(report.rejected.len(), 1500 - b.len());
    assert!(report.rejected.iter().all(|r| r.reason == "no narrative"));
    for r in ds.iter() {
        assert_eq!(Some(r), ordered.get(r.crash_key));
    }
}

#[test]
fn dataset_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = synthesize(&spec(500, 4)).unwrap();
    let path = dir.path().join("dataset.csv");
    write_dataset(&out.dataset, &path).unwrap();
    let (back, report) = read_dataset(&path, IngestOptions::default()).unwrap();
    assert_eq!(report.accepted, 500);
    assert_eq!(back.records(), out.dataset.records());
}

#[test]
fn training_sample_is_proportional() {
    let out = synthesize(&spec(40_000, 5)).unwrap();
    let ds = &out.dataset;
    let n = 8_914;
    let sample = stratified_sample(ds, n, StrataField::AlcoholRel, 9).unwrap();
    assert_eq!(sample.len(), n);
    let pop_alc = ds.iter().filter(|r| r.alcohol_rel == AlcoholRel::Alcohol).count();
    let got_alc = sample.iter().filter(|r| r.alcohol_rel == AlcoholRel::Alcohol).count();
    let expected = n as f64 * pop_alc as f64 / ds.len() as f64;
    assert!((got_alc as f64 - expected).abs() <= 1.0, "{got_alc} vs {expected}");
    assert!(stratified_sample(ds, ds.len() + 1, StrataField::AlcoholRel, 9).is_err());
}

#[test]
fn injected_flips_match_the_sidecar() {
    let out = synthesize(&SynthSpec { n_records: 10_000, injected_mismatch_rate: 0.24, seed: 1, ..Default::default() }).unwrap();
    let truly: usize = out.truth.values().filter(|t| t.true_label == AlcoholRel::Alcohol).count();
    let flipped: usize = out.truth.values().filter(|t| t.flipped).count();
    assert_eq!(flipped, (0.24 * truly as f64).round() as usize);
    for r in out.dataset.iter() {
        let t = out.truth[&r.crash_key];
        let expected = if t.flipped { AlcoholRel::NonAlcohol } else { t.true_label };
        assert_eq!(r.alcohol_rel, expected);
    }
}

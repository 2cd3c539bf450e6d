use crashaudit::audit::{aggregate, categorize};
use crashaudit::classifier::{
    evaluate, load_external_predictions, split, train, Confusion, EvalReport, TrainConfig,
    DEFAULT_THRESHOLD,
};
use crashaudit::corpus::{synthesize, SynthSpec};
use crashaudit::textprep::{prepare_all, Redactor, Stopwords};
use crashaudit::vectorizer::{TfidfModel, VectorizerConfig};
use crashaudit::AlcoholRel;
use std::collections::BTreeMap;

fn protocol(n: usize, seed: u64) -> EvalReport {
    let out = synthesize(&SynthSpec { n_records: n, alcohol_prevalence: 0.5, seed, ..Default::default() }).unwrap();
    let ds = &out.dataset;
    let labels: Vec<bool> = ds.iter().map(|r| out.truth[&r.crash_key].true_label == AlcoholRel::Alcohol).collect();
    let docs = prepare_all(ds, &Redactor::default(), &Stopwords::builtin());
    let parts = split(&labels, 0.8, seed).unwrap();
    let train_docs: Vec<_> = parts.train.iter().map(|&i| docs[i].clone()).collect();
    let tfidf = TfidfModel::fit(&train_docs, VectorizerConfig::default()).unwrap();
    let x_train = tfidf.transform_all(&train_docs);
    let y_train: Vec<bool> = parts.train.iter().map(|&i| labels[i]).collect();
    let model = train(&x_train, &y_train, &TrainConfig::default()).unwrap();

    let keys: Vec<i64> = parts.test.iter().map(|&i| docs[i].crash_key).collect();
    let x_test: Vec<_> = parts.test.iter().map(|&i| tfidf.transform(&docs[i])).collect();
    let preds = model.predict(&keys, &x_test, DEFAULT_THRESHOLD).unwrap();
    let truth: BTreeMap<i64, bool> = parts.test.iter().map(|&i| (docs[i].crash_key, labels[i])).collect();
    evaluate(&preds, &truth).unwrap()
}

#[test]
fn synthetic_corpus_is_classified_accurately() {
    let report = protocol(5000, 42);
    assert_eq!(report.total, 1000);
    assert!(report.accuracy >= 0.95, "{report:?}");
    assert!(report.alcohol.f1 >= 0.95 && report.no_alcohol.f1 >= 0.95, "{report:?}");
}

#[test]
fn hand_computed_metrics() {
    let r = EvalReport::from_confusion(Confusion { tp: 9, fp: 2, fn_: 1, tn: 8 });
    assert_eq!(r.alcohol.precision, 9.0 / 11.0);
    assert_eq!(r.alcohol.recall, 0.9);
    assert_eq!(r.accuracy, 17.0 / 20.0);
    assert_eq!(r.alcohol.f1, 18.0 / 21.0);
    assert_eq!(r.no_alcohol.precision, 8.0 / 9.0);
    assert_eq!(r.no_alcohol.recall, 0.8);
}

#[test]
fn native_and_external_predictions_audit_identically() {
    let out = synthesize(&SynthSpec { n_records: 800, seed: 3, ..Default::default() }).unwrap();
    let ds = &out.dataset;
    let docs = prepare_all(ds, &Redactor::default(), &Stopwords::builtin());
    let labels: Vec<bool> = ds.iter().map(|r| out.truth[&r.crash_key].true_label == AlcoholRel::Alcohol).collect();
    let tfidf = TfidfModel::fit(&docs, VectorizerConfig::default()).unwrap();
    let x = tfidf.transform_all(&docs);
    let model = train(&x, &labels, &TrainConfig::default()).unwrap();
    let keys: Vec<i64> = docs.iter().map(|d| d.crash_key).collect();
    let native = model.predict(&keys, &x, DEFAULT_THRESHOLD).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("external.csv");
    let mut csv = String::from("CRASH_KEY,SCORE\n");
    for (k, p) in native.iter() {
        csv.push_str(&format!("{k},{:?}\n", p.score));
    }
    std::fs::write(&path, csv).unwrap();
    let (external, report) = load_external_predictions(&path, ds, DEFAULT_THRESHOLD).unwrap();
    assert!(report.rejected.is_empty() && report.unmatched.is_empty() && report.missing.is_empty());

    let a = aggregate(&categorize(&native, ds).unwrap(), ds).unwrap();
    let b = aggregate(&categorize(&external, ds).unwrap(), ds).unwrap();
    assert_eq!(a, b);
}

#[test]
fn accuracy_holds_across_seeds() {
    for seed in [1, 2, 3] {
        let r = protocol(5000, seed);
        assert!(r.accuracy >= 0.95 && r.alcohol.f1 >= 0.95 && r.no_alcohol.f1 >= 0.95, "seed {seed}: {r:?}");
    }
}

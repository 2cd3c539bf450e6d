use crashaudit::classifier::{train, TrainConfig};
use crashaudit::corpus::{synthesize, SynthSpec};
use crashaudit::inference::{marginal_loglik, marginal_loglik_gradient, simulate, GlmmConfig, TABLE8_BETA, TABLE8_SIGMA};
use crashaudit::spatial::{local_morans, LisaConfig, SpatialWeights, IOWA_LATTICE_CSV};
use crashaudit::textprep::{normalize, prepare_all, redact, Redactor, Stopwords};
use crashaudit::vectorizer::{TfidfModel, VectorizerConfig};
use crashaudit::AlcoholRel;
use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::hint::black_box;

fn text(c: &mut Criterion) {
    let out = synthesize(&SynthSpec { n_records: 2_000, seed: 1, ..Default::default() }).unwrap();
    let narratives: Vec<String> = out.dataset.iter().map(|r| r.narration.clone()).collect();
    let sw = Stopwords::builtin();
    c.bench_function("redact 2000 narratives", |b| {
        b.iter(|| narratives.iter().map(|n| redact(black_box(n)).text.len()).sum::<usize>())
    });
    let redacted: Vec<_> = narratives.iter().map(|n| redact(n)).collect();
    c.bench_function("normalize 2000 narratives", |b| {
        b.iter(|| redacted.iter().map(|r| normalize(black_box(r), &sw).tokens.len()).sum::<usize>())
    });
}

fn model(c: &mut Criterion) {
    let out = synthesize(&SynthSpec { n_records: 5_000, alcohol_prevalence: 0.5, seed: 2, ..Default::default() }).unwrap();
    let docs = prepare_all(&out.dataset, &Redactor::default(), &Stopwords::builtin());
    let labels: Vec<bool> = out.dataset.iter().map(|r| out.truth[&r.crash_key].true_label == AlcoholRel::Alcohol).collect();
    c.bench_function("tfidf fit 5000 docs", |b| b.iter(|| TfidfModel::fit(black_box(&docs), VectorizerConfig::default()).unwrap()));
    let tfidf = TfidfModel::fit(&docs, VectorizerConfig::default()).unwrap();
    let x = tfidf.transform_all(&docs);
    c.bench_function("classifier train 5000 docs", |b| b.iter(|| train(black_box(&x), &labels, &TrainConfig::default()).unwrap()));
}

fn lisa(c: &mut Criterion) {
    let w = SpatialWeights::parse_adjacency(IOWA_LATTICE_CSV).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x: BTreeMap<String, f64> = w.units().iter().map(|u| (u.clone(), rng.random::<f64>())).collect();
    c.bench_function("local morans 99 units 999 perms", |b| {
        b.iter(|| local_morans(black_box(&x), &w, &LisaConfig::default()).unwrap())
    });
}

fn glmm(c: &mut Criterion) {
    let sim = simulate(8_000, 99, &TABLE8_BETA, TABLE8_SIGMA, 4).unwrap();
    let cfg = GlmmConfig::default();
    let s = Some(TABLE8_SIGMA);
    c.bench_function("glmm loglik 8000x99", |b| b.iter(|| marginal_loglik(&sim.design, black_box(&TABLE8_BETA), s, &cfg).unwrap()));
    c.bench_function("glmm gradient 8000x99", |b| {
        b.iter(|| marginal_loglik_gradient(&sim.design, black_box(&TABLE8_BETA), s, &cfg).unwrap())
    });
}

criterion_group!(benches, text, model, lisa, glmm);
criterion_main!(benches);

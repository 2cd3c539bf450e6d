//! Stages, their artifacts and the freshness checks between them.

use crate::artifacts::*;
use crate::config::RunConfig;
use crate::error::{CliError, ErrorKind};
use crate::manifest::{sha256_bytes, sha256_file, PipelineManifest, StageRecord};
use anyhow::{anyhow, bail, Context};
use crashaudit::audit::{self, MismatchCategory};
use crashaudit::classifier::{
    self, evaluate, load_external_predictions, read_predictions, render_table5, write_predictions, ClassifierModel,
    Prediction, PredictedLabel, PredictionSet, TrainConfig,
};
use crashaudit::corpus::{self, IngestOptions, SourceTables, StrataField, SynthSpec};
use crashaudit::inference::{self, EncodeOptions, GlmmConfig};
use crashaudit::spatial::{self, LisaConfig, LisaResult, SpatialWeights};
use crashaudit::textprep::{prepare_all, Redactor, Stopwords};
use crashaudit::vectorizer::{TfidfModel, VectorizerConfig};
use crashaudit::Dataset;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

type StageResult<T> = anyhow::Result<T>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Synth,
    Train,
    Classify,
    Audit,
    Lisa,
    Glmm,
    Report,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Synth => "synth",
            Stage::Train => "train",
            Stage::Classify => "classify",
            Stage::Audit => "audit",
            Stage::Lisa => "lisa",
            Stage::Glmm => "glmm",
            Stage::Report => "report",
        }
    }
}

/// Stage expected to write `artifact`, for error hints.
fn producer_hint(artifact: &str) -> &'static str {
    match artifact {
        DATASET => "ingest or synth",
        REVIEW_LABELS => "synth (or set paths.labels)",
        TFIDF_MODEL | CLASSIFIER_MODEL | TABLE5 => "train",
        PREDICTIONS => "classify",
        MISMATCH_LABELS | AIM_REPORT | REPORTED_TABLE | AIM_TABLE | YEAR_SERIES | SEVERITY_SERIES | COUNTY_SERIES
        | COUNTY_RATES => "audit",
        LISA_FULL | TABLE6 | LISA_MAP => "lisa",
        _ => "glmm",
    }
}

enum Input {
    Artifact(&'static str),
    External(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageOutcome {
    pub stage: Stage,
    pub outputs: BTreeMap<String, String>,
}

pub struct Pipeline {
    cfg: RunConfig,
    out: PathBuf,
    force: bool,
    manifest: PipelineManifest,
}

fn external_key(p: &Path) -> String {
    p.display().to_string()
}

impl Pipeline {
    /// Opens the output directory named in `cfg`, creating it if needed.
    /// The caller is expected to hold the directory lock.
    pub fn open(cfg: RunConfig, force: bool) -> Result<Self, CliError> {
        let out = cfg.paths.out.clone();
        std::fs::create_dir_all(out.join(REPORT_DIR))
            .map_err(|e| CliError::new(ErrorKind::Stage, None, anyhow!("creating {}: {e}", out.display())))?;
        let manifest = PipelineManifest::load(&out).map_err(|e| CliError::new(ErrorKind::Stage, None, e))?;
        Ok(Pipeline { cfg, out, force, manifest })
    }

    pub fn manifest(&self) -> &PipelineManifest {
        &self.manifest
    }

    pub fn out(&self) -> &Path {
        &self.out
    }

    /// Stages executed by `all`, in order.
    pub fn plan_all(&self) -> Vec<Stage> {
        let mut plan = vec![if self.cfg.has_sources() { Stage::Ingest } else { Stage::Synth }];
        if self.cfg.paths.external_scores.is_none() {
            plan.push(Stage::Train);
        }
        plan.extend([Stage::Classify, Stage::Audit, Stage::Lisa, Stage::Glmm, Stage::Report]);
        plan
    }

    pub fn run_all(&mut self) -> Result<Vec<StageOutcome>, CliError> {
        self.plan_all().into_iter().map(|s| self.run(s)).collect()
    }

    pub fn run(&mut self, stage: Stage) -> Result<StageOutcome, CliError> {
        let inputs = self.inputs(stage)?;
        let (artifacts, external) = self.check_inputs(stage, &inputs)?;
        let started = Instant::now();
        let outputs = self.execute(stage).map_err(|e| CliError::new(ErrorKind::Stage, Some(stage.name()), e))?;
        let duration_ms = started.elapsed().as_millis() as u64;
        let wrap = |e: anyhow::Error| CliError::new(ErrorKind::Stage, Some(stage.name()), e);
        let mut hashes = BTreeMap::new();
        for name in outputs {
            hashes.insert(name.to_string(), sha256_file(&self.out.join(name)).map_err(wrap)?);
        }
        let mut cfg = self.cfg.clone();
        cfg.paths.out = PathBuf::new();
        cfg.threads = None;
        let record = StageRecord {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: Some(self.cfg.stage_seed(stage.name())),
            config_hash: sha256_bytes(serde_json::to_string(&cfg).expect("config serializes").as_bytes()),
            inputs: artifacts,
            external,
            outputs: hashes.clone(),
            duration_ms,
        };
        // a stage that rewrites another stage's outputs supersedes it
        self.manifest.stages.retain(|name, r| name == stage.name() || r.outputs.keys().all(|k| !hashes.contains_key(k)));
        self.manifest.stages.insert(stage.name().to_string(), record);
        self.manifest.save(&self.out).map_err(wrap)?;
        Ok(StageOutcome { stage, outputs: hashes })
    }

    fn inputs(&self, stage: Stage) -> Result<Vec<Input>, CliError> {
        let p = &self.cfg.paths;
        let mut v = Vec::new();
        let text_files = |v: &mut Vec<Input>| {
            v.extend(p.stopwords.iter().chain(&p.redaction_rules).map(|f| Input::External(f.clone())));
        };
        match stage {
            Stage::Ingest => {
                let (Some(d), Some(c), Some(n)) = (&p.driver, &p.crash, &p.narrative) else {
                    return Err(CliError::validation("ingest needs paths.driver, paths.crash and paths.narrative"));
                };
                v.extend([d, c, n].into_iter().map(|f| Input::External(f.clone())));
            }
            Stage::Synth => {}
            Stage::Train => {
                v.push(Input::Artifact(DATASET));
                v.push(match &p.labels {
                    Some(l) => Input::External(l.clone()),
                    None => Input::Artifact(REVIEW_LABELS),
                });
                text_files(&mut v);
            }
            Stage::Classify => {
                v.push(Input::Artifact(DATASET));
                match &p.external_scores {
                    Some(f) => v.push(Input::External(f.clone())),
                    None => {
                        v.extend([Input::Artifact(TFIDF_MODEL), Input::Artifact(CLASSIFIER_MODEL)]);
                        text_files(&mut v);
                    }
                }
            }
            Stage::Audit => v.extend([Input::Artifact(DATASET), Input::Artifact(PREDICTIONS)]),
            Stage::Lisa => {
                v.push(Input::Artifact(COUNTY_RATES));
                v.extend(p.adjacency.iter().map(|f| Input::External(f.clone())));
            }
            Stage::Glmm => {
                v.extend([Input::Artifact(DATASET), Input::Artifact(MISMATCH_LABELS), Input::Artifact(LISA_FULL)]);
                v.extend(p.adjacency.iter().map(|f| Input::External(f.clone())));
            }
            Stage::Report => {
                for a in self.report_sources() {
                    v.push(Input::Artifact(a));
                }
            }
        }
        Ok(v)
    }

    fn report_sources(&self) -> Vec<&'static str> {
        let mut v = vec![REPORTED_TABLE, AIM_TABLE, AIM_REPORT, YEAR_SERIES, SEVERITY_SERIES, COUNTY_SERIES];
        if self.cfg.paths.external_scores.is_none() {
            v.push(TABLE5);
        }
        v.extend([TABLE6, LISA_MAP, TABLE8, ANOMALIES, GLMM_FIT]);
        v
    }

    #[allow(clippy::type_complexity)]
    fn check_inputs(
        &self,
        stage: Stage,
        inputs: &[Input],
    ) -> Result<(BTreeMap<String, String>, BTreeMap<String, String>), CliError> {
        let stale = |msg: String| CliError::new(ErrorKind::StaleInput, Some(stage.name()), anyhow!(msg));
        let mut artifacts = BTreeMap::new();
        let mut external = BTreeMap::new();
        let mut visited = BTreeSet::new();
        for input in inputs {
            match input {
                Input::Artifact(name) => {
                    let path = self.out.join(name);
                    if !path.is_file() {
                        return Err(stale(format!("missing {name} in {}; run {} first", self.out.display(), producer_hint(name))));
                    }
                    let hash = sha256_file(&path).map_err(|e| CliError::new(ErrorKind::Stage, Some(stage.name()), e))?;
                    if !self.force {
                        self.verify_fresh(name, &hash, &mut visited).map_err(stale)?;
                    }
                    artifacts.insert(name.to_string(), hash);
                }
                Input::External(path) => {
                    if !path.is_file() {
                        return Err(CliError::new(
                            ErrorKind::Validation,
                            Some(stage.name()),
                            anyhow!("input {} does not exist", path.display()),
                        ));
                    }
                    let hash = sha256_file(path).map_err(|e| CliError::new(ErrorKind::Stage, Some(stage.name()), e))?;
                    external.insert(external_key(path), hash);
                }
            }
        }
        Ok((artifacts, external))
    }

    /// `artifact` is unchanged since its producer wrote it, and the
    /// producer's own inputs are unchanged, transitively.
    fn verify_fresh(&self, artifact: &str, hash: &str, visited: &mut BTreeSet<String>) -> Result<(), String> {
        let Some((producer, record)) = self.manifest.producer(artifact) else {
            return Err(format!("{artifact} is not recorded in the manifest; rerun {} or pass --force", producer_hint(artifact)));
        };
        if record.outputs[artifact] != hash {
            return Err(format!("{artifact} changed since {producer} wrote it; rerun {producer} or pass --force"));
        }
        if !visited.insert(producer.to_string()) {
            return Ok(());
        }
        for (name, recorded) in &record.inputs {
            let current = sha256_file(&self.out.join(name)).map_err(|_| format!("{name}, an input of {producer}, is missing"))?;
            if &current != recorded {
                return Err(format!("{name} changed after {producer} read it; rerun {producer} or pass --force"));
            }
            self.verify_fresh(name, &current, visited)?;
        }
        for (path, recorded) in &record.external {
            match sha256_file(Path::new(path)) {
                Ok(current) if &current == recorded => {}
                _ => return Err(format!("{path} changed after {producer} read it; rerun {producer} or pass --force")),
            }
        }
        Ok(())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> StageResult<()> {
        let path = self.path(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
    }

    fn read(&self, name: &str) -> StageResult<String> {
        let path = self.path(name);
        std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))
    }

    fn dataset(&self) -> StageResult<Dataset> {
        let (ds, _) = corpus::read_dataset(&self.path(DATASET), IngestOptions::default())?;
        Ok(ds)
    }

    fn text_tools(&self) -> StageResult<(Redactor, Stopwords)> {
        let redactor = match &self.cfg.paths.redaction_rules {
            Some(p) => Redactor::with_rule_file(p)?,
            None => Redactor::default(),
        };
        let stopwords = match &self.cfg.paths.stopwords {
            Some(p) => Stopwords::from_file(p)?,
            None => Stopwords::builtin(),
        };
        Ok((redactor, stopwords))
    }

    fn weights(&self) -> StageResult<SpatialWeights> {
        Ok(match &self.cfg.paths.adjacency {
            Some(p) => SpatialWeights::read_adjacency(p)?,
            None => SpatialWeights::parse_adjacency(spatial::IOWA_LATTICE_CSV)?,
        })
    }

    fn lisa_config(&self) -> LisaConfig {
        LisaConfig { n_perm: self.cfg.lisa.n_perm, alpha: self.cfg.lisa.alpha, seed: self.cfg.stage_seed("lisa") }
    }

    fn execute(&self, stage: Stage) -> StageResult<Vec<&'static str>> {
        match stage {
            Stage::Ingest => self.ingest(),
            Stage::Synth => self.synth(),
            Stage::Train => self.train(),
            Stage::Classify => self.classify(),
            Stage::Audit => self.audit(),
            Stage::Lisa => self.lisa(),
            Stage::Glmm => self.glmm(),
            Stage::Report => self.report(),
        }
    }

    fn ingest(&self) -> StageResult<Vec<&'static str>> {
        let p = &self.cfg.paths;
        let tables = SourceTables {
            driver: p.driver.clone().expect("checked"),
            crash: p.crash.clone().expect("checked"),
            narrative: p.narrative.clone().expect("checked"),
        };
        let (ds, report) = corpus::ingest(&tables, IngestOptions { delimiter: p.delimiter as u8 })?;
        if ds.is_empty() {
            bail!("no record survived ingest ({} rejected)", report.rejected.len());
        }
        corpus::write_dataset(&ds, &self.path(DATASET))?;
        self.write(INGEST_REPORT, report.to_json() + "\n")?;
        Ok(vec![DATASET, INGEST_REPORT])
    }

    fn synth(&self) -> StageResult<Vec<&'static str>> {
        let s = &self.cfg.synth;
        let spec = SynthSpec {
            n_records: s.n_records,
            alcohol_prevalence: s.alcohol_prevalence,
            injected_mismatch_rate: s.injected_mismatch_rate,
            seed: self.cfg.stage_seed("synth"),
            ..Default::default()
        };
        let out = corpus::synthesize(&spec)?;
        corpus::write_dataset(&out.dataset, &self.path(DATASET))?;
        corpus::write_truth(&out.truth, &self.path(TRUTH))?;
        // reviewed labels: a stratified sample labelled from the ground truth
        let n = s.review_size.min(out.dataset.len());
        let sample = corpus::stratified_sample(&out.dataset, n, StrataField::AlcoholRel, self.cfg.stage_seed("review"))?;
        let labels: BTreeMap<i64, bool> =
            sample.iter().map(|r| (r.crash_key, out.truth[&r.crash_key].true_label.is_alcohol())).collect();
        self.write(REVIEW_LABELS, render_review_labels(&labels))?;
        Ok(vec![DATASET, TRUTH, REVIEW_LABELS])
    }

    fn train(&self) -> StageResult<Vec<&'static str>> {
        let ds = self.dataset()?;
        let labels_path = self.cfg.paths.labels.clone().unwrap_or_else(|| self.path(REVIEW_LABELS));
        let labels = read_review_labels(&labels_path)?;
        let unknown: Vec<i64> = labels.keys().copied().filter(|k| !ds.contains(*k)).collect();
        if !unknown.is_empty() {
            bail!("{} labelled crash keys are not in the dataset, e.g. {:?}", unknown.len(), &unknown[..unknown.len().min(5)]);
        }
        let indices: Vec<usize> = ds.iter().enumerate().filter(|(_, r)| labels.contains_key(&r.crash_key)).map(|(i, _)| i).collect();
        let reviewed = ds.select(&indices, "reviewed sample");
        let (redactor, stopwords) = self.text_tools()?;
        let docs = prepare_all(&reviewed, &redactor, &stopwords);
        let y: Vec<bool> = reviewed.iter().map(|r| labels[&r.crash_key]).collect();

        let c = &self.cfg.classifier;
        let parts = classifier::split(&y, c.ratio, self.cfg.stage_seed("split"))?;
        let pick_docs = |ix: &[usize]| ix.iter().map(|&i| docs[i].clone()).collect::<Vec<_>>();
        let (train_docs, test_docs) = (pick_docs(&parts.train), pick_docs(&parts.test));
        let tfidf = TfidfModel::fit(&train_docs, VectorizerConfig { min_df: c.min_df, bigrams: c.bigrams })?;
        let x_train = tfidf.transform_all(&train_docs);
        let y_train: Vec<bool> = parts.train.iter().map(|&i| y[i]).collect();
        let config = TrainConfig { lambda: c.lambda, tolerance: c.tolerance, max_iters: c.max_iters, link: c.link };
        let model = classifier::train(&x_train, &y_train, &config)?;

        let threshold = self.cfg.audit.threshold;
        let eval_on = |ix: &[usize], d: &[crashaudit::TokenizedDoc]| -> StageResult<_> {
            let keys: Vec<i64> = d.iter().map(|t| t.crash_key).collect();
            let preds = model.predict(&keys, &tfidf.transform_all(d), threshold)?;
            let truth: BTreeMap<i64, bool> = ix.iter().zip(d).map(|(&i, t)| (t.crash_key, y[i])).collect();
            Ok(evaluate(&preds, &truth)?)
        };
        let train_report = eval_on(&parts.train, &train_docs)?;
        let test_report = eval_on(&parts.test, &test_docs)?;

        let mut buf = Vec::new();
        tfidf.write(&mut buf)?;
        self.write(TFIDF_MODEL, &buf)?;
        buf.clear();
        model.write(&mut buf)?;
        self.write(CLASSIFIER_MODEL, &buf)?;
        self.write(TABLE5, render_table5(&[("Training", &train_report), ("Testing", &test_report)]))?;
        #[derive(Serialize)]
        struct Metrics<'a> {
            n_train: usize,
            n_test: usize,
            vocabulary: usize,
            iterations: usize,
            gradient_norm: f64,
            training: &'a classifier::EvalReport,
            testing: &'a classifier::EvalReport,
        }
        let metrics = Metrics {
            n_train: parts.train.len(),
            n_test: parts.test.len(),
            vocabulary: tfidf.dim(),
            iterations: model.iterations,
            gradient_norm: model.gradient_norm,
            training: &train_report,
            testing: &test_report,
        };
        self.write(TRAIN_METRICS, serde_json::to_string_pretty(&metrics)? + "\n")?;
        Ok(vec![TFIDF_MODEL, CLASSIFIER_MODEL, TABLE5, TRAIN_METRICS])
    }

    fn classify(&self) -> StageResult<Vec<&'static str>> {
        let ds = self.dataset()?;
        let threshold = self.cfg.audit.threshold;
        let mut report = serde_json::Map::new();
        let preds = match &self.cfg.paths.external_scores {
            Some(path) => {
                let (preds, ext) = load_external_predictions(path, &ds, threshold)?;
                report.insert("source".into(), "external".into());
                report.insert("rejected_rows".into(), serde_json::to_value(&ext.rejected)?);
                report.insert("unmatched_keys".into(), serde_json::to_value(&ext.unmatched)?);
                report.insert("unscored_records".into(), ext.missing.len().into());
                preds
            }
            None => {
                let tfidf = TfidfModel::read(std::io::BufReader::new(std::fs::File::open(self.path(TFIDF_MODEL))?))?;
                let model = ClassifierModel::read(std::io::BufReader::new(std::fs::File::open(self.path(CLASSIFIER_MODEL))?))?;
                let (redactor, stopwords) = self.text_tools()?;
                let docs = prepare_all(&ds, &redactor, &stopwords);
                let keys: Vec<i64> = docs.iter().map(|d| d.crash_key).collect();
                report.insert("source".into(), "native".into());
                model.predict(&keys, &tfidf.transform_all(&docs), threshold)?
            }
        };
        let alcoholic = preds.iter().filter(|(_, p)| p.label.is_alcoholic()).count();
        report.insert("predictions".into(), preds.len().into());
        report.insert("alcoholic".into(), alcoholic.into());
        report.insert("threshold".into(), threshold.into());
        let mut buf = Vec::new();
        write_predictions(&preds, &mut buf)?;
        self.write(PREDICTIONS, &buf)?;
        self.write(CLASSIFY_REPORT, serde_json::to_string_pretty(&report)? + "\n")?;
        Ok(vec![PREDICTIONS, CLASSIFY_REPORT])
    }

    fn audit(&self) -> StageResult<Vec<&'static str>> {
        let ds = self.dataset()?;
        let threshold = self.cfg.audit.threshold;
        let mut preds = PredictionSet::new();
        for (key, p) in read_predictions(&self.path(PREDICTIONS))?.iter() {
            let label = PredictedLabel::from_score(p.score, threshold);
            preds.insert(key, Prediction { label, ..*p })?;
        }
        let labels = audit::categorize(&preds, &ds)?;
        let report = audit::aggregate(&labels, &ds)?;
        let rates = audit::county_rates(&report);
        let counts = report.by_county.iter().map(|(c, n)| (c.clone(), (n.aim, n.non_aim))).collect();
        self.write(MISMATCH_LABELS, audit::render_labels(&labels))?;
        self.write(AIM_REPORT, serde_json::to_string_pretty(&report.to_json())? + "\n")?;
        self.write(REPORTED_TABLE, audit::render_reported_table(&ds))?;
        self.write(AIM_TABLE, audit::render_aim_table(&report))?;
        self.write(YEAR_SERIES, audit::render_year_series(&report))?;
        self.write(SEVERITY_SERIES, audit::render_severity_series(&report))?;
        self.write(COUNTY_SERIES, audit::render_county_series(&report))?;
        self.write(COUNTY_RATES, render_county_rates(&counts, &rates))?;
        Ok(vec![
            MISMATCH_LABELS,
            AIM_REPORT,
            REPORTED_TABLE,
            AIM_TABLE,
            YEAR_SERIES,
            SEVERITY_SERIES,
            COUNTY_SERIES,
            COUNTY_RATES,
        ])
    }

    fn lisa(&self) -> StageResult<Vec<&'static str>> {
        let weights = self.weights()?;
        let (rates, _) = read_county_rates(&self.path(COUNTY_RATES))?;
        let unknown: Vec<&String> = rates.keys().filter(|c| weights.index_of(c).is_none()).collect();
        if !unknown.is_empty() {
            bail!("{} counties are missing from the adjacency, e.g. {:?}", unknown.len(), &unknown[..unknown.len().min(5)]);
        }
        // counties without a rate drop out; their neighbours re-standardize
        let keep: Vec<String> = weights.units().iter().filter(|u| rates.contains_key(*u)).cloned().collect();
        let sub = weights.subset(&keep)?;
        let result = spatial::local_morans(&rates, &sub, &self.lisa_config())?;
        self.write(LISA_FULL, result.render_full())?;
        self.write(TABLE6, result.render_table6(true))?;
        self.write(LISA_MAP, result.render_map())?;
        Ok(vec![LISA_FULL, TABLE6, LISA_MAP])
    }

    fn glmm(&self) -> StageResult<Vec<&'static str>> {
        let ds = self.dataset()?;
        let labels = audit::parse_labels(&self.read(MISMATCH_LABELS)?)?;
        let weights = self.weights()?;
        let universe: Vec<String> = weights.units().to_vec();
        let in_universe: BTreeSet<&str> = universe.iter().map(String::as_str).collect();
        let opts = EncodeOptions { strict: self.cfg.glmm.strict };

        let mut reasons: BTreeMap<String, usize> = BTreeMap::new();
        let mut usable = Vec::new();
        for l in labels.iter().filter(|l| l.category != MismatchCategory::NotApplicable) {
            let r = ds.get(l.crash_key).ok_or_else(|| anyhow!("label for unknown crash {}", l.crash_key))?;
            let verdict = inference::encodable(r, &opts).and_then(|()| {
                if in_universe.contains(r.county.as_str()) {
                    Ok(())
                } else {
                    Err(format!("county {} not in adjacency", r.county))
                }
            });
            match verdict {
                Ok(()) => usable.push(*l),
                Err(reason) => *reasons.entry(reason).or_default() += 1,
            }
        }
        let sample = inference::balance(&usable, &ds, self.cfg.stage_seed("balance"))?;
        let dm = inference::encode(&sample, &ds, &universe, &opts)?;
        let g = &self.cfg.glmm;
        let config = GlmmConfig {
            n_quadrature: g.n_quadrature,
            tolerance: g.tolerance,
            max_iters: g.max_iters,
            link: g.link,
            seed: self.cfg.stage_seed("glmm"),
            sigma_fixed_zero: false,
        };
        let ms = inference::multi_start_select(&dm, g.n_runs, &config)?;
        let lisa = LisaResult::parse_full(&self.read(LISA_FULL)?, self.lisa_config())?;
        let anomalies = inference::report_anomalies(&ms.selected, &lisa)?;

        let mut runs = String::from("seed,loglik,aic,bic,sigma_u,converged,iterations,gradient_norm\n");
        for r in &ms.runs {
            let _ = writeln!(
                runs,
                "{},{:?},{:?},{:?},{:?},{},{},{:e}",
                r.seed, r.loglik, r.aic, r.bic, r.sigma_u, r.converged, r.iterations, r.gradient_norm
            );
        }
        #[derive(Serialize)]
        struct Design<'a> {
            aim_rows: usize,
            non_aim_rows: usize,
            columns: &'a [String],
            dropped_columns: &'a [(String, String)],
            rejected_before_balance: &'a BTreeMap<String, usize>,
            rejected_at_encode: usize,
            log_aadt_mean: f64,
            log_aadt_sd: f64,
        }
        let design = Design {
            aim_rows: sample.aim_count(),
            non_aim_rows: sample.non_aim_count(),
            columns: &dm.names,
            dropped_columns: &dm.dropped,
            rejected_before_balance: &reasons,
            rejected_at_encode: dm.rejected.len(),
            log_aadt_mean: dm.log_aadt_mean,
            log_aadt_sd: dm.log_aadt_sd,
        };
        self.write(GLMM_FIT, serde_json::to_string_pretty(&ms.selected)? + "\n")?;
        self.write(TABLE8, ms.selected.render_table8())?;
        self.write(GLMM_RUNS, runs)?;
        self.write(GLMM_DESIGN, serde_json::to_string_pretty(&design)? + "\n")?;
        self.write(ANOMALIES, inference::render_anomalies(&anomalies))?;
        Ok(vec![GLMM_FIT, TABLE8, GLMM_RUNS, GLMM_DESIGN, ANOMALIES])
    }

    fn report(&self) -> StageResult<Vec<&'static str>> {
        let mut outputs = Vec::new();
        for name in self.report_sources() {
            let dest = report_copy(name);
            std::fs::copy(self.path(name), self.path(dest)).with_context(|| format!("copying {name}"))?;
            outputs.push(dest);
        }
        self.write(SUMMARY, self.summary()?)?;
        outputs.push(SUMMARY);
        Ok(outputs)
    }

    fn summary(&self) -> StageResult<String> {
        let aim: serde_json::Value = serde_json::from_str(&self.read(AIM_REPORT)?)?;
        let fit: inference::GlmmFit = serde_json::from_str(&self.read(GLMM_FIT)?)?;
        let lisa = LisaResult::parse_full(&self.read(LISA_FULL)?, self.lisa_config())?;
        let overall = &aim["overall"];
        let mut s = String::new();
        let _ = writeln!(s, "AIM crashes\t{}", overall["aim"]);
        let _ = writeln!(s, "NonAIM crashes\t{}", overall["non_aim"]);
        let pct = overall["aim_pct"].as_f64().map_or("NA".to_string(), |p| format!("{p:.2}"));
        let _ = writeln!(s, "AIM rate (%)\t{pct}");
        let _ = writeln!(s, "Not applicable\t{}", aim["not_applicable"]);
        let mut clusters: BTreeMap<String, usize> = BTreeMap::new();
        for r in &lisa.rows {
            *clusters.entry(r.cluster.to_string()).or_default() += 1;
        }
        for (c, n) in clusters {
            let _ = writeln!(s, "LISA {c}\t{n}");
        }
        let _ = writeln!(s, "Random intercept variance\t{:.5}", fit.sigma2_u);
        let _ = writeln!(s, "Random intercept std. dev\t{:.4}", fit.sigma_u);
        let _ = writeln!(s, "GLMM observations\t{}", fit.n_obs);
        let _ = writeln!(s, "GLMM logLik\t{:.3}", fit.loglik);
        let _ = writeln!(s, "GLMM AIC\t{:.3}", fit.aic);
        let _ = writeln!(s, "GLMM BIC\t{:.3}", fit.bic);
        let _ = writeln!(s, "GLMM converged\t{}", fit.converged);
        let _ = writeln!(s, "GLMM run seed\t{}", fit.run_seed);
        Ok(s)
    }
}

fn report_copy(name: &str) -> &'static str {
    match name {
        REPORTED_TABLE => "report/reported_table.tsv",
        AIM_TABLE => "report/aim_table.tsv",
        AIM_REPORT => "report/aim_report.json",
        YEAR_SERIES => "report/year_series.tsv",
        SEVERITY_SERIES => "report/severity_series.tsv",
        COUNTY_SERIES => "report/county_series.tsv",
        TABLE5 => "report/table5.tsv",
        TABLE6 => "report/table6.tsv",
        LISA_MAP => "report/lisa_map.csv",
        TABLE8 => "report/table8.tsv",
        ANOMALIES => "report/anomalies.csv",
        GLMM_FIT => "report/glmm_fit.json",
        other => unreachable!("{other} is not a report source"),
    }
}

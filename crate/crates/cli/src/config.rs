//! Run configuration: TOML file, then command-line overrides.

use crate::error::CliError;
use crashaudit::classifier::Link;
use crashaudit::seed;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "CRASHAUDIT_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Every stage seed is derived from this one.
    pub seed: u64,
    /// Worker threads; `None` lets rayon decide. Results do not depend on it.
    pub threads: Option<usize>,
    pub paths: Paths,
    pub synth: SynthSection,
    pub classifier: ClassifierSection,
    pub audit: AuditSection,
    pub lisa: LisaSection,
    pub glmm: GlmmSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub out: PathBuf,
    pub driver: Option<PathBuf>,
    pub crash: Option<PathBuf>,
    pub narrative: Option<PathBuf>,
    /// Single-character field delimiter of the three source tables.
    pub delimiter: char,
    /// Reviewed training labels, `CRASH_KEY,LABEL`.
    pub labels: Option<PathBuf>,
    /// County adjacency, `county_a,county_b`; the built-in lattice otherwise.
    pub adjacency: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub redaction_rules: Option<PathBuf>,
    /// Scores from an outside classifier, `CRASH_KEY,SCORE`; replaces training.
    pub external_scores: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub n_records: usize,
    pub alcohol_prevalence: f64,
    pub injected_mismatch_rate: f64,
    /// Size of the stratified sample given reviewed labels.
    pub review_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSection {
    pub lambda: f64,
    pub link: Link,
    pub tolerance: f64,
    pub max_iters: usize,
    pub min_df: u64,
    pub bigrams: bool,
    /// Training share of the reviewed sample.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSection {
    /// Score at or above which a crash is predicted Alcoholic.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LisaSection {
    pub n_perm: usize,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlmmSection {
    pub n_runs: usize,
    pub n_quadrature: usize,
    pub tolerance: f64,
    pub max_iters: usize,
    pub link: Link,
    /// Reject rows at levels without a contrast instead of pooling them.
    pub strict: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            threads: None,
            paths: Paths::default(),
            synth: SynthSection::default(),
            classifier: ClassifierSection::default(),
            audit: AuditSection::default(),
            lisa: LisaSection::default(),
            glmm: GlmmSection::default(),
        }
    }
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            out: PathBuf::from("crashaudit-out"),
            driver: None,
            crash: None,
            narrative: None,
            delimiter: ',',
            labels: None,
            adjacency: None,
            stopwords: None,
            redaction_rules: None,
            external_scores: None,
        }
    }
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection { n_records: 20_000, alcohol_prevalence: 0.1, injected_mismatch_rate: 0.24, review_size: 8_914 }
    }
}

impl Default for ClassifierSection {
    fn default() -> Self {
        let t = crashaudit::classifier::TrainConfig::default();
        ClassifierSection {
            lambda: t.lambda,
            link: t.link,
            tolerance: t.tolerance,
            max_iters: t.max_iters,
            min_df: 2,
            bigrams: false,
            ratio: 0.8,
        }
    }
}

impl Default for AuditSection {
    fn default() -> Self {
        AuditSection { threshold: crashaudit::classifier::DEFAULT_THRESHOLD }
    }
}

impl Default for LisaSection {
    fn default() -> Self {
        LisaSection { n_perm: 999, alpha: 0.05 }
    }
}

impl Default for GlmmSection {
    fn default() -> Self {
        let g = crashaudit::inference::GlmmConfig::default();
        GlmmSection {
            n_runs: 20,
            n_quadrature: g.n_quadrature,
            tolerance: g.tolerance,
            max_iters: g.max_iters,
            link: g.link,
            strict: false,
        }
    }
}

/// Command-line values that win over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub n_perm: Option<usize>,
    pub n_runs: Option<usize>,
    pub ratio: Option<f64>,
    pub threshold: Option<f64>,
    pub alpha: Option<f64>,
    pub n_records: Option<usize>,
    pub mismatch_rate: Option<f64>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::validation(format!("config: {e}")))
    }

    /// Reads `path`, or returns defaults. Relative paths inside a file
    /// resolve against the file's directory.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            cfg.paths.resolve_against(dir);
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! set {
            ($src:expr => $dst:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = v;
                }
            };
        }
        set!(o.seed => self.seed);
        set!(o.out => self.paths.out);
        set!(o.n_perm => self.lisa.n_perm);
        set!(o.n_runs => self.glmm.n_runs);
        set!(o.ratio => self.classifier.ratio);
        set!(o.threshold => self.audit.threshold);
        set!(o.alpha => self.lisa.alpha);
        set!(o.n_records => self.synth.n_records);
        set!(o.mismatch_rate => self.synth.injected_mismatch_rate);
        if o.threads.is_some() {
            self.threads = o.threads;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let mut problems = Vec::new();
        let mut check = |ok: bool, msg: String| {
            if !ok {
                problems.push(msg);
            }
        };
        let s = &self.synth;
        check((0.0..=1.0).contains(&s.alcohol_prevalence), format!("synth.alcohol_prevalence {} not in [0, 1]", s.alcohol_prevalence));
        check((0.0..=1.0).contains(&s.injected_mismatch_rate), format!("synth.injected_mismatch_rate {} not in [0, 1]", s.injected_mismatch_rate));
        check(s.n_records >= 1, "synth.n_records must be positive".into());
        check(s.review_size >= 2, "synth.review_size must be at least 2".into());
        let c = &self.classifier;
        check(c.ratio > 0.0 && c.ratio < 1.0, format!("classifier.ratio {} not in (0, 1)", c.ratio));
        check(c.lambda >= 0.0 && c.lambda.is_finite(), format!("classifier.lambda {} must be a non-negative number", c.lambda));
        check(c.tolerance > 0.0, "classifier.tolerance must be positive".into());
        check(c.min_df >= 1, "classifier.min_df must be at least 1".into());
        check((0.0..=1.0).contains(&self.audit.threshold), format!("audit.threshold {} not in [0, 1]", self.audit.threshold));
        check(self.lisa.n_perm >= 99, format!("lisa.n_perm {} below 99", self.lisa.n_perm));
        check(self.lisa.alpha > 0.0 && self.lisa.alpha < 1.0, format!("lisa.alpha {} not in (0, 1)", self.lisa.alpha));
        let g = &self.glmm;
        check(g.n_runs >= 1, "glmm.n_runs must be at least 1".into());
        check(g.n_quadrature >= 1, "glmm.n_quadrature must be at least 1".into());
        check(g.tolerance > 0.0, "glmm.tolerance must be positive".into());
        check(self.threads != Some(0), "threads must be positive".into());
        check(self.paths.delimiter.is_ascii(), "paths.delimiter must be a single ASCII character".into());
        let p = &self.paths;
        let sources = [&p.driver, &p.crash, &p.narrative];
        let given = sources.iter().filter(|s| s.is_some()).count();
        check(given == 0 || given == 3, "paths.driver, paths.crash and paths.narrative must be given together".into());
        for (name, path) in [
            ("paths.driver", &p.driver),
            ("paths.crash", &p.crash),
            ("paths.narrative", &p.narrative),
            ("paths.labels", &p.labels),
            ("paths.adjacency", &p.adjacency),
            ("paths.stopwords", &p.stopwords),
            ("paths.redaction_rules", &p.redaction_rules),
            ("paths.external_scores", &p.external_scores),
        ] {
            if let Some(path) = path {
                check(path.is_file(), format!("{name} {} does not exist", path.display()));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::validation(problems.join("; ")))
        }
    }

    pub fn has_sources(&self) -> bool {
        self.paths.driver.is_some()
    }

    pub fn stage_seed(&self, stage: &str) -> u64 {
        seed::labeled(self.seed, stage)
    }
}

impl Paths {
    fn resolve_against(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        fix(&mut self.out);
        for p in [
            &mut self.driver,
            &mut self.crash,
            &mut self.narrative,
            &mut self.labels,
            &mut self.adjacency,
            &mut self.stopwords,
            &mut self.redaction_rules,
            &mut self.external_scores,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn sections_parse_and_flags_win() {
        let mut cfg = RunConfig::from_toml(
            "seed = 9\n[lisa]\nn_perm = 499\nalpha = 0.1\n[glmm]\nlink = \"logistic\"\nn_runs = 3\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.lisa.n_perm, 499);
        assert_eq!(cfg.glmm.link, Link::Logistic);
        cfg.apply(&Overrides { n_perm: Some(199), seed: Some(4), ..Default::default() });
        assert_eq!((cfg.lisa.n_perm, cfg.lisa.alpha, cfg.seed), (199, 0.1, 4));
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(RunConfig::from_toml("[lisa]\nnperm = 3\n").is_err());
        let mut cfg = RunConfig::default();
        cfg.classifier.ratio = 1.0;
        cfg.lisa.alpha = 0.0;
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("classifier.ratio") && err.contains("lisa.alpha"), "{err}");
    }

    #[test]
    fn stage_seeds_follow_the_global_seed() {
        let a = RunConfig::default();
        let b = RunConfig { seed: 2, ..RunConfig::default() };
        assert_ne!(a.stage_seed("lisa"), a.stage_seed("glmm"));
        assert_ne!(a.stage_seed("lisa"), b.stage_seed("lisa"));
    }
}

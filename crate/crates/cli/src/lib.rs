//! Command-line pipeline over the `crashaudit` library.
//!
//! Every stage reads the previous stages' flat-file artifacts from the
//! output directory and records input and output hashes in `manifest.json`,
//! so stages can be rerun one at a time and stale inputs are caught.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod lock;
pub mod manifest;
pub mod pipeline;

pub use config::{Overrides, RunConfig};
pub use error::{CliError, ErrorKind};
pub use manifest::PipelineManifest;
pub use pipeline::{Pipeline, Stage, StageOutcome};

use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "crashaudit", version, about = "Audit crash records for alcohol inference mismatch")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Join the driver, crash and narrative tables into a dataset
    Ingest,
    /// Generate a synthetic dataset with known mismatches
    Synth,
    /// Fit the TF-IDF vocabulary and narrative classifier on reviewed labels
    Train,
    /// Score every narrative (or load external scores)
    Classify,
    /// Categorize mismatches and tabulate AIM rates
    Audit,
    /// Local Moran's I on county AIM rates
    Lisa,
    /// Random-intercept probit model of the mismatch outcome
    Glmm,
    /// Collect the report tables into report/
    Report,
    /// Run every stage in order
    All,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML config file
    #[arg(long, global = true, env = config::CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Global seed; every stage seed derives from it
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Run even if upstream artifacts changed since they were recorded
    #[arg(long, global = true)]
    pub force: bool,
    /// Worker threads
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Permutations per county in the LISA test
    #[arg(long, global = true)]
    pub n_perm: Option<usize>,
    /// GLMM starts; the best converged run by AIC is kept
    #[arg(long, global = true)]
    pub n_runs: Option<usize>,
    /// Training share of the reviewed sample
    #[arg(long, global = true)]
    pub ratio: Option<f64>,
    /// Score threshold for a predicted Alcoholic label
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    /// LISA significance level
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Records generated by `synth`
    #[arg(long, global = true)]
    pub n_records: Option<usize>,
    /// Share of true-alcohol records `synth` records as NonAlcohol
    #[arg(long, global = true)]
    pub mismatch_rate: Option<f64>,
}

impl Flags {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            threads: self.threads,
            n_perm: self.n_perm,
            n_runs: self.n_runs,
            ratio: self.ratio,
            threshold: self.threshold,
            alpha: self.alpha,
            n_records: self.n_records,
            mismatch_rate: self.mismatch_rate,
        }
    }
}

/// Resolves the config file and flags into a validated config.
pub fn resolve_config(flags: &Flags) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(flags.config.as_deref())?;
    cfg.apply(&flags.overrides());
    cfg.validate()?;
    Ok(cfg)
}

/// Runs `command` under the output-directory lock, on a pool of
/// `cfg.threads` workers when set.
pub fn run(command: Command, cfg: RunConfig, force: bool) -> Result<Vec<StageOutcome>, CliError> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.paths.out)
        .map_err(|e| CliError::new(ErrorKind::Stage, None, anyhow::anyhow!("creating {}: {e}", cfg.paths.out.display())))?;
    let threads = cfg.threads;
    let _lock = lock::DirLock::acquire(&cfg.paths.out).map_err(|e| CliError::new(ErrorKind::Locked, None, e))?;
    let go = move || {
        let mut pipeline = Pipeline::open(cfg, force)?;
        let stage = match command {
            Command::All => return pipeline.run_all(),
            Command::Ingest => Stage::Ingest,
            Command::Synth => Stage::Synth,
            Command::Train => Stage::Train,
            Command::Classify => Stage::Classify,
            Command::Audit => Stage::Audit,
            Command::Lisa => Stage::Lisa,
            Command::Glmm => Stage::Glmm,
            Command::Report => Stage::Report,
        };
        pipeline.run(stage).map(|o| vec![o])
    };
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::new(ErrorKind::Stage, None, e))?
            .install(go),
        None => go(),
    }
}

/// Parses `args`, runs, and returns the process exit code. Errors go to
/// stderr as a single JSON record.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let err = CliError::validation(e.to_string().trim_end());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    let result = resolve_config(&cli.flags).and_then(|cfg| run(cli.command, cfg, cli.flags.force));
    match result {
        Ok(outcomes) => {
            for o in outcomes {
                println!("{}: {} artifacts", o.stage.name(), o.outputs.len());
            }
            0
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

//! Experiment configuration and the commands behind the `factormi` binary.
//!
//! Every command writes a `.txt` report and a `.json` twin into the output
//! directory; the JSON embeds the resolved config and seed.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{
    band_power, baseline_stem, cmd_baseline, cmd_cv, cmd_eval, cmd_report, cmd_synth, cmd_train, load_data, Method,
    Outcome, RunArtifact, SynthArgs,
};
pub use config::{desk_model, DataSource, ExperimentConfig, Overrides, Profile};

use crate::baselines::BaselineKind;
use crate::error::Result;

/// Environment variable holding the log filter (`error`, `warn`, `info`, ...).
pub const LOG_ENV: &str = "FACTORMI_LOG";

#[derive(Debug, Parser)]
#[command(name = "factormi", version, about = "Factorized feature learning for motor-imagery EEG")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of cross-validation folds.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub profile: Option<Profile>,
    /// Output directory (for `synth`, the dataset file).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long = "parallel-folds", global = true)]
    pub parallel_folds: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset as an EEGF file.
    Synth {
        #[arg(long)]
        classes: Option<usize>,
        /// Trials per class.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        channels: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Cross-validate the factorization model.
    Cv,
    /// Cross-validate a baseline.
    Baseline {
        #[arg(value_enum)]
        which: BaselineArg,
    },
    /// Render the comparison table of the runs in a directory.
    Report {
        /// Run directory; defaults to the configured output directory.
        dir: Option<PathBuf>,
    },
    /// Train one model and save a checkpoint.
    Train {
        #[arg(long, value_enum, default_value = "proposed")]
        method: Method,
    },
    /// Score a checkpoint on the test split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum BaselineArg {
    Csp,
    Fbcsp,
}

impl From<BaselineArg> for BaselineKind {
    fn from(b: BaselineArg) -> Self {
        match b {
            BaselineArg::Csp => BaselineKind::Csp,
            BaselineArg::Fbcsp => BaselineKind::Fbcsp,
        }
    }
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            profile: self.profile,
            seed: self.seed,
            k: self.k,
            out: match self.command {
                Command::Synth { .. } => None,
                _ => self.out.clone(),
            },
            parallel_folds: self.parallel_folds,
        }
    }
}

/// Installs the `FACTORMI_LOG`-driven logger; defaults to `warn`.
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = ExperimentConfig::resolve(cli.config.as_deref(), &cli.overrides())?;
    match &cli.command {
        Command::Synth {
            classes,
            trials,
            channels,
            samples,
        } => cmd_synth(
            &cfg,
            &SynthArgs {
                classes: *classes,
                trials: *trials,
                channels: *channels,
                samples: *samples,
                seed: cli.seed,
                out: cli.out.clone(),
            },
        ),
        Command::Cv => cmd_cv(&cfg),
        Command::Baseline { which } => cmd_baseline(&cfg, (*which).into()),
        Command::Report { dir } => cmd_report(dir.as_deref().unwrap_or(&cfg.out)),
        Command::Train { method } => cmd_train(&cfg, *method),
        Command::Eval { checkpoint } => cmd_eval(&cfg, checkpoint),
    }
}

//! Config-driven commands behind the `monochoice` binary.
//!
//! Every command reads one TOML [`RunConfig`] and writes only under the
//! output directory (`--out`, or `output_dir` in the config). Exit status is
//! 0 on success, 1 on runtime failure and 2 on configuration or usage
//! errors.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{
    cmd_analyze, cmd_audit, cmd_experiment, cmd_prepare, cmd_synth, cmd_train, synth_recovery, AnalysisSummary,
    ExperimentReport, ExperimentRow, PrepareSummary, RecoveryRow, RunOutcome, SynthReport,
};
pub use config::{
    ConstraintSection, DataSection, EvaluationSection, ExperimentManifest, ModelSection, RunConfig, RunSpec,
    SchemaChoice, SynthSection, TrainingSection, WeightOverride,
};

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "monochoice", version, about = "Choice models with monotonicity constraints")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// run configuration (TOML)
    #[arg(long)]
    pub config: PathBuf,
    /// output directory; overrides `output_dir`
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load, filter, split and scale the raw survey file
    Prepare(Common),
    /// Train the configured model
    Train(Common),
    /// Train every run of the experiment manifest and tabulate results
    Experiment(Common),
    /// Sweeps, monotonicity reports, VOT tables and audits for trained models
    Analyze {
        #[command(flatten)]
        common: Common,
        /// model file; defaults to the experiment's models or `<out>/model.json`
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Constraint audit of trained models
    Audit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Fit an MNL to synthetic known-truth data and report recovery
    Synth(Common),
}

/// Runs one parsed command, printing a short summary to stdout.
pub fn run(cli: Cli) -> Result<()> {
    let (common, model) = match &cli.command {
        Command::Prepare(c) | Command::Train(c) | Command::Experiment(c) | Command::Synth(c) => (c, None),
        Command::Analyze { common, model } | Command::Audit { common, model } => (common, model.as_deref()),
    };
    let cfg = RunConfig::load(&common.config)?;
    let out = cfg.output_dir(common.out.as_deref())?;
    match cli.command {
        Command::Prepare(_) => {
            let s = cmd_prepare(&cfg, &out)?;
            for r in &s.filters {
                println!("{:<26} dropped {:>6}  remaining {:>6}", r.rule, r.dropped, r.remaining);
            }
            println!(
                "{} observations (train {}, validation {}, test {}) -> {}",
                s.rows,
                s.split_counts[0],
                s.split_counts[1],
                s.split_counts[2],
                s.dataset.display()
            );
        }
        Command::Train(_) => {
            let o = cmd_train(&cfg, &out)?;
            for (s, m) in &o.metrics {
                println!("{:<10} avg NLL {:.4}  accuracy {:.1}%", s.label(), m.avg_nll, 100.0 * m.accuracy);
            }
            println!("best epoch {} of {}; max audit violation fraction {:.4}", o.best_epoch, o.epochs_run, o.audit_max_fraction);
        }
        Command::Experiment(_) => {
            let r = cmd_experiment(&cfg, &out)?;
            print!("{}", r.nll_accuracy_display());
            if r.failures() > 0 {
                return Err(Error::Domain(format!("{} experiment run(s) failed", r.failures())));
            }
        }
        Command::Analyze { .. } => {
            for s in cmd_analyze(&cfg, &out, model.as_deref())? {
                println!(
                    "{}: {} curve violations, audit max fraction {:.4}",
                    s.model, s.curve_violations, s.audit_max_fraction
                );
                for (alt, st) in &s.vot {
                    match st {
                        Some(v) => println!(
                            "  VOT {alt:<6} mean {:>9.1}  median {:>8.1}  negative {:>5.1}%",
                            v.mean, v.median, v.percent_negative
                        ),
                        None => println!("  VOT {alt:<6} all records degenerate"),
                    }
                }
            }
        }
        Command::Audit { .. } => {
            for (name, r) in cmd_audit(&cfg, &out, model.as_deref())? {
                println!("{name}: {} violations, max fraction {:.4}", r.total_violations(), r.max_fraction());
            }
        }
        Command::Synth(_) => {
            let r = cmd_synth(&cfg, &out)?;
            for row in &r.rows {
                println!(
                    "{:<12} truth {:>9.4}  estimate {:>9.4}  rel. error {:.2}%",
                    row.parameter,
                    row.truth,
                    row.estimate,
                    100.0 * row.relative_error
                );
            }
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_config() {
        2
    } else {
        1
    }
}

#[cfg(test)]
mod tests;

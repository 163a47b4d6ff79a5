//! Command-line front end: one subcommand per experiment, each writing a CSV
//! table preceded by a JSON comment header with the resolved configuration.

pub mod args;
pub mod commands;
pub mod record;

use std::path::Path;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

use commands::*;
pub use record::RunRecord;

#[derive(Debug, Parser)]
#[command(name = "airgnn", version, about = "Disentangled GNN experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one model and write per-epoch metrics.
    Train(TrainArgs),
    /// Accuracy as one depth axis grows.
    SweepDepth(SweepArgs),
    /// Graph smoothing level along propagation or across trained depths.
    Smoothness(SmoothnessArgs),
    /// Distance between `Â^k` and its closed-form limit.
    Stationary(StationaryArgs),
    /// Accuracy under edge, label or feature removal.
    Sparsity(SparsityArgs),
    /// Epoch timings with and without adaptive initial residuals.
    Bench(BenchArgs),
    /// Finite-difference check of every model variant.
    Gradcheck(GradcheckArgs),
    /// Train/test accuracy and first-layer gradients of deep stacks.
    DegradationProbe(DegradationArgs),
}

/// What a command produced. `consistent` is false when a self-check inside
/// the command (the gradient check's expectations) did not hold.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub record: RunRecord,
    /// Secondary table, e.g. the gradient trajectory of `degradation-probe`.
    pub extra: Option<RunRecord>,
    pub consistent: bool,
}

impl From<RunRecord> for Outcome {
    fn from(record: RunRecord) -> Self {
        Self {
            record,
            extra: None,
            consistent: true,
        }
    }
}

/// Runs a command without writing anything.
pub fn execute(command: &Command) -> Result<Outcome> {
    Ok(match command {
        Command::Train(a) => cmd_train(a)?.into(),
        Command::SweepDepth(a) => cmd_sweep_depth(a)?.into(),
        Command::Smoothness(a) => cmd_smoothness(a)?.into(),
        Command::Stationary(a) => cmd_stationary(a)?.into(),
        Command::Sparsity(a) => cmd_sparsity(a)?.into(),
        Command::Bench(a) => cmd_bench(a)?.into(),
        Command::Gradcheck(a) => {
            let (record, consistent) = cmd_gradcheck(a)?;
            Outcome {
                record,
                extra: None,
                consistent,
            }
        }
        Command::DegradationProbe(a) => {
            let (record, extra) = cmd_degradation_probe(a)?;
            Outcome {
                record,
                extra,
                consistent: true,
            }
        }
    })
}

fn out_path(command: &Command) -> Option<&Path> {
    match command {
        Command::Train(a) => a.out.as_deref(),
        Command::SweepDepth(a) => a.out.as_deref(),
        Command::Smoothness(a) => a.out.as_deref(),
        Command::Stationary(a) => a.out.as_deref(),
        Command::Sparsity(a) => a.out.as_deref(),
        Command::Bench(a) => a.out.as_deref(),
        Command::Gradcheck(a) => a.out.as_deref(),
        Command::DegradationProbe(a) => a.out.as_deref(),
    }
}

/// Runs a command and writes its table to `--out` (stdout by default).
pub fn run(cli: &Cli) -> Result<()> {
    let outcome = execute(&cli.command)?;
    outcome.record.emit(out_path(&cli.command))?;
    if let (Some(extra), Command::DegradationProbe(a)) = (&outcome.extra, &cli.command) {
        extra.emit(a.grad_out.as_deref())?;
    }
    if !outcome.consistent {
        bail!("gradient check outcome differs from expectation");
    }
    Ok(())
}

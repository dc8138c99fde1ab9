//! `cconcave`: runs the verification checks and writes JSON reports.
//!
//! Exit codes: 0 when every asserted check passes, 1 when one fails, 2 on a
//! configuration error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use cconcave::error::Error;
use clap::{Parser, Subcommand};
use serde_json::json;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "cconcave", version, about = "Numerical checks of c-concavity on model manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration; defaults apply to missing fields
    #[arg(long, global = true, env = "CCONCAVE_CONFIG")]
    config: Option<PathBuf>,

    /// Overrides the configured seed
    #[arg(long, global = true, env = "CCONCAVE_SEED")]
    seed: Option<u64>,

    /// Scales all grids down 16x
    #[arg(long, global = true, env = "CCONCAVE_QUICK")]
    quick: bool,

    /// Directory for reports and data files
    #[arg(long, global = true, env = "CCONCAVE_OUT", default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Comparison-geometry checks on the configured manifold
    Compare,
    /// Certifies the configured field
    Certify,
    /// Searches for violations of the argmin characterization
    CheckCconcavity,
    /// Builds and verifies the counterexample on the unit sphere
    Counterexample,
    /// Checks optimality of the induced transport on a point cloud
    TransportVerify,
    /// Tabulates margins over a parameter range
    Sweep,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::Compare => "compare",
            Self::Certify => "certify",
            Self::CheckCconcavity => "check-cconcavity",
            Self::Counterexample => "counterexample",
            Self::TransportVerify => "transport-verify",
            Self::Sweep => "sweep",
        }
    }
}

enum Failure {
    Config(anyhow::Error),
    Run(anyhow::Error),
}

/// Core errors caused by bad input count as configuration errors.
fn classify(e: anyhow::Error) -> Failure {
    match e.downcast_ref::<Error>() {
        Some(
            Error::InvalidArgument(_)
            | Error::InvalidRamp(_)
            | Error::InvalidRadius { .. }
            | Error::SizeLimit { .. }
            | Error::SizeMismatch { .. },
        ) => Failure::Config(e),
        _ => Failure::Run(e),
    }
}

fn resolve(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.quick || cfg.quick {
        cfg = cfg.quickened();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_outputs(dir: &Path, command: Command, cfg: &RunConfig, outcome: &run::Outcome) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let doc = json!({
        "subcommand": command.name(),
        "timestamp": timestamp,
        "config": cfg,
        "pass": outcome.failures.is_empty(),
        "failures": outcome.failures,
        "report": outcome.report,
    });
    let path = dir.join(format!("{}.json", command.name()));
    std::fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    for (name, contents) in &outcome.files {
        let p = dir.join(name);
        std::fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(path)
}

fn execute(cli: &Cli) -> Result<bool, Failure> {
    let cfg = resolve(cli).map_err(Failure::Config)?;
    let outcome = match cli.command {
        Command::Compare => run::compare(&cfg),
        Command::Certify => run::certify(&cfg),
        Command::CheckCconcavity => run::check_cconcavity(&cfg),
        Command::Counterexample => run::counterexample(&cfg),
        Command::TransportVerify => run::transport_verify(&cfg),
        Command::Sweep => run::sweep(&cfg),
    }
    .map_err(classify)?;
    let path = write_outputs(&cli.out, cli.command, &cfg, &outcome).map_err(Failure::Run)?;
    let pass = outcome.failures.is_empty();
    if pass {
        println!("{}: pass ({})", cli.command.name(), path.display());
    } else {
        println!("{}: FAIL [{}] ({})", cli.command.name(), outcome.failures.join(", "), path.display());
    }
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Run(e)) => {
            eprintln!("{}: {e:#}", cli.command.name());
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(2)
        }
    }
}

//! Command-line front end: argument parsing, configuration and report output.
//!
//! Exit codes: 0 on success, 1 on a simulation, I/O or claim failure, 2 on an
//! invalid configuration.

pub mod claims;
pub mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};

use clap::{Parser, Subcommand};

use config::{Command, Flags, Output, RunConfig, DEFAULT_CLAIMS_SEED};
use report::{Cell, Report};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] ensemble_qc::Error),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("{0} of {1} claims failed")]
    ClaimsFailed(usize, usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ensemble-qc", version, about = "Fock-space simulation of ensemble-based cluster-state protocols")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Entangled-mode-pair preparation from two ensembles.
    Eme(Flags),
    /// Three-qubit cluster from three pairs.
    Ghz(Flags),
    /// Probabilistic CZ fusion of two clusters.
    Cz(Flags),
    /// Monte Carlo cost of growing an N-qubit line.
    Grow(Flags),
    /// Fusion-threshold margin against efficiency.
    SweepLoss(Flags),
    /// Runs every acceptance check and prints one line each.
    VerifyClaims(Flags),
}

impl Sub {
    fn split(&self) -> (Command, &Flags) {
        match self {
            Sub::Eme(f) => (Command::Eme, f),
            Sub::Ghz(f) => (Command::Ghz, f),
            Sub::Cz(f) => (Command::Cz, f),
            Sub::Grow(f) => (Command::Grow, f),
            Sub::SweepLoss(f) => (Command::SweepLoss, f),
            Sub::VerifyClaims(f) => (Command::VerifyClaims, f),
        }
    }
}

fn write_report(report: &Report, cfg: &RunConfig) -> Result<(), CliError> {
    match &cfg.output {
        Output::Stdout => {
            let stdout = io::stdout();
            report.write(stdout.lock(), cfg.format)?;
        }
        Output::File(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            let mut w = BufWriter::new(File::create(path)?);
            report.write(&mut w, cfg.format)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn verify_claims(cfg: &RunConfig) -> Result<(), CliError> {
    let claims = claims::run_all(cfg.seed.unwrap_or(DEFAULT_CLAIMS_SEED));
    let mut out = io::stdout().lock();
    for c in &claims {
        writeln!(out, "{}", c.line())?;
    }
    if let Output::File(_) = cfg.output {
        let mut table = Report::table(&["id", "name", "passed", "detail"]);
        for c in &claims {
            table.push_row(vec![
                Cell::Int(c.id as u64),
                Cell::from(c.name),
                Cell::from(if c.passed { "true" } else { "false" }),
                Cell::from(c.detail.clone()),
            ]);
        }
        write_report(&table, cfg)?;
    }
    let failed = claims.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(CliError::ClaimsFailed(failed, claims.len()));
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let (command, flags) = cli.command.split();
    let cfg = RunConfig::resolve(command, flags)?;
    let report = match command {
        Command::Eme => commands::eme(&cfg)?,
        Command::Ghz => commands::ghz(&cfg)?,
        Command::Cz => commands::cz(&cfg)?,
        Command::Grow => commands::grow(&cfg)?,
        Command::SweepLoss => commands::sweep_loss(&cfg)?,
        Command::VerifyClaims => return verify_claims(&cfg),
    };
    write_report(&report, &cfg)
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

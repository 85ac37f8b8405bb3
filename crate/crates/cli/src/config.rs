//! Run configuration: command-line flags override a JSON config file, which
//! overrides built-in defaults.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use ensemble_qc::resources::{Boundary, EmeRate};
use serde::Deserialize;

use crate::CliError;

/// Directory for output files when `--out` is not given.
pub const OUTPUT_DIR_ENV: &str = "ENSEMBLE_QC_OUTPUT_DIR";

pub const DEFAULT_P: f64 = 0.01;
pub const DEFAULT_CUTOFF: u8 = 3;
pub const DEFAULT_TRIALS: u64 = 1000;
pub const DEFAULT_N: u32 = 50;
pub const DEFAULT_ETA_GRID: &str = "0:1:0.05";
/// Seed used by `verify-claims` when none is given.
pub const DEFAULT_CLAIMS_SEED: u64 = 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Analytic,
    Sampled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryArg {
    Free,
    Floor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmeRateArg {
    Idealized,
    Protocol,
}

/// Flags shared by every subcommand.
#[derive(Clone, Debug, Default, Args)]
pub struct Flags {
    /// JSON config file; flags take precedence over its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Excitation probability per pulse.
    #[arg(long)]
    pub p: Option<f64>,
    /// Overall efficiency, applied at the source (sets η_D = 1).
    #[arg(long, conflicts_with_all = ["eta_e", "eta_d"])]
    pub eta: Option<f64>,
    /// Ensemble-photon coupling efficiency.
    #[arg(long = "eta-e")]
    pub eta_e: Option<f64>,
    /// Detector efficiency.
    #[arg(long = "eta-d")]
    pub eta_d: Option<f64>,
    /// Atomic Fock cutoff per mode.
    #[arg(long)]
    pub cutoff: Option<u8>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Master seed; required in sampled mode.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Target cluster size.
    #[arg(long = "N")]
    pub n: Option<u32>,
    /// Output file; otherwise `$ENSEMBLE_QC_OUTPUT_DIR/<command>.<ext>`, or stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Efficiency grid `start:end:step`.
    #[arg(long = "eta-grid")]
    pub eta_grid: Option<String>,
    /// Lower boundary of the growth walk.
    #[arg(long, value_enum)]
    pub boundary: Option<BoundaryArg>,
    /// Per-round EME success model for growth.
    #[arg(long = "eme-rate", value_enum)]
    pub eme_rate: Option<EmeRateArg>,
}

/// Keys accepted in a config file.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub p: Option<f64>,
    pub eta: Option<f64>,
    pub eta_e: Option<f64>,
    pub eta_d: Option<f64>,
    pub cutoff: Option<u8>,
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    #[serde(rename = "N")]
    pub n: Option<u32>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub eta_grid: Option<String>,
    pub boundary: Option<BoundaryArg>,
    pub eme_rate: Option<EmeRateArg>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Eme,
    Ghz,
    Cz,
    Grow,
    SweepLoss,
    VerifyClaims,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Eme => "eme",
            Command::Ghz => "ghz",
            Command::Cz => "cz",
            Command::Grow => "grow",
            Command::SweepLoss => "sweep-loss",
            Command::VerifyClaims => "verify-claims",
        }
    }
}

/// Where results go.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Output {
    Stdout,
    File(PathBuf),
}

/// Fully resolved and validated configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub p: f64,
    pub eta_e: f64,
    pub eta_d: f64,
    pub cutoff: u8,
    pub mode: Mode,
    pub seed: Option<u64>,
    pub trials: u64,
    pub n: u32,
    pub output: Output,
    pub format: Format,
    pub eta_grid: Vec<f64>,
    pub boundary: Boundary,
    pub eme_rate: EmeRateArg,
}

fn efficiencies(eta: Option<f64>, eta_e: Option<f64>, eta_d: Option<f64>) -> (Option<f64>, Option<f64>) {
    match eta {
        Some(eta) => (Some(eta), Some(1.0)),
        None => (eta_e, eta_d),
    }
}

/// Parses `start:end:step` into `start + k·step` for `k = 0..=⌊(end−start)/step⌉`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Config(format!("invalid grid `{spec}`, expected start:end:step"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let [start, end, step] = parts[..] else { return Err(bad()) };
    if !(step > 0.0) || end < start || !start.is_finite() || !end.is_finite() {
        return Err(bad());
    }
    let count = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| start + k as f64 * step).collect())
}

fn check(name: &str, value: f64, ok: bool, range: &str) -> Result<f64, CliError> {
    if ok {
        Ok(value)
    } else {
        Err(CliError::Config(format!("{name} = {value} outside {range}")))
    }
}

impl RunConfig {
    pub fn resolve(command: Command, flags: &Flags) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let (flag_e, flag_d) = efficiencies(flags.eta, flags.eta_e, flags.eta_d);
        let (file_e, file_d) = efficiencies(file.eta, file.eta_e, file.eta_d);

        let p = flags.p.or(file.p).unwrap_or(DEFAULT_P);
        let eta_e = flag_e.or(file_e).unwrap_or(1.0);
        let eta_d = flag_d.or(file_d).unwrap_or(1.0);
        let cutoff = flags.cutoff.or(file.cutoff).unwrap_or(DEFAULT_CUTOFF);
        let mode = flags.mode.or(file.mode).unwrap_or(Mode::Analytic);
        let seed = flags.seed.or(file.seed);
        let trials = flags.trials.or(file.trials).unwrap_or(DEFAULT_TRIALS);
        let n = flags.n.or(file.n).unwrap_or(DEFAULT_N);
        let format = flags.format.or(file.format).unwrap_or(Format::Csv);
        let grid = flags.eta_grid.clone().or(file.eta_grid).unwrap_or_else(|| DEFAULT_ETA_GRID.into());
        let boundary = match flags.boundary.or(file.boundary).unwrap_or(BoundaryArg::Free) {
            BoundaryArg::Free => Boundary::Free,
            BoundaryArg::Floor => Boundary::Floor,
        };
        let eme_rate = flags.eme_rate.or(file.eme_rate).unwrap_or(EmeRateArg::Idealized);

        check("p", p, p > 0.0 && p < 1.0, "(0, 1)")?;
        check("eta_e", eta_e, eta_e > 0.0 && eta_e <= 1.0, "(0, 1]")?;
        check("eta_d", eta_d, eta_d > 0.0 && eta_d <= 1.0, "(0, 1]")?;
        check("cutoff", cutoff as f64, (2..=5).contains(&cutoff), "2..=5")?;
        check("trials", trials as f64, trials >= 1, "≥ 1")?;
        check("N", n as f64, n >= 1, "≥ 1")?;
        let eta_grid = parse_grid(&grid)?;
        for &eta in &eta_grid {
            check("eta-grid point", eta, (0.0..=1.0 + 1e-12).contains(&eta), "[0, 1]")?;
        }
        let sampled = mode == Mode::Sampled || command == Command::Grow;
        if sampled && seed.is_none() {
            return Err(CliError::Config(format!("{} in sampled mode requires --seed", command.name())));
        }

        let output = match flags.out.clone().or(file.out) {
            Some(path) => Output::File(path),
            None => match std::env::var_os(OUTPUT_DIR_ENV) {
                Some(dir) if !dir.is_empty() => {
                    Output::File(PathBuf::from(dir).join(format!("{}.{}", command.name(), format.extension())))
                }
                _ => Output::Stdout,
            },
        };

        Ok(RunConfig {
            command,
            p,
            eta_e,
            eta_d,
            cutoff,
            mode,
            seed,
            trials,
            n,
            output,
            format,
            eta_grid: eta_grid.into_iter().map(|e| e.min(1.0)).collect(),
            boundary,
            eme_rate,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta_e * self.eta_d
    }

    pub fn rate(&self) -> EmeRate {
        match self.eme_rate {
            EmeRateArg::Idealized => EmeRate::Idealized,
            EmeRateArg::Protocol => EmeRate::Protocol {
                eta: self.eta(),
                n_max: self.cutoff,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints() {
        let g = parse_grid("0:1:0.05").unwrap();
        assert_eq!(g.len(), 21);
        assert!((g[20] - 1.0).abs() < 1e-12);
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
    }

    #[test]
    fn eta_shorthand() {
        let flags = Flags {
            eta: Some(0.8),
            ..Flags::default()
        };
        let c = RunConfig::resolve(Command::Ghz, &flags).unwrap();
        assert_eq!((c.eta_e, c.eta_d), (0.8, 1.0));
    }

    #[test]
    fn sampled_requires_seed() {
        let flags = Flags {
            mode: Some(Mode::Sampled),
            ..Flags::default()
        };
        assert!(RunConfig::resolve(Command::Cz, &flags).is_err());
        assert!(RunConfig::resolve(Command::Grow, &Flags::default()).is_err());
    }
}

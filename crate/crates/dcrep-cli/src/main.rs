//! `dcrep`: divide-and-color representability from the command line.

mod commands;
mod model;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dcrep::dc_solver::TolPolicy;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] dcrep::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

#[derive(Parser)]
#[command(name = "dcrep", version, about = "Divide-and-color representability of threshold Gaussian and stable vectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Condition checks, small- and large-h verdicts, and the LP at --h.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = RegimeArg::All)]
        regime: RegimeArg,
    },
    /// Solve for a color representation of the law at --h.
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep a parameter grid and emit one row per point.
    Scan {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        kind: ScanKind,
        /// Grid spacing; defaults to 0.005 for ab and 0.01 otherwise.
        #[arg(long)]
        step: Option<f64>,
        /// Fixed coefficient for the ptalpha scan.
        #[arg(long, default_value_t = 0.5)]
        a: f64,
    },
    /// Sample an embedding or color process and verify it.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Copy block 1's color onto block 2 before verifying.
        #[arg(long)]
        tamper: bool,
        #[arg(long, default_value_t = 1e-3)]
        significance: f64,
    },
    /// Closed-form h → 0 and h → ∞ limits.
    Asymptotics {
        #[command(flatten)]
        common: Common,
        /// Also locate the α at which αΓ(2α)Γ(1−α)/Γ(1+α) = 1.
        #[arg(long)]
        phase: bool,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeArg {
    All,
    ZeroH,
    FixedH,
    SmallH,
    LargeH,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanKind {
    Ab,
    Ptalpha,
    Square,
    Alt,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Settings shared by every command. A --config file supplies defaults
/// that flags override.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Common {
    /// JSON file with any of the settings below.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Preset (e.g. sym3:0.5, ab:0.8,0.3, ptalpha12:0.5,0.3), inline JSON or a JSON file.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub h: Option<f64>,
    /// Marginal probability; defaults to the law's common marginal.
    #[arg(long)]
    pub p: Option<f64>,
    /// Monte Carlo sample count.
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Phase-I optimum accepted as feasible.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Phase-I optimum reported as borderline.
    #[arg(long)]
    pub borderline_tol: Option<f64>,
    /// Half-width of the Monte Carlo relaxation in standard errors.
    #[arg(long)]
    pub se_mult: Option<f64>,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

pub const DEFAULT_SEED: u64 = 1;

impl Common {
    fn resolve(self) -> Result<Common, CliError> {
        let Some(path) = &self.config else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("reading {}: {e}", path.display())))?;
        let file: Common =
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        Ok(Common {
            config: self.config,
            model: self.model.or(file.model),
            h: self.h.or(file.h),
            p: self.p.or(file.p),
            samples: self.samples.or(file.samples),
            seed: self.seed.or(file.seed),
            tol: self.tol.or(file.tol),
            borderline_tol: self.borderline_tol.or(file.borderline_tol),
            se_mult: self.se_mult.or(file.se_mult),
            out: self.out,
            format: self.format.or(file.format),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn policy(&self) -> Result<TolPolicy, CliError> {
        let d = TolPolicy::default();
        let p = TolPolicy {
            feasible: self.tol.unwrap_or(d.feasible),
            borderline: self.borderline_tol.unwrap_or(d.borderline),
            se_mult: self.se_mult.unwrap_or(d.se_mult),
        };
        if !(p.feasible > 0.0 && p.borderline >= p.feasible && p.se_mult > 0.0) {
            return Err(CliError::Usage("need 0 < tol <= borderline-tol and se-mult > 0".into()));
        }
        Ok(p)
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or_default()
    }
}

fn run(cli: Cli) -> Result<(String, Option<PathBuf>), CliError> {
    let (common, outcome) = match cli.command {
        Command::Analyze { common, regime } => {
            let c = common.resolve()?;
            let o = commands::analyze(&c, regime)?;
            (c, o)
        }
        Command::Solve { common } => {
            let c = common.resolve()?;
            let o = commands::solve(&c)?;
            (c, o)
        }
        Command::Scan { common, kind, step, a } => {
            let c = common.resolve()?;
            let o = commands::scan(&c, kind, step, a)?;
            (c, o)
        }
        Command::Simulate { common, tamper, significance } => {
            let c = common.resolve()?;
            let o = commands::simulate(&c, tamper, significance)?;
            (c, o)
        }
        Command::Asymptotics { common, phase } => {
            let c = common.resolve()?;
            let o = commands::asymptotics(&c, phase)?;
            (c, o)
        }
    };
    let text = match common.format() {
        Format::Json => output::render_json(&output::envelope(&outcome.config, &outcome.result)),
        Format::Csv => {
            let table = outcome.table.unwrap_or_else(|| output::flatten(&outcome.result));
            output::render_csv(&outcome.config, &table)
        }
    };
    Ok((text, common.out))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok((text, out)) => {
            let written = match out {
                Some(path) => std::fs::write(&path, text).map_err(|e| format!("writing {}: {e}", path.display())),
                None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string()),
            };
            match written {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numerical_failures_exit_three() {
        assert_eq!(CliError::Lib(dcrep::Error::Numerical("quadrature".into())).exit_code(), 3);
        assert_eq!(CliError::Lib(dcrep::Error::Singular).exit_code(), 2);
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
    }

    #[test]
    fn flags_override_config() {
        let dir = std::env::temp_dir().join(format!("dcrep-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.json");
        std::fs::write(&path, r#"{"model": "sym3:0.5", "seed": 3, "tol": 1e-9}"#).unwrap();
        let c = Common { config: Some(path), seed: Some(4), ..Default::default() }.resolve().unwrap();
        assert_eq!(c.seed(), 4);
        assert_eq!(c.model.as_deref(), Some("sym3:0.5"));
        assert_eq!(c.policy().unwrap().feasible, 1e-9);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}

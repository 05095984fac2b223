//! Model specifications: named presets, inline JSON or a JSON file.

use std::path::Path;

use dcrep::asymptotics::StableFamily;
use dcrep::gaussian_law::CovarianceSpec;
use dcrep::partitions::BinaryLaw;
use dcrep::stable_law::StableLinearModel;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ModelKind {
    Gaussian(CovarianceSpec),
    Stable(StableLinearModel),
    Law(BinaryLaw),
}

/// What the preset name tells us beyond the matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preset {
    None,
    Ab { a: f64, b: f64 },
    Symmetric { a: f64 },
    Markov { a: f64 },
    Square { theta: f64 },
    PtAlpha12 { a: f64 },
    StableMarkov { a: f64 },
    Alt { a: f64, b: f64 },
}

#[derive(Debug, Clone)]
pub struct Model {
    pub kind: ModelKind,
    pub preset: Preset,
}

impl Model {
    pub fn stable_family(&self) -> StableFamily {
        match self.preset {
            Preset::PtAlpha12 { a } => StableFamily::PtAlpha12 { a },
            Preset::StableMarkov { a } => StableFamily::Markov { a },
            Preset::Alt { a, b } => StableFamily::Alt { a, b },
            _ => StableFamily::Other,
        }
    }
}

pub const PRESETS: &str = "ab:a,b  std3:a12,a13,a23  sym3:a  sym:n,a  markov3:a  markov:n,a  square:theta  \
symmean  indep:n  ptalpha12:a,alpha  smarkov3:a,alpha  smarkov:n,a,alpha  alt:a,b,alpha";

fn numbers(args: &str, want: usize, name: &str) -> Result<Vec<f64>, CliError> {
    let v: Vec<f64> = args
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("preset {name}: {e}")))?;
    if v.len() != want {
        return Err(CliError::Usage(format!("preset {name} takes {want} number(s), got {}", v.len())));
    }
    Ok(v)
}

fn count(x: f64, name: &str) -> Result<usize, CliError> {
    if x >= 1.0 && x.fract() == 0.0 {
        Ok(x as usize)
    } else {
        Err(CliError::Usage(format!("preset {name}: {x} is not a dimension")))
    }
}

fn preset(name: &str, args: &str) -> Result<Model, CliError> {
    use ModelKind::*;
    let (kind, preset) = match name {
        "ab" => {
            let v = numbers(args, 2, name)?;
            (Gaussian(CovarianceSpec::ab(v[0], v[1])?), Preset::Ab { a: v[0], b: v[1] })
        }
        "std3" => {
            let v = numbers(args, 3, name)?;
            (Gaussian(CovarianceSpec::standard3(v[0], v[1], v[2])?), Preset::None)
        }
        "sym3" => {
            let v = numbers(args, 1, name)?;
            (Gaussian(CovarianceSpec::fully_symmetric(3, v[0])?), Preset::Symmetric { a: v[0] })
        }
        "sym" => {
            let v = numbers(args, 2, name)?;
            (Gaussian(CovarianceSpec::fully_symmetric(count(v[0], name)?, v[1])?), Preset::Symmetric { a: v[1] })
        }
        "markov3" => {
            let v = numbers(args, 1, name)?;
            (Gaussian(CovarianceSpec::markov(3, v[0])?), Preset::Markov { a: v[0] })
        }
        "markov" => {
            let v = numbers(args, 2, name)?;
            (Gaussian(CovarianceSpec::markov(count(v[0], name)?, v[1])?), Preset::Markov { a: v[1] })
        }
        "square" => {
            let v = numbers(args, 1, name)?;
            (Gaussian(CovarianceSpec::square_on_sphere(v[0])?), Preset::Square { theta: v[0] })
        }
        "symmean" => (Gaussian(CovarianceSpec::symmetric_plus_mean()?), Preset::None),
        "indep" => {
            let v = numbers(args, 1, name)?;
            (Gaussian(CovarianceSpec::identity(count(v[0], name)?)?), Preset::None)
        }
        "ptalpha12" => {
            let v = numbers(args, 2, name)?;
            (Stable(StableLinearModel::ptalpha12(v[0], v[1])?), Preset::PtAlpha12 { a: v[0] })
        }
        "smarkov3" => {
            let v = numbers(args, 2, name)?;
            (Stable(StableLinearModel::markov_chain(3, v[0], v[1])?), Preset::StableMarkov { a: v[0] })
        }
        "smarkov" => {
            let v = numbers(args, 3, name)?;
            let n = count(v[0], name)?;
            (Stable(StableLinearModel::markov_chain(n, v[1], v[2])?), Preset::StableMarkov { a: v[1] })
        }
        "alt" => {
            let v = numbers(args, 3, name)?;
            (Stable(StableLinearModel::alt_example(v[0], v[1], v[2])?), Preset::Alt { a: v[0], b: v[1] })
        }
        _ => return Err(CliError::Usage(format!("unknown preset {name}; known: {PRESETS}"))),
    };
    Ok(Model { kind, preset })
}

/// Parses `name:args`, inline JSON, or the path of a JSON file.
pub fn parse_model(spec: &str) -> Result<Model, CliError> {
    let spec = spec.trim();
    let json = if spec.starts_with('{') {
        spec.to_string()
    } else if Path::new(spec).is_file() {
        std::fs::read_to_string(spec).map_err(|e| CliError::Usage(format!("reading {spec}: {e}")))?
    } else {
        let (name, args) = spec.split_once(':').unwrap_or((spec, ""));
        return preset(name, args);
    };
    let kind: ModelKind = serde_json::from_str(&json).map_err(|e| {
        CliError::Usage(format!(
            "model JSON must hold {{n, a}} (Gaussian), {{alpha, loadings}} (stable) or {{n, entries}} (law): {e}"
        ))
    })?;
    Ok(Model { kind, preset: Preset::None })
}

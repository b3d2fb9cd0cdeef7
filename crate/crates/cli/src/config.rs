//! Resolution of a run's parameters from an optional JSON config file,
//! command-line flags and the seed environment variable.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use netctl_core::harness::{log_grid, random_direction};
use netctl_core::network::{DriverConfig, NetworkSystem, SystemFile};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Master-seed fallback when neither flag nor config sets one.
pub const SEED_ENV: &str = "NETCTL_SEED";

/// Why a run stopped. Configuration problems are detected before anything is
/// written; numerical failures happen during the computation.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
}

impl From<netctl_core::Error> for Failure {
    fn from(e: netctl_core::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

pub fn config_error(msg: impl Into<String>) -> Failure {
    Failure::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    Flag,
    Config,
    Env,
    Default,
}

/// Fully merged parameters of one run.
#[derive(Debug)]
pub struct Resolved<P> {
    pub params: P,
    /// `params` as JSON, every default filled in.
    pub config: Value,
    pub config_file: Option<PathBuf>,
    pub seed: u64,
    pub seed_source: SeedSource,
}

/// Merge `flags` (a serialized argument struct; `null` means "not given") over
/// the config file, settle the seed, and deserialize into `P`.
pub fn resolve<P: DeserializeOwned + Serialize>(config_file: Option<&Path>, flags: Value) -> Result<Resolved<P>, Failure> {
    let mut merged = match config_file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
            match serde_json::from_str::<Value>(&text) {
                Ok(Value::Object(map)) => map,
                Ok(_) => return Err(config_error(format!("config {} must hold a JSON object", path.display()))),
                Err(e) => return Err(config_error(format!("config {} is not valid JSON: {e}", path.display()))),
            }
        }
        None => Map::new(),
    };
    let in_config = merged.contains_key("seed");
    let Value::Object(flags) = flags else {
        return Err(config_error("internal: flags did not serialize to an object"));
    };
    let mut seed_flag = false;
    for (key, value) in flags {
        if !value.is_null() {
            seed_flag |= key == "seed";
            merged.insert(key, value);
        }
    }

    let (seed, seed_source) = match merged.get("seed") {
        Some(v) => {
            let seed = v
                .as_u64()
                .ok_or_else(|| config_error(format!("seed must be a non-negative integer, got {v}")))?;
            (seed, if seed_flag { SeedSource::Flag } else { SeedSource::Config })
        }
        None => match std::env::var(SEED_ENV) {
            Ok(text) => {
                let seed = text
                    .trim()
                    .parse()
                    .map_err(|_| config_error(format!("{SEED_ENV}={text:?} is not a non-negative integer")))?;
                (seed, SeedSource::Env)
            }
            Err(std::env::VarError::NotPresent) => (0, SeedSource::Default),
            Err(e) => return Err(config_error(format!("{SEED_ENV}: {e}"))),
        },
    };
    debug_assert!(seed_source != SeedSource::Config || in_config);
    merged.insert("seed".into(), seed.into());

    let params: P = serde_json::from_value(Value::Object(merged))
        .map_err(|e| config_error(format!("invalid configuration: {e}")))?;
    let config = serde_json::to_value(&params).map_err(|e| config_error(e.to_string()))?;
    Ok(Resolved {
        params,
        config,
        config_file: config_file.map(Path::to_path_buf),
        seed,
        seed_source,
    })
}

/// A state vector given as a JSON array or as text: `zero`, `random`,
/// `random:<norm>`, or comma-separated numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorSpec {
    Values(Vec<f64>),
    Text(String),
}

impl VectorSpec {
    pub fn zero() -> Self {
        Self::Text("zero".into())
    }

    pub fn random() -> Self {
        Self::Text("random".into())
    }

    /// The vector for a system of order `n`; random forms draw from `seed`.
    pub fn resolve(&self, n: usize, seed: u64, what: &str) -> Result<DVector<f64>, Failure> {
        let v = match self {
            Self::Values(vals) => DVector::from_column_slice(vals),
            Self::Text(text) => {
                let text = text.trim();
                if text == "zero" {
                    DVector::zeros(n)
                } else if text == "random" {
                    random_direction(n, seed)
                } else if let Some(norm) = text.strip_prefix("random:") {
                    let norm: f64 = norm
                        .parse()
                        .map_err(|_| config_error(format!("{what}: bad norm in {text:?}")))?;
                    random_direction(n, seed) * norm
                } else {
                    let vals = text
                        .split(',')
                        .map(|s| s.trim().parse::<f64>())
                        .collect::<Result<Vec<f64>, _>>()
                        .map_err(|_| config_error(format!("{what}: expected zero, random[:norm] or numbers, got {text:?}")))?;
                    DVector::from_vec(vals)
                }
            }
        };
        if v.len() != n {
            return Err(config_error(format!("{what} has {} entries for a system of order {n}", v.len())));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(config_error(format!("{what} has non-finite entries")));
        }
        Ok(v)
    }
}

/// Log-spaced grid from `min` to `max` with `per_decade` points per decade.
pub fn decade_spaced(min: f64, max: f64, per_decade: usize, what: &str) -> Result<Vec<f64>, Failure> {
    if !(min > 0.0 && max > min && min.is_finite() && max.is_finite()) {
        return Err(config_error(format!("{what} range needs 0 < min < max, got [{min}, {max}]")));
    }
    if per_decade == 0 {
        return Err(config_error(format!("{what}: per_decade must be positive")));
    }
    let (lo, hi) = (min.log10(), max.log10());
    let count = ((hi - lo) * per_decade as f64).round() as usize + 1;
    Ok(log_grid(lo, hi, count.max(2)))
}

pub fn load_system(path: &Path) -> Result<(NetworkSystem, DriverConfig), Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_error(format!("cannot read system {}: {e}", path.display())))?;
    let file: SystemFile = serde_json::from_str(&text)
        .map_err(|e| config_error(format!("system {} is malformed: {e}", path.display())))?;
    let drivers = file.driver_config().map_err(|e| config_error(format!("system {}: {e}", path.display())))?;
    Ok((file.system, drivers))
}

//! TOML system description.
//!
//! ```toml
//! lambda = 0.5          # per-server arrival rate
//! mu = 1.0              # inverse mean job size (optional, default 1)
//! classes = [
//!   { capacity = "4/3", fraction = 0.5 },
//!   { capacity = "2/3", fraction = 0.5 },
//! ]
//! ```
//!
//! Every number may also be written as a string holding a ratio `a/b`, so
//! values like 4/3 are represented exactly.

use std::path::Path;

use hetjsq_core::{ServerClass, SystemConfig};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Number {
    Float(f64),
    Text(String),
}

impl Number {
    fn value(&self, field: &str) -> Result<f64> {
        match self {
            Number::Float(x) => Ok(*x),
            Number::Text(s) => parse_ratio(s)
                .ok_or_else(|| CliError::Config(format!("{field}: cannot read {s:?} as a number"))),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClass {
    capacity: Number,
    fraction: Number,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    lambda: Number,
    mu: Option<Number>,
    classes: Vec<RawClass>,
}

/// Parses `x` or `a/b`.
pub fn parse_ratio(text: &str) -> Option<f64> {
    let text = text.trim();
    match text.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
            (b != 0.0).then(|| a / b)
        }
        None => text.parse().ok(),
    }
}

/// Reads and validates a system description from TOML text.
pub fn parse_system(text: &str) -> Result<SystemConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    let classes = raw
        .classes
        .iter()
        .enumerate()
        .map(|(i, c)| {
            Ok(ServerClass::new(
                c.capacity.value(&format!("classes[{i}].capacity"))?,
                c.fraction.value(&format!("classes[{i}].fraction"))?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let lambda = raw.lambda.value("lambda")?;
    let mu = raw.mu.as_ref().map(|m| m.value("mu")).transpose()?.unwrap_or(1.0);
    SystemConfig::new(classes, lambda, mu).map_err(|e| CliError::Config(e.to_string()))
}

pub fn load_system(path: &Path) -> Result<SystemConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse_system(&text)
}

/// The two-class systems used throughout the experiments.
pub mod presets {
    use super::*;

    /// `C = (4/3, 2/3)`, equal fractions: SQ(2) keeps the full static region.
    pub fn balanced(lambda: f64) -> SystemConfig {
        two_class(4.0 / 3.0, 2.0 / 3.0, lambda)
    }

    /// `C = (5/3, 1/3)`, equal fractions: SQ(2) is stable only below 2/3.
    pub fn skewed(lambda: f64) -> SystemConfig {
        two_class(5.0 / 3.0, 1.0 / 3.0, lambda)
    }

    fn two_class(fast: f64, slow: f64, lambda: f64) -> SystemConfig {
        SystemConfig::new(vec![ServerClass::new(fast, 0.5), ServerClass::new(slow, 0.5)], lambda, 1.0)
            .expect("preset is valid")
    }
}

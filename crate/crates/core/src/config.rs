//! TOML run configuration. Every field is optional so command-line flags
//! can fill in or override any of them.
//!
//! ```toml
//! dims = "1x5x1"
//! J = 1.0
//! input = "figure"
//! engine = "gaussian"
//!
//! [grid]
//! start = 0
//! stop = "3.5pi"
//! step = "0.005pi"
//!
//! [output]
//! scan = "fig2.csv"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{PstError, Result};
use crate::lattice::Dims;

/// A `Jt` value given either as a number or as text such as `"3.5pi"`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum JtValue {
    Number(f64),
    Text(String),
}

impl JtValue {
    pub fn value(&self) -> Result<f64> {
        match self {
            JtValue::Number(x) => Ok(*x),
            JtValue::Text(s) => parse_jt(s),
        }
    }
}

/// Parses `1.5`, `pi`, `3.5pi`, `-0.5pi`, `pi/2`, `3pi/4`.
pub fn parse_jt(s: &str) -> Result<f64> {
    let bad = || PstError::InvalidInput(format!("cannot parse time value '{s}'"));
    let t: String = s
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect::<String>()
        .to_ascii_lowercase();
    let (num, den) = match t.split_once('/') {
        Some((a, b)) => (a.to_string(), b.parse::<f64>().map_err(|_| bad())?),
        None => (t.clone(), 1.0),
    };
    let value = match num.strip_suffix("pi") {
        Some(coef) => {
            let c = match coef {
                "" | "+" => 1.0,
                "-" => -1.0,
                _ => coef
                    .trim_end_matches('*')
                    .parse::<f64>()
                    .map_err(|_| bad())?,
            };
            c * std::f64::consts::PI
        }
        None => num.parse::<f64>().map_err(|_| bad())?,
    };
    let v = value / den;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start: Option<JtValue>,
    pub stop: Option<JtValue>,
    pub step: Option<JtValue>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub scan: Option<PathBuf>,
    pub verdict: Option<PathBuf>,
    pub profile: Option<PathBuf>,
    pub plan: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dims: Option<String>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[serde(rename = "J")]
    pub coupling: Option<f64>,
    pub profile: Option<String>,
    pub input: Option<String>,
    pub inputs: Option<Vec<String>>,
    pub engine: Option<String>,
    pub cutoff: Option<usize>,
    pub leak_budget: Option<f64>,
    pub tolerance: Option<f64>,
    pub period: Option<u32>,
    pub phase_correction: Option<bool>,
    pub workers: Option<usize>,
    pub gamma: Option<f64>,
    pub eta: Option<f64>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| PstError::InvalidInput(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            PstError::InvalidInput(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&text)
    }

    /// Lattice dimensions from `dims` or the 1D shorthand `N`.
    pub fn resolve_dims(&self) -> Result<Dims> {
        match (&self.dims, self.n) {
            (Some(_), Some(_)) => Err(PstError::InvalidInput(
                "give either dims or N, not both".into(),
            )),
            (Some(d), None) => d.parse(),
            (None, Some(n)) => Dims::linear(n),
            (None, None) => Err(PstError::InvalidInput(
                "lattice dimensions missing (dims or N)".into(),
            )),
        }
    }

    pub fn check_tolerances(&self) -> Result<()> {
        for (name, v) in [
            ("tolerance", self.tolerance),
            ("leak_budget", self.leak_budget),
        ] {
            if let Some(x) = v {
                if !(x > 0.0 && x.is_finite()) {
                    return Err(PstError::InvalidParameter(format!(
                        "{name} must be > 0, got {x}"
                    )));
                }
            }
        }
        Ok(())
    }
}

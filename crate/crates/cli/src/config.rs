//! Run configuration files.
//!
//! ```toml
//! unit_kwh = 2.1
//! step_minutes = 30
//!
//! [system]
//! battery_kwh = 4.2   # or beta = 2
//! peak_kwh = 2.1      # or alpha = 1
//! s0 = 0
//! n = 48
//!
//! [[tariff]]
//! price = 0.3192      # per energy unit
//! steps = 14          # or hours = 7
//! ```

use std::path::{Path, PathBuf};

use meterguard_core::{PriceBlock, SystemConfig, TariffSchedule};
use serde::Deserialize;

use crate::error::{CliError, Result};

/// Largest distance from an integer still accepted as that integer.
const QUANT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSection,
    #[serde(default)]
    pub tariff: Vec<BlockSection>,
    /// kWh per energy unit.
    #[serde(default = "default_unit")]
    pub unit_kwh: f64,
    #[serde(default = "default_step")]
    pub step_minutes: f64,
    #[serde(default)]
    pub io: IoSection,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub beta: Option<i64>,
    pub alpha: Option<i64>,
    pub battery_kwh: Option<f64>,
    pub peak_kwh: Option<f64>,
    #[serde(default)]
    pub s0: i64,
    pub n: usize,
    pub y_min: Option<i64>,
    pub y_max: Option<i64>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BlockSection {
    pub price: f64,
    pub steps: Option<usize>,
    pub hours: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct IoSection {
    pub trace: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

fn default_unit() -> f64 {
    1.0
}

fn default_step() -> f64 {
    30.0
}

impl RunConfig {
    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn system(&self) -> Result<SystemConfig> {
        if !(self.unit_kwh > 0.0) || !self.unit_kwh.is_finite() {
            return Err(CliError::Config(format!(
                "unit_kwh = {} must be positive",
                self.unit_kwh
            )));
        }
        let s = &self.system;
        let beta = self.units("beta", s.beta, s.battery_kwh)?;
        let alpha = self.units("alpha", s.alpha, s.peak_kwh)?;
        let mut cfg = SystemConfig::new(beta, alpha, s.s0, s.n)?;
        if s.y_min.is_some() || s.y_max.is_some() {
            cfg = cfg.with_request_range(s.y_min.unwrap_or(0), s.y_max.unwrap_or(alpha))?;
        }
        Ok(cfg)
    }

    /// An integer field given directly or as kWh; both must agree if given.
    fn units(&self, field: &str, direct: Option<i64>, kwh: Option<f64>) -> Result<i64> {
        let from_kwh = match kwh {
            None => None,
            Some(v) => {
                let q = v / self.unit_kwh;
                let r = q.round();
                if (q - r).abs() > QUANT_TOL * q.abs().max(1.0) {
                    return Err(CliError::Config(format!(
                        "{field}: {v} kWh is not a whole number of {} kWh units",
                        self.unit_kwh
                    )));
                }
                Some(r as i64)
            }
        };
        match (direct, from_kwh) {
            (Some(a), Some(b)) if a != b => Err(CliError::Config(format!(
                "{field} = {a} disagrees with {b} units from kWh"
            ))),
            (Some(a), _) | (None, Some(a)) => Ok(a),
            (None, None) => Err(CliError::Config(format!("system.{field} is missing"))),
        }
    }

    pub fn has_tariff(&self) -> bool {
        !self.tariff.is_empty()
    }

    pub fn tariff(&self) -> Result<TariffSchedule> {
        if self.tariff.is_empty() {
            return Err(CliError::Config("no [[tariff]] blocks".into()));
        }
        let blocks = self
            .tariff
            .iter()
            .enumerate()
            .map(|(i, b)| Ok(PriceBlock::new(b.price, self.block_steps(i, b)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(TariffSchedule::expand(&blocks, self.system.n)?)
    }

    fn block_steps(&self, i: usize, b: &BlockSection) -> Result<usize> {
        let from_hours = match b.hours {
            None => None,
            Some(h) => {
                let q = h * 60.0 / self.step_minutes;
                let r = q.round();
                if !(q >= 0.0) || (q - r).abs() > QUANT_TOL * q.max(1.0) {
                    return Err(CliError::Config(format!(
                        "tariff block {i}: {h} h is not a whole number of {} min steps",
                        self.step_minutes
                    )));
                }
                Some(r as usize)
            }
        };
        match (b.steps, from_hours) {
            (Some(a), Some(c)) if a != c => Err(CliError::Config(format!(
                "tariff block {i}: steps = {a} disagrees with {c} steps from hours"
            ))),
            (Some(a), _) | (None, Some(a)) => Ok(a),
            (None, None) => Err(CliError::Config(format!(
                "tariff block {i} needs steps or hours"
            ))),
        }
    }

    /// Steps in 24 hours at this sampling period.
    pub fn steps_per_day(&self) -> f64 {
        24.0 * 60.0 / self.step_minutes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ECONOMY7: &str = r#"
unit_kwh = 2.1
step_minutes = 30

[system]
battery_kwh = 4.2
peak_kwh = 2.1
n = 48

[[tariff]]
price = 0.3192
hours = 7

[[tariff]]
price = 0.1791
steps = 34
"#;

    #[test]
    fn economy7_from_kwh() {
        let rc = RunConfig::from_toml(ECONOMY7).unwrap();
        let cfg = rc.system().unwrap();
        assert_eq!((cfg.beta, cfg.alpha, cfg.s0, cfg.n), (2, 1, 0, 48));
        let t = rc.tariff().unwrap();
        assert_eq!(t.transition_times(), &[0, 14, 48]);
        assert_eq!(rc.steps_per_day(), 48.0);
    }

    #[test]
    fn json_matches_toml() {
        let json = r#"{"unit_kwh": 2.1, "system": {"beta": 2, "alpha": 1, "n": 48},
            "tariff": [{"price": 0.3192, "steps": 14}, {"price": 0.1791, "steps": 34}]}"#;
        let a = RunConfig::from_json(json).unwrap();
        let b = RunConfig::from_toml(ECONOMY7).unwrap();
        assert_eq!(a.system().unwrap(), b.system().unwrap());
        assert_eq!(a.tariff().unwrap(), b.tariff().unwrap());
    }

    #[test]
    fn inconsistent_units_rejected() {
        let bad = ECONOMY7.replace("battery_kwh = 4.2", "battery_kwh = 4.0");
        assert!(matches!(
            RunConfig::from_toml(&bad).unwrap().system(),
            Err(CliError::Config(_))
        ));
        let both = ECONOMY7.replace("battery_kwh = 4.2", "battery_kwh = 4.2\nbeta = 3");
        assert!(RunConfig::from_toml(&both).unwrap().system().is_err());
        let s0 = ECONOMY7.replace("n = 48", "n = 48\ns0 = 3");
        let err = RunConfig::from_toml(&s0).unwrap().system().unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(RunConfig::from_toml("[system]\nn = 4\nbeta = 1\nalpha = 1\ngamma = 2\n").is_err());
    }
}

//! Consumption traces: CSV rows of `timestamp,kwh` quantized to energy units.

use std::io::Read;

use meterguard_core::ConsumptionSeq;
use serde::Deserialize;

use crate::error::{CliError, Result};

/// Slack for readings that land a hair below a unit boundary.
const ROUNDING_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Deserialize, PartialEq)]
pub struct TraceRow {
    pub timestamp: String,
    pub kwh: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quantized {
    pub x: ConsumptionSeq,
    /// Energy left over after the last step, in units; always in `[0, 1)`.
    pub residual: f64,
}

impl Trace {
    pub fn read(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let rows = rdr
            .deserialize()
            .enumerate()
            .map(|(i, r)| r.map_err(|e| CliError::Trace(format!("row {}: {e}", i + 1))))
            .collect::<Result<Vec<TraceRow>>>()?;
        Ok(Trace { rows })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read(file)
    }

    /// Carry-forward rounding: each step emits the whole units accumulated
    /// so far and keeps the fraction for the next step.
    pub fn quantize(&self, unit_kwh: f64, alpha: i64) -> Result<Quantized> {
        let mut carry = 0.0;
        let mut x = Vec::with_capacity(self.rows.len());
        for (step, row) in self.rows.iter().enumerate() {
            if !row.kwh.is_finite() || row.kwh < 0.0 {
                return Err(CliError::Trace(format!(
                    "step {step}: reading {} kWh is not a non-negative number",
                    row.kwh
                )));
            }
            carry += row.kwh / unit_kwh;
            let units = (carry + ROUNDING_SLACK).floor();
            if units > alpha as f64 {
                return Err(CliError::Trace(format!(
                    "step {step} ({}): {units} units exceed the peak of {alpha}",
                    row.timestamp
                )));
            }
            carry = (carry - units).max(0.0);
            x.push(units as i64);
        }
        Ok(Quantized {
            x: ConsumptionSeq::new(x),
            residual: carry,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn carry_forward() {
        let csv = "timestamp,kwh\n00:00,0.7\n00:30,0.7\n01:00,0.7\n01:30,2.1\n";
        let t = Trace::read(csv.as_bytes()).unwrap();
        let q = t.quantize(1.0, 2).unwrap();
        assert_eq!(q.x.to_vec(), vec![0, 1, 1, 2]);
        assert!((q.residual - 0.2).abs() < 1e-9);
    }

    #[test]
    fn exact_units_do_not_lose_energy() {
        let csv = "timestamp,kwh\na,2.1\nb,2.1\nc,4.2\n";
        let q = Trace::read(csv.as_bytes())
            .unwrap()
            .quantize(2.1, 2)
            .unwrap();
        assert_eq!(q.x.to_vec(), vec![1, 1, 2]);
    }

    #[test]
    fn overflow_and_bad_rows() {
        let csv = "timestamp,kwh\na,3.5\n";
        let t = Trace::read(csv.as_bytes()).unwrap();
        assert!(matches!(t.quantize(1.0, 2), Err(CliError::Trace(_))));
        let csv = "timestamp,kwh\na,-1\n";
        let t = Trace::read(csv.as_bytes()).unwrap();
        assert!(t.quantize(1.0, 2).is_err());
        assert!(Trace::read("timestamp,kwh\na,x\n".as_bytes()).is_err());
    }
}

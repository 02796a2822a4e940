//! Battery and energy-management-unit state model.
//!
//! Energy is integer-quantized: one unit is a configuration-level scale
//! (for example 2.1 kWh). Consumption lives in `[0, alpha]`, requests in
//! `[y_min, y_max]`, and the battery state in `[0, beta]`. The state after
//! `i` steps is `s0 + sum(y[..i]) - sum(x[..i])`.

use std::ops::Deref;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Battery, consumption and request alphabet parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Battery capacity in energy units.
    pub beta: i64,
    /// Peak per-step consumption in energy units.
    pub alpha: i64,
    /// Initial battery state.
    pub s0: i64,
    /// Horizon in time steps.
    pub n: usize,
    /// Smallest request (negative values model selling back to the grid).
    pub y_min: i64,
    /// Largest request.
    pub y_max: i64,
}

impl SystemConfig {
    /// Builds and validates a configuration whose request alphabet equals
    /// the consumption alphabet `[0, alpha]`.
    pub fn new(beta: i64, alpha: i64, s0: i64, n: usize) -> Result<Self> {
        SystemConfig {
            beta,
            alpha,
            s0,
            n,
            y_min: 0,
            y_max: alpha,
        }
        .validate()
    }

    /// Replaces the request alphabet and re-validates.
    pub fn with_request_range(self, y_min: i64, y_max: i64) -> Result<Self> {
        SystemConfig {
            y_min,
            y_max,
            ..self
        }
        .validate()
    }

    /// Replaces the initial state and re-validates.
    pub fn with_s0(self, s0: i64) -> Result<Self> {
        SystemConfig { s0, ..self }.validate()
    }

    /// Replaces the horizon and re-validates.
    pub fn with_horizon(self, n: usize) -> Result<Self> {
        SystemConfig { n, ..self }.validate()
    }

    /// Checks every configuration invariant, naming the offending field.
    pub fn validate(self) -> Result<Self> {
        fn bad(field: &'static str, reason: String) -> Error {
            Error::InvalidConfig { field, reason }
        }
        if self.beta < 0 {
            return Err(bad("beta", format!("{} is negative", self.beta)));
        }
        if self.alpha < 1 {
            return Err(bad("alpha", format!("{} must be at least 1", self.alpha)));
        }
        if self.n == 0 {
            return Err(bad("n", "horizon must be at least one step".into()));
        }
        if self.s0 < 0 || self.s0 > self.beta {
            return Err(bad(
                "s0",
                format!("{} out of range [0, {}]", self.s0, self.beta),
            ));
        }
        if self.y_min > 0 {
            return Err(bad(
                "y_min",
                format!("{} must be <= 0 so that [0, alpha] fits", self.y_min),
            ));
        }
        if self.y_max < self.alpha {
            return Err(bad(
                "y_max",
                format!("{} must be >= alpha = {}", self.y_max, self.alpha),
            ));
        }
        // Prefix sums must fit comfortably in i64.
        let span = (self.y_max - self.y_min)
            .checked_add(self.alpha)
            .and_then(|w| w.checked_add(self.beta))
            .and_then(|w| w.checked_mul(self.n as i64));
        if span.is_none() {
            return Err(bad("n", "prefix sums would overflow i64".into()));
        }
        Ok(self)
    }

    /// Depletion time `(beta + 1) / alpha` as an exact rational.
    pub fn lambda(&self) -> Ratio<i64> {
        Ratio::new(self.beta + 1, self.alpha)
    }

    /// Full battery state range `[0, beta]`.
    pub fn states(&self) -> StateInterval {
        StateInterval {
            lo: 0,
            hi: self.beta,
        }
    }

    /// Number of request symbols `|Y|`.
    pub fn request_alphabet_size(&self) -> i64 {
        self.y_max - self.y_min + 1
    }

    pub fn check_consumption(&self, x: &[i64]) -> Result<()> {
        check_len(self.n, x.len())?;
        for (step, &value) in x.iter().enumerate() {
            if value < 0 || value > self.alpha {
                return Err(Error::ConsumptionOutOfRange {
                    step,
                    value,
                    alpha: self.alpha,
                });
            }
        }
        Ok(())
    }

    pub fn check_request(&self, y: &[i64]) -> Result<()> {
        check_len(self.n, y.len())?;
        self.check_request_symbols(y)
    }

    /// Alphabet check without the horizon-length requirement.
    pub(crate) fn check_request_symbols(&self, y: &[i64]) -> Result<()> {
        for (step, &value) in y.iter().enumerate() {
            if value < self.y_min || value > self.y_max {
                return Err(Error::RequestOutOfRange {
                    step,
                    value,
                    min: self.y_min,
                    max: self.y_max,
                });
            }
        }
        Ok(())
    }

    pub fn check_state(&self, s: i64) -> Result<()> {
        if s < 0 || s > self.beta {
            return Err(Error::StateOutOfRange {
                value: s,
                beta: self.beta,
            });
        }
        Ok(())
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::LengthMismatch { expected, found });
    }
    Ok(())
}

/// Contiguous set of battery states `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateInterval {
    pub lo: i64,
    pub hi: i64,
}

impl StateInterval {
    pub fn new(lo: i64, hi: i64) -> Result<Self> {
        if lo > hi {
            return Err(Error::InvalidArgument(format!(
                "empty state interval [{lo}, {hi}]"
            )));
        }
        Ok(StateInterval { lo, hi })
    }

    pub fn single(s: i64) -> Self {
        StateInterval { lo: s, hi: s }
    }

    pub fn len(&self) -> i64 {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }

    pub fn contains(&self, s: i64) -> bool {
        self.lo <= s && s <= self.hi
    }

    pub fn iter(&self) -> impl Iterator<Item = i64> {
        self.lo..=self.hi
    }

    pub(crate) fn check_within(&self, cfg: &SystemConfig) -> Result<()> {
        if self.is_empty() || self.lo < 0 || self.hi > cfg.beta {
            return Err(Error::InvalidArgument(format!(
                "state set [{}, {}] not a nonempty subset of [0, {}]",
                self.lo, self.hi, cfg.beta
            )));
        }
        Ok(())
    }
}

macro_rules! energy_seq {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(Vec<i64>);

        impl $name {
            pub fn new(values: Vec<i64>) -> Self {
                $name(values)
            }

            pub fn zeros(n: usize) -> Self {
                $name(vec![0; n])
            }

            pub fn constant(value: i64, n: usize) -> Self {
                $name(vec![value; n])
            }

            pub fn into_inner(self) -> Vec<i64> {
                self.0
            }

            /// Sum of all entries.
            pub fn total(&self) -> i64 {
                self.0.iter().sum()
            }
        }

        impl Deref for $name {
            type Target = [i64];

            fn deref(&self) -> &[i64] {
                &self.0
            }
        }

        impl From<Vec<i64>> for $name {
            fn from(values: Vec<i64>) -> Self {
                $name(values)
            }
        }

        impl From<&[i64]> for $name {
            fn from(values: &[i64]) -> Self {
                $name(values.to_vec())
            }
        }
    };
}

energy_seq!(
    /// Per-step consumption, entries in `[0, alpha]`.
    ConsumptionSeq
);
energy_seq!(
    /// Per-step energy requested from the grid, entries in `[y_min, y_max]`.
    RequestSeq
);

/// An initial battery state together with a consumption sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InputPair {
    pub s0: i64,
    pub x: ConsumptionSeq,
}

impl InputPair {
    pub fn new(s0: i64, x: impl Into<ConsumptionSeq>) -> Self {
        InputPair { s0, x: x.into() }
    }

    /// Net level `s0 - sum(x[..i])` for `i` in `0..=n`.
    pub fn net_levels(&self) -> Result<Vec<i64>> {
        let sums = prefix_sums(&self.x)?;
        sums.iter()
            .map(|&p| self.s0.checked_sub(p).ok_or(Error::Overflow))
            .collect()
    }
}

/// Prefix sums `[0, v0, v0 + v1, ...]` of length `len + 1`.
pub fn prefix_sums(values: &[i64]) -> Result<Vec<i64>> {
    let mut out = Vec::with_capacity(values.len() + 1);
    let mut acc: i64 = 0;
    out.push(0);
    for &v in values {
        acc = acc.checked_add(v).ok_or(Error::Overflow)?;
        out.push(acc);
    }
    Ok(out)
}

/// Why a trajectory left `[0, beta]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    /// State below zero: consumption could not be met.
    Outage,
    /// State above capacity: energy was requested that could not be stored.
    Waste,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub step: usize,
    pub state: i64,
    pub kind: ViolationKind,
}

/// Battery states `s_0 ..= s_n`, reported without clamping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BatteryTrajectory {
    pub states: Vec<i64>,
}

impl BatteryTrajectory {
    pub fn violations(&self, beta: i64) -> Vec<Violation> {
        self.states
            .iter()
            .enumerate()
            .filter_map(|(step, &state)| {
                let kind = if state < 0 {
                    ViolationKind::Outage
                } else if state > beta {
                    ViolationKind::Waste
                } else {
                    return None;
                };
                Some(Violation { step, state, kind })
            })
            .collect()
    }

    pub fn first_violation(&self, beta: i64) -> Option<Violation> {
        self.violations(beta).into_iter().next()
    }

    pub fn within(&self, beta: i64) -> bool {
        self.states.iter().all(|&s| (0..=beta).contains(&s))
    }

    pub fn final_state(&self) -> i64 {
        *self.states.last().expect("trajectory has at least s0")
    }
}

/// Charging dynamics: `states[i] = s0 + sum(y[..i]) - sum(x[..i])`.
pub fn battery_trajectory(s0: i64, x: &[i64], y: &[i64]) -> Result<BatteryTrajectory> {
    check_len(x.len(), y.len())?;
    let mut states = Vec::with_capacity(x.len() + 1);
    let mut s = s0;
    states.push(s);
    for (&xi, &yi) in x.iter().zip(y) {
        s = s
            .checked_add(yi)
            .and_then(|v| v.checked_sub(xi))
            .ok_or(Error::Overflow)?;
        states.push(s);
    }
    Ok(BatteryTrajectory { states })
}

/// True iff every request is in the alphabet and every state stays in
/// `[0, beta]`.
pub fn is_feasible(cfg: &SystemConfig, s0: i64, x: &[i64], y: &[i64]) -> Result<bool> {
    check_len(x.len(), y.len())?;
    if y.iter().any(|&v| v < cfg.y_min || v > cfg.y_max) {
        return Ok(false);
    }
    Ok(battery_trajectory(s0, x, y)?.within(cfg.beta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_examples() {
        assert_eq!(
            battery_trajectory(0, &[0, 0], &[0, 0]).unwrap().states,
            vec![0, 0, 0]
        );
        assert_eq!(
            battery_trajectory(1, &[1, 0], &[0, 0]).unwrap().states,
            vec![1, 0, 0]
        );
        let t = battery_trajectory(1, &[0, 1], &[2, 0]).unwrap();
        assert_eq!(t.states, vec![1, 3, 2]);
        let v = t.first_violation(2).unwrap();
        assert_eq!((v.step, v.state, v.kind), (1, 3, ViolationKind::Waste));
    }

    #[test]
    fn trajectory_length_mismatch() {
        assert_eq!(
            battery_trajectory(0, &[0, 0], &[0]),
            Err(Error::LengthMismatch {
                expected: 2,
                found: 1
            })
        );
    }

    #[test]
    fn trajectory_overflow_is_an_error() {
        assert_eq!(
            battery_trajectory(0, &[0, 0], &[i64::MAX, 1]),
            Err(Error::Overflow)
        );
    }

    #[test]
    fn feasibility_examples() {
        let cfg = SystemConfig::new(2, 1, 0, 2).unwrap();
        assert!(is_feasible(&cfg, 1, &[1, 0], &[0, 0]).unwrap());
        assert!(!is_feasible(&cfg, 0, &[1, 0], &[0, 1]).unwrap());
        let t = battery_trajectory(0, &[1, 0], &[0, 1]).unwrap();
        assert_eq!(t.first_violation(2).unwrap().kind, ViolationKind::Outage);
        for s0 in 0..=2 {
            assert!(is_feasible(&cfg, s0, &[1, 1], &[1, 1]).unwrap());
        }
    }

    #[test]
    fn request_outside_alphabet_is_infeasible() {
        let cfg = SystemConfig::new(2, 1, 0, 1).unwrap();
        assert!(!is_feasible(&cfg, 0, &[0], &[2]).unwrap());
    }

    #[test]
    fn validate_examples() {
        assert!(SystemConfig::new(2, 1, 0, 48).is_ok());
        match SystemConfig::new(2, 1, 3, 48) {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "s0"),
            other => panic!("unexpected {other:?}"),
        }
        let cfg = SystemConfig::new(0, 1, 0, 1).unwrap();
        assert!(is_feasible(&cfg, 0, &[1], &[1]).unwrap());
        assert!(!is_feasible(&cfg, 0, &[1], &[0]).unwrap());
    }

    #[test]
    fn validate_rejects_bad_alphabets() {
        let base = SystemConfig::new(2, 2, 0, 4).unwrap();
        assert!(matches!(
            base.with_request_range(1, 3),
            Err(Error::InvalidConfig { field: "y_min", .. })
        ));
        assert!(matches!(
            base.with_request_range(0, 1),
            Err(Error::InvalidConfig { field: "y_max", .. })
        ));
        assert!(matches!(
            SystemConfig::new(2, 0, 0, 4),
            Err(Error::InvalidConfig { field: "alpha", .. })
        ));
        assert!(matches!(
            SystemConfig::new(2, 1, 0, 0),
            Err(Error::InvalidConfig { field: "n", .. })
        ));
    }

    #[test]
    fn lambda_is_exact() {
        let cfg = SystemConfig::new(2, 2, 0, 4).unwrap();
        assert_eq!(cfg.lambda(), Ratio::new(3, 2));
        assert_eq!(cfg.lambda().floor().to_integer(), 1);
        assert_eq!(cfg.lambda().ceil().to_integer(), 2);
    }

    #[test]
    fn net_levels_follow_prefix_convention() {
        let p = InputPair::new(2, vec![1, 0]);
        assert_eq!(p.net_levels().unwrap(), vec![2, 1, 1]);
    }
}

//! Privacy-cost bounds.
//!
//! With no cost constraint the leakage per step sits between
//! `floor(n / ceil(lambda)) / n` and `ceil((n - floor(beta / alpha)) / lambda) / n`,
//! where `lambda = (beta + 1) / alpha`. A cost budget `delta` adds at most
//! the value of a min-max program over battery states at the market
//! transition times, or the cheaper time-sharing term
//! `(1 - delta / delta_max)^+ (K / n) log2(beta + 1)`.

mod minmax;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

pub use minmax::{BoundaryChannel, GammaSolution, SolverOptions, JOINT_STATE_GUARD};

use crate::error::{Error, Result};
use crate::model::SystemConfig;
use crate::tariff::{delta_max, TariffSchedule};
use minmax::BoundaryProgram;

/// A cost budget: how far above the optimal bill a policy may go.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Unbounded,
    Finite(f64),
}

impl Budget {
    pub fn finite(delta: f64) -> Result<Self> {
        if delta.is_nan() || delta < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "budget {delta} must be >= 0"
            )));
        }
        Ok(if delta.is_infinite() {
            Budget::Unbounded
        } else {
            Budget::Finite(delta)
        })
    }

    /// The budget as a number, infinity when unbounded.
    pub fn value(&self) -> f64 {
        match self {
            Budget::Unbounded => f64::INFINITY,
            Budget::Finite(d) => *d,
        }
    }
}

/// `(beta + 1) / alpha`.
pub fn lambda_of(cfg: &SystemConfig) -> Ratio<i64> {
    cfg.lambda()
}

/// Unconstrained leakage bounds, as bit counts over the horizon and per step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InfinityBounds {
    /// `floor(n / ceil(lambda))`.
    pub lower_bits: i64,
    /// `ceil((n - floor(beta / alpha)) / lambda)`, clamped at zero.
    pub upper_bits: i64,
    pub lower: f64,
    pub upper: f64,
}

pub fn i_infty_bounds(cfg: &SystemConfig) -> InfinityBounds {
    let lambda = cfg.lambda();
    let n = cfg.n as i64;
    let lower_bits = n / lambda.ceil().to_integer();
    let head = cfg.beta / cfg.alpha;
    // (n - head) / lambda = (n - head) * alpha / (beta + 1).
    let upper_bits = (Ratio::from_integer(n - head) / lambda)
        .ceil()
        .to_integer()
        .max(0);
    InfinityBounds {
        lower_bits,
        upper_bits,
        lower: lower_bits as f64 / n as f64,
        upper: upper_bits as f64 / n as f64,
    }
}

/// Differences at the transition times after the start.
fn free_deltas(tariff: &TariffSchedule) -> &[f64] {
    &tariff.deltas()[1..]
}

fn check_inputs(cfg: &SystemConfig, tariff: &TariffSchedule) -> Result<()> {
    if tariff.horizon() != cfg.n {
        return Err(Error::InvalidTariff(format!(
            "tariff covers {} steps, horizon is {}",
            tariff.horizon(),
            cfg.n
        )));
    }
    Ok(())
}

/// Value of the boundary-state min-max program, bits per step.
///
/// The returned value is the capacity of a budget-feasible channel, so it
/// never understates the program; `lower` certifies how far above the
/// optimum it can be.
pub fn i_gamma(
    cfg: &SystemConfig,
    tariff: &TariffSchedule,
    budget: Budget,
    opts: &SolverOptions,
) -> Result<GammaSolution> {
    check_inputs(cfg, tariff)?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tol {} must be > 0",
            opts.tol
        )));
    }
    let program = BoundaryProgram::new(cfg.beta, free_deltas(tariff), cfg.n)?;
    program.solve(budget.value(), opts)
}

/// `(K / n) log2(beta + 1)`: the program value at a zero budget bound.
pub fn gamma_ceiling(cfg: &SystemConfig, tariff: &TariffSchedule) -> f64 {
    tariff.num_blocks() as f64 / cfg.n as f64 * ((cfg.beta + 1) as f64).log2()
}

/// Unconstrained upper bound plus the min-max program value.
pub fn privacy_cost_upper(
    cfg: &SystemConfig,
    tariff: &TariffSchedule,
    budget: Budget,
    opts: &SolverOptions,
) -> Result<f64> {
    Ok(i_infty_bounds(cfg).upper + i_gamma(cfg, tariff, budget, opts)?.value)
}

/// Time-sharing bound; the second term vanishes when `delta_max` is zero.
pub fn single_letter_bound(
    cfg: &SystemConfig,
    tariff: &TariffSchedule,
    budget: Budget,
) -> Result<f64> {
    check_inputs(cfg, tariff)?;
    let base = i_infty_bounds(cfg).upper;
    let dmax = delta_max(cfg, tariff);
    let share = match budget {
        Budget::Unbounded => 0.0,
        Budget::Finite(_) if dmax <= 0.0 => 0.0,
        Budget::Finite(d) => (1.0 - d / dmax).max(0.0),
    };
    Ok(base + share * gamma_ceiling(cfg, tariff))
}

/// One row of a budget sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub delta: Budget,
    pub delta_max: f64,
    pub lambda: Ratio<i64>,
    pub i_inf_lower: f64,
    pub i_inf_upper: f64,
    /// The program value, or the error the solver hit for this budget.
    pub i_gamma: std::result::Result<GammaSolution, Error>,
    pub single_letter: f64,
}

impl BoundReport {
    pub fn upper_thm4(&self) -> Option<f64> {
        self.i_gamma
            .as_ref()
            .ok()
            .map(|g| self.i_inf_upper + g.value)
    }
}

/// Bound reports for an increasing list of budgets.
///
/// A channel that meets a budget meets every larger one, so each row's
/// program value is the smallest certified value found at or below its
/// budget. This keeps the column non-increasing despite solver tolerance.
pub fn sweep_bounds(
    cfg: &SystemConfig,
    tariff: &TariffSchedule,
    grid: &[Budget],
    opts: &SolverOptions,
) -> Result<Vec<BoundReport>> {
    check_inputs(cfg, tariff)?;
    for pair in grid.windows(2) {
        if pair[1].value() < pair[0].value() {
            return Err(Error::InvalidArgument("budget grid must be sorted".into()));
        }
    }
    if let Some(b) = grid.iter().find(|b| b.value() < 0.0 || b.value().is_nan()) {
        return Err(Error::InvalidArgument(format!(
            "budget {} must be >= 0",
            b.value()
        )));
    }
    let inf = i_infty_bounds(cfg);
    let dmax = delta_max(cfg, tariff);
    let mut best: Option<GammaSolution> = None;
    let mut rows = Vec::with_capacity(grid.len());
    for &budget in grid {
        let solved = i_gamma(cfg, tariff, budget, opts);
        let gamma = match (solved, &best) {
            (Ok(s), Some(b)) if b.value < s.value => Ok(GammaSolution {
                lower: s.lower.min(b.value),
                ..b.clone()
            }),
            (Ok(s), _) => {
                best = Some(s.clone());
                Ok(s)
            }
            (Err(e), _) => Err(e),
        };
        rows.push(BoundReport {
            delta: budget,
            delta_max: dmax,
            lambda: cfg.lambda(),
            i_inf_lower: inf.lower,
            i_inf_upper: inf.upper,
            i_gamma: gamma,
            single_letter: single_letter_bound(cfg, tariff, budget)?,
        });
    }
    Ok(rows)
}

/// `count` evenly spaced budgets from 0 to `delta_max` inclusive.
pub fn linear_grid(cfg: &SystemConfig, tariff: &TariffSchedule, count: usize) -> Vec<Budget> {
    let dmax = delta_max(cfg, tariff);
    match count {
        0 => vec![],
        1 => vec![Budget::Finite(0.0)],
        _ => (0..count)
            .map(|i| {
                if i + 1 == count {
                    Budget::Finite(dmax)
                } else {
                    Budget::Finite(dmax * i as f64 / (count - 1) as f64)
                }
            })
            .collect(),
    }
}

//! Time-of-use prices, minimal bills and policy cost.
//!
//! Prices are piecewise constant over `K` blocks. With battery states
//! `s_t` sampled at the block boundaries `0 = t_0 < t_1 < ... < t_K = n`,
//! the bill identity `m.y - m.x = sum_k delta_k * s_{t_k}` holds with
//! `delta = (-m_0, m_0 - m_1, ..., m_{K-2} - m_{K-1}, m_{K-1})`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_len, is_feasible, ConsumptionSeq, RequestSeq, SystemConfig};
use crate::oracle::enumerate::{all_consumptions, feasible_for};
use crate::oracle::FiniteChannel;

/// Absolute tolerance for currency comparisons.
pub const CURRENCY_TOL: f64 = 1e-9;

/// One constant-price block: `price` per energy unit for `length` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceBlock {
    pub price: f64,
    pub length: usize,
}

impl PriceBlock {
    pub fn new(price: f64, length: usize) -> Self {
        PriceBlock { price, length }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TariffSchedule {
    blocks: Vec<PriceBlock>,
    prices: Vec<f64>,
    deltas: Vec<f64>,
    transitions: Vec<usize>,
}

impl TariffSchedule {
    /// Expands blocks into a per-step price vector over a horizon of `n`.
    pub fn expand(blocks: &[PriceBlock], n: usize) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidTariff("no price blocks".into()));
        }
        if let Some(b) = blocks.iter().find(|b| b.length == 0) {
            return Err(Error::InvalidTariff(format!(
                "block with price {} has zero length",
                b.price
            )));
        }
        if let Some(b) = blocks.iter().find(|b| !b.price.is_finite()) {
            return Err(Error::InvalidTariff(format!(
                "price {} is not finite",
                b.price
            )));
        }
        let total: usize = blocks.iter().map(|b| b.length).sum();
        if total != n {
            return Err(Error::InvalidTariff(format!(
                "block lengths sum to {total}, horizon is {n}"
            )));
        }
        let prices = blocks
            .iter()
            .flat_map(|b| std::iter::repeat(b.price).take(b.length))
            .collect();
        let k = blocks.len();
        let mut deltas = Vec::with_capacity(k + 1);
        deltas.push(-blocks[0].price);
        for w in blocks.windows(2) {
            deltas.push(w[0].price - w[1].price);
        }
        deltas.push(blocks[k - 1].price);
        let mut transitions = Vec::with_capacity(k + 1);
        let mut t = 0;
        transitions.push(t);
        for b in blocks {
            t += b.length;
            transitions.push(t);
        }
        Ok(TariffSchedule {
            blocks: blocks.to_vec(),
            prices,
            deltas,
            transitions,
        })
    }

    /// Single-price tariff over `n` steps.
    pub fn flat(price: f64, n: usize) -> Result<Self> {
        Self::expand(&[PriceBlock::new(price, n)], n)
    }

    pub fn blocks(&self) -> &[PriceBlock] {
        &self.blocks
    }

    /// Per-step price vector `m`.
    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    /// Price differences `delta_0 ..= delta_K`.
    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    /// Block boundaries `0, l_0, l_0 + l_1, ..., n`.
    pub fn transition_times(&self) -> &[usize] {
        &self.transitions
    }

    /// Number of blocks `K`.
    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn horizon(&self) -> usize {
        self.prices.len()
    }

    /// Shortest block length.
    pub fn min_block_length(&self) -> usize {
        self.blocks.iter().map(|b| b.length).min().unwrap_or(0)
    }

    /// `m.y`, evaluated block-wise on integer totals so that sequences with
    /// equal block totals have bit-identical bills.
    pub fn bill(&self, y: &[i64]) -> Result<f64> {
        check_len(self.horizon(), y.len())?;
        Ok(self
            .blocks
            .iter()
            .zip(self.transitions.windows(2))
            .map(|(b, w)| b.price * y[w[0]..w[1]].iter().sum::<i64>() as f64)
            .sum())
    }

    /// `sum_k delta_k * s_{t_k}` for boundary states sampled at the
    /// transition times.
    pub fn boundary_cost(&self, boundary_states: &[i64]) -> Result<f64> {
        check_len(self.deltas.len(), boundary_states.len())?;
        Ok(self
            .deltas
            .iter()
            .zip(boundary_states)
            .map(|(d, &s)| d * s as f64)
            .sum())
    }

    /// Samples a full trajectory `s_0 ..= s_n` at the transition times.
    pub fn boundary_states(&self, states: &[i64]) -> Result<Vec<i64>> {
        check_len(self.horizon() + 1, states.len())?;
        Ok(self.transitions.iter().map(|&t| states[t]).collect())
    }

    fn check_horizon(&self, cfg: &SystemConfig) -> Result<()> {
        if self.horizon() != cfg.n {
            return Err(Error::InvalidTariff(format!(
                "tariff covers {} steps, horizon is {}",
                self.horizon(),
                cfg.n
            )));
        }
        Ok(())
    }
}

/// Minimal-bill feasible request and its bill.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalBill {
    pub request: RequestSeq,
    pub bill: f64,
}

/// `y*(x) = argmin m.y` over feasible requests from `cfg.s0`.
///
/// Backward dynamic programming over battery state; the forward pass picks
/// the smallest request among near-ties so earlier steps buy as little as
/// possible.
pub fn optimal_bill(cfg: &SystemConfig, tariff: &TariffSchedule, x: &[i64]) -> Result<OptimalBill> {
    tariff.check_horizon(cfg)?;
    cfg.check_consumption(x)?;
    let n = cfg.n;
    let width = (cfg.beta + 1) as usize;
    let m = tariff.prices();
    // cost_to_go[i][s]: minimal spend over steps i.. from state s.
    let mut cost_to_go = vec![vec![f64::INFINITY; width]; n + 1];
    cost_to_go[n].iter_mut().for_each(|c| *c = 0.0);
    for i in (0..n).rev() {
        for s in 0..width {
            let mut best = f64::INFINITY;
            for next in 0..width {
                let y = next as i64 - s as i64 + x[i];
                if y < cfg.y_min || y > cfg.y_max {
                    continue;
                }
                let c = m[i] * y as f64 + cost_to_go[i + 1][next];
                if c < best {
                    best = c;
                }
            }
            cost_to_go[i][s] = best;
        }
    }
    let mut request = Vec::with_capacity(n);
    let mut s = cfg.s0 as usize;
    for i in 0..n {
        let target = cost_to_go[i][s];
        // Smallest y first: ascending next-state order.
        let next = (0..width)
            .find(|&next| {
                let y = next as i64 - s as i64 + x[i];
                y >= cfg.y_min
                    && y <= cfg.y_max
                    && m[i] * y as f64 + cost_to_go[i + 1][next] <= target + CURRENCY_TOL
            })
            .expect("y = x keeps the state fixed, so some transition is admissible");
        request.push(next as i64 - s as i64 + x[i]);
        s = next;
    }
    let bill = tariff.bill(&request)?;
    Ok(OptimalBill {
        request: RequestSeq::new(request),
        bill,
    })
}

/// Bill of one request against the optimum for the same consumption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostReport {
    pub bill: f64,
    pub optimal_bill: f64,
    pub cost_g: f64,
}

pub fn cost_report(
    cfg: &SystemConfig,
    tariff: &TariffSchedule,
    x: &[i64],
    y: &[i64],
) -> Result<CostReport> {
    if !is_feasible(cfg, cfg.s0, x, y)? {
        return Err(Error::InfeasibleSupport { x: x.to_vec() });
    }
    let opt = optimal_bill(cfg, tariff, x)?;
    let bill = tariff.bill(y)?;
    Ok(CostReport {
        bill,
        optimal_bill: opt.bill,
        cost_g: bill - opt.bill,
    })
}

/// `g(Y, x) = E[m.Y | x] - m.y*(x)` for a (possibly randomized) policy.
pub fn policy_cost_g(
    cfg: &SystemConfig,
    tariff: &TariffSchedule,
    policy: &FiniteChannel<ConsumptionSeq, RequestSeq>,
    x: &ConsumptionSeq,
) -> Result<f64> {
    let opt = optimal_bill(cfg, tariff, x)?;
    let row = policy
        .row(x)
        .ok_or_else(|| Error::MissingRow { x: x.to_vec() })?;
    let mut expected = 0.0;
    for (y, p) in row {
        if !is_feasible(cfg, cfg.s0, x, y)? {
            return Err(Error::InfeasibleSupport { x: x.to_vec() });
        }
        expected += p * tariff.bill(y)?;
    }
    Ok(expected - opt.bill)
}

/// `beta * ||delta||_1 - beta * m_0`: the largest cost any feasible policy
/// can incur above the optimum.
pub fn delta_max(cfg: &SystemConfig, tariff: &TariffSchedule) -> f64 {
    let l1: f64 = tariff.deltas().iter().map(|d| d.abs()).sum();
    let beta = cfg.beta as f64;
    beta * l1 - beta * tariff.blocks()[0].price
}

/// Checks `policy` lies in the feasible set and costs at most `delta` above
/// the optimum for every consumption sequence.
///
/// With `witnesses = None` every sequence in `[0, alpha]^n` is checked,
/// which is only allowed at small `n`.
pub fn is_delta_affordable(
    cfg: &SystemConfig,
    tariff: &TariffSchedule,
    policy: &FiniteChannel<ConsumptionSeq, RequestSeq>,
    delta: f64,
    witnesses: Option<&[ConsumptionSeq]>,
) -> Result<bool> {
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "budget {delta} must be >= 0"
        )));
    }
    let all;
    let xs = match witnesses {
        Some(w) => w,
        None => {
            all = all_consumptions(cfg.alpha, cfg.n)?;
            &all[..]
        }
    };
    for x in xs {
        let Some(row) = policy.row(x) else {
            return Err(Error::MissingRow { x: x.to_vec() });
        };
        for (y, _) in row {
            if !is_feasible(cfg, cfg.s0, x, y)? {
                return Ok(false);
            }
        }
        if delta.is_finite() && policy_cost_g(cfg, tariff, policy, x)? > delta + CURRENCY_TOL {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Minimal bill by exhaustive search over every feasible request.
pub fn exhaustive_optimal_bill(
    cfg: &SystemConfig,
    tariff: &TariffSchedule,
    x: &ConsumptionSeq,
) -> Result<f64> {
    feasible_for(cfg, cfg.s0, x)?
        .iter()
        .map(|y| tariff.bill(y))
        .try_fold(f64::INFINITY, |acc, b| b.map(|b| acc.min(b)))
}

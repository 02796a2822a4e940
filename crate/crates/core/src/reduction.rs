//! Output-alphabet reductions.
//!
//! Both maps only move energy between neighbouring steps (or drop it at the
//! last step), in directions that keep every state inside `[0, beta]` for
//! any input the original request was feasible for. The output depends on
//! the request alone, so composing a policy with a reduction is again a
//! policy, and by data processing it leaks no more.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{check_len, RequestSeq, SystemConfig};
use crate::tariff::TariffSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphabetKind {
    /// `[0, alpha]`.
    ConsumptionMatched,
    /// `[-ceil(beta / l_min), ceil(beta / l_min) + alpha]` intersected with
    /// the configured request alphabet.
    CostPreserving,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReducedAlphabet {
    pub kind: AlphabetKind,
    pub lo: i64,
    pub hi: i64,
}

impl ReducedAlphabet {
    pub fn consumption_matched(cfg: &SystemConfig) -> Self {
        ReducedAlphabet {
            kind: AlphabetKind::ConsumptionMatched,
            lo: 0,
            hi: cfg.alpha,
        }
    }

    /// Rounds `beta / l_min` up, so the integer alphabet contains the real
    /// interval.
    pub fn cost_preserving(cfg: &SystemConfig, tariff: &TariffSchedule) -> Result<Self> {
        let l_min = tariff.min_block_length() as i64;
        if l_min == 0 {
            return Err(Error::InvalidTariff("empty tariff".into()));
        }
        let c = (cfg.beta + l_min - 1) / l_min;
        Ok(ReducedAlphabet {
            kind: AlphabetKind::CostPreserving,
            lo: (-c).max(cfg.y_min),
            hi: (c + cfg.alpha).min(cfg.y_max),
        })
    }

    pub fn custom(lo: i64, hi: i64) -> Self {
        ReducedAlphabet {
            kind: AlphabetKind::Custom,
            lo,
            hi,
        }
    }

    pub fn contains(&self, v: i64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn contains_all(&self, y: &[i64]) -> bool {
        y.iter().all(|&v| self.contains(v))
    }

    fn check(&self, cfg: &SystemConfig) -> Result<()> {
        if self.lo > 0 || self.hi < cfg.alpha {
            return Err(Error::TargetTooNarrow {
                lo: self.lo,
                hi: self.hi,
                alpha: cfg.alpha,
            });
        }
        Ok(())
    }
}

/// Moves `d` units of purchase from step `i` to step `i + 1`, or drops them
/// at the last step. Requires `0 <= d <= max(y_i - alpha, 0)`.
pub fn reduce_step(cfg: &SystemConfig, y: &[i64], i: usize, d: i64) -> Result<RequestSeq> {
    let Some(&yi) = y.get(i) else {
        return Err(Error::ReductionOutOfRange(format!(
            "step {i} outside a sequence of length {}",
            y.len()
        )));
    };
    let excess = (yi - cfg.alpha).max(0);
    if d < 0 || d > excess {
        return Err(Error::ReductionOutOfRange(format!(
            "d = {d} outside [0, {excess}] at step {i}"
        )));
    }
    let mut out = y.to_vec();
    out[i] -= d;
    if i + 1 < out.len() {
        out[i + 1] += d;
    }
    Ok(RequestSeq::new(out))
}

/// Clamps `v` into `[lo, hi]`, returning the clamped value and the signed
/// remainder to hand on.
fn clamp_carry(v: i64, lo: i64, hi: i64) -> (i64, i64) {
    if v > hi {
        (hi, v - hi)
    } else if v < lo {
        (lo, v - lo)
    } else {
        (v, 0)
    }
}

/// Pushes every entry into `target` with one left-to-right pass: excess
/// above `hi` and deficit below `lo` move to the next step, and whatever
/// remains after the last step is dropped. Entries already inside the
/// target are left alone, so the map is idempotent.
pub fn reduce_to_alphabet(
    cfg: &SystemConfig,
    y: &[i64],
    target: ReducedAlphabet,
) -> Result<RequestSeq> {
    target.check(cfg)?;
    check_len(cfg.n, y.len())?;
    let mut out = Vec::with_capacity(y.len());
    let mut carry = 0i64;
    for &v in y {
        let v = v.checked_add(carry).ok_or(Error::Overflow)?;
        let (kept, rest) = clamp_carry(v, target.lo, target.hi);
        out.push(kept);
        carry = rest;
    }
    Ok(RequestSeq::new(out))
}

/// Reduces into the cost-preserving alphabet while keeping every market
/// block's request total, hence the bill, unchanged.
///
/// Inside each block a forward pass moves excess and deficit towards the
/// block end, then a backward pass spreads what collected at the end back
/// towards the block start.
pub fn reduce_cost_preserving(
    cfg: &SystemConfig,
    tariff: &TariffSchedule,
    y: &[i64],
) -> Result<RequestSeq> {
    check_len(cfg.n, y.len())?;
    check_len(tariff.horizon(), y.len())?;
    let target = ReducedAlphabet::cost_preserving(cfg, tariff)?;
    target.check(cfg)?;
    let (lo, hi) = (target.lo, target.hi);
    let mut out = y.to_vec();
    for (block, w) in tariff.transition_times().windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let len = (b - a) as i64;
        let total: i64 = out[a..b].iter().sum();
        if total < len * lo || total > len * hi {
            return Err(Error::BlockTotalOutOfRange {
                block,
                total,
                min: len * lo,
                max: len * hi,
            });
        }
        for i in a..b - 1 {
            let (kept, rest) = clamp_carry(out[i], lo, hi);
            out[i] = kept;
            out[i + 1] += rest;
        }
        for i in (a + 1..b).rev() {
            let (kept, rest) = clamp_carry(out[i], lo, hi);
            out[i] = kept;
            out[i - 1] += rest;
        }
    }
    Ok(RequestSeq::new(out))
}

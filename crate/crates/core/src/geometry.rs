//! Input-pair geometry and the covering / packing constructions.
//!
//! Two input pairs `(s0, x)` and `(s0', x')` can share a feasible request
//! exactly when their net levels `s0 - sum(x[..i])` never drift more than
//! `beta` apart. The covering codebook uses that to give every input a
//! feasible codeword out of `2^kappa`; the packing set picks consumption
//! sequences no two of which can produce the same request.

use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    battery_trajectory, check_len, ConsumptionSeq, InputPair, RequestSeq, StateInterval,
    SystemConfig,
};

/// Largest gap between the net levels of two pairs over `i = 0..=n`.
///
/// The range includes `i = n` so that the final battery state is covered;
/// with it, a distance of at most `beta` is equivalent to sharing a
/// feasible request.
pub fn distance(p: &InputPair, q: &InputPair) -> Result<i64> {
    check_len(p.x.len(), q.x.len())?;
    let a = p.net_levels()?;
    let b = q.net_levels()?;
    a.iter()
        .zip(&b)
        .map(|(u, v)| u.checked_sub(*v).map(i64::abs).ok_or(Error::Overflow))
        .try_fold(0, |acc, d| d.map(|d| acc.max(d)))
}

/// A request feasible for every pair in `pairs`, or `None` when some two
/// pairs are more than `beta` apart.
///
/// The returned request follows the lowest admissible prefix-sum path:
/// `sum(y[..i]) = max(L_i, sum(y[..i-1]) + y_min)` where
/// `L_i = max over pairs of (sum(x[..i]) - s0)`. When the alphabet allows
/// selling down to `-beta` this is exactly `L_i`.
pub fn shared_request(cfg: &SystemConfig, pairs: &[InputPair]) -> Result<Option<RequestSeq>> {
    let first = pairs
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty input-pair set".into()))?;
    let len = first.x.len();
    let mut lower = vec![i64::MIN; len + 1];
    let mut upper = vec![i64::MAX; len + 1];
    for p in pairs {
        check_len(len, p.x.len())?;
        cfg.check_state(p.s0)?;
        for (step, &value) in p.x.iter().enumerate() {
            if value < 0 || value > cfg.alpha {
                return Err(Error::ConsumptionOutOfRange {
                    step,
                    value,
                    alpha: cfg.alpha,
                });
            }
        }
        for (i, z) in p.net_levels()?.into_iter().enumerate() {
            lower[i] = lower[i].max(-z);
            upper[i] = upper[i].min(-z);
        }
    }
    for u in upper.iter_mut() {
        *u += cfg.beta;
    }
    Ok(lowest_path(&lower, &upper, cfg.y_min, cfg.y_max).map(RequestSeq::new))
}

/// Lowest request prefix-sum path inside `[lower_i, upper_i]` whose steps
/// lie in `[y_min, y_max]`, starting from zero.
fn lowest_path(lower: &[i64], upper: &[i64], y_min: i64, y_max: i64) -> Option<Vec<i64>> {
    if lower.iter().zip(upper).any(|(l, u)| l > u) {
        return None;
    }
    if lower[0] > 0 || upper[0] < 0 {
        return None;
    }
    let mut y = Vec::with_capacity(lower.len() - 1);
    let mut level = 0i64;
    for i in 1..lower.len() {
        let next = lower[i].max(level + y_min);
        if next > upper[i] || next - level > y_max {
            return None;
        }
        y.push(next - level);
        level = next;
    }
    Some(y)
}

/// Input pairs `(s, x)` with `s` in `start`, `x` in `[0, alpha]^len` and,
/// when given, `s - sum(x)` in `net_end`.
#[derive(Debug, Clone, Copy)]
struct PairFamily {
    start: StateInterval,
    len: usize,
    net_end: Option<(i64, i64)>,
}

impl PairFamily {
    /// Closed-form level envelopes `(L_i, U_i)` of the family, matching what
    /// `shared_request` would compute on the enumerated family.
    fn envelope(&self, cfg: &SystemConfig) -> Option<(Vec<i64>, Vec<i64>)> {
        let alpha = cfg.alpha;
        let full = self.len as i64 * alpha;
        let mut lower = vec![i64::MIN; self.len + 1];
        let mut upper = vec![i64::MAX; self.len + 1];
        let mut any = false;
        for s in self.start.iter() {
            let (t_lo, t_hi) = match self.net_end {
                Some((a, b)) => ((s - b).max(0), (s - a).min(full)),
                None => (0, full),
            };
            if t_lo > t_hi {
                continue;
            }
            any = true;
            for i in 0..=self.len {
                let i64_i = i as i64;
                // Largest and smallest consumed-so-far given the total t.
                let most = (i64_i * alpha).min(t_hi);
                let least = (t_lo - (self.len as i64 - i64_i) * alpha).max(0);
                lower[i] = lower[i].max(most - s);
                upper[i] = upper[i].min(least - s);
            }
        }
        if !any {
            return None;
        }
        for u in upper.iter_mut() {
            *u += cfg.beta;
        }
        Some((lower, upper))
    }

    fn shared(&self, cfg: &SystemConfig) -> Result<RequestSeq> {
        self.envelope(cfg)
            .and_then(|(l, u)| lowest_path(&l, &u, cfg.y_min, cfg.y_max))
            .map(RequestSeq::new)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "no shared request for a block of length {}",
                    self.len
                ))
            })
    }

    #[cfg(test)]
    fn members(&self, alpha: i64) -> Vec<InputPair> {
        let xs = crate::oracle::enumerate::product(0, alpha, self.len);
        let mut out = Vec::new();
        for s in self.start.iter() {
            for x in &xs {
                let net = s - x.iter().sum::<i64>();
                if self.net_end.map_or(true, |(a, b)| a <= net && net <= b) {
                    out.push(InputPair::new(s, x.clone()));
                }
            }
        }
        out
    }
}

/// Which block codeword the covering policy emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockChoice {
    /// The battery alone covers the block: `s - sum(x_block) >= 0`.
    Idle,
    /// The battery would run out during the block.
    Depleting,
}

/// `{y0} x {y1, y2}^kappa`: one head word, then one of two words per block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoveringCodebook {
    pub beta: i64,
    pub alpha: i64,
    pub n: usize,
    pub initial_states: StateInterval,
    /// `floor((beta + min S0 - max S0) / alpha)`.
    pub head_len_nominal: usize,
    /// Head word, truncated to the horizon.
    pub head: RequestSeq,
    /// `floor((beta + 1) / alpha)`.
    pub block_len: usize,
    pub kappa: usize,
    /// Length of the final, possibly shorter, block.
    pub last_block_len: usize,
    pub idle: RequestSeq,
    pub depleting: RequestSeq,
}

/// Builds the covering codebook for initial states `initial`.
pub fn covering_codebook(cfg: &SystemConfig, initial: StateInterval) -> Result<CoveringCodebook> {
    initial.check_within(cfg)?;
    let spread = cfg.beta + initial.lo - initial.hi;
    let head_len_nominal = (spread / cfg.alpha) as usize;
    let head_len = head_len_nominal.min(cfg.n);
    let block_len = ((cfg.beta + 1) / cfg.alpha) as usize;
    if block_len == 0 {
        return Err(Error::ZeroDepletionTime {
            beta: cfg.beta,
            alpha: cfg.alpha,
        });
    }
    let rest = cfg.n - head_len;
    let kappa = rest.div_ceil(block_len);
    let last_block_len = if kappa == 0 {
        0
    } else {
        rest - (kappa - 1) * block_len
    };
    let head = PairFamily {
        start: initial,
        len: head_len,
        net_end: None,
    }
    .shared(cfg)?;
    let full = cfg.states();
    let idle = PairFamily {
        start: full,
        len: block_len,
        net_end: Some((0, cfg.beta)),
    }
    .shared(cfg)?;
    let depleting = PairFamily {
        start: full,
        len: block_len,
        net_end: Some((-(block_len as i64) * cfg.alpha, -1)),
    }
    .shared(cfg)?;
    Ok(CoveringCodebook {
        beta: cfg.beta,
        alpha: cfg.alpha,
        n: cfg.n,
        initial_states: initial,
        head_len_nominal,
        head,
        block_len,
        kappa,
        last_block_len,
        idle,
        depleting,
    })
}

impl CoveringCodebook {
    /// `log2 |V|`.
    pub fn log2_size(&self) -> usize {
        if self.idle == self.depleting {
            0
        } else {
            self.kappa
        }
    }

    /// Step ranges of the `kappa` blocks after the head.
    pub fn block_ranges(&self) -> Vec<Range<usize>> {
        let start = self.head.len();
        (0..self.kappa)
            .map(|b| {
                let lo = start + b * self.block_len;
                lo..(lo + self.block_len).min(self.n)
            })
            .collect()
    }

    fn word(&self, choice: BlockChoice, len: usize) -> &[i64] {
        match choice {
            BlockChoice::Idle => &self.idle[..len],
            BlockChoice::Depleting => &self.depleting[..len],
        }
    }

    /// Concatenates the head with one word per block.
    pub fn codeword(&self, choices: &[BlockChoice]) -> Result<RequestSeq> {
        check_len(self.kappa, choices.len())?;
        let mut y = self.head.to_vec();
        for (range, &c) in self.block_ranges().iter().zip(choices) {
            y.extend_from_slice(self.word(c, range.len()));
        }
        Ok(RequestSeq::new(y))
    }

    /// All `2^kappa` codewords (small `kappa` only).
    pub fn codewords(&self) -> Result<Vec<RequestSeq>> {
        if self.kappa > 20 {
            return Err(Error::InstanceTooLarge {
                what: "codeword listing",
                reason: format!("kappa = {} > 20", self.kappa),
            });
        }
        (0..1usize << self.kappa)
            .map(|mask| {
                let choices: Vec<BlockChoice> = (0..self.kappa)
                    .map(|b| {
                        if mask >> b & 1 == 1 {
                            BlockChoice::Depleting
                        } else {
                            BlockChoice::Idle
                        }
                    })
                    .collect();
                self.codeword(&choices)
            })
            .collect()
    }

    fn check_config(&self, cfg: &SystemConfig) -> Result<()> {
        if (self.beta, self.alpha, self.n) != (cfg.beta, cfg.alpha, cfg.n) {
            return Err(Error::InvalidArgument(format!(
                "codebook built for (beta={}, alpha={}, n={}), config has (beta={}, alpha={}, n={})",
                self.beta, self.alpha, self.n, cfg.beta, cfg.alpha, cfg.n
            )));
        }
        Ok(())
    }
}

/// Output of the covering policy for one consumption sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoveringRun {
    pub request: RequestSeq,
    pub choices: Vec<BlockChoice>,
}

/// Maps `(s0, x)` to its codeword: the head, then per block the idle word
/// if the battery covers the block's consumption and the depleting word
/// otherwise. Needs `x` one block ahead.
pub fn apply_covering_policy(
    cfg: &SystemConfig,
    codebook: &CoveringCodebook,
    s0: i64,
    x: &[i64],
) -> Result<CoveringRun> {
    codebook.check_config(cfg)?;
    cfg.check_consumption(x)?;
    if !codebook.initial_states.contains(s0) {
        return Err(Error::InvalidArgument(format!(
            "initial state {s0} outside codebook states [{}, {}]",
            codebook.initial_states.lo, codebook.initial_states.hi
        )));
    }
    let head_len = codebook.head.len();
    let mut y = codebook.head.to_vec();
    let mut state = battery_trajectory(s0, &x[..head_len], &y)?.final_state();
    let mut choices = Vec::with_capacity(codebook.kappa);
    for range in codebook.block_ranges() {
        let demand: i64 = x[range.clone()].iter().sum();
        let choice = if state - demand >= 0 {
            BlockChoice::Idle
        } else {
            BlockChoice::Depleting
        };
        let word = codebook.word(choice, range.len());
        state += word.iter().sum::<i64>() - demand;
        y.extend_from_slice(word);
        choices.push(choice);
    }
    Ok(CoveringRun {
        request: RequestSeq::new(y),
        choices,
    })
}

/// Consumption sequences with pairwise disjoint feasible-request sets.
///
/// `kappa_hat` blocks of length `ceil(lambda)` each hold either the all-zero
/// word or the all-`alpha` word; the tail block holds words whose totals are
/// multiples of `|S_l|`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PackingSet {
    pub s0: i64,
    pub alpha: i64,
    pub len: usize,
    pub terminal: StateInterval,
    /// `ceil((beta + 1) / alpha)`.
    pub block_len: usize,
    pub kappa_hat: usize,
    pub tail_len: usize,
    pub tail_words: Vec<ConsumptionSeq>,
}

pub fn packing_set(
    cfg: &SystemConfig,
    s0: i64,
    len: usize,
    terminal: StateInterval,
) -> Result<PackingSet> {
    if len == 0 {
        return Err(Error::InvalidArgument("packing length must be >= 1".into()));
    }
    cfg.check_state(s0)?;
    terminal.check_within(cfg)?;
    let block_len = ceil_div(cfg.beta + 1, cfg.alpha) as usize;
    let kappa_hat = (len / block_len).saturating_sub(1);
    let tail_len = len - kappa_hat * block_len;
    let tail_capacity = tail_len as i64 * cfg.alpha;
    let count = tail_capacity / terminal.len();
    let tail_words = (0..=count)
        .map(|i| greedy_word(i * terminal.len(), tail_len, cfg.alpha))
        .collect();
    Ok(PackingSet {
        s0,
        alpha: cfg.alpha,
        len,
        terminal,
        block_len,
        kappa_hat,
        tail_len,
        tail_words,
    })
}

/// Ceiling division for a non-negative numerator and positive divisor.
fn ceil_div(a: i64, b: i64) -> i64 {
    (a + b - 1) / b
}

/// Word of length `len` with the given total, front-loaded with `alpha`.
fn greedy_word(total: i64, len: usize, alpha: i64) -> ConsumptionSeq {
    let mut rest = total;
    (0..len)
        .map(|_| {
            let v = rest.min(alpha);
            rest -= v;
            v
        })
        .collect::<Vec<_>>()
        .into()
}

impl PackingSet {
    pub fn cardinality(&self) -> u128 {
        (1u128 << self.kappa_hat) * self.tail_words.len() as u128
    }

    /// `2^kappa_hat * ceil((l - kappa_hat * ceil(lambda)) * alpha / |S_l|)`.
    pub fn guaranteed_size(&self) -> u128 {
        let tail = ceil_div(self.tail_len as i64 * self.alpha, self.terminal.len());
        (1u128 << self.kappa_hat) * tail as u128
    }

    pub fn block_pair(&self) -> (ConsumptionSeq, ConsumptionSeq) {
        (
            ConsumptionSeq::zeros(self.block_len),
            ConsumptionSeq::constant(self.alpha, self.block_len),
        )
    }

    pub fn members(&self) -> Result<Vec<ConsumptionSeq>> {
        if self.cardinality() > 1_000_000 {
            return Err(Error::InstanceTooLarge {
                what: "packing member listing",
                reason: format!("{} members", self.cardinality()),
            });
        }
        let (low, high) = self.block_pair();
        let mut out = Vec::with_capacity(self.cardinality() as usize);
        for mask in 0..1usize << self.kappa_hat {
            let mut head = Vec::with_capacity(self.len);
            for b in 0..self.kappa_hat {
                head.extend_from_slice(if mask >> b & 1 == 1 { &high } else { &low });
            }
            for tail in &self.tail_words {
                let mut w = head.clone();
                w.extend_from_slice(tail);
                out.push(ConsumptionSeq::new(w));
            }
        }
        Ok(out)
    }
}

//! Exact mutual information and channel capacity on finite alphabets.

use std::hash::Hash;

use super::channel::{FiniteChannel, FiniteDistribution, KahanSum};
use crate::error::{Error, Result};

/// Iteration cap for the capacity computation.
pub const CAPACITY_MAX_ITER: usize = 500_000;

/// `I(X; Y)` in bits for input law `px` through `ch`, with `0 log 0 = 0`.
pub fn exact_mi<X, Y>(px: &FiniteDistribution<X>, ch: &FiniteChannel<X, Y>) -> Result<f64>
where
    X: Clone + Eq + Hash,
    Y: Clone + Eq + Hash,
{
    let mut p = vec![0.0; ch.inputs().len()];
    for (x, prob) in px.iter() {
        let i = ch.input_index(x).ok_or(Error::SupportMismatch)?;
        p[i] += prob;
    }
    Ok(mutual_information_bits(
        &p,
        ch.sparse_rows(),
        ch.outputs().len(),
    ))
}

pub(crate) fn output_law(p: &[f64], rows: &[Vec<(usize, f64)>], n_out: usize) -> Vec<f64> {
    let mut q = vec![0.0; n_out];
    for (pi, row) in p.iter().zip(rows) {
        if *pi == 0.0 {
            continue;
        }
        for &(j, w) in row {
            q[j] += pi * w;
        }
    }
    q
}

/// Divergence `D(W_i || q)` in nats for one sparse row.
fn row_divergence(row: &[(usize, f64)], q: &[f64]) -> f64 {
    let mut acc = KahanSum::default();
    for &(j, w) in row {
        if w > 0.0 {
            acc.add(w * (w / q[j].max(f64::MIN_POSITIVE)).ln());
        }
    }
    acc.value()
}

pub(crate) fn mutual_information_bits(p: &[f64], rows: &[Vec<(usize, f64)>], n_out: usize) -> f64 {
    let q = output_law(p, rows, n_out);
    let mut acc = KahanSum::default();
    for (pi, row) in p.iter().zip(rows) {
        if *pi > 0.0 {
            acc.add(pi * row_divergence(row, &q));
        }
    }
    (acc.value() / std::f64::consts::LN_2).max(0.0)
}

/// Result of a capacity computation on index-based rows.
#[derive(Debug, Clone)]
pub(crate) struct RawCapacity {
    /// Mutual information achieved by `input` (lower bound on capacity).
    pub bits: f64,
    /// `max_i D(W_i || q)`, an upper bound on capacity.
    pub upper_bits: f64,
    pub input: Vec<f64>,
    pub iterations: usize,
}

/// Alternating maximization over the input law. Stops when the gap between
/// the achieved information and the divergence upper bound is below `tol`
/// bits.
pub(crate) fn blahut_arimoto(
    rows: &[Vec<(usize, f64)>],
    n_out: usize,
    tol: f64,
    max_iter: usize,
) -> Result<RawCapacity> {
    let (raw, converged) = blahut_arimoto_partial(rows, n_out, tol, max_iter);
    if converged {
        Ok(raw)
    } else {
        Err(Error::NonConvergence {
            iterations: max_iter,
            gap: raw.upper_bits - raw.bits,
        })
    }
}

/// Runs at most `max_iter` steps and returns the best certified bounds seen,
/// with a flag telling whether they are within `tol` bits of each other.
pub(crate) fn blahut_arimoto_partial(
    rows: &[Vec<(usize, f64)>],
    n_out: usize,
    tol: f64,
    max_iter: usize,
) -> (RawCapacity, bool) {
    let m = rows.len();
    if m == 0 {
        let raw = RawCapacity {
            bits: 0.0,
            upper_bits: 0.0,
            input: vec![],
            iterations: 0,
        };
        return (raw, true);
    }
    let ln2 = std::f64::consts::LN_2;
    let tol_nats = tol * ln2;
    let mut p = vec![1.0 / m as f64; m];
    let mut div = vec![0.0; m];
    let mut best_lower = 0.0f64;
    let mut best_input = p.clone();
    let mut best_upper = f64::INFINITY;
    let mut iterations = 0;
    for it in 0..max_iter {
        iterations = it + 1;
        let q = output_law(&p, rows, n_out);
        let mut lower = KahanSum::default();
        let mut upper = f64::NEG_INFINITY;
        for i in 0..m {
            div[i] = row_divergence(&rows[i], &q);
            lower.add(p[i] * div[i]);
            upper = upper.max(div[i]);
        }
        let lower = lower.value().max(0.0);
        if lower > best_lower {
            best_lower = lower;
            best_input.copy_from_slice(&p);
        }
        best_upper = best_upper.min(upper.max(lower));
        if best_upper - best_lower <= tol_nats {
            break;
        }
        // Multiplicative update, shifted by the max for stability.
        let mut total = 0.0;
        for i in 0..m {
            p[i] *= (div[i] - upper).exp();
            total += p[i];
        }
        for pi in p.iter_mut() {
            *pi /= total;
        }
    }
    let converged = best_upper - best_lower <= tol_nats;
    let raw = RawCapacity {
        bits: best_lower / ln2,
        upper_bits: best_upper.max(best_lower) / ln2,
        input: best_input,
        iterations,
    };
    (raw, converged)
}

/// Capacity of a finite channel together with an achieving input law.
#[derive(Debug, Clone)]
pub struct ChannelCapacity<X> {
    /// Information achieved by `input`, in bits.
    pub bits: f64,
    /// Certified upper bound on the capacity, in bits.
    pub upper_bits: f64,
    pub input: FiniteDistribution<X>,
    pub iterations: usize,
}

/// Capacity `max_P I(X; Y)` within `tol` bits.
pub fn capacity<X, Y>(ch: &FiniteChannel<X, Y>, tol: f64) -> Result<ChannelCapacity<X>>
where
    X: Clone + Eq + Hash,
    Y: Clone + Eq + Hash,
{
    if ch.inputs().is_empty() {
        return Err(Error::InvalidArgument("channel has no inputs".into()));
    }
    let raw = blahut_arimoto(ch.sparse_rows(), ch.outputs().len(), tol, CAPACITY_MAX_ITER)?;
    let input = FiniteDistribution::from_weights(ch.inputs().to_vec(), raw.input)?;
    Ok(ChannelCapacity {
        bits: raw.bits,
        upper_bits: raw.upper_bits,
        input,
        iterations: raw.iterations,
    })
}

/// Worst-case leakage of `ch` in bits: its capacity when `family` is
/// `None`, otherwise the largest `I(X; Y)` over the given input laws.
pub fn worst_case_mi<X, Y>(
    ch: &FiniteChannel<X, Y>,
    family: Option<&[FiniteDistribution<X>]>,
    tol: f64,
) -> Result<f64>
where
    X: Clone + Eq + Hash,
    Y: Clone + Eq + Hash,
{
    match family {
        None => Ok(capacity(ch, tol)?.upper_bits),
        Some(laws) => laws
            .iter()
            .map(|px| exact_mi(px, ch))
            .try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v))),
    }
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    let h = |v: f64| if v > 0.0 { -v * v.log2() } else { 0.0 };
    h(p) + h(1.0 - p)
}

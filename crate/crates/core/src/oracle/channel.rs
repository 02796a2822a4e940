//! Finite distributions and sparse finite channels.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};

const NORMALIZATION_TOL: f64 = 1e-12;

/// A probability distribution over a finite set of distinct outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution<T> {
    support: Vec<T>,
    probs: Vec<f64>,
}

impl<T: Clone + Eq + Hash> FiniteDistribution<T> {
    pub fn new(support: Vec<T>, probs: Vec<f64>) -> Result<Self> {
        if support.len() != probs.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} outcomes but {} probabilities",
                support.len(),
                probs.len()
            )));
        }
        if support.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidDistribution(
                "probabilities must be finite and non-negative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        let mut seen = HashMap::with_capacity(support.len());
        for s in &support {
            if seen.insert(s, ()).is_some() {
                return Err(Error::InvalidDistribution("duplicate outcome".into()));
            }
        }
        Ok(FiniteDistribution { support, probs })
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(support: Vec<T>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidDistribution(
                "weights must have a positive finite sum".into(),
            ));
        }
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let sum: f64 = probs.iter().sum();
        // Push the rounding residue onto the largest entry.
        let mut probs = probs;
        if let Some((i, _)) = probs.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) {
            probs[i] += 1.0 - sum;
        }
        Self::new(support, probs)
    }

    pub fn point(outcome: T) -> Self {
        FiniteDistribution {
            support: vec![outcome],
            probs: vec![1.0],
        }
    }

    pub fn uniform(support: Vec<T>) -> Result<Self> {
        let k = support.len();
        Self::from_weights(support, vec![1.0; k])
    }

    pub fn support(&self) -> &[T] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (&T, f64)> {
        self.support.iter().zip(self.probs.iter().copied())
    }

    /// Expectation of `f` under the distribution.
    pub fn expect(&self, mut f: impl FnMut(&T) -> f64) -> f64 {
        let mut acc = KahanSum::default();
        for (t, p) in self.iter() {
            if p > 0.0 {
                acc.add(p * f(t));
            }
        }
        acc.value()
    }
}

/// Conditional distribution `P(y | x)` over finite alphabets, stored as
/// sparse rows of output indices.
#[derive(Debug, Clone)]
pub struct FiniteChannel<X, Y> {
    inputs: Vec<X>,
    outputs: Vec<Y>,
    rows: Vec<Vec<(usize, f64)>>,
    input_index: HashMap<X, usize>,
}

impl<X: Clone + Eq + Hash, Y: Clone + Eq + Hash> FiniteChannel<X, Y> {
    pub fn from_rows(rows: Vec<(X, FiniteDistribution<Y>)>) -> Result<Self> {
        let mut inputs = Vec::with_capacity(rows.len());
        let mut input_index = HashMap::with_capacity(rows.len());
        let mut outputs = Vec::new();
        let mut output_index: HashMap<Y, usize> = HashMap::new();
        let mut sparse = Vec::with_capacity(rows.len());
        for (x, dist) in rows {
            if input_index.insert(x.clone(), inputs.len()).is_some() {
                return Err(Error::InvalidDistribution("duplicate channel input".into()));
            }
            inputs.push(x);
            let mut row = Vec::with_capacity(dist.support.len());
            for (y, p) in dist.support.into_iter().zip(dist.probs) {
                if p == 0.0 {
                    continue;
                }
                let j = *output_index.entry(y.clone()).or_insert_with(|| {
                    outputs.push(y);
                    outputs.len() - 1
                });
                row.push((j, p));
            }
            sparse.push(row);
        }
        Ok(FiniteChannel {
            inputs,
            outputs,
            rows: sparse,
            input_index,
        })
    }

    /// Channel mapping each input to a single output.
    pub fn deterministic<I>(inputs: I, mut f: impl FnMut(&X) -> Result<Y>) -> Result<Self>
    where
        I: IntoIterator<Item = X>,
    {
        let rows = inputs
            .into_iter()
            .map(|x| {
                let y = f(&x)?;
                Ok((x, FiniteDistribution::point(y)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(rows)
    }

    pub fn inputs(&self) -> &[X] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Y] {
        &self.outputs
    }

    pub fn input_index(&self, x: &X) -> Option<usize> {
        self.input_index.get(x).copied()
    }

    /// Row for input `x` as (output, probability) pairs.
    pub fn row(&self, x: &X) -> Option<impl Iterator<Item = (&Y, f64)> + '_> {
        let i = self.input_index(x)?;
        Some(self.rows[i].iter().map(|&(j, p)| (&self.outputs[j], p)))
    }

    /// Post-processes outputs through a deterministic map, merging outputs
    /// that collide.
    pub fn map_outputs<Z: Clone + Eq + Hash>(
        &self,
        mut f: impl FnMut(&Y) -> Z,
    ) -> Result<FiniteChannel<X, Z>> {
        let mapped: Vec<Z> = self.outputs.iter().map(&mut f).collect();
        let rows = self
            .inputs
            .iter()
            .zip(&self.rows)
            .map(|(x, row)| {
                let mut merged: Vec<(Z, f64)> = Vec::new();
                for &(j, p) in row {
                    match merged.iter_mut().find(|(z, _)| *z == mapped[j]) {
                        Some(entry) => entry.1 += p,
                        None => merged.push((mapped[j].clone(), p)),
                    }
                }
                let (support, probs): (Vec<Z>, Vec<f64>) = merged.into_iter().unzip();
                Ok((x.clone(), FiniteDistribution::from_weights(support, probs)?))
            })
            .collect::<Result<Vec<_>>>()?;
        FiniteChannel::from_rows(rows)
    }

    pub(crate) fn sparse_rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unnormalized_and_duplicates() {
        assert!(FiniteDistribution::new(vec![0, 1], vec![0.5, 0.6]).is_err());
        assert!(FiniteDistribution::new(vec![0, 0], vec![0.5, 0.5]).is_err());
        assert!(FiniteDistribution::new(vec![0], vec![-0.0 - 1.0]).is_err());
        assert!(FiniteDistribution::new(vec![0, 1], vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn from_weights_normalizes() {
        let d = FiniteDistribution::from_weights(vec!['a', 'b', 'c'], vec![1.0, 1.0, 1.0]).unwrap();
        let s: f64 = d.probs().iter().sum();
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn map_outputs_merges() {
        let ch = FiniteChannel::from_rows(vec![(
            0u8,
            FiniteDistribution::new(vec![1, 2, 3], vec![0.25, 0.25, 0.5]).unwrap(),
        )])
        .unwrap();
        let merged = ch.map_outputs(|y: &i32| y % 2).unwrap();
        let mut row: Vec<(i32, f64)> = merged.row(&0).unwrap().map(|(z, p)| (*z, p)).collect();
        row.sort_by_key(|r| r.0);
        assert_eq!(row, vec![(0, 0.25), (1, 0.75)]);
    }

    #[test]
    fn kahan_recovers_small_terms() {
        let mut k = KahanSum::default();
        k.add(1.0);
        for _ in 0..1_000_000 {
            k.add(1e-16);
        }
        assert!((k.value() - (1.0 + 1e-10)).abs() < 1e-15);
    }
}

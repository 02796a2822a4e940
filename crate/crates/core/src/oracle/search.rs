//! Brackets on the exact min-max leakage of tiny instances.
//!
//! Upper side: the smallest set of requests covering every consumption
//! sequence gives a deterministic policy; a coordinate search over
//! randomized rows on a probability grid then tries to improve on it.
//! Lower side: consumption sequences with pairwise disjoint feasible sets
//! can be told apart from any feasible output, so a uniform law on the
//! largest such set leaks `log2` of its size.

use std::collections::HashMap;

use super::channel::{FiniteChannel, FiniteDistribution};
use super::enumerate::{all_consumptions, enumerate_feasible};
use super::info::{blahut_arimoto, CAPACITY_MAX_ITER};
use crate::bounds::Budget;
use crate::error::{Error, Result};
use crate::model::{ConsumptionSeq, RequestSeq, SystemConfig};
use crate::tariff::{optimal_bill, TariffSchedule, CURRENCY_TOL};

/// Largest instance the exhaustive search accepts.
pub const MAX_ORACLE_N: usize = 3;
pub const MAX_ORACLE_BETA: i64 = 2;
pub const MAX_ORACLE_ALPHA: i64 = 1;

/// Default grid resolution per row.
pub const DEFAULT_RESOLUTION: usize = 4;

const MAX_SWEEPS: usize = 6;
const MAX_COVERS_KEPT: usize = 3;
const CAPACITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LeakageBracket {
    /// Certified capacity of the best channel found, bits per step.
    pub upper: f64,
    /// `log2` of the largest packing, bits per step.
    pub lower: f64,
    pub resolution: usize,
    pub cover: Vec<RequestSeq>,
    pub packing: Vec<ConsumptionSeq>,
    pub channel: FiniteChannel<ConsumptionSeq, RequestSeq>,
    pub sweeps: usize,
}

impl LeakageBracket {
    pub fn contains(&self, value: f64, slack: f64) -> bool {
        self.lower - slack <= value && value <= self.upper + slack
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    output: usize,
    cost: f64,
}

/// Bracket on `min over admissible policies of max over input laws of
/// I(X; Y) / n`.
///
/// A finite budget needs a tariff; admissible rows then spend at most
/// `delta` above the optimal bill in expectation.
pub fn exact_min_worstcase_leakage(
    cfg: &SystemConfig,
    tariff: Option<&TariffSchedule>,
    budget: Budget,
    resolution: usize,
) -> Result<LeakageBracket> {
    if cfg.n > MAX_ORACLE_N || cfg.beta > MAX_ORACLE_BETA || cfg.alpha > MAX_ORACLE_ALPHA {
        return Err(Error::InstanceTooLarge {
            what: "exhaustive leakage search",
            reason: format!(
                "needs n <= {MAX_ORACLE_N}, beta <= {MAX_ORACLE_BETA}, alpha <= {MAX_ORACLE_ALPHA}"
            ),
        });
    }
    if resolution == 0 {
        return Err(Error::InvalidArgument(
            "grid resolution must be >= 1".into(),
        ));
    }
    let delta = budget.value();
    let tariff = match (budget, tariff) {
        (Budget::Finite(d), _) if d.is_nan() || d < 0.0 => {
            return Err(Error::InvalidArgument(format!("budget {d} must be >= 0")))
        }
        (Budget::Finite(_), None) => {
            return Err(Error::InvalidArgument(
                "a finite budget needs a tariff".into(),
            ))
        }
        (_, t) => t,
    };

    let inputs = all_consumptions(cfg.alpha, cfg.n)?;
    let mut outputs: Vec<RequestSeq> = Vec::new();
    let mut index: HashMap<RequestSeq, usize> = HashMap::new();
    // Feasible requests per input, with their cost above the optimum.
    let mut feasible: Vec<Vec<Candidate>> = Vec::with_capacity(inputs.len());
    for x in &inputs {
        let ys = enumerate_feasible(cfg, cfg.s0, x, None)?;
        let opt = match tariff {
            Some(t) => optimal_bill(cfg, t, x)?.bill,
            None => 0.0,
        };
        let mut row = Vec::with_capacity(ys.len());
        for y in ys {
            let cost = match tariff {
                Some(t) => t.bill(&y)? - opt,
                None => 0.0,
            };
            let output = *index.entry(y.clone()).or_insert_with(|| {
                outputs.push(y);
                outputs.len() - 1
            });
            row.push(Candidate { output, cost });
        }
        feasible.push(row);
    }

    let packing = max_packing(&feasible);
    let covers = min_covers(&feasible, outputs.len(), delta);
    let cover = covers.first().cloned().ok_or_else(|| {
        Error::InvalidArgument("no admissible request for some consumption sequence".into())
    })?;

    // Rows may use any output from the kept minimum covers.
    let pool: Vec<bool> = {
        let mut p = vec![false; outputs.len()];
        for c in &covers {
            for &o in c {
                p[o] = true;
            }
        }
        p
    };
    let supports: Vec<Vec<Candidate>> = feasible
        .iter()
        .map(|row| row.iter().copied().filter(|c| pool[c.output]).collect())
        .collect();

    // Start from the deterministic cover policy.
    let mut rows: Vec<Vec<(usize, f64)>> = feasible
        .iter()
        .map(|row| {
            let c = row
                .iter()
                .find(|c| cover.contains(&c.output) && c.cost <= delta + CURRENCY_TOL)
                .expect("cover admits every input");
            vec![(c.output, 1.0)]
        })
        .collect();
    let mut best = capacity_upper(&rows, outputs.len())?;
    let mut sweeps = 0;
    for _ in 0..MAX_SWEEPS {
        sweeps += 1;
        let mut improved = false;
        for i in 0..rows.len() {
            for point in simplex_grid(supports[i].len(), resolution) {
                let cost: f64 = point
                    .iter()
                    .zip(&supports[i])
                    .map(|(p, c)| p * c.cost)
                    .sum();
                if cost > delta + CURRENCY_TOL {
                    continue;
                }
                let candidate: Vec<(usize, f64)> = point
                    .iter()
                    .zip(&supports[i])
                    .filter(|(p, _)| **p > 0.0)
                    .map(|(p, c)| (c.output, *p))
                    .collect();
                let saved = std::mem::replace(&mut rows[i], candidate);
                let value = capacity_upper(&rows, outputs.len())?;
                if value < best - 1e-12 {
                    best = value;
                    improved = true;
                } else {
                    rows[i] = saved;
                }
            }
        }
        if !improved {
            break;
        }
    }

    let n = cfg.n as f64;
    let channel = FiniteChannel::from_rows(
        inputs
            .iter()
            .zip(&rows)
            .map(|(x, row)| {
                let (support, probs): (Vec<RequestSeq>, Vec<f64>) =
                    row.iter().map(|&(o, p)| (outputs[o].clone(), p)).unzip();
                Ok((x.clone(), FiniteDistribution::from_weights(support, probs)?))
            })
            .collect::<Result<Vec<_>>>()?,
    )?;
    Ok(LeakageBracket {
        upper: best.max(0.0) / n,
        lower: (packing.len() as f64).log2() / n,
        resolution,
        cover: cover.iter().map(|&o| outputs[o].clone()).collect(),
        packing: packing.iter().map(|&i| inputs[i].clone()).collect(),
        channel,
        sweeps,
    })
}

fn capacity_upper(rows: &[Vec<(usize, f64)>], n_out: usize) -> Result<f64> {
    Ok(blahut_arimoto(rows, n_out, CAPACITY_TOL, CAPACITY_MAX_ITER)?.upper_bits)
}

/// Largest set of inputs whose feasible sets are pairwise disjoint.
fn max_packing(feasible: &[Vec<Candidate>]) -> Vec<usize> {
    let m = feasible.len();
    let sets: Vec<Vec<usize>> = feasible
        .iter()
        .map(|row| row.iter().map(|c| c.output).collect())
        .collect();
    let clash: Vec<Vec<bool>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| i != j && sets[i].iter().any(|o| sets[j].contains(o)))
                .collect()
        })
        .collect();
    let mut best = vec![0];
    for mask in 1u32..(1u32 << m) {
        let members: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        if members.len() <= best.len() {
            continue;
        }
        let ok = members
            .iter()
            .enumerate()
            .all(|(a, &i)| members[a + 1..].iter().all(|&j| !clash[i][j]));
        if ok {
            best = members;
        }
    }
    best
}

/// Minimum-size output sets admitting every input (up to a few of them).
fn min_covers(feasible: &[Vec<Candidate>], n_out: usize, delta: f64) -> Vec<Vec<usize>> {
    let admits: Vec<Vec<usize>> = feasible
        .iter()
        .map(|row| {
            row.iter()
                .filter(|c| c.cost <= delta + CURRENCY_TOL)
                .map(|c| c.output)
                .collect()
        })
        .collect();
    if admits.iter().any(|a| a.is_empty()) {
        return vec![];
    }
    for size in 1..=feasible.len() {
        let mut found = Vec::new();
        let mut combo: Vec<usize> = (0..size).collect();
        if size > n_out {
            break;
        }
        loop {
            if admits.iter().all(|a| a.iter().any(|o| combo.contains(o))) {
                found.push(combo.clone());
                if found.len() == MAX_COVERS_KEPT {
                    return found;
                }
            }
            // Next combination in lexicographic order.
            let mut i = size;
            while i > 0 && combo[i - 1] == n_out - size + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            combo[i - 1] += 1;
            for j in i..size {
                combo[j] = combo[j - 1] + 1;
            }
        }
        if !found.is_empty() {
            return found;
        }
    }
    vec![]
}

/// Points of the probability simplex in `dim` coordinates with entries in
/// multiples of `1 / res`.
fn simplex_grid(dim: usize, res: usize) -> Vec<Vec<f64>> {
    fn rec(dim: usize, left: usize, res: usize, cur: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
        if dim == 1 {
            cur.push(left as f64 / res as f64);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for a in 0..=left {
            cur.push(a as f64 / res as f64);
            rec(dim - 1, left - a, res, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if dim > 0 {
        rec(dim, res, res, &mut Vec::new(), &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::info::capacity;

    #[test]
    fn grid_sizes() {
        assert_eq!(simplex_grid(1, 4).len(), 1);
        assert_eq!(simplex_grid(2, 4).len(), 5);
        assert_eq!(simplex_grid(3, 4).len(), 15);
        for p in simplex_grid(3, 8) {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bracket_examples() {
        let cfg = SystemConfig::new(1, 1, 0, 2).unwrap();
        let b = exact_min_worstcase_leakage(&cfg, None, Budget::Unbounded, 4).unwrap();
        assert!(b.contains(0.5, 1e-9), "{b:?}");
        let cfg = SystemConfig::new(2, 1, 0, 3).unwrap();
        let b = exact_min_worstcase_leakage(&cfg, None, Budget::Unbounded, 4).unwrap();
        assert!(b.contains(1.0 / 3.0, 1e-9), "{b:?}");
    }

    #[test]
    fn full_battery_leaks_nothing() {
        let cfg = SystemConfig::new(2, 1, 2, 2).unwrap();
        let b = exact_min_worstcase_leakage(&cfg, None, Budget::Unbounded, 4).unwrap();
        assert_eq!(b.cover.len(), 1);
        assert!(b.upper.abs() < 1e-9 && b.lower == 0.0);
    }

    #[test]
    fn channel_is_feasible_and_matches_upper() {
        let cfg = SystemConfig::new(1, 1, 0, 3).unwrap();
        let b = exact_min_worstcase_leakage(&cfg, None, Budget::Unbounded, 4).unwrap();
        for x in b.channel.inputs() {
            for (y, _) in b.channel.row(x).unwrap() {
                assert!(crate::model::is_feasible(&cfg, 0, x, y).unwrap());
            }
        }
        let cap = capacity(&b.channel, 1e-10).unwrap();
        assert!(cap.upper_bits / 3.0 <= b.upper + 1e-9);
    }

    #[test]
    fn zero_budget_forces_optimal_bill() {
        let cfg = SystemConfig::new(1, 1, 1, 2).unwrap();
        let tariff = TariffSchedule::expand(
            &[
                crate::tariff::PriceBlock::new(2.0, 1),
                crate::tariff::PriceBlock::new(1.0, 1),
            ],
            2,
        )
        .unwrap();
        let free = exact_min_worstcase_leakage(&cfg, Some(&tariff), Budget::Unbounded, 4).unwrap();
        let tight =
            exact_min_worstcase_leakage(&cfg, Some(&tariff), Budget::Finite(0.0), 4).unwrap();
        assert_eq!(tight.lower, free.lower);
        assert!(tight.upper >= tight.lower - 1e-9);
        assert!(
            crate::tariff::is_delta_affordable(&cfg, &tariff, &tight.channel, 0.0, None).unwrap()
        );
    }

    #[test]
    fn rejects_large_instances() {
        let cfg = SystemConfig::new(2, 1, 0, 4).unwrap();
        assert!(matches!(
            exact_min_worstcase_leakage(&cfg, None, Budget::Unbounded, 4),
            Err(Error::InstanceTooLarge { .. })
        ));
        let cfg = SystemConfig::new(1, 1, 0, 2).unwrap();
        assert!(exact_min_worstcase_leakage(&cfg, None, Budget::Finite(1.0), 4).is_err());
    }
}

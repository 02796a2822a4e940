//! Min-max program over battery states at market transition times.
//!
//! The unknown is a channel from boundary-state vectors `w` (states at the
//! `K` transition times after the start) to boundary-state vectors `v`,
//! each row spending at most `delta` above the cheapest boundary vector.
//! The objective is the capacity of the induced channel `w -> v - w`.
//!
//! Capacity is convex in the channel and the constraint set is a product
//! of polytopes, so min-max equals max-min. The solver alternates a
//! rate-distortion style best response for the channel with a
//! Blahut-Arimoto step for the input law and stops once the certified
//! upper bound (capacity of the current channel) and the certified lower
//! bound (a Lagrangian dual bound for the current input law) are within
//! `tol` bits per step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::oracle::info::blahut_arimoto_partial;

/// Cap on `(beta + 1)^(K + 1)`.
pub const JOINT_STATE_GUARD: usize = 10_000;

/// Cap on the number of dense channel entries.
const CHANNEL_ENTRY_GUARD: usize = 4_000_000;

/// Floor mixed into the output law so every difference stays reachable.
const OUTPUT_FLOOR: f64 = 1e-14;

const INNER_STEPS: usize = 4;
const CHECK_EVERY: usize = 8;
const UPPER_MAX_ITER: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Target gap between the certified bounds, in bits per step.
    pub tol: f64,
    /// Iteration cap per restart.
    pub max_iter: usize,
    /// Random restarts after the uniform start.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-6,
            max_iter: 20_000,
            restarts: 8,
            seed: 0x5eed,
        }
    }
}

/// Channel over boundary-state vectors; row `i` belongs to `states[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryChannel {
    pub states: Vec<Vec<i64>>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaSolution {
    /// Capacity of `channel` divided by `n`: a certified upper bound.
    pub value: f64,
    /// Certified lower bound on the program value, bits per step.
    pub lower: f64,
    pub iterations: usize,
    pub restarts_run: usize,
    pub seed: u64,
    /// True when the value came from a closed form rather than the solver.
    pub closed_form: bool,
    pub channel: BoundaryChannel,
}

impl GammaSolution {
    pub fn gap(&self) -> f64 {
        (self.value - self.lower).max(0.0)
    }
}

/// The program for one tariff and battery.
#[derive(Debug, Clone)]
pub(crate) struct BoundaryProgram {
    n: usize,
    /// Boundary vectors in mixed radix `beta + 1`.
    states: Vec<Vec<i64>>,
    /// Excess cost of each boundary vector over the cheapest one.
    costs: Vec<f64>,
    /// `v - w` encoded in radix `2 beta + 1` is `enc[v] - enc[w] + offset`.
    enc: Vec<usize>,
    offset: usize,
    n_diff: usize,
}

/// Per-row best response to an output law.
struct Response {
    rows: Vec<Vec<f64>>,
    /// `-log Z_x - mu_x * delta` per row, in nats.
    dual_terms: Vec<f64>,
}

impl BoundaryProgram {
    /// `deltas` are the price differences at the transition times after
    /// the start; the first entry of the full difference vector multiplies
    /// the fixed initial state and drops out.
    pub(crate) fn new(beta: i64, deltas: &[f64], n: usize) -> Result<Self> {
        let k = deltas.len();
        let side = (beta + 1) as usize;
        let joint = (side as f64).powi(k as i32 + 1);
        if joint > JOINT_STATE_GUARD as f64 {
            return Err(Error::InstanceTooLarge {
                what: "boundary-state program",
                reason: format!("(beta + 1)^(K + 1) = {joint} > {JOINT_STATE_GUARD}"),
            });
        }
        let m = side.pow(k as u32);
        if m * m > CHANNEL_ENTRY_GUARD {
            return Err(Error::InstanceTooLarge {
                what: "boundary-state program",
                reason: format!("{m} x {m} channel entries"),
            });
        }
        let base = 2 * side - 1;
        let mut states = Vec::with_capacity(m);
        let mut costs = Vec::with_capacity(m);
        let mut enc = Vec::with_capacity(m);
        for idx in 0..m {
            let mut rest = idx;
            let mut s = Vec::with_capacity(k);
            let mut e = 0usize;
            let mut weight = 1usize;
            let mut cost = 0.0;
            for d in deltas {
                let v = (rest % side) as i64;
                rest /= side;
                // Each term is exactly zero at its own minimizer.
                cost += if *d < 0.0 {
                    -d * (beta - v) as f64
                } else {
                    d * v as f64
                };
                e += v as usize * weight;
                weight *= base;
                s.push(v);
            }
            states.push(s);
            costs.push(cost);
            enc.push(e);
        }
        let offset = (0..k).map(|j| beta as usize * base.pow(j as u32)).sum();
        Ok(BoundaryProgram {
            n,
            states,
            costs,
            enc,
            offset,
            n_diff: base.pow(k as u32),
        })
    }

    pub(crate) fn max_cost(&self) -> f64 {
        self.costs.iter().cloned().fold(0.0, f64::max)
    }

    fn m(&self) -> usize {
        self.states.len()
    }

    fn diff(&self, w: usize, v: usize) -> usize {
        self.enc[v] + self.offset - self.enc[w]
    }

    /// Rows of the difference channel as sparse (difference, probability).
    fn diff_rows(&self, rows: &[Vec<f64>]) -> Vec<Vec<(usize, f64)>> {
        rows.iter()
            .enumerate()
            .map(|(w, row)| {
                row.iter()
                    .enumerate()
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(v, p)| (self.diff(w, v), *p))
                    .collect()
            })
            .collect()
    }

    fn output_law(&self, p: &[f64], rows: &[Vec<f64>]) -> Vec<f64> {
        let mut q = vec![0.0; self.n_diff];
        for (w, row) in rows.iter().enumerate() {
            if p[w] == 0.0 {
                continue;
            }
            for (v, prob) in row.iter().enumerate() {
                q[self.diff(w, v)] += p[w] * prob;
            }
        }
        q
    }

    /// Certified upper bound on the capacity of `rows`, bits (not per step).
    fn capacity_upper(&self, rows: &[Vec<f64>], tol_bits: f64) -> f64 {
        // The bound is valid whether or not the run converged.
        let (raw, _) =
            blahut_arimoto_partial(&self.diff_rows(rows), self.n_diff, tol_bits, UPPER_MAX_ITER);
        raw.upper_bits
    }

    /// For each row, the law proportional to `r(v - w) exp(-mu g(v))` with
    /// the smallest `mu >= 0` meeting the budget. At a zero budget the row
    /// is restricted to zero-cost vectors.
    fn respond(&self, r: &[f64], delta: f64) -> Response {
        let m = self.m();
        let mut rows = Vec::with_capacity(m);
        let mut dual_terms = Vec::with_capacity(m);
        for w in 0..m {
            let base: Vec<f64> = (0..m).map(|v| r[self.diff(w, v)]).collect();
            let (row, z, mu) = if delta <= 0.0 {
                let wts: Vec<f64> = base
                    .iter()
                    .zip(&self.costs)
                    .map(|(b, g)| if *g <= 0.0 { *b } else { 0.0 })
                    .collect();
                let z: f64 = wts.iter().sum();
                (wts, z, 0.0)
            } else {
                let tilt = |mu: f64| -> (Vec<f64>, f64, f64) {
                    let wts: Vec<f64> = base
                        .iter()
                        .zip(&self.costs)
                        .map(|(b, g)| b * (-mu * g).exp())
                        .collect();
                    let z: f64 = wts.iter().sum();
                    let e: f64 = wts.iter().zip(&self.costs).map(|(w, g)| w * g).sum::<f64>() / z;
                    (wts, z, e)
                };
                let (wts, z, e) = tilt(0.0);
                if e <= delta {
                    (wts, z, 0.0)
                } else {
                    let mut hi = 1.0;
                    while tilt(hi).2 > delta && hi < 1e300 {
                        hi *= 2.0;
                    }
                    let mut lo = 0.0;
                    for _ in 0..100 {
                        let mid = 0.5 * (lo + hi);
                        if tilt(mid).2 > delta {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    let (wts, z, _) = tilt(hi);
                    (wts, z, hi)
                }
            };
            dual_terms.push(-z.ln() - mu * delta.max(0.0));
            rows.push(row.into_iter().map(|v| v / z).collect());
        }
        Response { rows, dual_terms }
    }

    /// Lagrangian lower bound on `min_W I(p, W)` over budget-feasible `W`,
    /// in nats: `sum_x p(x) (-log Z_x - mu_x delta) - log max_d t(d)` with
    /// `t(d) = sum_x p(x) W(x + d | x) / r(d)`.
    fn dual_bound(&self, p: &[f64], r: &[f64], resp: &Response) -> f64 {
        let mut t = vec![0.0; self.n_diff];
        let mut first = 0.0;
        for (w, row) in resp.rows.iter().enumerate() {
            if p[w] == 0.0 {
                continue;
            }
            first += p[w] * resp.dual_terms[w];
            for (v, prob) in row.iter().enumerate() {
                let d = self.diff(w, v);
                if *prob > 0.0 {
                    t[d] += p[w] * prob / r[d];
                }
            }
        }
        let t_max = t.iter().cloned().fold(0.0, f64::max);
        first - t_max.ln()
    }

    /// Channel keeping every boundary vector as it is. Zero leakage, and
    /// within budget once `delta` reaches the largest excess cost.
    pub(crate) fn identity(&self) -> BoundaryChannel {
        let m = self.m();
        BoundaryChannel {
            states: self.states.clone(),
            rows: (0..m)
                .map(|w| (0..m).map(|v| if v == w { 1.0 } else { 0.0 }).collect())
                .collect(),
        }
    }

    pub(crate) fn solve(&self, delta: f64, opts: &SolverOptions) -> Result<GammaSolution> {
        let m = self.m();
        let n = self.n as f64;
        if m == 1 || delta >= self.max_cost() - 1e-12 {
            return Ok(GammaSolution {
                value: 0.0,
                lower: 0.0,
                iterations: 0,
                restarts_run: 0,
                seed: opts.seed,
                closed_form: true,
                channel: self.identity(),
            });
        }
        let ln2 = std::f64::consts::LN_2;
        // Work on unnormalized bits; the tolerance is per step.
        let tol_bits = opts.tol * n;
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut best_upper = f64::INFINITY;
        let mut best_rows: Option<Vec<Vec<f64>>> = None;
        let mut best_lower = 0.0f64;
        let mut iterations = 0;
        for restart in 0..=opts.restarts {
            let mut p: Vec<f64> = if restart == 0 {
                vec![1.0 / m as f64; m]
            } else {
                // Flat Dirichlet draw.
                let e: Vec<f64> = (0..m).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
                let s: f64 = e.iter().sum();
                e.into_iter().map(|v| v / s).collect()
            };
            let mut r = vec![1.0 / self.n_diff as f64; self.n_diff];
            for it in 1..=opts.max_iter {
                iterations += 1;
                let mut resp = self.respond(&r, delta);
                for _ in 1..INNER_STEPS {
                    r = floored(self.output_law(&p, &resp.rows));
                    resp = self.respond(&r, delta);
                }
                if it == 1 || it % CHECK_EVERY == 0 {
                    let lower = self.dual_bound(&p, &r, &resp) / ln2;
                    best_lower = best_lower.max(lower);
                    let upper = self.capacity_upper(&resp.rows, tol_bits / 4.0);
                    if upper < best_upper {
                        best_upper = upper;
                        best_rows = Some(resp.rows.clone());
                    }
                    if best_upper - best_lower <= tol_bits {
                        return Ok(self.solution(
                            best_upper,
                            best_lower,
                            best_rows.expect("set with best_upper"),
                            iterations,
                            restart + 1,
                            opts.seed,
                        ));
                    }
                }
                // Blahut-Arimoto step on the input law for the current channel.
                let q = self.output_law(&p, &resp.rows);
                let div: Vec<f64> = resp
                    .rows
                    .iter()
                    .enumerate()
                    .map(|(w, row)| {
                        row.iter()
                            .enumerate()
                            .filter(|(_, pr)| **pr > 0.0)
                            .map(|(v, pr)| {
                                pr * (pr / q[self.diff(w, v)].max(f64::MIN_POSITIVE)).ln()
                            })
                            .sum()
                    })
                    .collect();
                let top = div.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for (pw, d) in p.iter_mut().zip(&div) {
                    *pw *= (d - top).exp();
                    total += *pw;
                }
                for pw in p.iter_mut() {
                    *pw /= total;
                }
                r = floored(self.output_law(&p, &resp.rows));
            }
        }
        Err(Error::NonConvergence {
            iterations,
            gap: (best_upper - best_lower) / n,
        })
    }

    fn solution(
        &self,
        upper: f64,
        lower: f64,
        rows: Vec<Vec<f64>>,
        iterations: usize,
        restarts_run: usize,
        seed: u64,
    ) -> GammaSolution {
        let n = self.n as f64;
        GammaSolution {
            value: upper.max(0.0) / n,
            lower: lower.clamp(0.0, upper.max(0.0)) / n,
            iterations,
            restarts_run,
            seed,
            closed_form: false,
            channel: BoundaryChannel {
                states: self.states.clone(),
                rows,
            },
        }
    }

    /// Capacity of an arbitrary channel in bits per step, if every row is
    /// within budget; `None` otherwise.
    #[cfg(test)]
    pub(crate) fn evaluate(&self, rows: &[Vec<f64>], delta: f64) -> Option<f64> {
        for row in rows {
            let cost: f64 = row.iter().zip(&self.costs).map(|(p, g)| p * g).sum();
            if cost > delta + 1e-12 {
                return None;
            }
        }
        let (raw, _) = blahut_arimoto_partial(
            &self.diff_rows(rows),
            self.n_diff,
            1e-10,
            crate::oracle::info::CAPACITY_MAX_ITER,
        );
        Some(raw.bits / self.n as f64)
    }

    #[cfg(test)]
    pub(crate) fn num_states(&self) -> usize {
        self.m()
    }
}

fn floored(q: Vec<f64>) -> Vec<f64> {
    let k = q.len() as f64;
    q.into_iter()
        .map(|v| (1.0 - OUTPUT_FLOOR) * v + OUTPUT_FLOOR / k)
        .collect()
}

use std::fmt::Write as _;

use meterguard_core::oracle::exact_min_worstcase_leakage;
use meterguard_core::{
    apply_covering_policy, battery_trajectory, covering_codebook, delta_max, i_infty_bounds,
    is_feasible, linear_grid, optimal_bill, sweep_bounds, BlockChoice, BoundReport, Budget,
    InfinityBounds, SolverOptions, StateInterval,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::trace::Trace;

pub const BOUNDS_HEADER: &str = "delta,i_inf_lower,i_inf_upper,i_gamma,upper_thm4,single_letter";
pub const SIMULATE_HEADER: &str = "step,timestamp,x,y,state,block,choice";
pub const BILL_HEADER: &str = "step,timestamp,x,y_star,state";

/// One budget in a `--delta-grid` list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridPoint {
    Value(f64),
    /// The budget above which cost never binds.
    Max,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    /// Evenly spaced from 0 to `delta_max`.
    Linear(usize),
    Points(Vec<GridPoint>),
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Linear(25)
    }
}

impl std::str::FromStr for GridSpec {
    type Err = CliError;

    /// `linear:25`, or a comma list of numbers, `max` and `inf`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(count) = s.strip_prefix("linear:") {
            return count
                .trim()
                .parse()
                .map(GridSpec::Linear)
                .map_err(|_| CliError::Config(format!("bad grid count in {s:?}")));
        }
        s.split(',')
            .map(|tok| match tok.trim() {
                "max" => Ok(GridPoint::Max),
                "inf" | "infinity" => Ok(GridPoint::Unbounded),
                t => t
                    .parse::<f64>()
                    .ok()
                    .filter(|v| *v >= 0.0)
                    .map(GridPoint::Value)
                    .ok_or_else(|| CliError::Config(format!("bad budget {t:?} in delta grid"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(GridSpec::Points)
    }
}

impl GridSpec {
    pub fn budgets(&self, rc: &RunConfig) -> Result<Vec<Budget>> {
        let cfg = rc.system()?;
        let tariff = rc.tariff()?;
        let dmax = delta_max(&cfg, &tariff);
        Ok(match self {
            GridSpec::Linear(count) => linear_grid(&cfg, &tariff, *count),
            GridSpec::Points(points) => points
                .iter()
                .map(|p| match p {
                    GridPoint::Value(v) => Budget::Finite(*v),
                    GridPoint::Max => Budget::Finite(dmax),
                    GridPoint::Unbounded => Budget::Unbounded,
                })
                .collect(),
        })
    }
}

fn fmt_budget(b: Budget) -> String {
    match b {
        Budget::Unbounded => "inf".into(),
        Budget::Finite(d) => format!("{d}"),
    }
}

#[derive(Debug, Clone)]
pub struct BoundsRun {
    pub rows: Vec<BoundReport>,
    pub seed: u64,
    /// Single-letter bound at zero budget.
    pub headline: f64,
}

impl BoundsRun {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.i_gamma.is_err()).count()
    }

    /// Solver columns are left empty on rows where the solver failed.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(BOUNDS_HEADER);
        out.push('\n');
        for r in &self.rows {
            let (gamma, upper) = match (&r.i_gamma, r.upper_thm4()) {
                (Ok(g), Some(u)) => (format!("{}", g.value), format!("{u}")),
                _ => (String::new(), String::new()),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_budget(r.delta),
                r.i_inf_lower,
                r.i_inf_upper,
                gamma,
                upper,
                r.single_letter
            );
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut s = format!("I(0) single-letter bound: {:.5} bits/step\n", self.headline);
        let _ = writeln!(s, "solver seed: {}", self.seed);
        for r in &self.rows {
            if let Err(e) = &r.i_gamma {
                let _ = writeln!(s, "delta {}: {e}", fmt_budget(r.delta));
            }
        }
        s
    }
}

pub fn cmd_bounds(rc: &RunConfig, grid: &GridSpec, opts: &SolverOptions) -> Result<BoundsRun> {
    let cfg = rc.system()?;
    let tariff = rc.tariff()?;
    let budgets = grid.budgets(rc)?;
    let rows = sweep_bounds(&cfg, &tariff, &budgets, opts)?;
    let headline = meterguard_core::single_letter_bound(&cfg, &tariff, Budget::Finite(0.0))?;
    Ok(BoundsRun {
        rows,
        seed: opts.seed,
        headline,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationStep {
    pub step: usize,
    pub timestamp: String,
    pub x: i64,
    pub y: i64,
    /// State after the step.
    pub state: i64,
    /// Block index, or `None` inside the head.
    pub block: Option<usize>,
    pub choice: Option<BlockChoice>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub steps: usize,
    pub feasible: bool,
    pub bill: Option<f64>,
    pub optimal_bill: Option<f64>,
    pub cost_g: Option<f64>,
    pub bill_without_battery: Option<f64>,
    pub kappa: usize,
    pub leaked_bits: usize,
    pub leaked_bits_per_day: f64,
    pub choices: Vec<BlockChoice>,
    /// Energy dropped by quantization, in units.
    pub residual_units: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub steps: Vec<SimulationStep>,
    pub summary: SimulationSummary,
}

impl Simulation {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SIMULATE_HEADER);
        out.push('\n');
        for s in &self.steps {
            let block = s.block.map(|b| b.to_string()).unwrap_or_default();
            let choice = match s.choice {
                Some(BlockChoice::Idle) => "idle",
                Some(BlockChoice::Depleting) => "depleting",
                None => "head",
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.step, s.timestamp, s.x, s.y, s.state, block, choice
            );
        }
        out
    }
}

fn check_trace_len(n: usize, trace: &Trace) -> Result<()> {
    if trace.rows.len() != n {
        return Err(CliError::Trace(format!(
            "trace has {} rows, horizon is {n}",
            trace.rows.len()
        )));
    }
    Ok(())
}

/// Runs the covering policy on a trace and attests the result.
pub fn cmd_simulate(rc: &RunConfig, trace: &Trace) -> Result<Simulation> {
    let cfg = rc.system()?;
    check_trace_len(cfg.n, trace)?;
    let q = trace.quantize(rc.unit_kwh, cfg.alpha)?;
    let book = covering_codebook(&cfg, StateInterval::single(cfg.s0))?;
    let run = apply_covering_policy(&cfg, &book, cfg.s0, &q.x)?;
    let feasible = is_feasible(&cfg, cfg.s0, &q.x, &run.request)?;
    if !feasible {
        return Err(CliError::Infeasible(format!("{:?}", run.request.to_vec())));
    }
    let states = battery_trajectory(cfg.s0, &q.x, &run.request)?.states;
    let head = book.head.len();
    let steps = (0..cfg.n)
        .map(|i| {
            let block = (i >= head).then(|| (i - head) / book.block_len);
            SimulationStep {
                step: i,
                timestamp: trace.rows[i].timestamp.clone(),
                x: q.x[i],
                y: run.request[i],
                state: states[i + 1],
                block,
                choice: block.map(|b| run.choices[b]),
            }
        })
        .collect();
    let (bill, optimal, without) = if rc.has_tariff() {
        let tariff = rc.tariff()?;
        (
            Some(tariff.bill(&run.request)?),
            Some(optimal_bill(&cfg, &tariff, &q.x)?.bill),
            Some(tariff.bill(&q.x)?),
        )
    } else {
        (None, None, None)
    };
    let leaked = book.log2_size();
    let summary = SimulationSummary {
        steps: cfg.n,
        feasible,
        bill,
        optimal_bill: optimal,
        cost_g: bill.zip(optimal).map(|(b, o)| b - o),
        bill_without_battery: without,
        kappa: book.kappa,
        leaked_bits: leaked,
        leaked_bits_per_day: leaked as f64 * rc.steps_per_day() / cfg.n as f64,
        choices: run.choices,
        residual_units: q.residual,
    };
    Ok(Simulation { steps, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BillReport {
    pub x: Vec<i64>,
    pub y_star: Vec<i64>,
    pub states: Vec<i64>,
    pub timestamps: Vec<String>,
    pub bill: f64,
    pub bill_without_battery: f64,
    pub savings: f64,
    /// Largest excess over the optimum any feasible policy can incur.
    pub delta_headroom: f64,
}

impl BillReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(BILL_HEADER);
        out.push('\n');
        for i in 0..self.x.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                i,
                self.timestamps[i],
                self.x[i],
                self.y_star[i],
                self.states[i + 1]
            );
        }
        out
    }
}

pub fn cmd_bill(rc: &RunConfig, trace: &Trace) -> Result<BillReport> {
    let cfg = rc.system()?;
    let tariff = rc.tariff()?;
    check_trace_len(cfg.n, trace)?;
    let q = trace.quantize(rc.unit_kwh, cfg.alpha)?;
    let opt = optimal_bill(&cfg, &tariff, &q.x)?;
    let states = battery_trajectory(cfg.s0, &q.x, &opt.request)?.states;
    let without = tariff.bill(&q.x)?;
    Ok(BillReport {
        x: q.x.to_vec(),
        y_star: opt.request.to_vec(),
        states,
        timestamps: trace.rows.iter().map(|r| r.timestamp.clone()).collect(),
        bill: opt.bill,
        bill_without_battery: without,
        savings: without - opt.bill,
        delta_headroom: delta_max(&cfg, &tariff),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub upper: f64,
    pub lower: f64,
    pub closed_form: InfinityBounds,
    pub budget: String,
    pub resolution: usize,
    pub cover_size: usize,
    pub packing_size: usize,
    /// The bracket meets the closed-form interval.
    pub pass: bool,
}

impl OracleReport {
    pub fn summary(&self) -> String {
        format!(
            "bracket: [{:.6}, {:.6}] bits/step\nclosed form: [{:.6}, {:.6}]\ncover: {} requests, packing: {} inputs\n{}\n",
            self.lower,
            self.upper,
            self.closed_form.lower,
            self.closed_form.upper,
            self.cover_size,
            self.packing_size,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

/// The budget comes from a single-point grid; without one it is unbounded.
pub fn cmd_oracle(
    rc: &RunConfig,
    grid: Option<&GridSpec>,
    resolution: usize,
    slack: f64,
) -> Result<OracleReport> {
    let cfg = rc.system()?;
    let budget = match grid {
        None => Budget::Unbounded,
        Some(g) => match g.budgets(rc)?.as_slice() {
            [b] => *b,
            other => {
                return Err(CliError::Config(format!(
                    "oracle takes one budget, grid has {}",
                    other.len()
                )))
            }
        },
    };
    let tariff = if rc.has_tariff() {
        Some(rc.tariff()?)
    } else {
        None
    };
    let bracket = exact_min_worstcase_leakage(&cfg, tariff.as_ref(), budget, resolution)?;
    let closed_form = i_infty_bounds(&cfg);
    let pass = match budget {
        Budget::Unbounded => {
            bracket.lower <= closed_form.upper + slack && closed_form.lower <= bracket.upper + slack
        }
        // A budget can only raise the leakage.
        Budget::Finite(_) => bracket.upper + slack >= closed_form.lower,
    };
    Ok(OracleReport {
        upper: bracket.upper,
        lower: bracket.lower,
        closed_form,
        budget: fmt_budget(budget),
        resolution,
        cover_size: bracket.cover.len(),
        packing_size: bracket.packing.len(),
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodebookDump {
    pub beta: i64,
    pub alpha: i64,
    pub n: usize,
    pub initial_states: StateInterval,
    /// Nominal head length.
    pub l: usize,
    pub lambda: usize,
    pub kappa: usize,
    pub last_block_len: usize,
    pub head: Vec<i64>,
    pub pair: CodebookPair,
    pub log2_size: usize,
    pub predicate: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodebookPair {
    pub idle: Vec<i64>,
    pub depleting: Vec<i64>,
}

pub fn cmd_codebook(rc: &RunConfig) -> Result<CodebookDump> {
    let cfg = rc.system()?;
    let book = covering_codebook(&cfg, StateInterval::single(cfg.s0))?;
    Ok(CodebookDump {
        beta: book.beta,
        alpha: book.alpha,
        n: book.n,
        initial_states: book.initial_states,
        l: book.head_len_nominal,
        lambda: book.block_len,
        kappa: book.kappa,
        last_block_len: book.last_block_len,
        head: book.head.to_vec(),
        pair: CodebookPair {
            idle: book.idle.to_vec(),
            depleting: book.depleting.to_vec(),
        },
        log2_size: book.log2_size(),
        predicate: "block uses `depleting` iff the state at the block start minus the block's consumption is negative, otherwise `idle`".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(
            "linear:25".parse::<GridSpec>().unwrap(),
            GridSpec::Linear(25)
        );
        assert_eq!(
            "0, 0.5,max,inf".parse::<GridSpec>().unwrap(),
            GridSpec::Points(vec![
                GridPoint::Value(0.0),
                GridPoint::Value(0.5),
                GridPoint::Max,
                GridPoint::Unbounded
            ])
        );
        assert!("linear:x".parse::<GridSpec>().is_err());
        assert!("-1".parse::<GridSpec>().is_err());
        assert!("".parse::<GridSpec>().is_err());
    }
}

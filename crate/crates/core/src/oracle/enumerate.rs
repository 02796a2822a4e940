//! Exhaustive enumeration of consumption sequences and feasible requests.

use crate::error::{Error, Result};
use crate::model::{check_len, ConsumptionSeq, RequestSeq, StateInterval, SystemConfig};

/// Default cap on the number of candidate request sequences.
pub const ENUMERATION_GUARD: f64 = 1e7;

/// Cap on `|X|^n` for exhaustive quantification over consumption sequences.
pub const INPUT_ENUMERATION_GUARD: f64 = 1e6;

/// Every consumption sequence in `[0, alpha]^len`, lexicographic order.
pub fn all_consumptions(alpha: i64, len: usize) -> Result<Vec<ConsumptionSeq>> {
    let size = ((alpha + 1) as f64).powi(len as i32);
    if size > INPUT_ENUMERATION_GUARD {
        return Err(Error::GuardExceeded {
            size,
            limit: INPUT_ENUMERATION_GUARD,
        });
    }
    Ok(product(0, alpha, len)
        .into_iter()
        .map(ConsumptionSeq::new)
        .collect())
}

/// Cartesian power of `[lo, hi]`, lexicographic order.
pub(crate) fn product(lo: i64, hi: i64, len: usize) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::with_capacity(len)];
    for _ in 0..len {
        let mut next = Vec::with_capacity(out.len() * (hi - lo + 1) as usize);
        for prefix in &out {
            for v in lo..=hi {
                let mut p = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// All requests `y` keeping every state in `[0, beta]`, optionally with the
/// final state constrained to `terminal`. Lexicographic order.
pub fn enumerate_feasible(
    cfg: &SystemConfig,
    s0: i64,
    x: &[i64],
    terminal: Option<StateInterval>,
) -> Result<Vec<RequestSeq>> {
    enumerate_feasible_with_guard(cfg, s0, x, terminal, ENUMERATION_GUARD)
}

pub fn enumerate_feasible_with_guard(
    cfg: &SystemConfig,
    s0: i64,
    x: &[i64],
    terminal: Option<StateInterval>,
    guard: f64,
) -> Result<Vec<RequestSeq>> {
    let size = (cfg.request_alphabet_size() as f64).powi(x.len() as i32);
    if size > guard {
        return Err(Error::GuardExceeded { size, limit: guard });
    }
    if !(0..=cfg.beta).contains(&s0) {
        return Ok(vec![]);
    }
    let mut out = Vec::new();
    let mut y = Vec::with_capacity(x.len());
    descend(cfg, x, terminal, s0, &mut y, &mut out);
    Ok(out)
}

fn descend(
    cfg: &SystemConfig,
    x: &[i64],
    terminal: Option<StateInterval>,
    state: i64,
    y: &mut Vec<i64>,
    out: &mut Vec<RequestSeq>,
) {
    let i = y.len();
    if i == x.len() {
        if terminal.map_or(true, |t| t.contains(state)) {
            out.push(RequestSeq::new(y.clone()));
        }
        return;
    }
    for v in cfg.y_min..=cfg.y_max {
        let next = state + v - x[i];
        if (0..=cfg.beta).contains(&next) {
            y.push(v);
            descend(cfg, x, terminal, next, y, out);
            y.pop();
        }
    }
}

/// Checks a horizon-length consumption against the configuration and
/// enumerates its feasible requests.
pub(crate) fn feasible_for(
    cfg: &SystemConfig,
    s0: i64,
    x: &ConsumptionSeq,
) -> Result<Vec<RequestSeq>> {
    check_len(cfg.n, x.len())?;
    enumerate_feasible(cfg, s0, x, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_battery_pins_request() {
        let cfg = SystemConfig::new(0, 2, 0, 3).unwrap();
        let ys = enumerate_feasible(&cfg, 0, &[2, 0, 1], None).unwrap();
        assert_eq!(ys, vec![RequestSeq::new(vec![2, 0, 1])]);
    }

    #[test]
    fn single_step_examples() {
        let cfg = SystemConfig::new(1, 1, 0, 1).unwrap();
        assert_eq!(
            enumerate_feasible(&cfg, 0, &[1], None).unwrap(),
            vec![RequestSeq::new(vec![1])]
        );
        assert_eq!(
            enumerate_feasible(&cfg, 1, &[1], None).unwrap(),
            vec![RequestSeq::new(vec![0]), RequestSeq::new(vec![1])]
        );
    }

    #[test]
    fn terminal_constraint_filters() {
        let cfg = SystemConfig::new(1, 1, 0, 1).unwrap();
        let ys = enumerate_feasible(&cfg, 1, &[1], Some(StateInterval::single(1))).unwrap();
        assert_eq!(ys, vec![RequestSeq::new(vec![1])]);
    }

    #[test]
    fn guard_is_enforced() {
        let cfg = SystemConfig::new(2, 1, 0, 30)
            .unwrap()
            .with_request_range(-2, 3)
            .unwrap();
        let x = vec![0; 30];
        assert!(matches!(
            enumerate_feasible(&cfg, 0, &x, None),
            Err(Error::GuardExceeded { .. })
        ));
    }

    #[test]
    fn product_counts() {
        assert_eq!(product(0, 2, 3).len(), 27);
        assert_eq!(all_consumptions(1, 4).unwrap().len(), 16);
    }
}

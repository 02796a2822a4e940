//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero on failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use meterguard_cli::{cmd_bounds, GridSpec, RunConfig};
use meterguard_core::oracle::{
    all_consumptions, capacity, enumerate_feasible, exact_mi, exact_min_worstcase_leakage,
    FiniteChannel, FiniteDistribution,
};
use meterguard_core::tariff::exhaustive_optimal_bill;
use meterguard_core::{
    apply_covering_policy, covering_codebook, delta_max, distance, i_gamma, i_infty_bounds,
    is_feasible, optimal_bill, packing_set, policy_cost_g, reduce_cost_preserving,
    reduce_to_alphabet, shared_request, single_letter_bound, Budget, ConsumptionSeq, InputPair,
    PriceBlock, ReducedAlphabet, RequestSeq, SolverOptions, StateInterval, SystemConfig,
    TariffSchedule,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ECONOMY7: &str = r#"
unit_kwh = 2.1
step_minutes = 30

[system]
battery_kwh = 4.2
peak_kwh = 2.1
s0 = 0
n = 48

[[tariff]]
price = 0.3192
steps = 14

[[tariff]]
price = 0.1791
steps = 34
"#;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn economy7() -> (SystemConfig, TariffSchedule) {
    let cfg = SystemConfig::new(2, 1, 0, 48).unwrap();
    let tariff = TariffSchedule::expand(
        &[PriceBlock::new(0.3192, 14), PriceBlock::new(0.1791, 34)],
        48,
    )
    .unwrap();
    (cfg, tariff)
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn headline() -> Outcome {
    let (cfg, tariff) = economy7();
    let start = Instant::now();
    let v = single_letter_bound(&cfg, &tariff, Budget::Finite(0.0)).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    check((v - 0.39938).abs() <= 1e-5, || {
        format!("I(0) = {v}, expected 0.39938")
    })?;
    check((v - 0.4).abs() <= 0.005, || {
        format!("I(0) = {v} not within 0.005 of 0.4")
    })?;
    check(took < Duration::from_secs(1), || format!("took {took:?}"))?;
    Ok(format!("I(0) = {v:.7} bits/step in {took:?}"))
}

fn infinity() -> Outcome {
    let (cfg, _) = economy7();
    let b = i_infty_bounds(&cfg);
    check(b.lower == 1.0 / 3.0 && b.upper == 1.0 / 3.0, || {
        format!("bounds ({}, {})", b.lower, b.upper)
    })?;
    let book = covering_codebook(&cfg, StateInterval::single(0)).map_err(|e| e.to_string())?;
    check(book.kappa == 16 && book.log2_size() == 16, || {
        format!("kappa {} log2 {}", book.kappa, book.log2_size())
    })?;
    check(book.log2_size() as f64 / 48.0 == 1.0 / 3.0, || {
        "log2 |V| / n".into()
    })?;
    Ok("(1/3, 1/3), kappa = 16".into())
}

fn delta_max_and_gamma() -> Outcome {
    let (cfg, tariff) = economy7();
    let opts = SolverOptions::default();
    let dmax = delta_max(&cfg, &tariff);
    check((dmax - 0.6384).abs() <= 1e-9, || {
        format!("delta_max = {dmax}")
    })?;
    let top = i_gamma(&cfg, &tariff, Budget::Finite(dmax), &opts).map_err(|e| e.to_string())?;
    check(top.value.abs() <= opts.tol, || {
        format!("i_gamma(delta_max) = {}", top.value)
    })?;
    let zero = i_gamma(&cfg, &tariff, Budget::Finite(0.0), &opts).map_err(|e| e.to_string())?;
    let cap = 2.0 / 48.0 * 3f64.log2();
    check(zero.value <= cap + 1e-6, || {
        format!("i_gamma(0) = {} > {cap}", zero.value)
    })?;
    Ok(format!(
        "delta_max = {dmax}, i_gamma(0) = {:.7} (gap {:.1e}), i_gamma(max) = {}",
        zero.value,
        zero.gap(),
        top.value
    ))
}

fn oracle_brackets() -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    for n in [2usize, 3] {
        for beta in [1i64, 2] {
            let cfg = SystemConfig::new(beta, 1, 0, n).unwrap();
            let exact = i_infty_bounds(&cfg);
            check(exact.lower == exact.upper, || {
                format!("n={n} beta={beta}: bounds differ")
            })?;
            let bracket = exact_min_worstcase_leakage(&cfg, None, Budget::Unbounded, 4)
                .map_err(|e| e.to_string())?;
            check(bracket.contains(exact.upper, 1e-9), || {
                format!(
                    "n={n} beta={beta}: [{}, {}] misses {}",
                    bracket.lower, bracket.upper, exact.upper
                )
            })?;

            let book =
                covering_codebook(&cfg, StateInterval::single(0)).map_err(|e| e.to_string())?;
            let xs = all_consumptions(1, n).unwrap();
            let ch = FiniteChannel::deterministic(xs, |x| {
                Ok(apply_covering_policy(&cfg, &book, 0, x)?.request)
            })
            .map_err(|e| e.to_string())?;
            let cap = capacity(&ch, 1e-12).map_err(|e| e.to_string())?;
            check(cap.bits / n as f64 <= bracket.upper + 1e-9, || {
                format!("n={n} beta={beta}: covering leaks {}", cap.bits)
            })?;

            let set = packing_set(&cfg, 0, n, cfg.states()).map_err(|e| e.to_string())?;
            let members = set.members().map_err(|e| e.to_string())?;
            let packing = FiniteChannel::deterministic(members.clone(), |w| {
                Ok(apply_covering_policy(&cfg, &book, 0, w)?.request)
            })
            .map_err(|e| e.to_string())?;
            let mi = exact_mi(
                &FiniteDistribution::uniform(members.clone()).unwrap(),
                &packing,
            )
            .map_err(|e| e.to_string())?;
            let want = (members.len() as f64).log2();
            check((mi - want).abs() < 1e-12, || {
                format!("n={n} beta={beta}: packing MI {mi} vs {want}")
            })?;
            lines.push(format!(
                "n={n} b={beta} [{:.4},{:.4}]",
                bracket.lower, bracket.upper
            ));
        }
    }
    let took = start.elapsed();
    check(took < Duration::from_secs(120), || format!("took {took:?}"))?;
    Ok(format!("{} in {took:?}", lines.join("; ")))
}

fn shared_requests() -> Outcome {
    let mut sets = 0u64;
    for n in 1..=4 {
        for beta in 0..=2 {
            for alpha in 1..=2 {
                let cfg = SystemConfig::new(beta, alpha, 0, n).unwrap();
                let xs = all_consumptions(alpha, n).unwrap();
                let mut pairs = Vec::new();
                for s0 in 0..=beta {
                    for x in &xs {
                        let mask = enumerate_feasible(&cfg, s0, x, None).unwrap().iter().fold(
                            0u128,
                            |m, y| {
                                let idx = y
                                    .iter()
                                    .fold(0usize, |a, &v| a * (alpha as usize + 1) + v as usize);
                                m | 1 << idx
                            },
                        );
                        pairs.push((InputPair::new(s0, x.clone()), mask));
                    }
                }
                let m = pairs.len();
                let mut dist = vec![0i64; m * m];
                for i in 0..m {
                    for j in 0..m {
                        dist[i * m + j] = distance(&pairs[i].0, &pairs[j].0).unwrap();
                    }
                }
                let mut verify = |idx: &[usize]| -> Result<(), String> {
                    sets += 1;
                    let members: Vec<InputPair> = idx.iter().map(|&i| pairs[i].0.clone()).collect();
                    let max_d = idx
                        .iter()
                        .flat_map(|&i| idx.iter().map(move |&j| (i, j)))
                        .map(|(i, j)| dist[i * m + j])
                        .max()
                        .unwrap();
                    let common = idx.iter().fold(u128::MAX, |a, &i| a & pairs[i].1);
                    let shared = shared_request(&cfg, &members).map_err(|e| e.to_string())?;
                    if shared.is_some() != (max_d <= beta) || shared.is_some() != (common != 0) {
                        return Err(format!("violation at {members:?}"));
                    }
                    if let Some(y) = shared {
                        for p in &members {
                            if !is_feasible(&cfg, p.s0, &p.x, &y).unwrap() {
                                return Err(format!("{y:?} infeasible for {p:?}"));
                            }
                        }
                    }
                    Ok(())
                };
                for i in 0..m {
                    verify(&[i])?;
                    for j in i + 1..m {
                        verify(&[i, j])?;
                        for k in j + 1..m {
                            verify(&[i, j, k])?;
                        }
                    }
                }
            }
        }
    }
    Ok(format!("{sets} sets, 0 violations"))
}

fn all_tariffs(n: usize) -> Vec<TariffSchedule> {
    (0..1u32 << (n - 1))
        .map(|mask| {
            let mut blocks = Vec::new();
            let mut len = 1;
            for i in 0..n - 1 {
                if mask >> i & 1 == 1 {
                    blocks.push(PriceBlock::new(0.31 - 0.09 * blocks.len() as f64, len));
                    len = 1;
                } else {
                    len += 1;
                }
            }
            blocks.push(PriceBlock::new(0.31 - 0.09 * blocks.len() as f64, len));
            TariffSchedule::expand(&blocks, n).unwrap()
        })
        .collect()
}

fn reductions() -> Outcome {
    let mut triples = 0u64;
    for n in 1..=4 {
        for beta in 0..=2 {
            for alpha in 1..=2 {
                let cfg = SystemConfig::new(beta, alpha, 0, n)
                    .unwrap()
                    .with_request_range(-beta, alpha + beta + 1)
                    .unwrap();
                let matched = ReducedAlphabet::consumption_matched(&cfg);
                let tariffs = all_tariffs(n);
                for s0 in 0..=beta {
                    for x in all_consumptions(alpha, n).unwrap() {
                        for y in enumerate_feasible(&cfg, s0, &x, None).unwrap() {
                            triples += 1;
                            let z =
                                reduce_to_alphabet(&cfg, &y, matched).map_err(|e| e.to_string())?;
                            check(matched.contains_all(&z), || format!("{y:?} -> {z:?}"))?;
                            check(is_feasible(&cfg, s0, &x, &z).unwrap(), || {
                                format!("{y:?} -> {z:?} infeasible")
                            })?;
                            for tariff in &tariffs {
                                let target =
                                    ReducedAlphabet::cost_preserving(&cfg, tariff).unwrap();
                                let c = reduce_cost_preserving(&cfg, tariff, &y)
                                    .map_err(|e| e.to_string())?;
                                check(target.contains_all(&c), || format!("{y:?} -> {c:?}"))?;
                                check(
                                    tariff.bill(&c).unwrap() == tariff.bill(&y).unwrap(),
                                    || format!("bill changed for {y:?}"),
                                )?;
                            }
                        }
                    }
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..50 {
        let n = rng.gen_range(1..=3);
        let beta = rng.gen_range(1..=2);
        let cfg = SystemConfig::new(beta, 1, 0, n)
            .unwrap()
            .with_request_range(-1, 1 + beta)
            .unwrap();
        let xs = all_consumptions(1, n).unwrap();
        let rows: Vec<(ConsumptionSeq, FiniteDistribution<RequestSeq>)> = xs
            .iter()
            .map(|x| {
                let ys = enumerate_feasible(&cfg, 0, x, None).unwrap();
                let k = rng.gen_range(1..=ys.len().min(3));
                let support = rand::seq::index::sample(&mut rng, ys.len(), k)
                    .into_iter()
                    .map(|i| ys[i].clone())
                    .collect();
                let w = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
                (
                    x.clone(),
                    FiniteDistribution::from_weights(support, w).unwrap(),
                )
            })
            .collect();
        let policy = FiniteChannel::from_rows(rows).unwrap();
        let target = ReducedAlphabet::consumption_matched(&cfg);
        let reduced = policy
            .map_outputs(|y| reduce_to_alphabet(&cfg, y, target).unwrap())
            .unwrap();
        let w: Vec<f64> = xs.iter().map(|_| rng.gen_range(0.01..1.0)).collect();
        let px = FiniteDistribution::from_weights(xs.clone(), w).unwrap();
        let before = exact_mi(&px, &policy).unwrap();
        let after = exact_mi(&px, &reduced).unwrap();
        check(after <= before + 1e-12, || {
            format!("policy {trial}: {after} > {before}")
        })?;
    }
    Ok(format!("{triples} feasible triples, 50 policies"))
}

fn bills() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    for trial in 0..200 {
        let n = rng.gen_range(1..=5);
        let beta = rng.gen_range(0..=2);
        let alpha = rng.gen_range(1..=2);
        let s0 = rng.gen_range(0..=beta);
        let cfg = SystemConfig::new(beta, alpha, s0, n).unwrap();
        let cut = rng.gen_range(0..n);
        let blocks = if cut == 0 {
            vec![PriceBlock::new(rng.gen_range(0.05..0.4), n)]
        } else {
            vec![
                PriceBlock::new(rng.gen_range(0.05..0.4), cut),
                PriceBlock::new(rng.gen_range(0.05..0.4), n - cut),
            ]
        };
        let tariff = TariffSchedule::expand(&blocks, n).unwrap();
        let x = ConsumptionSeq::new((0..n).map(|_| rng.gen_range(0..=alpha)).collect());
        let dp = optimal_bill(&cfg, &tariff, &x).map_err(|e| e.to_string())?;
        let brute = exhaustive_optimal_bill(&cfg, &tariff, &x).map_err(|e| e.to_string())?;
        check((dp.bill - brute).abs() <= 1e-9, || {
            format!("instance {trial}: dp {} vs exhaustive {brute}", dp.bill)
        })?;
        check(is_feasible(&cfg, s0, &x, &dp.request).unwrap(), || {
            format!("instance {trial}: y* infeasible")
        })?;
        // Every deterministic feasible policy at this x, i.e. every feasible y.
        let ys = enumerate_feasible(&cfg, s0, &x, None).unwrap();
        let policy = FiniteChannel::from_rows(vec![(
            x.clone(),
            FiniteDistribution::uniform(ys.clone()).unwrap(),
        )])
        .unwrap();
        let g = policy_cost_g(&cfg, &tariff, &policy, &x).map_err(|e| e.to_string())?;
        check(g >= -1e-9, || format!("instance {trial}: g = {g}"))?;
        for y in &ys {
            let g = tariff.bill(y).unwrap() - dp.bill;
            worst = worst.min(g);
            check(g >= -1e-9, || {
                format!("instance {trial}: g = {g} for {y:?}")
            })?;
        }
    }
    Ok(format!("200 instances, min g = {worst:.1e}"))
}

fn sweep() -> Outcome {
    let rc = RunConfig::from_toml(ECONOMY7).map_err(|e| e.to_string())?;
    let run = cmd_bounds(&rc, &GridSpec::Linear(25), &SolverOptions::default())
        .map_err(|e| e.to_string())?;
    let csv = run.to_csv();
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    check(
        header
            == [
                "delta",
                "i_inf_lower",
                "i_inf_upper",
                "i_gamma",
                "upper_thm4",
                "single_letter",
            ],
        || format!("header {header:?}"),
    )?;
    let rows: Vec<Vec<f64>> = rdr
        .records()
        .map(|r| {
            r.unwrap()
                .iter()
                .map(|v| v.parse::<f64>().unwrap_or(f64::NAN))
                .collect()
        })
        .collect();
    check(rows.len() == 25, || format!("{} rows", rows.len()))?;
    for w in rows.windows(2) {
        check(w[1][4] <= w[0][4], || {
            format!("upper_thm4 rises: {} -> {}", w[0][4], w[1][4])
        })?;
        check(w[1][5] <= w[0][5], || {
            format!("single_letter rises: {} -> {}", w[0][5], w[1][5])
        })?;
    }
    let dmax = run.rows[0].delta_max;
    for r in &run.rows {
        if r.delta.value() >= dmax {
            check(r.upper_thm4() == Some(1.0 / 3.0), || {
                format!("upper_thm4 at {:?} = {:?}", r.delta, r.upper_thm4())
            })?;
        }
    }
    let max_run = cmd_bounds(&rc, &"max,inf".parse().unwrap(), &SolverOptions::default())
        .map_err(|e| e.to_string())?;
    for r in &max_run.rows {
        check(r.upper_thm4() == Some(1.0 / 3.0), || {
            format!("{:?}", r.upper_thm4())
        })?;
    }
    Ok(format!(
        "25 rows, upper_thm4 {:.5} -> {:.5}",
        rows[0][4], rows[24][4]
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("I(0) headline", headline),
        ("I(inf) exact for integer lambda", infinity),
        ("delta_max and I_gamma endpoints", delta_max_and_gamma),
        ("oracle brackets on tiny instances", oracle_brackets),
        ("shared-request equivalence", shared_requests),
        ("reduction properties", reductions),
        ("bill optimality", bills),
        ("monotone bounds sweep", sweep),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(msg)
        });
        let took = start.elapsed();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name} ({detail}) [{took:.2?}]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why} [{took:.2?}]", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

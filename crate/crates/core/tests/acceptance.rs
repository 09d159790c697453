//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measurements (run with `--nocapture` to see them).

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use common::{random_dag, random_strict_scores, rng};
use rand::Rng as _;

use csp_core::calibrate::{
    binomial_cdf, pac_miss_budget, run_threshold_search, GuaranteeSpec, SolvePolicy, ThresholdGrid,
};
use csp_core::domains::{
    build_digit_tree, load_hierarchy, DigitTreeSpec, GeneratorFamily, GeneratorSpec,
};
use csp_core::eval::{run_sweep, run_trials, SweepSpec};
use csp_core::setopt::{solve, solve_brute_force, SolveError, SolveRequest};
use csp_core::Dag;

/// The reference synthetic domain for the coverage criteria: the 2-digit
/// tree with a peaked Dirichlet mixture of 120 atoms.
fn coverage_domain() -> (Dag, GeneratorSpec) {
    let dag = build_digit_tree(&DigitTreeSpec {
        positions: 2,
        alphabet: 10,
    })
    .unwrap();
    let generator = GeneratorSpec {
        family: GeneratorFamily::DirichletConcentrated {
            peak_concentration: 50.0,
            noise_concentration: 0.15,
        },
        seed: 20260808,
        atoms: Some(120),
        miscalibration: 0.0,
    };
    (dag, generator)
}

#[test]
fn criterion_1_optimizer_oracle_equivalence() {
    let start = Instant::now();
    let mut mismatches = 0usize;
    for seed in 0..500u64 {
        let mut r = rng(seed.wrapping_mul(2654435761).wrapping_add(17));
        let dag = random_dag(&mut r, 12);
        let scores = random_strict_scores(&mut r, &dag);
        let tau: f64 = r.gen_range(0.0..1.0);
        let m = r.gen_range(1..=4u32);
        let req = SolveRequest::new(&dag, &scores, tau, m);
        match (solve(&req), solve_brute_force(&req)) {
            (Ok(a), Ok(b)) => {
                if a.objective != b.objective || a.set.node_ids != b.set.node_ids {
                    eprintln!("mismatch at seed {seed}: {:?} vs {:?}", a.set, b.set);
                    mismatches += 1;
                }
            }
            (Err(SolveError::Infeasible { .. }), Err(SolveError::Infeasible { .. })) => {}
            (a, b) => {
                eprintln!("feasibility mismatch at seed {seed}: {a:?} vs {b:?}");
                mismatches += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    assert_eq!(mismatches, 0, "{mismatches} oracle mismatches");
    assert!(elapsed <= Duration::from_secs(60), "took {elapsed:?}");
    println!(
        "criterion 1 optimizer oracle equivalence: PASS (500 instances, 0 mismatches, {elapsed:?})"
    );
}

#[test]
fn criterion_2_binomial_machinery() {
    // exact rational oracle over all (l, n <= 30, p in the fixed set)
    let fractions = [(1u64, 20u64), (1, 10), (1, 5), (1, 2)];
    let mut worst = 0.0f64;
    for n in 1..=30u64 {
        for l in 0..=n {
            for &(num, den) in &fractions {
                let p = num as f64 / den as f64;
                let got = binomial_cdf(l, n, p).unwrap();
                let exact = exact_cdf(l, n, num, den);
                worst = worst.max((got - exact).abs());
            }
        }
    }
    assert!(worst <= 1e-12, "worst binomial deviation {worst}");

    assert_eq!(pac_miss_budget(10, 0.5, 0.01).unwrap(), Some(0));
    assert_eq!(pac_miss_budget(1, 0.5, 0.1).unwrap(), None);

    // monotone in n over a 100-point grid
    let mut prev: Option<u64> = None;
    for i in 0..100u64 {
        let n = 10 + i * 10;
        if let Some(b) = pac_miss_budget(n, 0.1, 0.01).unwrap() {
            if let Some(p) = prev {
                assert!(b >= p, "budget not monotone in n at {n}");
            }
            prev = Some(b);
        }
    }
    // monotone in delta over a 100-point grid
    let mut prev: Option<u64> = None;
    for i in 1..=100u64 {
        let delta = i as f64 / 101.0;
        if let Some(b) = pac_miss_budget(300, 0.1, delta).unwrap() {
            if let Some(p) = prev {
                assert!(b >= p, "budget not monotone in delta at {delta}");
            }
            prev = Some(b);
        }
    }
    println!("criterion 2 binomial machinery: PASS (max |cdf error| {worst:.2e})");
}

fn exact_cdf(l: u64, n: u64, num: u64, den: u64) -> f64 {
    use num_bigint::BigUint;
    use num_traits::{One, ToPrimitive, Zero};
    let mut acc = BigUint::zero();
    let mut choose = BigUint::one();
    for j in 0..=l {
        if j > 0 {
            choose = choose * BigUint::from(n - j + 1) / BigUint::from(j);
        }
        acc += &choose
            * BigUint::from(num).pow(j as u32)
            * BigUint::from(den - num).pow((n - j) as u32);
    }
    acc.to_f64().unwrap() / BigUint::from(den).pow(n as u32).to_f64().unwrap()
}

#[test]
fn criterion_3_pac_guarantee() {
    let start = Instant::now();
    let (dag, generator) = coverage_domain();
    let guarantee = GuaranteeSpec::pac(0.1, 0.01).unwrap();
    let grid = ThresholdGrid::default_grid();
    let (summary, _) = run_trials(
        &dag,
        &generator,
        &guarantee,
        &SolvePolicy::new(4),
        &grid,
        200,
        500,
        43,
    )
    .unwrap();
    let elapsed = start.elapsed();
    let bound = 0.01 + 3.0 * (0.01f64 / 500.0).sqrt();
    assert!(
        summary.violation_fraction <= bound,
        "violation fraction {} exceeds {bound}",
        summary.violation_fraction
    );
    assert!(elapsed <= Duration::from_secs(600), "took {elapsed:?}");
    println!(
        "criterion 3 pac guarantee: PASS (violations {:.4} <= {bound:.4}, mean coverage {:.4}, {elapsed:?})",
        summary.violation_fraction, summary.mean_coverage
    );
}

#[test]
fn criterion_4_marginal_guarantee() {
    let start = Instant::now();
    let (dag, generator) = coverage_domain();
    let grid = ThresholdGrid::default_grid();
    let mut lines = Vec::new();
    for eps in [0.05, 0.1, 0.2] {
        let guarantee = GuaranteeSpec::marginal(eps).unwrap();
        let (summary, _) = run_trials(
            &dag,
            &generator,
            &guarantee,
            &SolvePolicy::new(4),
            &grid,
            200,
            500,
            42,
        )
        .unwrap();
        assert!(
            summary.mean_coverage >= 1.0 - eps - 0.02,
            "eps {eps}: mean coverage {} below {}",
            summary.mean_coverage,
            1.0 - eps - 0.02
        );
        lines.push(format!("eps {eps}: {:.4}", summary.mean_coverage));
    }
    let elapsed = start.elapsed();
    assert!(elapsed <= Duration::from_secs(600), "took {elapsed:?}");
    println!(
        "criterion 4 marginal guarantee: PASS ({}, {elapsed:?})",
        lines.join("; ")
    );
}

#[test]
fn criterion_5_size_trends() {
    let start = Instant::now();
    let (dag, generator) = coverage_domain();
    let sweep = SweepSpec::default();
    let grid = ThresholdGrid::default_grid();
    let rows = run_sweep(&dag, &generator, &sweep, &grid, &SolvePolicy::new(4)).unwrap();

    let mean_size = |eps: f64, m: u32| -> f64 {
        let sizes: Vec<f64> = rows
            .iter()
            .filter(|r| r.epsilon == eps && r.m == m)
            .map(|r| r.avg_set_size)
            .collect();
        assert_eq!(sizes.len(), sweep.n_trials);
        sizes.iter().sum::<f64>() / sizes.len() as f64
    };

    // non-increasing in eps for each m, at most one inversion per series
    for &m in &sweep.m_list {
        let series: Vec<f64> = sweep
            .epsilon_list
            .iter()
            .map(|&e| mean_size(e, m))
            .collect();
        let inversions = series.windows(2).filter(|w| w[1] > w[0]).count();
        assert!(
            inversions <= 1,
            "m={m}: size series {series:?} has {inversions} inversions in eps"
        );
    }
    // non-increasing in m for each eps, at most one inversion per series
    for &eps in &sweep.epsilon_list {
        let series: Vec<f64> = sweep.m_list.iter().map(|&m| mean_size(eps, m)).collect();
        let inversions = series.windows(2).filter(|w| w[1] > w[0]).count();
        assert!(
            inversions <= 1,
            "eps={eps}: size series {series:?} has {inversions} inversions in m"
        );
    }
    let elapsed = start.elapsed();
    println!(
        "criterion 5 size trends: PASS ({} rows, monotone within tolerance, {elapsed:?})",
        rows.len()
    );
}

#[test]
fn criterion_6_structure_counts() {
    let d2 = build_digit_tree(&DigitTreeSpec {
        positions: 2,
        alphabet: 10,
    })
    .unwrap();
    assert_eq!((d2.node_count(), d2.leaf_count()), (111, 100));
    let d3 = build_digit_tree(&DigitTreeSpec {
        positions: 3,
        alphabet: 10,
    })
    .unwrap();
    assert_eq!((d3.node_count(), d3.leaf_count()), (1111, 1000));
    let fixture =
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/goemotions_shaped.tsv");
    let emotions = load_hierarchy(&fixture).unwrap();
    assert_eq!((emotions.node_count(), emotions.leaf_count()), (52, 27));
    println!(
        "criterion 6 structure counts: PASS (digit trees 111/100 and 1111/1000, hierarchy 52/27)"
    );
}

#[test]
fn criterion_8_early_stopping_contract() {
    let mut master = rng(2024);
    for round in 0..1000u32 {
        let len = master.gen_range(1..=52usize);
        let mut values = Vec::with_capacity(len);
        let mut v: f64 = master.gen_range(0.9..1.0);
        for _ in 0..len {
            values.push(v);
            v -= master.gen_range(0.0005..0.01);
        }
        let grid = ThresholdGrid::new(values).unwrap();
        let spec = GuaranteeSpec::marginal(0.1).unwrap();
        let n = 9; // passes iff miss <= 1
        let verdicts: Vec<bool> = (0..len).map(|_| master.gen_bool(0.7)).collect();
        let mut calls = 0usize;
        run_threshold_search(&grid, &spec, n, |_| {
            calls += 1;
            Ok(if verdicts[calls - 1] { 0 } else { 9 })
        })
        .unwrap();
        let expected = verdicts.iter().position(|&ok| !ok).map_or(len, |i| i + 1);
        assert_eq!(
            calls, expected,
            "round {round}: evaluated past first failure"
        );
    }
    println!("criterion 8 early stopping: PASS (1000 randomized grids)");
}

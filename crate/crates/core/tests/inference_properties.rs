mod common;

use proptest::prelude::*;

use robsens::bootstrap::{
    binomial_quantile, empirical_quantile, inflate_delta, run_ci_with_cache, BootstrapConfig, InflatedDelta, Model,
    ReplicateCache, Sensitivity,
};
use robsens::bounds::{Relaxation, SensitivityParams};
use robsens::simultaneous::{
    lambda_threshold, prediction_curve, test_confounding_hypothesis, Decision, SimultaneousConfig,
};
use robsens::whole::{solve_whole_bounds, WholeParams};

use common::*;

fn config(b: usize, alpha: f64, zeta: f64) -> BootstrapConfig {
    BootstrapConfig { replicates: b, alpha, zeta, seed: 11, threads: 1, relaxation: Relaxation::RelaxedLp }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn binomial_quantile_monotone(n in 1u64..400, p in 0.0f64..1.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(binomial_quantile(n, p, lo) <= binomial_quantile(n, p, hi));
        let q = binomial_quantile(n, p, hi);
        prop_assert!(q <= n);
        prop_assert!(binomial_quantile(n, p * 0.5, hi) <= q);
    }

    #[test]
    fn binomial_quantile_matches_oracle(n in 1u64..300, p in 0.001f64..0.999, level in 0.01f64..0.999) {
        prop_assert_eq!(binomial_quantile(n, p, level), binomial_quantile_oracle(n, p, level));
    }

    #[test]
    fn inflation_never_shrinks_delta(n1 in 1usize..500, n0 in 1usize..500, d1 in 0.0f64..0.5, d0 in 0.0f64..0.5, zeta in 0.001f64..0.5) {
        let s = Sensitivity::Separate(SensitivityParams::new(1.0, 1.0, d1, d0).unwrap());
        let InflatedDelta::Separate { delta1, delta0 } = inflate_delta(&s, n1, n0, zeta) else { unreachable!() };
        // the level exceeds 1/2, so the quantile is at least the median >= floor(n p)
        prop_assert!(delta1 >= (n1 as f64 * d1).floor() / n1 as f64 - 1e-12);
        prop_assert!(delta0 >= (n0 as f64 * d0).floor() / n0 as f64 - 1e-12);
        prop_assert!(delta1 <= 1.0 && delta0 <= 1.0);
    }

    #[test]
    fn empirical_quantile_is_an_order_statistic(mut v in prop::collection::vec(-1e3f64..1e3, 1..60), level in 0.0f64..1.0) {
        let q = empirical_quantile(&v, level);
        v.sort_by(f64::total_cmp);
        let rank = ((level * v.len() as f64 - 1e-9).ceil() as usize).clamp(1, v.len());
        prop_assert_eq!(q, v[rank - 1]);
    }
}

#[test]
fn collapsed_interval_is_percentile_bootstrap() {
    // At Lambda = 1 and delta = 0 every replicate's bounds collapse to the
    // replicate Hajek estimate, so the interval is a plain percentile interval.
    let (data, fit) = simulated(150, 8);
    let cache = ReplicateCache::build(&data, &fit, 60, 99, 1).unwrap();
    let s = Sensitivity::Separate(SensitivityParams::symmetric(1.0, 0.0).unwrap());
    let ci = run_ci_with_cache(&data, &fit, &s, &config(60, 0.05, 0.025), &cache).unwrap();
    let y = data.y();
    let z = data.z();
    let draws: Vec<f64> = cache
        .replicates
        .iter()
        .map(|r| {
            let e = r.fitted.as_ref().unwrap();
            let w: Vec<f64> = (0..y.len()).map(|i| r.k[i] * if z[i] == 1 { 1.0 - e[i] } else { e[i] }).collect();
            hajek_direct(&y, &z, &w)
        })
        .collect();
    let mut sorted = draws.clone();
    sorted.sort_by(f64::total_cmp);
    // ranks ceil(0.05 * 60) = 3 and ceil(0.95 * 60) = 57
    assert!((ci.l_alpha - sorted[2]).abs() < 1e-8, "{} vs {}", ci.l_alpha, sorted[2]);
    assert!((ci.u_alpha - sorted[56]).abs() < 1e-8, "{} vs {}", ci.u_alpha, sorted[56]);
    for (a, b) in ci.draws_min.iter().zip(&draws) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn intervals_nest_under_common_replicates() {
    let (data, fit) = simulated(120, 3);
    let cache = ReplicateCache::build(&data, &fit, 40, 5, 1).unwrap();
    let cfg = config(40, 0.05, 0.025);
    let mut prev: Option<(f64, f64)> = None;
    for (l, d) in [(1.0, 0.0), (1.5, 0.0), (1.5, 0.1), (2.5, 0.1), (2.5, 0.3)] {
        let s = Sensitivity::Separate(SensitivityParams::symmetric(l, d).unwrap());
        let ci = run_ci_with_cache(&data, &fit, &s, &cfg, &cache).unwrap();
        if let Some((lo, hi)) = prev {
            assert!(ci.l_alpha <= lo + 1e-7 && hi <= ci.u_alpha + 1e-7, "({l}, {d}) not nested");
        }
        prev = Some((ci.l_alpha, ci.u_alpha));
    }
}

#[test]
fn whole_with_no_violations_matches_separate() {
    let (data, fit) = simulated(60, 12);
    let ones = vec![1.0; data.n()];
    for l in [1.0, 2.0, 4.0] {
        let whole =
            solve_whole_bounds(&data, &fit.fitted, &WholeParams::new(l, 0.0).unwrap(), &ones, Relaxation::RelaxedLp)
                .unwrap();
        let sep = robsens::bounds::solve_bounds(
            &robsens::bounds::BoundsProblem::new(
                &data,
                &fit.fitted,
                &ones,
                &SensitivityParams::symmetric(l, 0.0).unwrap(),
            )
            .unwrap(),
            Relaxation::RelaxedLp,
        )
        .unwrap();
        assert_eq!(whole.cells.len(), 1);
        assert!((whole.envelope.tau_min - sep.tau_min).abs() < 1e-9);
        assert!((whole.envelope.tau_max - sep.tau_max).abs() < 1e-9);
    }
}

#[test]
fn whole_envelope_contains_every_cell() {
    let (data, fit) = simulated(40, 21);
    let ones = vec![1.0; data.n()];
    let w = solve_whole_bounds(&data, &fit.fitted, &WholeParams::new(2.0, 0.15).unwrap(), &ones, Relaxation::RelaxedLp)
        .unwrap();
    assert!(w.cells.len() > 1);
    for c in &w.cells {
        assert_eq!(c.cell.0 + c.cell.1, w.cells[0].cell.0 + w.cells[0].cell.1);
        assert!(w.envelope.contains(&c.bounds, 0.0));
    }
}

#[test]
fn whole_ci_sharper_bounds_inside_plain() {
    let (data, fit) = simulated(50, 4);
    let cache = ReplicateCache::build(&data, &fit, 30, 7, 1).unwrap();
    let s = Sensitivity::Whole(WholeParams::new(1.5, 0.1).unwrap());
    let ci = run_ci_with_cache(&data, &fit, &s, &config(30, 0.05, 0.025), &cache).unwrap();
    let sharper = ci.sharper.expect("whole model reports sharper bounds");
    assert!(ci.l_alpha <= sharper.l_alpha + 1e-9 && sharper.u_alpha <= ci.u_alpha + 1e-9);
    assert!(sharper.l_alpha <= sharper.u_alpha);
}

fn sim_config(model: Model) -> SimultaneousConfig {
    SimultaneousConfig { alpha: 0.1, log_tol: 1e-3, model, ..Default::default() }
}

#[test]
fn threshold_separates_rejections_from_retentions() {
    let (data, fit) = simulated(200, 31);
    let cache = ReplicateCache::build(&data, &fit, 50, 13, 1).unwrap();
    let cfg = sim_config(Model::Separate);
    for q in [0.5, 0.9, 1.0] {
        let t = lambda_threshold(&data, &cache, q, &cfg).unwrap();
        assert!(t.lambda >= 1.0);
        if !t.retained_at_one && !t.rejected_at_max {
            let below = t.lambda * (-0.01f64).exp();
            let above = t.lambda * (0.01f64).exp();
            let at = |l: f64| test_confounding_hypothesis(&data, &cache, (q, q), (l, l), &cfg).unwrap().decision;
            assert_eq!(at(below), Decision::Reject, "q = {q}");
            assert_eq!(at(above), Decision::Retain, "q = {q}");
        }
    }
}

#[test]
fn curve_is_nondecreasing_and_at_least_one() {
    let (data, fit) = simulated(150, 2);
    let cache = ReplicateCache::build(&data, &fit, 40, 17, 1).unwrap();
    let grid: Vec<f64> = (0..=6).map(|i| i as f64 / 6.0).collect();
    let curve = prediction_curve(&data, &cache, &grid, &sim_config(Model::Separate)).unwrap();
    assert_eq!(curve.lower_bounds.len(), grid.len());
    assert_eq!(curve.lower_bounds[0], 1.0);
    for w in curve.lower_bounds.windows(2) {
        assert!(w[0] >= 1.0 && w[0] <= w[1]);
    }
}

#[test]
fn large_effect_is_rejected_at_one() {
    // The simulated effect is large relative to its standard error, so no
    // confounding (Lambda = 1) cannot explain it away.
    let (data, fit) = simulated(200, 31);
    let cache = ReplicateCache::build(&data, &fit, 40, 3, 1).unwrap();
    let t = lambda_threshold(&data, &cache, 1.0, &sim_config(Model::Separate)).unwrap();
    assert!(!t.retained_at_one && t.lambda > 1.0, "{t:?}");
    let at_one =
        test_confounding_hypothesis(&data, &cache, (1.0, 1.0), (1.0, 1.0), &sim_config(Model::Separate)).unwrap();
    assert_eq!(at_one.decision, Decision::Reject);
    assert!(at_one.l > 0.0);
}

#[test]
fn replicate_cache_is_seed_deterministic() {
    let (data, fit) = simulated(80, 1);
    let a = ReplicateCache::build(&data, &fit, 12, 42, 1).unwrap();
    let b = ReplicateCache::build(&data, &fit, 12, 42, 3).unwrap();
    let c = ReplicateCache::build(&data, &fit, 12, 43, 1).unwrap();
    for (x, y) in a.replicates.iter().zip(&b.replicates) {
        assert_eq!(x.k, y.k);
        assert_eq!(x.fitted.as_ref().unwrap(), y.fitted.as_ref().unwrap());
    }
    assert!(a.replicates.iter().zip(&c.replicates).any(|(x, y)| x.k != y.k));
}

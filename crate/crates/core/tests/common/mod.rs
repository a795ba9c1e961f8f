//! Instance generators and independent oracles shared by integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use robsens::bootstrap::draw_multinomial;
use robsens::bounds::{BoundsProblem, SensitivityParams};
use robsens::dataset::{Dataset, Observation, TransformSpec};
use robsens::linprog::{solve_lp, LpProblem, LpStatus, Sense};
use robsens::logistic::{fit_mle, PropensityFit};
use robsens::simulate::{default_transform, generate, SimSpec};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Simulated confounded data with `s = (1, x)`, `g = x`, and its fit.
pub fn simulated(n: usize, seed: u64) -> (Dataset, PropensityFit) {
    let sim = generate(&SimSpec { n, seed }).expect("simulate");
    let data = sim.dataset.build_designs(&default_transform()).expect("designs");
    let fit = fit_mle(&data.s_design, &data.z(), &vec![1.0; n], None).expect("fit");
    (data, fit)
}

/// Small random dataset with one covariate whose logistic fit exists.
pub fn small_instance(r: &mut ChaCha8Rng, n: usize) -> (Dataset, PropensityFit, Vec<f64>) {
    loop {
        let obs: Vec<Observation> = (0..n)
            .map(|_| {
                let x: f64 = r.gen_range(-1.0..1.0);
                let z = (r.gen::<f64>() < 1.0 / (1.0 + (-x).exp())) as u8;
                let y = 2.0 * x + r.gen_range(-1.0..1.0) + z as f64;
                Observation { y, z, x: vec![x] }
            })
            .collect();
        let n1 = obs.iter().filter(|o| o.z == 1).count();
        if n1 < 2 || n - n1 < 2 {
            continue;
        }
        let Ok(d) = Dataset::from_observations(obs, vec!["x".into()]) else { continue };
        let Ok(d) = d.build_designs(&TransformSpec::identity(&["x".to_string()])) else { continue };
        let k = if r.gen_bool(0.5) { vec![1.0; n] } else { draw_multinomial(n, r) };
        // every arm needs sampled units
        let sampled = |arm: u8| d.z().iter().zip(&k).any(|(&z, &kk)| z == arm && kk > 0.0);
        if !sampled(0) || !sampled(1) {
            continue;
        }
        let Ok(fit) = fit_mle(&d.s_design, &d.z(), &k, None) else { continue };
        if fit.fitted.iter().any(|&e| !(1e-6..1.0 - 1e-6).contains(&e)) {
            continue;
        }
        return (d, fit, k);
    }
}

pub fn random_params(r: &mut ChaCha8Rng) -> SensitivityParams {
    let deltas = [0.0, 0.1, 0.2, 0.3, 0.5];
    SensitivityParams::new(
        r.gen_range(1.0..5.0),
        r.gen_range(1.0..5.0),
        deltas[r.gen_range(0..deltas.len())],
        deltas[r.gen_range(0..deltas.len())],
    )
    .unwrap()
}

/// Optimum of the Hajek contrast with every unit's indicator fixed, solved
/// as a directly built Charnes-Cooper LP in `(w, t1, t0)`.
pub fn residual_optimum(p: &BoundsProblem, bounded: &[bool], sense: Sense) -> Option<f64> {
    let n = p.n();
    let mut lp = LpProblem::new(sense);
    let sgn = |z: u8| if z == 1 { 1.0 } else { -1.0 };
    for i in 0..n {
        lp.add_var(format!("w{i}"), sgn(p.z[i]) * p.y[i], 0.0, f64::INFINITY);
    }
    let t1 = lp.add_var("t1", 0.0, 0.0, f64::INFINITY);
    let t0 = lp.add_var("t0", 0.0, 0.0, f64::INFINITY);
    for i in 0..n {
        let t = if p.z[i] == 1 { t1 } else { t0 };
        let k = p.k[i];
        let (lo, hi) = if bounded[i] { (p.boxes[i].a_low, p.boxes[i].a_up) } else { (0.0, 1.0) };
        lp.add_ge(format!("lo{i}"), &[(i, 1.0), (t, -k * lo)], 0.0);
        lp.add_le(format!("hi{i}"), &[(i, 1.0), (t, -k * hi)], 0.0);
    }
    for arm in [1u8, 0] {
        let row: Vec<(usize, f64)> = (0..n).filter(|&i| p.z[i] == arm).map(|i| (i, 1.0)).collect();
        lp.add_eq(format!("norm{arm}"), &row, 1.0);
    }
    for j in 0..p.g.ncols() {
        let row: Vec<(usize, f64)> = (0..n).map(|i| (i, sgn(p.z[i]) * p.g[(i, j)])).collect();
        lp.add_eq(format!("bal{j}"), &row, 0.0);
    }
    let s = solve_lp(&lp).expect("residual LP");
    match s.status {
        LpStatus::Optimal => Some(s.objective_value),
        _ => None,
    }
}

/// Exact bounds by enumerating every indicator pattern meeting the budgets.
pub fn brute_force_bounds(p: &BoundsProblem) -> Option<(f64, f64)> {
    let n = p.n();
    assert!(n <= 16);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for mask in 0u32..(1 << n) {
        let bounded: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
        let count = |arm: u8| (0..n).filter(|&i| p.z[i] == arm && bounded[i]).count() as f64;
        if count(1) < p.budgets.0 || count(0) < p.budgets.1 {
            continue;
        }
        if let Some(v) = residual_optimum(p, &bounded, Sense::Minimize) {
            lo = lo.min(v);
        }
        if let Some(v) = residual_optimum(p, &bounded, Sense::Maximize) {
            hi = hi.max(v);
        }
    }
    lo.is_finite().then_some((lo, hi))
}

/// Best objective over all vertices of `{A x <= b, 0 <= x <= u}` (maximise `c x`).
pub fn vertex_enumeration(a: &DMatrix<f64>, b: &[f64], u: &[f64], c: &[f64]) -> Option<f64> {
    let (m, n) = (a.nrows(), a.ncols());
    // constraint i: row_i x <= rhs_i, for rows of A, -x_j <= 0, x_j <= u_j
    let mut rows: Vec<(Vec<f64>, f64)> = (0..m).map(|i| (a.row(i).iter().copied().collect(), b[i])).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = -1.0;
        rows.push((e.clone(), 0.0));
        e[j] = 1.0;
        rows.push((e, u[j]));
    }
    let total = rows.len();
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let mat = DMatrix::from_fn(n, n, |r, col| rows[idx[r]].0[col]);
        let rhs = DVector::from_iterator(n, idx.iter().map(|&r| rows[r].1));
        if let Some(x) = mat.lu().solve(&rhs) {
            let feasible = rows.iter().all(|(row, rhs)| {
                let lhs: f64 = row.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
                lhs <= rhs + 1e-9 * (1.0 + rhs.abs())
            });
            if feasible && x.iter().all(|v| v.is_finite()) {
                let obj: f64 = c.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
                best = Some(best.map_or(obj, |bb: f64| bb.max(obj)));
            }
        }
        // next combination
        let mut k = n;
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            if idx[k] < total - n + k {
                idx[k] += 1;
                for l in k + 1..n {
                    idx[l] = idx[l - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Binomial CDF values `P(Bin(n, p) <= m)` for `m = 0..=n`, from pmf terms
/// `exp(ln C(n, m) + m ln p + (n - m) ln(1 - p))` with `ln C` from log-gamma,
/// accumulated in log space and normalised by the total mass.
pub fn binomial_cdf_oracle(n: u64, p: f64) -> Vec<f64> {
    use statrs::function::gamma::ln_gamma;
    let ln_choose = |m: u64| ln_gamma(n as f64 + 1.0) - ln_gamma(m as f64 + 1.0) - ln_gamma((n - m) as f64 + 1.0);
    let term = |m: u64| {
        let a = if m == 0 { 0.0 } else { m as f64 * p.ln() };
        let b = if m == n { 0.0 } else { (n - m) as f64 * (1.0 - p).ln() };
        ln_choose(m) + a + b
    };
    let lse = |a: f64, b: f64| {
        let hi = a.max(b);
        if hi == f64::NEG_INFINITY {
            hi
        } else {
            hi + ((a - hi).exp() + (b - hi).exp()).ln()
        }
    };
    let terms: Vec<f64> = (0..=n).map(term).collect();
    let total = terms.iter().fold(f64::NEG_INFINITY, |a, &b| lse(a, b));
    let mut acc = f64::NEG_INFINITY;
    terms
        .iter()
        .map(|&t| {
            acc = lse(acc, t);
            (acc - total).exp()
        })
        .collect()
}

/// Smallest `m` with `CDF(m) >= level` (ties within `1e-12`); `p = 0` gives 0
/// and `level = 1` gives `n` by definition.
pub fn quantile_from_cdf(cdf: &[f64], p: f64, level: f64) -> u64 {
    let n = cdf.len() as u64 - 1;
    if p == 0.0 {
        return 0;
    }
    if level >= 1.0 {
        return n;
    }
    cdf.iter().position(|&c| c >= level - 1e-12).map_or(n, |m| m as u64)
}

pub fn binomial_quantile_oracle(n: u64, p: f64, level: f64) -> u64 {
    quantile_from_cdf(&binomial_cdf_oracle(n, p), p, level)
}

/// Hajek contrast at fixed weights, written out directly.
pub fn hajek_direct(y: &[f64], z: &[u8], w: &[f64]) -> f64 {
    let (mut a1, mut b1, mut a0, mut b0) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..y.len() {
        if z[i] == 1 {
            a1 += w[i] * y[i];
            b1 += w[i];
        } else {
            a0 += w[i] * y[i];
            b0 += w[i];
        }
    }
    a1 / b1 - a0 / b0
}

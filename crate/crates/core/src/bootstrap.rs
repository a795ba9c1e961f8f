//! Augmented percentile bootstrap for the sensitivity bounds.
//!
//! Each replicate draws multinomial multiplicities `k_b`, refits the
//! propensity model with those weights, rebuilds the unit boxes and solves the
//! bound problems. The counting budgets always refer to all `n` original
//! units, so unsampled units (`k_i = 0`) still count towards them. The
//! violation fraction is inflated by a binomial quantile so that the sample
//! constraint set covers the truth with high probability.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{budget, solve_bounds, BoundsError, BoundsProblem, BoundsResult, Relaxation, SensitivityParams};
use crate::dataset::Dataset;
use crate::logistic::{fit_mle, FitError, PropensityFit};
use crate::whole::{solve_grid, AllocationGrid, WholeError, WholeParams};

/// Replicates may fail (infeasible LP, degenerate refit) at most this often.
pub const MAX_FAILURE_RATE: f64 = 0.2;

#[derive(Debug, Error)]
pub enum BootstrapError {
    #[error("invalid bootstrap configuration: {0}")]
    InvalidConfig(String),
    #[error("{failed} of {total} replicates failed (limit {limit:.0}%)", limit = MAX_FAILURE_RATE * 100.0)]
    TooManyFailures { failed: usize, total: usize },
    #[error("propensity fit on the original sample failed: {0}")]
    Fit(#[from] FitError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Whole(#[from] WholeError),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Separate,
    Whole,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub alpha: f64,
    pub zeta: f64,
    pub seed: u64,
    pub threads: usize,
    pub relaxation: Relaxation,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            replicates: 1000,
            alpha: 0.025,
            zeta: 0.025,
            seed: 20240601,
            threads: 1,
            relaxation: Relaxation::RelaxedLp,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<(), BootstrapError> {
        let bad = |m: String| Err(BootstrapError::InvalidConfig(m));
        if self.replicates < 1 {
            return bad("at least one replicate is required".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return bad(format!("alpha = {} must lie in (0, 0.5)", self.alpha));
        }
        if !(self.zeta >= 0.0 && self.zeta < 0.5) {
            return bad(format!("zeta = {} must lie in [0, 0.5)", self.zeta));
        }
        if !(self.alpha + self.zeta < 0.5) {
            return bad("alpha + zeta must be below 0.5".into());
        }
        if self.threads < 1 {
            return bad("threads must be >= 1".into());
        }
        Ok(())
    }
}

/// Sensitivity model and its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Sensitivity {
    Separate(SensitivityParams),
    Whole(WholeParams),
}

impl Sensitivity {
    pub fn model(&self) -> Model {
        match self {
            Sensitivity::Separate(_) => Model::Separate,
            Sensitivity::Whole(_) => Model::Whole,
        }
    }
}

/// Counts from `n` uniform index draws: an exact `Multinomial(n; 1/n, ..., 1/n)`.
pub fn draw_multinomial<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut k = vec![0.0; n];
    for _ in 0..n {
        k[rng.gen_range(0..n)] += 1.0;
    }
    k
}

/// Deterministic generator for replicate `b`: the seed selects the key and
/// `b` the stream, so replicates are independent of scheduling.
pub fn replicate_rng(seed: u64, b: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b as u64);
    rng
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Terms this far below the mode (in log) are below `1e-34` relative and dropped.
const TAIL_CUTOFF: f64 = -80.0;

/// Smallest `m` with `P(Binomial(n, p) <= m) >= level`.
///
/// Log pmf values relative to the mode are built by the ratio recursion
/// outward from the mode and normalised by their log-sum-exp, so the CDF
/// carries no error from an absolute normalising constant. Ties within
/// `1e-12` of `level` count as reached.
pub fn binomial_quantile(n: u64, p: f64, level: f64) -> u64 {
    if p <= 0.0 {
        return 0;
    }
    if level >= 1.0 || p >= 1.0 {
        return n;
    }
    let log_odds = p.ln() - (-p).ln_1p();
    let mode = (((n + 1) as f64 * p).floor() as u64).min(n) as usize;
    let mut log_r = vec![f64::NEG_INFINITY; n as usize + 1];
    log_r[mode] = 0.0;
    // pmf(m) / pmf(m - 1) = (n - m + 1) / m * p / (1 - p)
    let step = |m: usize| ((n as usize - m + 1) as f64).ln() - (m as f64).ln() + log_odds;
    for m in (0..mode).rev() {
        log_r[m] = log_r[m + 1] - step(m + 1);
        if log_r[m] < TAIL_CUTOFF {
            break;
        }
    }
    for m in mode + 1..=n as usize {
        log_r[m] = log_r[m - 1] + step(m);
        if log_r[m] < TAIL_CUTOFF {
            break;
        }
    }
    let total = log_r.iter().fold(f64::NEG_INFINITY, |a, &b| log_add(a, b));
    let mut log_cdf = f64::NEG_INFINITY;
    for (m, &lr) in log_r.iter().enumerate() {
        log_cdf = log_add(log_cdf, lr);
        if (log_cdf - total).exp() >= level - 1e-12 {
            return m as u64;
        }
    }
    n
}

/// Effective violation fraction(s) after binomial inflation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InflatedDelta {
    Separate { delta1: f64, delta0: f64 },
    Whole { delta: f64 },
}

/// Separate arms use the `sqrt(1 - zeta)` quantile per arm; the whole
/// population uses the `1 - zeta` quantile.
pub fn inflate_delta(s: &Sensitivity, n1: usize, n0: usize, zeta: f64) -> InflatedDelta {
    match s {
        Sensitivity::Separate(p) => {
            let level = (1.0 - zeta).sqrt();
            InflatedDelta::Separate {
                delta1: binomial_quantile(n1 as u64, p.delta1, level) as f64 / n1 as f64,
                delta0: binomial_quantile(n0 as u64, p.delta0, level) as f64 / n0 as f64,
            }
        }
        Sensitivity::Whole(p) => {
            let n = (n1 + n0) as u64;
            InflatedDelta::Whole { delta: binomial_quantile(n, p.delta, 1.0 - zeta) as f64 / n as f64 }
        }
    }
}

/// Order statistic at rank `max(1, ceil(level * B))`; infinities sort to the ends.
pub fn empirical_quantile(draws: &[f64], level: f64) -> f64 {
    assert!(!draws.is_empty(), "quantile of an empty sample");
    let mut v = draws.to_vec();
    v.sort_by(f64::total_cmp);
    let b = v.len();
    let rank = ((level * b as f64 - 1e-9).ceil() as usize).clamp(1, b);
    v[rank - 1]
}

/// One bootstrap replicate: multiplicities and the refitted propensities.
#[derive(Debug, Clone)]
pub struct Replicate {
    pub k: Vec<f64>,
    pub fitted: Result<Vec<f64>, FitError>,
}

/// Replicates shared by every evaluation that needs common random numbers.
#[derive(Debug, Clone)]
pub struct ReplicateCache {
    pub seed: u64,
    pub replicates: Vec<Replicate>,
}

pub fn thread_pool(threads: usize) -> Result<rayon::ThreadPool, BootstrapError> {
    rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build().map_err(|e| BootstrapError::Pool(e.to_string()))
}

impl ReplicateCache {
    pub fn build(
        data: &Dataset,
        fit: &PropensityFit,
        count: usize,
        seed: u64,
        threads: usize,
    ) -> Result<Self, BootstrapError> {
        let pool = thread_pool(threads)?;
        let n = data.n();
        let z = data.z();
        let replicates = pool.install(|| {
            (0..count)
                .into_par_iter()
                .map(|b| {
                    let k = draw_multinomial(n, &mut replicate_rng(seed, b));
                    let fitted = fit_mle(&data.s_design, &z, &k, Some(&fit.beta)).map(|f| f.fitted);
                    Replicate { k, fitted }
                })
                .collect()
        });
        Ok(ReplicateCache { seed, replicates })
    }

    pub fn len(&self) -> usize {
        self.replicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replicates.is_empty()
    }
}

/// Per-cell draws `(cell, mins, maxs)` of the whole model.
pub type CellDraws = ((usize, usize), Vec<f64>, Vec<f64>);

/// Bootstrap draws of the bound statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Draws {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Per allocation cell (whole model only).
    pub cells: Vec<CellDraws>,
    pub failed: usize,
}

/// Solves every replicate at the given (already inflated) `Lambda` and budgets.
///
/// Separate model: `budgets` holds the two arm budgets. Whole model: the
/// grid is built from `total_budget`.
pub fn replicate_draws(
    data: &Dataset,
    cache: &ReplicateCache,
    lambdas: (f64, f64),
    target: BudgetTarget,
    relaxation: Relaxation,
    pool: &rayon::ThreadPool,
) -> Result<Draws, BootstrapError> {
    let grid = match target {
        BudgetTarget::Arms(..) => None,
        BudgetTarget::Total(total) => Some(AllocationGrid::from_budget(data.n1, data.n0, total)),
    };
    type Out = (f64, f64, Vec<(f64, f64)>, bool);
    let ncells = grid.as_ref().map_or(0, |g| g.cells.len());
    let failure = || (f64::NEG_INFINITY, f64::INFINITY, vec![(f64::INFINITY, f64::NEG_INFINITY); ncells], true);
    let results: Vec<Out> = pool.install(|| {
        cache
            .replicates
            .par_iter()
            .map(|rep| {
                let Ok(e_hat) = &rep.fitted else {
                    return failure();
                };
                let solved = (|| -> Result<Out, BootstrapError> {
                    match (&target, &grid) {
                        (BudgetTarget::Arms(b1, b0), _) => {
                            let p =
                                BoundsProblem::with_lambdas(data, e_hat, &rep.k, lambdas, (*b1 as f64, *b0 as f64))?;
                            let r = solve_bounds(&p, relaxation)?;
                            Ok((r.tau_min, r.tau_max, Vec::new(), !r.is_feasible()))
                        }
                        (BudgetTarget::Total(_), Some(g)) => {
                            let base = BoundsProblem::with_lambdas(data, e_hat, &rep.k, lambdas, (0.0, 0.0))?;
                            let w = solve_grid(&base, g, relaxation)?;
                            // Empty cells contribute nothing to a union.
                            let cells = w
                                .cells
                                .iter()
                                .map(|c| {
                                    if c.bounds.is_feasible() {
                                        (c.bounds.tau_min, c.bounds.tau_max)
                                    } else {
                                        (f64::INFINITY, f64::NEG_INFINITY)
                                    }
                                })
                                .collect();
                            let e = &w.envelope;
                            Ok((e.tau_min, e.tau_max, cells, !e.is_feasible()))
                        }
                        (BudgetTarget::Total(_), None) => unreachable!("grid built for total budgets"),
                    }
                })();
                solved.unwrap_or_else(|e| {
                    log::warn!("replicate solve failed: {e}");
                    failure()
                })
            })
            .collect()
    });
    let mut draws = Draws { min: Vec::new(), max: Vec::new(), cells: Vec::new(), failed: 0 };
    if let Some(g) = &grid {
        draws.cells = g.cells.iter().map(|&c| (c, Vec::new(), Vec::new())).collect();
    }
    for (lo, hi, cells, failed) in results {
        draws.min.push(lo);
        draws.max.push(hi);
        draws.failed += failed as usize;
        for (slot, (l, u)) in draws.cells.iter_mut().zip(cells) {
            slot.1.push(l);
            slot.2.push(u);
        }
    }
    Ok(draws)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BudgetTarget {
    Arms(usize, usize),
    Total(usize),
}

/// Sharper whole-population limits from per-cell quantiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharperBounds {
    pub l_alpha: f64,
    pub u_alpha: f64,
    pub per_cell: Vec<((usize, usize), f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CiResult {
    pub point_bounds: BoundsResult,
    pub draws_min: Vec<f64>,
    pub draws_max: Vec<f64>,
    pub l_alpha: f64,
    pub u_alpha: f64,
    pub delta_inflated: InflatedDelta,
    /// `Lambda` used in replicates (gap applied).
    pub lambda_effective: (f64, f64),
    pub infeasible_count: usize,
    pub sharper: Option<SharperBounds>,
}

/// Point bounds on the original sample at the uninflated parameters.
pub fn point_bounds(
    data: &Dataset,
    e_hat: &[f64],
    s: &Sensitivity,
    relaxation: Relaxation,
) -> Result<BoundsResult, BootstrapError> {
    let ones = vec![1.0; data.n()];
    Ok(match s {
        Sensitivity::Separate(p) => solve_bounds(&BoundsProblem::new(data, e_hat, &ones, p)?, relaxation)?,
        Sensitivity::Whole(p) => crate::whole::solve_whole_bounds(data, e_hat, p, &ones, relaxation)?.envelope,
    })
}

/// Confidence interval `[L_alpha, U_alpha]` for the overlap-weighted effect.
pub fn run_ci(
    data: &Dataset,
    fit: &PropensityFit,
    s: &Sensitivity,
    config: &BootstrapConfig,
) -> Result<CiResult, BootstrapError> {
    config.validate()?;
    let cache = ReplicateCache::build(data, fit, config.replicates, config.seed, config.threads)?;
    run_ci_with_cache(data, fit, s, config, &cache)
}

pub fn run_ci_with_cache(
    data: &Dataset,
    fit: &PropensityFit,
    s: &Sensitivity,
    config: &BootstrapConfig,
    cache: &ReplicateCache,
) -> Result<CiResult, BootstrapError> {
    config.validate()?;
    let pool = thread_pool(config.threads)?;
    let point = pool.install(|| point_bounds(data, &fit.fitted, s, config.relaxation))?;
    let delta_inflated = inflate_delta(s, data.n1, data.n0, config.zeta);
    let (lambdas, target) = match (s, delta_inflated) {
        (Sensitivity::Separate(p), InflatedDelta::Separate { delta1, delta0 }) => {
            let w = p.widened();
            ((w.lambda1, w.lambda0), BudgetTarget::Arms(budget(data.n1, delta1), budget(data.n0, delta0)))
        }
        (Sensitivity::Whole(p), InflatedDelta::Whole { delta }) => {
            let l = p.lambda * p.lambda_gap.exp();
            ((l, l), BudgetTarget::Total(budget(data.n(), delta)))
        }
        _ => unreachable!("inflation follows the model"),
    };
    let draws = replicate_draws(data, cache, lambdas, target, config.relaxation, &pool)?;
    let total = draws.min.len();
    if draws.failed as f64 > MAX_FAILURE_RATE * total as f64 {
        return Err(BootstrapError::TooManyFailures { failed: draws.failed, total });
    }
    if draws.failed > 0 {
        log::warn!("{} of {total} replicates were infeasible and recorded as -inf/+inf", draws.failed);
    }
    let l_alpha = empirical_quantile(&draws.min, config.alpha);
    let u_alpha = empirical_quantile(&draws.max, 1.0 - config.alpha);
    let sharper = (!draws.cells.is_empty()).then(|| {
        let per_cell: Vec<((usize, usize), f64, f64)> = draws
            .cells
            .iter()
            .map(|(c, lo, hi)| (*c, empirical_quantile(lo, config.alpha), empirical_quantile(hi, 1.0 - config.alpha)))
            .collect();
        let pairs: Vec<(f64, f64)> = per_cell.iter().map(|c| (c.1, c.2)).collect();
        let (l, u) = crate::whole::sharper_ci_bounds(&pairs).expect("nonempty grid");
        SharperBounds { l_alpha: l, u_alpha: u, per_cell }
    });
    Ok(CiResult {
        point_bounds: point,
        draws_min: draws.min,
        draws_max: draws.max,
        l_alpha,
        u_alpha,
        delta_inflated,
        lambda_effective: lambdas,
        infeasible_count: draws.failed,
        sharper,
    })
}

/// Writes `b,tau_min_b,tau_max_b` rows.
pub fn write_draws_csv<W: std::io::Write>(ci: &CiResult, w: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["b", "tau_min_b", "tau_max_b"])?;
    for (b, (lo, hi)) in ci.draws_min.iter().zip(&ci.draws_max).enumerate() {
        wtr.write_record([(b + 1).to_string(), lo.to_string(), hi.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

//! Simultaneous sensitivity analysis over quantiles of confounding strength.
//!
//! Under the working null of zero effect, a pair `(q, Lambda)` is rejected
//! when the bootstrap interval at `(xi Lambda, delta = 1 - q)` excludes zero.
//! The smallest retained `Lambda` is a lower prediction bound for the `q`-th
//! sample quantile of the units' confounding strength, jointly over all `q`.
//! Every evaluation shares one [`ReplicateCache`], so the threshold is monotone
//! in `q` in finite samples.

use serde::{Deserialize, Serialize};

use crate::bootstrap::{
    empirical_quantile, replicate_draws, thread_pool, BootstrapError, BudgetTarget, Model, ReplicateCache,
};
use crate::bounds::{budget, Relaxation};
use crate::dataset::Dataset;
use crate::whole::sharper_ci_bounds;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimultaneousConfig {
    /// Two-sided level; each end uses `alpha / 2`.
    pub alpha: f64,
    pub xi: f64,
    pub lambda_max: f64,
    /// Absolute tolerance of the bisection in `log Lambda`.
    pub log_tol: f64,
    pub model: Model,
    pub relaxation: Relaxation,
    pub threads: usize,
}

impl Default for SimultaneousConfig {
    fn default() -> Self {
        SimultaneousConfig {
            alpha: 0.05,
            xi: 1.0,
            lambda_max: 4f64.exp(),
            log_tol: 1e-3,
            model: Model::Separate,
            relaxation: Relaxation::RelaxedLp,
            threads: 1,
        }
    }
}

impl SimultaneousConfig {
    pub fn validate(&self) -> Result<(), BootstrapError> {
        let bad = |m: String| Err(BootstrapError::InvalidConfig(m));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha = {} must lie in (0, 1)", self.alpha));
        }
        if !(self.xi >= 1.0) || self.xi.is_infinite() {
            return bad(format!("xi = {} must be finite and >= 1", self.xi));
        }
        if !(self.lambda_max > 1.0) || self.lambda_max.is_infinite() {
            return bad(format!("lambda_max = {} must be finite and > 1", self.lambda_max));
        }
        if !(self.log_tol > 0.0) {
            return bad("log_tol must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Reject,
    Retain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisTest {
    pub l: f64,
    pub u: f64,
    pub decision: Decision,
}

/// Bootstrap limits at `Lambda` (already scaled) and quantiles `(q1, q0)`.
///
/// The whole model uses the shared budget `ceil(n q1)` and the sharper
/// per-cell limits.
pub fn interval_at(
    data: &Dataset,
    cache: &ReplicateCache,
    lambdas: (f64, f64),
    q: (f64, f64),
    config: &SimultaneousConfig,
    pool: &rayon::ThreadPool,
) -> Result<(f64, f64), BootstrapError> {
    let target = match config.model {
        Model::Separate => BudgetTarget::Arms(budget(data.n1, 1.0 - q.0), budget(data.n0, 1.0 - q.1)),
        Model::Whole => BudgetTarget::Total(budget(data.n(), 1.0 - q.0)),
    };
    let draws = replicate_draws(data, cache, lambdas, target, config.relaxation, pool)?;
    let total = draws.min.len();
    if draws.failed as f64 > crate::bootstrap::MAX_FAILURE_RATE * total as f64 {
        return Err(BootstrapError::TooManyFailures { failed: draws.failed, total });
    }
    let a = config.alpha / 2.0;
    if draws.cells.is_empty() {
        return Ok((empirical_quantile(&draws.min, a), empirical_quantile(&draws.max, 1.0 - a)));
    }
    let per_cell: Vec<(f64, f64)> =
        draws.cells.iter().map(|(_, lo, hi)| (empirical_quantile(lo, a), empirical_quantile(hi, 1.0 - a))).collect();
    Ok(sharper_ci_bounds(&per_cell)?)
}

fn decide(l: f64, u: f64) -> HypothesisTest {
    let decision = if l <= 0.0 && 0.0 <= u { Decision::Retain } else { Decision::Reject };
    HypothesisTest { l, u, decision }
}

/// Tests the null that the `q`-th quantiles of confounding strength are at
/// most `Lambda` (per arm), taking the effect to be zero.
pub fn test_confounding_hypothesis(
    data: &Dataset,
    cache: &ReplicateCache,
    q: (f64, f64),
    lambdas: (f64, f64),
    config: &SimultaneousConfig,
) -> Result<HypothesisTest, BootstrapError> {
    config.validate()?;
    let pool = thread_pool(config.threads)?;
    let scaled = (config.xi * lambdas.0, config.xi * lambdas.1);
    let (l, u) = interval_at(data, cache, scaled, q, config, &pool)?;
    Ok(decide(l, u))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub q: f64,
    pub lambda: f64,
    /// Even `Lambda = 1` retains.
    pub retained_at_one: bool,
    /// Even `lambda_max` rejects; `lambda` is then `lambda_max`.
    pub rejected_at_max: bool,
    pub evaluations: usize,
}

/// Smallest retained `Lambda` at quantile `q` (both arms), by bisection in
/// `log Lambda`. The rejecting end of the final bracket is reported, so the
/// result errs low.
pub fn lambda_threshold(
    data: &Dataset,
    cache: &ReplicateCache,
    q: f64,
    config: &SimultaneousConfig,
) -> Result<Threshold, BootstrapError> {
    config.validate()?;
    let pool = thread_pool(config.threads)?;
    let mut evaluations = 0;
    let mut retains = |log_l: f64| -> Result<bool, BootstrapError> {
        evaluations += 1;
        let l = log_l.exp();
        let (lo, hi) = interval_at(data, cache, (l, l), (q, q), config, &pool)?;
        Ok(decide(lo, hi).decision == Decision::Retain)
    };
    let out = |lambda: f64, one: bool, max: bool, evaluations| Threshold {
        q,
        lambda: (lambda / config.xi).max(1.0),
        retained_at_one: one,
        rejected_at_max: max,
        evaluations,
    };
    if q <= 0.0 {
        return Ok(out(config.xi, true, false, 0));
    }
    if retains(0.0)? {
        return Ok(out(config.xi, true, false, evaluations));
    }
    let log_max = config.lambda_max.ln();
    if !retains(log_max)? {
        log::warn!("q = {q}: still rejected at lambda_max = {}", config.lambda_max);
        return Ok(out(config.lambda_max, false, true, evaluations));
    }
    let (mut lo, mut hi) = (0.0, log_max);
    while hi - lo > config.log_tol {
        let mid = 0.5 * (lo + hi);
        if retains(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(out(f64::exp(lo), false, false, evaluations))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileCurve {
    pub q_grid: Vec<f64>,
    pub lower_bounds: Vec<f64>,
    pub alpha: f64,
    pub xi: f64,
    pub model: Model,
    pub thresholds: Vec<Threshold>,
}

/// Thresholds over a sorted `q` grid with a running maximum applied.
pub fn prediction_curve(
    data: &Dataset,
    cache: &ReplicateCache,
    q_grid: &[f64],
    config: &SimultaneousConfig,
) -> Result<QuantileCurve, BootstrapError> {
    if q_grid.windows(2).any(|w| !(w[0] <= w[1])) || q_grid.iter().any(|q| !(0.0..=1.0).contains(q)) {
        return Err(BootstrapError::InvalidConfig("q grid must be sorted and lie in [0, 1]".into()));
    }
    let thresholds = q_grid.iter().map(|&q| lambda_threshold(data, cache, q, config)).collect::<Result<Vec<_>, _>>()?;
    let mut running = 1.0f64;
    let lower_bounds = thresholds
        .iter()
        .map(|t| {
            running = running.max(t.lambda);
            running
        })
        .collect();
    Ok(QuantileCurve {
        q_grid: q_grid.to_vec(),
        lower_bounds,
        alpha: config.alpha,
        xi: config.xi,
        model: config.model,
        thresholds,
    })
}

/// Retain/reject raster over `(Lambda_1, Lambda_0)` at fixed per-arm quantiles.
/// Row `i` corresponds to `lambda1_grid[i]`.
pub fn membership_grid(
    data: &Dataset,
    cache: &ReplicateCache,
    q: (f64, f64),
    lambda1_grid: &[f64],
    lambda0_grid: &[f64],
    config: &SimultaneousConfig,
) -> Result<Vec<Vec<bool>>, BootstrapError> {
    lambda1_grid
        .iter()
        .map(|&l1| {
            lambda0_grid
                .iter()
                .map(|&l0| {
                    test_confounding_hypothesis(data, cache, q, (l1, l0), config)
                        .map(|t| t.decision == Decision::Retain)
                })
                .collect()
        })
        .collect()
}

/// Writes `q,lambda_lower` rows.
pub fn write_curve_csv<W: std::io::Write>(curve: &QuantileCurve, w: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["q", "lambda_lower"])?;
    for (q, l) in curve.q_grid.iter().zip(&curve.lower_bounds) {
        wtr.write_record([q.to_string(), l.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

//! Weighted maximum-likelihood logistic regression (Newton with step halving).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCORE_TOL: f64 = 1e-8;
pub const MAX_ITER: usize = 100;
/// Linear predictors beyond this magnitude indicate (quasi-)separation.
pub const SEPARATION_ETA: f64 = 30.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("data are separated: linear predictor reached {max_eta:.1} while the likelihood kept improving")]
    Separation { max_eta: f64 },
    #[error("design restricted to sampled rows is rank deficient")]
    RankDeficient,
    #[error("no convergence after {iterations} iterations (score norm {grad_norm:.3e})")]
    NoConvergence { iterations: usize, grad_norm: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropensityFit {
    pub beta: Vec<f64>,
    pub fitted: Vec<f64>,
    pub loglik: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// log(1 + e^x) without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Weighted log-likelihood `sum k_i (z_i eta_i - log(1 + e^eta_i))`.
pub fn log_likelihood(s: &DMatrix<f64>, z: &[u8], k: &[f64], beta: &DVector<f64>) -> f64 {
    let eta = s * beta;
    eta.iter().zip(z).zip(k).filter(|(_, &w)| w > 0.0).map(|((&e, &zi), &w)| w * (zi as f64 * e - softplus(e))).sum()
}

/// Weighted score `sum k_i (z_i - p_i) s_i`.
pub fn score(s: &DMatrix<f64>, z: &[u8], k: &[f64], beta: &DVector<f64>) -> DVector<f64> {
    let eta = s * beta;
    let r =
        DVector::from_iterator(s.nrows(), eta.iter().zip(z).zip(k).map(|((&e, &zi), &w)| w * (zi as f64 - sigmoid(e))));
    s.tr_mul(&r)
}

fn hessian(s: &DMatrix<f64>, k: &[f64], eta: &DVector<f64>) -> DMatrix<f64> {
    let p = s.ncols();
    let mut h = DMatrix::zeros(p, p);
    for i in 0..s.nrows() {
        if k[i] <= 0.0 {
            continue;
        }
        let pi = sigmoid(eta[i]);
        let w = k[i] * pi * (1.0 - pi);
        let row = s.row(i);
        for a in 0..p {
            let ra = w * row[a];
            for b in a..p {
                h[(a, b)] += ra * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            h[(a, b)] = h[(b, a)];
        }
    }
    h
}

/// Fits the propensity model by weighted maximum likelihood.
///
/// `k` holds nonnegative (bootstrap) multiplicities; `init` is an optional
/// Newton starting point.
pub fn fit_mle(s: &DMatrix<f64>, z: &[u8], k: &[f64], init: Option<&[f64]>) -> Result<PropensityFit, FitError> {
    let (n, p) = (s.nrows(), s.ncols());
    if z.len() != n {
        return Err(FitError::DimensionMismatch { expected: n, got: z.len() });
    }
    if k.len() != n {
        return Err(FitError::DimensionMismatch { expected: n, got: k.len() });
    }
    let sampled: Vec<usize> = (0..n).filter(|&i| k[i] > 0.0).collect();
    let sub = s.select_rows(sampled.iter());
    if crate::dataset::numerical_rank(&sub) < p {
        return Err(FitError::RankDeficient);
    }
    let mut beta = match init {
        Some(b) if b.len() == p => DVector::from_column_slice(b),
        Some(b) => return Err(FitError::DimensionMismatch { expected: p, got: b.len() }),
        None => DVector::zeros(p),
    };
    let mut ll = log_likelihood(s, z, k, &beta);
    let mut iterations = 0;
    loop {
        let g = score(s, z, k, &beta);
        let gn = g.norm();
        if gn <= SCORE_TOL {
            // One polishing Newton step: quadratic convergence takes the
            // estimate to rounding level, kept only if the score shrinks.
            let (mut beta, mut ll, mut gn) = (beta, ll, gn);
            if let Some(ch) = hessian(s, k, &(s * &beta)).cholesky() {
                let cand = &beta + ch.solve(&g);
                let cg = score(s, z, k, &cand).norm();
                if cg <= gn {
                    ll = log_likelihood(s, z, k, &cand);
                    beta = cand;
                    gn = cg;
                }
            }
            let eta = s * &beta;
            return Ok(PropensityFit {
                beta: beta.iter().copied().collect(),
                fitted: eta.iter().map(|&e| sigmoid(e)).collect(),
                loglik: ll,
                grad_norm: gn,
                iterations,
            });
        }
        if iterations >= MAX_ITER {
            return Err(FitError::NoConvergence { iterations, grad_norm: gn });
        }
        iterations += 1;
        let eta = s * &beta;
        let h = hessian(s, k, &eta);
        let step = match h.clone().cholesky() {
            Some(ch) => ch.solve(&g),
            None => return Err(FitError::RankDeficient),
        };
        // Near the optimum the likelihood change is below rounding noise and
        // the quadratic model is accurate, so take the full Newton step.
        let decrement = g.dot(&step);
        let mut t = 1.0;
        let mut accepted = None;
        if decrement < 1e-10 {
            let cand = &beta + &step;
            let cll = log_likelihood(s, z, k, &cand);
            accepted = Some((cand, cll));
        }
        for _ in 0..40 {
            if accepted.is_some() {
                break;
            }
            let cand = &beta + &step * t;
            let cll = log_likelihood(s, z, k, &cand);
            if cll >= ll {
                accepted = Some((cand, cll));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, cll)) = accepted else {
            return Err(FitError::NoConvergence { iterations, grad_norm: gn });
        };
        let max_eta = sampled.iter().map(|&i| (s.row(i) * &cand)[0].abs()).fold(0.0, f64::max);
        if max_eta > SEPARATION_ETA && cll > ll {
            return Err(FitError::Separation { max_eta });
        }
        let stalled = cand == beta;
        beta = cand;
        ll = cll;
        if stalled {
            return Err(FitError::NoConvergence { iterations, grad_norm: gn });
        }
    }
}

/// Fitted probability for one design row.
pub fn predict(fit: &PropensityFit, s_row: &[f64]) -> Result<f64, FitError> {
    if s_row.len() != fit.beta.len() {
        return Err(FitError::DimensionMismatch { expected: fit.beta.len(), got: s_row.len() });
    }
    Ok(sigmoid(fit.beta.iter().zip(s_row).map(|(b, x)| b * x).sum()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(n: usize) -> Vec<f64> {
        vec![1.0; n]
    }

    #[test]
    fn balanced_intercept_only() {
        let s = DMatrix::from_element(4, 1, 1.0);
        let fit = fit_mle(&s, &[1, 0, 1, 0], &ones(4), None).unwrap();
        assert!(fit.beta[0].abs() < 1e-12);
        assert!(fit.fitted.iter().all(|&e| (e - 0.5).abs() < 1e-12));
    }

    #[test]
    fn intercept_only_is_logit_of_mean() {
        let s = DMatrix::from_element(4, 1, 1.0);
        let fit = fit_mle(&s, &[1, 1, 1, 0], &ones(4), None).unwrap();
        assert!((fit.beta[0] - 3f64.ln()).abs() < 1e-10);
        assert!((fit.fitted[0] - 0.75).abs() < 1e-10);
    }

    #[test]
    fn separation_detected() {
        let s = DMatrix::from_row_slice(4, 2, &[1.0, -1.0, 1.0, -2.0, 1.0, 1.0, 1.0, 2.0]);
        let err = fit_mle(&s, &[0, 0, 1, 1], &ones(4), None).unwrap_err();
        assert!(matches!(err, FitError::Separation { .. }), "{err:?}");
    }

    #[test]
    fn zero_weight_rows_can_make_design_deficient() {
        let s = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let err = fit_mle(&s, &[1, 0, 1, 0], &[1.0, 1.0, 0.0, 0.0], None).unwrap_err();
        assert_eq!(err, FitError::RankDeficient);
    }

    #[test]
    fn predict_values() {
        let fit = PropensityFit { beta: vec![1.0], fitted: vec![], loglik: 0.0, grad_norm: 0.0, iterations: 0 };
        assert_eq!(predict(&fit, &[0.0]).unwrap(), 0.5);
        assert!((predict(&fit, &[2f64.ln()]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((predict(&fit, &[-(9f64.ln())]).unwrap() - 0.1).abs() < 1e-15);
        assert!(matches!(predict(&fit, &[1.0, 2.0]), Err(FitError::DimensionMismatch { .. })));
    }

    #[test]
    fn stable_helpers() {
        assert_eq!(sigmoid(-800.0), 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0) >= 0.0);
        assert!((logit(sigmoid(1.3)) - 1.3).abs() < 1e-12);
    }

    #[test]
    fn warm_start_reaches_same_fit() {
        let s = DMatrix::from_row_slice(6, 2, &[1.0, 0.1, 1.0, 0.5, 1.0, 0.9, 1.0, 0.2, 1.0, 0.7, 1.0, 0.4]);
        let z = [1, 0, 1, 0, 0, 1];
        let a = fit_mle(&s, &z, &ones(6), None).unwrap();
        let b = fit_mle(&s, &z, &ones(6), Some(&a.beta)).unwrap();
        assert_eq!(b.iterations, 0);
        for (x, y) in a.beta.iter().zip(&b.beta) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}

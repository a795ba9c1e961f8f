//! Synthetic confounded data with a constant treatment effect of 5.
//!
//! `X ~ U[0,1]`; a hidden `U` is `U[0,1]` when `X <= 0.7` and `U[0,100]`
//! otherwise; `Z ~ Bernoulli(1 / (1 + exp(X - 0.1 U)))`;
//! `Y(0) = 2X + 3U`, `Y(1) = Y(0) + 5`. Only `(Y, Z, X)` reach the dataset.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DataError, Dataset, Observation, Transform, TransformSpec};
use crate::logistic::{fit_mle, logit, FitError};

/// The unit-level (hence overlap-weighted) effect.
pub const TRUE_EFFECT: f64 = 5.0;
const MAX_REDRAWS: usize = 100;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("sample size {0} is below 2")]
    TooSmall(usize),
    #[error("every one of {MAX_REDRAWS} draws left an arm empty")]
    DegenerateArm,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Simulated {
    /// Designs not yet built; see [`default_transform`].
    pub dataset: Dataset,
    pub true_effect: f64,
    /// Hidden confounder in the dataset's stored (treated-first) order.
    /// Debug use only; nothing in the analysis reads it.
    hidden_u: Vec<f64>,
}

impl Simulated {
    pub fn hidden_confounder(&self) -> &[f64] {
        &self.hidden_u
    }
}

/// True propensity `P(Z = 1 | X, U)` of the generating model.
pub fn true_propensity(x: f64, u: f64) -> f64 {
    1.0 / (1.0 + (x - 0.1 * u).exp())
}

/// One draw of `(x, u, z, y0)`.
fn draw_unit(rng: &mut ChaCha8Rng) -> (f64, f64, u8, f64) {
    let x: f64 = rng.gen();
    let u: f64 = if x <= 0.7 { rng.gen() } else { 100.0 * rng.gen::<f64>() };
    let z = (rng.gen::<f64>() < true_propensity(x, u)) as u8;
    (x, u, z, 2.0 * x + 3.0 * u)
}

pub fn generate(spec: &SimSpec) -> Result<Simulated, SimError> {
    if spec.n < 2 {
        return Err(SimError::TooSmall(spec.n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for _ in 0..MAX_REDRAWS {
        let units: Vec<(f64, f64, u8, f64)> = (0..spec.n).map(|_| draw_unit(&mut rng)).collect();
        let n1 = units.iter().filter(|u| u.2 == 1).count();
        if n1 == 0 || n1 == spec.n {
            continue;
        }
        let obs =
            units.iter().map(|&(x, _, z, y0)| Observation { y: y0 + TRUE_EFFECT * z as f64, z, x: vec![x] }).collect();
        let dataset = Dataset::from_observations(obs, vec!["x".to_string()])?;
        let hidden_u = dataset.original_index.iter().map(|&i| units[i].1).collect();
        return Ok(Simulated { dataset, true_effect: TRUE_EFFECT, hidden_u });
    }
    Err(SimError::DegenerateArm)
}

/// `s(x) = (1, x)` and `g(x) = x`.
pub fn default_transform() -> TransformSpec {
    TransformSpec { s_columns: vec![Transform::Identity("x".into())], g_columns: vec![Transform::Identity("x".into())] }
}

/// Population rates at which units violate a logit-scale bound `log lambda`.
///
/// The observable propensity model is the best logistic fit in `x`; its
/// population limit is approximated on `n_pop` draws. Returns
/// `(delta1, delta0)`: the fractions of treated and control units whose true
/// propensity differs from the model's by more than `log lambda`.
pub fn violation_rates(lambda: f64, n_pop: usize, seed: u64) -> Result<(f64, f64), SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let units: Vec<(f64, f64, u8, f64)> = (0..n_pop).map(|_| draw_unit(&mut rng)).collect();
    let s = nalgebra::DMatrix::from_fn(n_pop, 2, |i, j| if j == 0 { 1.0 } else { units[i].0 });
    let z: Vec<u8> = units.iter().map(|u| u.2).collect();
    let fit = fit_mle(&s, &z, &vec![1.0; n_pop], None)?;
    let thr = lambda.ln();
    let mut viol = [0usize; 2];
    let mut count = [0usize; 2];
    for (i, &(x, u, zi, _)) in units.iter().enumerate() {
        let psi = logit(true_propensity(x, u)) - logit(fit.fitted[i]);
        count[zi as usize] += 1;
        if psi.abs() > thr {
            viol[zi as usize] += 1;
        }
    }
    Ok((viol[1] as f64 / count[1] as f64, viol[0] as f64 / count[0] as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_effect() {
        let sim = generate(&SimSpec { n: 200, seed: 3 }).unwrap();
        let d = &sim.dataset;
        for (o, &u) in d.observations.iter().zip(sim.hidden_confounder()) {
            let y0 = 2.0 * o.x[0] + 3.0 * u;
            assert!((o.y - y0 - 5.0 * o.z as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = generate(&SimSpec { n: 50, seed: 11 }).unwrap();
        let b = generate(&SimSpec { n: 50, seed: 11 }).unwrap();
        assert_eq!(a.dataset.observations, b.dataset.observations);
        let c = generate(&SimSpec { n: 50, seed: 12 }).unwrap();
        assert_ne!(a.dataset.observations, c.dataset.observations);
    }

    #[test]
    fn tiny_samples_rejected() {
        assert!(matches!(generate(&SimSpec { n: 1, seed: 0 }), Err(SimError::TooSmall(1))));
    }

    #[test]
    fn x_tail_frequency() {
        let n = 100_000;
        let sim = generate(&SimSpec { n, seed: 5 }).unwrap();
        let p = sim.dataset.observations.iter().filter(|o| o.x[0] > 0.7).count() as f64 / n as f64;
        let se = (0.3f64 * 0.7 / n as f64).sqrt();
        assert!((p - 0.3).abs() < 3.0 * se, "{p}");
    }
}

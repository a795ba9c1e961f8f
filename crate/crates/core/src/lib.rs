//! Robust marginal sensitivity analysis for the overlap-weighted average
//! treatment effect.
//!
//! The crate fits an observable propensity model, bounds the Hajek
//! overlap-weighted contrast when unmeasured confounding may shift each
//! unit's propensity (with a fraction of units allowed to violate the bound
//! entirely), and wraps those bounds in an augmented percentile bootstrap.

pub mod bootstrap;
pub mod bounds;
pub mod dataset;
pub mod linprog;
pub mod logistic;
pub mod simulate;
pub mod simultaneous;
pub mod whole;

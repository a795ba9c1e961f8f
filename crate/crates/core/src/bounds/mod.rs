//! Separate-group sensitivity bounds for the overlap-weighted effect.
//!
//! Each unit's overlap weight may move inside a box determined by how far its
//! true propensity can sit from the fitted one on the logit scale. At least a
//! budgeted number of units per arm must respect the `Lambda` bound; the rest
//! are free. Extremising the Hajek contrast over that set is a
//! linear-fractional program, made linear by the Charnes-Cooper substitution
//! `omega_bar = t * omega`, `Delta_bar = t * Delta`.
//!
//! Two solution routes exist: the literal LP/MILP ([`build_charnes_cooper`])
//! and a column-generation decomposition ([`decomposed`]) that exploits the
//! per-unit trapezoid structure. Bootstrap loops and the exact search in
//! [`branch`] use the decomposition.

pub mod branch;
mod charnes_cooper;
pub mod decomposed;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::linprog::{solve_lp, solve_milp, LpError, LpStatus, MilpOptions, Sense};
use crate::logistic::{logit, sigmoid};

pub use charnes_cooper::{big_m, build_charnes_cooper, LiteralLayout};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("propensity {0} is on the boundary of (0, 1)")]
    BoundaryInput(f64),
    #[error("invalid sensitivity parameters: {0}")]
    InvalidParams(String),
    #[error("zero total weight in arm {arm}")]
    ZeroMass { arm: u8 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Solver(#[from] LpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityParams {
    pub lambda1: f64,
    pub lambda0: f64,
    pub delta1: f64,
    pub delta0: f64,
    /// Bootstrap replicates use `Lambda_z * exp(lambda_gap)`.
    #[serde(default)]
    pub lambda_gap: f64,
}

impl SensitivityParams {
    pub fn new(lambda1: f64, lambda0: f64, delta1: f64, delta0: f64) -> Result<Self, BoundsError> {
        let p = SensitivityParams { lambda1, lambda0, delta1, delta0, lambda_gap: 0.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn symmetric(lambda: f64, delta: f64) -> Result<Self, BoundsError> {
        Self::new(lambda, lambda, delta, delta)
    }

    pub fn with_gap(mut self, gap: f64) -> Result<Self, BoundsError> {
        self.lambda_gap = gap;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), BoundsError> {
        for (name, l) in [("lambda1", self.lambda1), ("lambda0", self.lambda0)] {
            if !(l >= 1.0) {
                return Err(BoundsError::InvalidParams(format!("{name} = {l} must be >= 1")));
            }
        }
        for (name, d) in [("delta1", self.delta1), ("delta0", self.delta0)] {
            if !(0.0..=1.0).contains(&d) {
                return Err(BoundsError::InvalidParams(format!("{name} = {d} must lie in [0, 1]")));
            }
        }
        if !(self.lambda_gap >= 0.0) || self.lambda_gap.is_infinite() {
            return Err(BoundsError::InvalidParams(format!(
                "lambda_gap = {} must be finite and >= 0",
                self.lambda_gap
            )));
        }
        Ok(())
    }

    pub fn lambda(&self, z: u8) -> f64 {
        if z == 1 {
            self.lambda1
        } else {
            self.lambda0
        }
    }

    pub fn delta(&self, z: u8) -> f64 {
        if z == 1 {
            self.delta1
        } else {
            self.delta0
        }
    }

    /// Parameters with the gap folded into `Lambda` (and reset to zero).
    pub fn widened(&self) -> Self {
        let f = self.lambda_gap.exp();
        SensitivityParams { lambda1: self.lambda1 * f, lambda0: self.lambda0 * f, lambda_gap: 0.0, ..*self }
    }
}

/// Range of the overlap weight `omega_i` allowed for one unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitBox {
    pub a_low: f64,
    pub a_up: f64,
}

/// `logit^-1(psi + logit(e_hat))`, with `psi = +-inf` mapping to 1 and 0.
pub fn adjust_propensity(e_hat: f64, psi: f64) -> Result<f64, BoundsError> {
    if !(e_hat > 0.0 && e_hat < 1.0) {
        return Err(BoundsError::BoundaryInput(e_hat));
    }
    if psi == f64::INFINITY {
        return Ok(1.0);
    }
    if psi == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    Ok(sigmoid(psi + logit(e_hat)))
}

/// Overlap-weight box of a unit with fitted propensity `e_hat` in arm `z`.
pub fn unit_box(e_hat: f64, z: u8, lambda: f64) -> Result<UnitBox, BoundsError> {
    if !(lambda >= 1.0) {
        return Err(BoundsError::InvalidParams(format!("lambda = {lambda} must be >= 1")));
    }
    let log_l = lambda.ln();
    let e_lo = adjust_propensity(e_hat, -log_l)?;
    let e_hi = adjust_propensity(e_hat, log_l)?;
    Ok(if z == 1 { UnitBox { a_low: 1.0 - e_hi, a_up: 1.0 - e_lo } } else { UnitBox { a_low: e_lo, a_up: e_hi } })
}

/// Overlap weight at the fitted propensity: `1 - e` for treated, `e` for controls.
pub fn reference_weight(e_hat: f64, z: u8) -> f64 {
    if z == 1 {
        1.0 - e_hat
    } else {
        e_hat
    }
}

/// Difference of `k * omega`-weighted outcome means between arms.
pub fn hajek(omega: &[f64], y: &[f64], z: &[u8], k: &[f64]) -> Result<f64, BoundsError> {
    let n = y.len();
    if omega.len() != n || z.len() != n || k.len() != n {
        return Err(BoundsError::DimensionMismatch("hajek inputs differ in length".into()));
    }
    let mut num = [0.0f64; 2];
    let mut den = [0.0f64; 2];
    for i in 0..n {
        let w = k[i] * omega[i];
        num[z[i] as usize] += w * y[i];
        den[z[i] as usize] += w;
    }
    for arm in [1u8, 0] {
        if !(den[arm as usize] > 0.0) {
            return Err(BoundsError::ZeroMass { arm });
        }
    }
    Ok(num[1] / den[1] - num[0] / den[0])
}

/// `ceil(n_z (1 - delta_z))`, guarded against representation error.
pub fn budget(n_z: usize, delta: f64) -> usize {
    let b = (n_z as f64 * (1.0 - delta) - 1e-9).ceil();
    (b.max(0.0) as usize).min(n_z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relaxation {
    RelaxedLp,
    Milp,
}

/// Per-unit restriction used by residual problems and enumeration oracles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitState {
    Free,
    /// `Delta_i = 1`: the unit respects the `Lambda` bound.
    Bounded,
    /// `Delta_i = 0`: the unit's weight is unrestricted.
    Unbounded,
}

/// One fully specified bound optimisation.
#[derive(Debug, Clone)]
pub struct BoundsProblem {
    pub boxes: Vec<UnitBox>,
    pub y: Vec<f64>,
    pub z: Vec<u8>,
    /// n x dim g balance design.
    pub g: DMatrix<f64>,
    /// Bootstrap multiplicities (all ones on the original sample).
    pub k: Vec<f64>,
    /// Counting budgets (treated, control); fractional values are allowed.
    pub budgets: (f64, f64),
    /// Overlap weights at the fitted propensity (inside every box).
    pub reference: Vec<f64>,
    pub states: Vec<UnitState>,
}

impl BoundsProblem {
    /// Problem for the sample in `data` with fitted propensities `e_hat`,
    /// multiplicities `k`, and parameters taken as-is (no gap applied).
    pub fn new(data: &Dataset, e_hat: &[f64], k: &[f64], params: &SensitivityParams) -> Result<Self, BoundsError> {
        params.validate()?;
        let b = (budget(data.n1, params.delta1) as f64, budget(data.n0, params.delta0) as f64);
        Self::with_lambdas(data, e_hat, k, (params.lambda1, params.lambda0), b)
    }

    pub fn with_lambdas(
        data: &Dataset,
        e_hat: &[f64],
        k: &[f64],
        lambdas: (f64, f64),
        budgets: (f64, f64),
    ) -> Result<Self, BoundsError> {
        let n = data.n();
        if e_hat.len() != n || k.len() != n {
            return Err(BoundsError::DimensionMismatch(format!(
                "expected {n} propensities and multiplicities, got {} and {}",
                e_hat.len(),
                k.len()
            )));
        }
        let z = data.z();
        let boxes = e_hat
            .iter()
            .zip(&z)
            .map(|(&e, &zi)| unit_box(e, zi, if zi == 1 { lambdas.0 } else { lambdas.1 }))
            .collect::<Result<Vec<_>, _>>()?;
        let reference = e_hat.iter().zip(&z).map(|(&e, &zi)| reference_weight(e, zi)).collect();
        Ok(BoundsProblem {
            boxes,
            y: data.y(),
            z,
            g: data.g_design.clone(),
            k: k.to_vec(),
            budgets,
            reference,
            states: vec![UnitState::Free; n],
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn arm_size(&self, z: u8) -> usize {
        self.z.iter().filter(|&&v| v == z).count()
    }

    pub fn budget(&self, z: u8) -> f64 {
        if z == 1 {
            self.budgets.0
        } else {
            self.budgets.1
        }
    }

    pub fn with_budgets(&self, b1: f64, b0: f64) -> Self {
        BoundsProblem { budgets: (b1, b0), ..self.clone() }
    }

    pub fn with_states(&self, states: Vec<UnitState>) -> Self {
        BoundsProblem { states, ..self.clone() }
    }

    /// Hajek estimate at the reference (fitted) weights.
    pub fn reference_estimate(&self) -> Result<f64, BoundsError> {
        hajek(&self.reference, &self.y, &self.z, &self.k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundStatus {
    Exact,
    Relaxed,
    Infeasible,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub lp_iterations: usize,
    pub columns: usize,
    pub master_solves: usize,
    pub literal_fallback: bool,
}

impl SolverStats {
    fn absorb(&mut self, other: &SolverStats) {
        self.lp_iterations += other.lp_iterations;
        self.columns += other.columns;
        self.master_solves += other.master_solves;
        self.literal_fallback |= other.literal_fallback;
    }
}

/// An optimal point in Charnes-Cooper variables.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPoint {
    pub omega_bar: Vec<f64>,
    pub delta_bar: Vec<f64>,
    pub t1: f64,
    pub t0: f64,
    pub value: f64,
}

impl SolutionPoint {
    pub fn t(&self, z: u8) -> f64 {
        if z == 1 {
            self.t1
        } else {
            self.t0
        }
    }

    /// Recovered `Delta_i = Delta_bar_i / t_{z_i}`.
    pub fn delta(&self, z: &[u8]) -> Vec<f64> {
        self.delta_bar.iter().zip(z).map(|(&d, &zi)| d / self.t(zi)).collect()
    }

    /// Recovered weights `omega_i = omega_bar_i / t_{z_i}`.
    pub fn omega(&self, z: &[u8]) -> Vec<f64> {
        self.omega_bar.iter().zip(z).map(|(&w, &zi)| w / self.t(zi)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsResult {
    pub tau_min: f64,
    pub tau_max: f64,
    pub status: BoundStatus,
    pub stats: SolverStats,
    pub argmin: Option<SolutionPoint>,
    pub argmax: Option<SolutionPoint>,
}

impl BoundsResult {
    pub fn infeasible(stats: SolverStats) -> Self {
        BoundsResult {
            tau_min: f64::NEG_INFINITY,
            tau_max: f64::INFINITY,
            status: BoundStatus::Infeasible,
            stats,
            argmin: None,
            argmax: None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.status != BoundStatus::Infeasible
    }

    pub fn contains(&self, other: &BoundsResult, tol: f64) -> bool {
        self.tau_min <= other.tau_min + tol && other.tau_max <= self.tau_max + tol
    }
}

/// Outcome of one directional optimisation.
#[derive(Debug, Clone)]
pub enum Extremum {
    Optimal(SolutionPoint),
    Infeasible,
    Unbounded,
}

fn assemble(min: Extremum, max: Extremum, status: BoundStatus, stats: SolverStats) -> BoundsResult {
    match (min, max) {
        (Extremum::Infeasible, _) | (_, Extremum::Infeasible) => BoundsResult::infeasible(stats),
        (lo, hi) => {
            let (tau_min, argmin) = match lo {
                Extremum::Optimal(p) => (p.value, Some(p)),
                _ => (f64::NEG_INFINITY, None),
            };
            let (tau_max, argmax) = match hi {
                Extremum::Optimal(p) => (p.value, Some(p)),
                _ => (f64::INFINITY, None),
            };
            let status = if argmin.is_none() || argmax.is_none() { BoundStatus::Relaxed } else { status };
            BoundsResult { tau_min, tau_max, status, stats, argmin, argmax }
        }
    }
}

/// Solves the relaxation of one direction, via column generation with a
/// literal-LP fallback.
pub fn solve_relaxed_extremum(
    problem: &BoundsProblem,
    sense: Sense,
    stats: &mut SolverStats,
) -> Result<Extremum, BoundsError> {
    match decomposed::solve(problem, sense) {
        Ok((ext, st)) => {
            stats.absorb(&st);
            Ok(ext)
        }
        Err(decomposed::CgFailure { stats: st, reason }) => {
            stats.absorb(&st);
            stats.literal_fallback = true;
            log::debug!("column generation failed ({reason}); solving the literal LP");
            solve_literal_extremum(problem, sense, Relaxation::RelaxedLp, None, stats)
        }
    }
}

/// Solves one direction through the literal Charnes-Cooper LP or MILP.
pub fn solve_literal_extremum(
    problem: &BoundsProblem,
    sense: Sense,
    mode: Relaxation,
    incumbent: Option<&SolutionPoint>,
    stats: &mut SolverStats,
) -> Result<Extremum, BoundsError> {
    let (lp, layout) = build_charnes_cooper(problem, sense, mode);
    let sol = match mode {
        Relaxation::RelaxedLp => solve_lp(&lp)?,
        Relaxation::Milp => {
            let opts = MilpOptions { incumbent: incumbent.map(|p| layout.encode(problem, p)), ..Default::default() };
            solve_milp(&lp, &opts)?
        }
    };
    stats.lp_iterations += sol.iterations;
    Ok(match sol.status {
        LpStatus::Optimal => Extremum::Optimal(layout.decode(problem, &sol.x)),
        LpStatus::Infeasible => Extremum::Infeasible,
        LpStatus::Unbounded => Extremum::Unbounded,
    })
}

/// Lower and upper bounds of the effect over the sensitivity set.
///
/// `RelaxedLp` solves the LP relaxation of the counting indicators; `Milp`
/// solves the exact mixed-binary problem by branching on the indicators
/// ([`branch`]), seeded with the rounded relaxation. The literal big-M
/// formulation stays available through [`solve_literal_extremum`].
pub fn solve_bounds(problem: &BoundsProblem, mode: Relaxation) -> Result<BoundsResult, BoundsError> {
    let mut stats = SolverStats::default();
    let min = solve_relaxed_extremum(problem, Sense::Minimize, &mut stats)?;
    if matches!(min, Extremum::Infeasible) {
        return Ok(BoundsResult::infeasible(stats));
    }
    let max = solve_relaxed_extremum(problem, Sense::Maximize, &mut stats)?;
    if mode == Relaxation::RelaxedLp {
        return Ok(assemble(min, max, BoundStatus::Relaxed, stats));
    }
    let mut exact = |relaxed: Extremum, sense: Sense| -> Result<Extremum, BoundsError> {
        let seed = match &relaxed {
            Extremum::Optimal(p) => match tighten_extremum(problem, p, sense, &mut stats)? {
                Extremum::Optimal(q) => Some(q),
                _ => None,
            },
            _ => None,
        };
        branch::solve_exact(problem, sense, seed, &mut stats)
    };
    let min = exact(min, Sense::Minimize)?;
    let max = exact(max, Sense::Maximize)?;
    Ok(assemble(min, max, BoundStatus::Exact, stats))
}

/// Rounds a relaxed optimum to an integral indicator pattern and re-solves.
///
/// In each arm the `ceil(budget)` units with the largest recovered `Delta`
/// are pinned to 1 and the others to 0, then the residual LP is solved. Any
/// unit left at 0 has a weaker restriction than at 1, so this is the best
/// completion of that ordering; the value is attainable by an integral
/// solution and therefore lies inside the exact interval.
pub fn tighten_extremum(
    problem: &BoundsProblem,
    relaxed: &SolutionPoint,
    sense: Sense,
    stats: &mut SolverStats,
) -> Result<Extremum, BoundsError> {
    let delta = relaxed.delta(&problem.z);
    let mut states = problem.states.clone();
    for arm in [1u8, 0] {
        let mut idx: Vec<usize> =
            (0..problem.n()).filter(|&i| problem.z[i] == arm && problem.states[i] != UnitState::Unbounded).collect();
        let pinned =
            (0..problem.n()).filter(|&i| problem.z[i] == arm && problem.states[i] == UnitState::Bounded).count();
        let need = (problem.budget(arm) - 1e-9).ceil().max(0.0) as usize;
        idx.sort_by(|&a, &b| {
            let ka = (problem.states[a] == UnitState::Bounded) as u8;
            let kb = (problem.states[b] == UnitState::Bounded) as u8;
            kb.cmp(&ka).then(delta[b].total_cmp(&delta[a])).then(a.cmp(&b))
        });
        let take = need.max(pinned);
        for (rank, &i) in idx.iter().enumerate() {
            states[i] = if rank < take { UnitState::Bounded } else { UnitState::Unbounded };
        }
    }
    let residual = problem.with_states(states);
    solve_relaxed_extremum(&residual, sense, stats)
}

/// Inner interval obtained by rounding both relaxed optima.
pub fn tighten_from_relaxed(problem: &BoundsProblem, relaxed: &BoundsResult) -> Result<BoundsResult, BoundsError> {
    let (Some(pmin), Some(pmax)) = (&relaxed.argmin, &relaxed.argmax) else {
        return Ok(relaxed.clone());
    };
    let mut stats = SolverStats::default();
    let min = tighten_extremum(problem, pmin, Sense::Minimize, &mut stats)?;
    let max = tighten_extremum(problem, pmax, Sense::Maximize, &mut stats)?;
    Ok(assemble(min, max, BoundStatus::Exact, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Observation;

    #[test]
    fn adjust_examples() {
        assert_eq!(adjust_propensity(0.5, 0.0).unwrap(), 0.5);
        assert!((adjust_propensity(0.5, 2f64.ln()).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((adjust_propensity(0.1, 9f64.ln()).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(adjust_propensity(0.3, f64::INFINITY).unwrap(), 1.0);
        assert_eq!(adjust_propensity(0.3, f64::NEG_INFINITY).unwrap(), 0.0);
        assert!(matches!(adjust_propensity(1.0, 0.0), Err(BoundsError::BoundaryInput(_))));
    }

    #[test]
    fn box_examples() {
        let b = unit_box(0.5, 1, 1.0).unwrap();
        assert_eq!((b.a_low, b.a_up), (0.5, 0.5));
        for z in [0, 1] {
            let b = unit_box(0.5, z, 2.0).unwrap();
            assert!((b.a_low - 1.0 / 3.0).abs() < 1e-15 && (b.a_up - 2.0 / 3.0).abs() < 1e-15);
        }
        let b = unit_box(0.2, 0, f64::INFINITY).unwrap();
        assert_eq!((b.a_low, b.a_up), (0.0, 1.0));
    }

    #[test]
    fn hajek_examples() {
        let z = [1, 1, 0, 0];
        assert_eq!(hajek(&[0.5; 4], &[3.0, 1.0, 0.0, 0.0], &z, &[1.0; 4]).unwrap(), 2.0);
        let v = hajek(&[1.0 / 3.0, 2.0 / 3.0, 1.0, 1.0], &[1.0, 3.0, 0.0, 0.0], &z, &[1.0; 4]).unwrap();
        assert!((v - 7.0 / 3.0).abs() < 1e-15);
        // duplicating unit 1 and dropping unit 2 equals the explicit resample
        let w = [0.2, 0.7, 0.4, 0.9];
        let y = [5.0, -1.0, 2.0, 3.0];
        let a = hajek(&w, &y, &z, &[2.0, 0.0, 1.0, 1.0]).unwrap();
        let b = hajek(&[0.2, 0.2, 0.4, 0.9], &[5.0, 5.0, 2.0, 3.0], &z, &[1.0; 4]).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert_eq!(hajek(&w, &y, &z, &[1.0, 1.0, 0.0, 0.0]), Err(BoundsError::ZeroMass { arm: 0 }));
    }

    #[test]
    fn budgets_round_up() {
        assert_eq!(budget(10, 0.0), 10);
        assert_eq!(budget(10, 0.1), 9);
        assert_eq!(budget(10, 0.15), 9);
        assert_eq!(budget(100, 0.07), 93);
        assert_eq!(budget(7, 1.0), 0);
    }

    pub(crate) fn toy(e: f64, lambda: f64) -> BoundsProblem {
        let obs = vec![
            Observation { y: 1.0, z: 1, x: vec![] },
            Observation { y: 3.0, z: 1, x: vec![] },
            Observation { y: 0.0, z: 0, x: vec![] },
            Observation { y: 0.0, z: 0, x: vec![] },
        ];
        let d = Dataset::from_observations(obs, vec![]).unwrap();
        let p = SensitivityParams::symmetric(lambda, 0.0).unwrap();
        BoundsProblem::new(&d, &[e; 4], &[1.0; 4], &p).unwrap()
    }

    #[test]
    fn two_by_two_box_example() {
        // weights in [1/3, 2/3]: extremes put 2/3 on one treated unit, 1/3 on the other
        let r = solve_bounds(&toy(0.5, 2.0), Relaxation::RelaxedLp).unwrap();
        assert!((r.tau_min - 5.0 / 3.0).abs() < 1e-9, "{r:?}");
        assert!((r.tau_max - 7.0 / 3.0).abs() < 1e-9, "{r:?}");
        let e = solve_bounds(&toy(0.5, 2.0), Relaxation::Milp).unwrap();
        assert_eq!(e.status, BoundStatus::Exact);
        assert!((e.tau_min - 5.0 / 3.0).abs() < 1e-9 && (e.tau_max - 7.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn full_violation_frees_weights() {
        let mut p = toy(0.5, 2.0);
        p.budgets = (0.0, 0.0);
        let r = solve_bounds(&p, Relaxation::RelaxedLp).unwrap();
        // any convex combination of treated outcomes
        assert!((r.tau_min - 1.0).abs() < 1e-9 && (r.tau_max - 3.0).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn tightened_point_is_integral_and_inside() {
        let p = toy(0.4, 3.0).with_budgets(1.0, 1.0);
        let r = solve_bounds(&p, Relaxation::RelaxedLp).unwrap();
        let t = tighten_from_relaxed(&p, &r).unwrap();
        assert!(r.contains(&t, 1e-9));
        for pt in [t.argmin.unwrap(), t.argmax.unwrap()] {
            for d in pt.delta(&p.z) {
                assert!(d.abs() < 1e-9 || (d - 1.0).abs() < 1e-9);
            }
        }
    }
}

//! Whole-population sensitivity model.
//!
//! Here a single budget `ceil(n (1 - delta))` of bounded units is shared by
//! both arms. The feasible set is the union, over integer splits `(l, B - l)`
//! of that budget, of separate-group feasible sets, so bounds are envelopes
//! of separate-group bounds over an [`AllocationGrid`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{
    budget, solve_bounds, solve_relaxed_extremum, tighten_from_relaxed, BoundStatus, BoundsError, BoundsProblem,
    BoundsResult, Extremum, Relaxation, SolverStats,
};
use crate::dataset::Dataset;
use crate::linprog::Sense;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WholeError {
    #[error("allocation grid is empty")]
    EmptyGrid,
    #[error("invalid whole-population parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WholeParams {
    pub lambda: f64,
    pub delta: f64,
    #[serde(default)]
    pub lambda_gap: f64,
}

impl WholeParams {
    pub fn new(lambda: f64, delta: f64) -> Result<Self, WholeError> {
        let p = WholeParams { lambda, delta, lambda_gap: 0.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), WholeError> {
        if !(self.lambda >= 1.0) {
            return Err(WholeError::InvalidParams(format!("lambda = {} must be >= 1", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(WholeError::InvalidParams(format!("delta = {} must lie in [0, 1]", self.delta)));
        }
        if !(self.lambda_gap >= 0.0) || self.lambda_gap.is_infinite() {
            return Err(WholeError::InvalidParams(format!("lambda_gap = {} must be finite and >= 0", self.lambda_gap)));
        }
        Ok(())
    }
}

/// Integer splits of the shared budget between treated and control arms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationGrid {
    pub total_budget: usize,
    pub cells: Vec<(usize, usize)>,
}

impl AllocationGrid {
    pub fn new(n1: usize, n0: usize, delta: f64) -> Self {
        Self::from_budget(n1, n0, budget(n1 + n0, delta))
    }

    pub fn from_budget(n1: usize, n0: usize, total: usize) -> Self {
        let lo = total.saturating_sub(n0);
        let hi = n1.min(total);
        let cells = (lo..=hi).map(|l| (l, total - l)).collect();
        AllocationGrid { total_budget: total, cells }
    }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: (usize, usize),
    pub bounds: BoundsResult,
}

#[derive(Debug, Clone)]
pub struct WholeResult {
    pub envelope: BoundsResult,
    pub cells: Vec<CellResult>,
    pub infeasible_cells: usize,
}

/// Envelope of per-cell bounds; infeasible cells contribute nothing.
pub fn envelope(cells: &[CellResult], status: BoundStatus) -> BoundsResult {
    let mut stats = SolverStats::default();
    let mut best: Option<BoundsResult> = None;
    for c in cells {
        stats.lp_iterations += c.bounds.stats.lp_iterations;
        stats.columns += c.bounds.stats.columns;
        stats.master_solves += c.bounds.stats.master_solves;
        stats.literal_fallback |= c.bounds.stats.literal_fallback;
        if !c.bounds.is_feasible() {
            continue;
        }
        best = Some(match best {
            None => c.bounds.clone(),
            Some(mut b) => {
                if c.bounds.tau_min < b.tau_min {
                    b.tau_min = c.bounds.tau_min;
                    b.argmin = c.bounds.argmin.clone();
                }
                if c.bounds.tau_max > b.tau_max {
                    b.tau_max = c.bounds.tau_max;
                    b.argmax = c.bounds.argmax.clone();
                }
                b
            }
        });
    }
    match best {
        Some(mut b) => {
            b.stats = stats;
            if b.status != BoundStatus::Relaxed || status == BoundStatus::Relaxed {
                b.status = status;
            }
            b
        }
        None => BoundsResult::infeasible(stats),
    }
}

/// Per-cell problems sharing one set of unit boxes.
pub fn cell_problems(base: &BoundsProblem, grid: &AllocationGrid) -> Vec<((usize, usize), BoundsProblem)> {
    grid.cells.iter().map(|&(l, m)| ((l, m), base.with_budgets(l as f64, m as f64))).collect()
}

/// Whole-population bounds for fitted propensities `e_hat` and multiplicities `k`.
pub fn solve_whole_bounds(
    data: &Dataset,
    e_hat: &[f64],
    params: &WholeParams,
    k: &[f64],
    mode: Relaxation,
) -> Result<WholeResult, WholeError> {
    params.validate()?;
    let grid = AllocationGrid::new(data.n1, data.n0, params.delta);
    if grid.cells.is_empty() {
        return Err(WholeError::EmptyGrid);
    }
    let base = BoundsProblem::with_lambdas(data, e_hat, k, (params.lambda, params.lambda), (0.0, 0.0))?;
    solve_grid(&base, &grid, mode)
}

pub fn solve_grid(base: &BoundsProblem, grid: &AllocationGrid, mode: Relaxation) -> Result<WholeResult, WholeError> {
    let cells: Vec<CellResult> = cell_problems(base, grid)
        .into_par_iter()
        .map(|(cell, p)| solve_bounds(&p, mode).map(|bounds| CellResult { cell, bounds }))
        .collect::<Result<_, _>>()?;
    let infeasible_cells = cells.iter().filter(|c| !c.bounds.is_feasible()).count();
    if infeasible_cells > 0 {
        log::info!("{infeasible_cells} of {} allocation cells are infeasible", cells.len());
    }
    let status = if mode == Relaxation::Milp { BoundStatus::Exact } else { BoundStatus::Relaxed };
    Ok(WholeResult { envelope: envelope(&cells, status), cells, infeasible_cells })
}

/// Inner interval from rounding each cell's relaxed optimum to an integral
/// indicator pattern; contained in the exact whole-population interval.
pub fn adhoc_tighten(base: &BoundsProblem, relaxed: &WholeResult) -> Result<BoundsResult, WholeError> {
    let cells: Vec<CellResult> = relaxed
        .cells
        .par_iter()
        .map(|c| {
            let p = base.with_budgets(c.cell.0 as f64, c.cell.1 as f64);
            tighten_from_relaxed(&p, &c.bounds).map(|bounds| CellResult { cell: c.cell, bounds })
        })
        .collect::<Result<_, _>>()?;
    Ok(envelope(&cells, BoundStatus::Exact))
}

/// `(min over cells of L, max over cells of U)` from per-cell quantiles.
pub fn sharper_ci_bounds(per_cell: &[(f64, f64)]) -> Result<(f64, f64), WholeError> {
    if per_cell.is_empty() {
        return Err(WholeError::EmptyGrid);
    }
    let l = per_cell.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let u = per_cell.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    Ok((l, u))
}

/// Relaxed bounds under the single shared counting constraint
/// `sum_i Delta_i >= B` with `Delta_i in [0, 1]`, computed independently of the
/// integer grid: the treated share `u` of the budget is a continuous variable
/// and is searched by interval branch-and-bound. On `[a, b]` the value is at
/// most that with budgets `(a, B - b)` (fewer units required in both arms) and
/// at least the better endpoint.
pub fn single_constraint_relaxed(
    base: &BoundsProblem,
    total_budget: f64,
    tol: f64,
) -> Result<BoundsResult, WholeError> {
    let n1 = base.arm_size(1) as f64;
    let n0 = base.arm_size(0) as f64;
    let lo = (total_budget - n0).max(0.0);
    let hi = n1.min(total_budget);
    if lo > hi {
        return Err(WholeError::EmptyGrid);
    }
    let mut stats = SolverStats::default();
    let mut out = [0.0f64; 2];
    for (slot, sense) in [(0usize, Sense::Minimize), (1, Sense::Maximize)] {
        let sg = sense.sign();
        let mut eval = |b1: f64, b0: f64| -> Result<f64, WholeError> {
            let p = base.with_budgets(b1, b0);
            Ok(match solve_relaxed_extremum(&p, sense, &mut stats)? {
                Extremum::Optimal(pt) => sg * pt.value,
                Extremum::Infeasible => f64::NEG_INFINITY,
                Extremum::Unbounded => f64::INFINITY,
            })
        };
        let mut best = eval(lo, total_budget - lo)?.max(eval(hi, total_budget - hi)?);
        let mut stack = vec![(lo, hi, eval(lo, total_budget - hi)?)];
        while let Some((a, b, ub)) = stack.pop() {
            if ub <= best + tol || b - a < 1e-9 {
                continue;
            }
            let mid = 0.5 * (a + b);
            best = best.max(eval(mid, total_budget - mid)?);
            for (x, y) in [(a, mid), (mid, b)] {
                let u = eval(x, total_budget - y)?;
                if u > best + tol {
                    stack.push((x, y, u));
                }
            }
        }
        out[slot] = sg * best;
    }
    if out[0] == f64::INFINITY || out[1] == f64::NEG_INFINITY {
        return Ok(BoundsResult::infeasible(stats));
    }
    Ok(BoundsResult {
        tau_min: out[0],
        tau_max: out[1],
        status: BoundStatus::Relaxed,
        stats,
        argmin: None,
        argmax: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_cells() {
        let g = AllocationGrid::from_budget(3, 4, 5);
        assert_eq!(g.cells, vec![(1, 4), (2, 3), (3, 2)]);
        let g = AllocationGrid::new(3, 4, 0.0);
        assert_eq!(g.cells, vec![(3, 4)]);
        let g = AllocationGrid::from_budget(3, 4, 0);
        assert_eq!(g.cells, vec![(0, 0)]);
        for &(l, m) in &AllocationGrid::new(20, 30, 0.3).cells {
            assert!(l <= 20 && m <= 30 && l + m == 35);
        }
    }

    #[test]
    fn sharper_examples() {
        assert_eq!(sharper_ci_bounds(&[(1.0, 4.0), (0.5, 5.0)]).unwrap(), (0.5, 5.0));
        assert_eq!(sharper_ci_bounds(&[(1.0, 4.0)]).unwrap(), (1.0, 4.0));
        assert_eq!(sharper_ci_bounds(&[]), Err(WholeError::EmptyGrid));
    }
}

//! Dense linear programming with an optional binary layer.
//!
//! Problems are assembled row by row through [`LpProblem`], solved by a
//! bounded-variable two-phase revised simplex ([`solve_lp`]) and, when some
//! variables are binary, by best-first branch-and-bound ([`solve_milp`]).

mod lpformat;
mod milp;
mod simplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use milp::{solve_milp, MilpOptions};
pub use simplex::solve_lp;

/// Primal feasibility tolerance after row equilibration.
pub const FEAS_TOL: f64 = 1e-8;
/// A binary is integral when within this distance of 0 or 1.
pub const INT_TOL: f64 = 1e-6;
/// Default relative optimality gap for branch-and-bound.
pub const GAP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

impl Sense {
    /// +1 for maximisation, -1 for minimisation.
    pub fn sign(self) -> f64 {
        match self {
            Sense::Minimize => -1.0,
            Sense::Maximize => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub label: String,
    pub coeffs: Vec<(usize, f64)>,
    pub kind: RowKind,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal values of the structural variables (empty unless optimal).
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub iterations: usize,
    /// Shadow prices: d(objective)/d(rhs) per row, in the problem's own sense.
    pub duals: Vec<f64>,
}

impl LpSolution {
    pub(crate) fn without_point(status: LpStatus, iterations: usize) -> Self {
        let objective_value = match status {
            LpStatus::Optimal => 0.0,
            LpStatus::Infeasible => f64::NAN,
            LpStatus::Unbounded => f64::NAN,
        };
        LpSolution { status, x: Vec::new(), objective_value, iterations, duals: Vec::new() }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("simplex stalled after {iterations} iterations")]
    NumericalBreakdown { iterations: usize },
    #[error("branch-and-bound exceeded {nodes} nodes")]
    NodeLimitExceeded { nodes: usize },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

/// A linear program `opt c'x` subject to labelled rows and variable bounds.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub sense: Sense,
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    binary: Vec<bool>,
    names: Vec<String>,
    rows: Vec<Row>,
}

impl LpProblem {
    pub fn new(sense: Sense) -> Self {
        LpProblem {
            sense,
            objective: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            binary: Vec::new(),
            names: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, cost: f64, lo: f64, hi: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lo);
        self.upper.push(hi);
        self.binary.push(false);
        self.names.push(name.into());
        self.objective.len() - 1
    }

    pub fn add_binary(&mut self, name: impl Into<String>, cost: f64) -> usize {
        let j = self.add_var(name, cost, 0.0, 1.0);
        self.binary[j] = true;
        j
    }

    /// Adds a row; repeated column indices are merged and zeros dropped.
    pub fn add_row(&mut self, label: impl Into<String>, coeffs: &[(usize, f64)], kind: RowKind, rhs: f64) -> usize {
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
        let mut sorted = coeffs.to_vec();
        sorted.sort_by_key(|&(j, _)| j);
        for (j, a) in sorted {
            match merged.last_mut() {
                Some(last) if last.0 == j => last.1 += a,
                _ => merged.push((j, a)),
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        self.rows.push(Row { label: label.into(), coeffs: merged, kind, rhs });
        self.rows.len() - 1
    }

    pub fn add_le(&mut self, label: impl Into<String>, coeffs: &[(usize, f64)], rhs: f64) -> usize {
        self.add_row(label, coeffs, RowKind::Le, rhs)
    }

    pub fn add_ge(&mut self, label: impl Into<String>, coeffs: &[(usize, f64)], rhs: f64) -> usize {
        self.add_row(label, coeffs, RowKind::Ge, rhs)
    }

    pub fn add_eq(&mut self, label: impl Into<String>, coeffs: &[(usize, f64)], rhs: f64) -> usize {
        self.add_row(label, coeffs, RowKind::Eq, rhs)
    }

    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lower[j] = lo;
        self.upper[j] = hi;
    }

    pub fn set_cost(&mut self, j: usize, cost: f64) {
        self.objective[j] = cost;
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn name(&self, j: usize) -> &str {
        &self.names[j]
    }

    pub fn is_binary(&self, j: usize) -> bool {
        self.binary[j]
    }

    pub fn binaries(&self) -> Vec<usize> {
        (0..self.num_vars()).filter(|&j| self.binary[j]).collect()
    }

    /// Number of rows whose label starts with `prefix`.
    pub fn count_rows(&self, prefix: &str) -> usize {
        self.rows.iter().filter(|r| r.label.starts_with(prefix)).count()
    }

    pub fn objective_of(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest row or bound violation of `x`, each row measured after
    /// scaling by its largest coefficient magnitude.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for r in &self.rows {
            let scale = r.coeffs.iter().fold(0.0f64, |m, &(_, a)| m.max(a.abs())).max(1e-300);
            let resid = (r.activity(x) - r.rhs) / scale;
            let v = match r.kind {
                RowKind::Le => resid.max(0.0),
                RowKind::Ge => (-resid).max(0.0),
                RowKind::Eq => resid.abs(),
            };
            worst = worst.max(v);
        }
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        worst
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        for j in 0..n {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(LpError::InvalidProblem(format!("bad bounds [{lo}, {hi}] on {}", self.names[j])));
            }
            if !self.objective[j].is_finite() {
                return Err(LpError::InvalidProblem(format!("non-finite cost on {}", self.names[j])));
            }
        }
        for r in &self.rows {
            if !r.rhs.is_finite() || r.coeffs.iter().any(|&(j, a)| j >= n || !a.is_finite()) {
                return Err(LpError::InvalidProblem(format!("bad data in row {}", r.label)));
            }
        }
        Ok(())
    }

    /// Renders the problem in CPLEX LP text format.
    pub fn to_lp_format(&self) -> String {
        lpformat::write(self)
    }
}

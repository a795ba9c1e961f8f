//! Bounded-variable revised simplex with an explicit basis inverse.
//!
//! Every row `a'x (<=|>=|=) b` is equilibrated by its largest coefficient and
//! turned into an equality with a bounded slack. Phase 1 minimises the sum of
//! artificials added only where the starting point violates a row; phase 2
//! then optimises the true objective with those artificials pinned at zero.

use super::{LpError, LpProblem, LpSolution, LpStatus, RowKind, FEAS_TOL};

const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const HARRIS_TOL: f64 = 1e-10;
const REFACTOR_EVERY: usize = 100;
const BLAND_AFTER: usize = 500;

/// Solves the continuous relaxation of `problem` (binary marks are ignored).
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution, LpError> {
    solve_with_bounds(problem, problem.lower(), problem.upper())
}

pub(crate) fn solve_with_bounds(problem: &LpProblem, lower: &[f64], upper: &[f64]) -> Result<LpSolution, LpError> {
    problem.validate()?;
    if lower.iter().zip(upper).any(|(l, u)| l > u) {
        return Ok(LpSolution::without_point(LpStatus::Infeasible, 0));
    }
    let mut t = Tableau::new(problem, lower, upper);
    let cap = 20 * (t.m + t.ntot) + 10_000;

    if t.nart > 0 {
        let mut cost = vec![0.0; t.ntot];
        for c in cost.iter_mut().skip(t.nstruct + t.m) {
            *c = 1.0;
        }
        t.run(&cost, cap)?;
        t.refactor()?;
        let infeas: f64 = (t.nstruct + t.m..t.ntot).map(|j| t.x[j].max(0.0)).sum();
        if infeas > FEAS_TOL {
            return Ok(LpSolution::without_point(LpStatus::Infeasible, t.iterations));
        }
        for j in t.nstruct + t.m..t.ntot {
            t.lo[j] = 0.0;
            t.hi[j] = 0.0;
            if t.pos[j] < 0 {
                t.x[j] = 0.0;
            }
        }
    }

    // Internally always minimise.
    let sign = -problem.sense.sign();
    let mut cost = vec![0.0; t.ntot];
    for (j, &c) in problem.objective().iter().enumerate() {
        cost[j] = sign * c;
    }
    let status = t.run(&cost, cap)?;
    if status == LpStatus::Unbounded {
        return Ok(LpSolution::without_point(LpStatus::Unbounded, t.iterations));
    }
    t.refactor()?;

    let x: Vec<f64> = t.x[..t.nstruct].iter().enumerate().map(|(j, &v)| v.clamp(lower[j], upper[j])).collect();
    let pi = t.duals(&cost);
    let duals = pi.iter().zip(&t.row_scale).map(|(p, s)| sign * p * s).collect();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective_value: problem.objective_of(&x),
        x,
        iterations: t.iterations,
        duals,
    })
}

struct Tableau {
    m: usize,
    nstruct: usize,
    nart: usize,
    ntot: usize,
    /// Sparse columns of the equilibrated constraint matrix, slacks and artificials included.
    cols: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    row_scale: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    /// Row of each basic variable, -1 when nonbasic.
    pos: Vec<isize>,
    /// Column-major basis inverse: binv[i + k*m] = (B^-1)_{ik}.
    binv: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
}

impl Tableau {
    fn new(p: &LpProblem, lower: &[f64], upper: &[f64]) -> Self {
        let m = p.num_rows();
        let nstruct = p.num_vars();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nstruct];
        let mut b = Vec::with_capacity(m);
        let mut row_scale = Vec::with_capacity(m);
        let mut lo: Vec<f64> = lower.to_vec();
        let mut hi: Vec<f64> = upper.to_vec();
        for (i, r) in p.rows().iter().enumerate() {
            let amax = r.coeffs.iter().fold(0.0f64, |mx, &(_, a)| mx.max(a.abs()));
            let s = if amax > 0.0 { 1.0 / amax } else { 1.0 };
            for &(j, a) in &r.coeffs {
                cols[j].push((i, a * s));
            }
            b.push(r.rhs * s);
            row_scale.push(s);
        }
        // Nonbasic starting point for the structurals.
        let mut x: Vec<f64> = (0..nstruct)
            .map(|j| {
                if lo[j].is_finite() {
                    lo[j]
                } else if hi[j].is_finite() {
                    hi[j]
                } else {
                    0.0
                }
            })
            .collect();
        let mut resid = b.clone();
        for (j, col) in cols.iter().enumerate() {
            if x[j] != 0.0 {
                for &(i, a) in col {
                    resid[i] -= a * x[j];
                }
            }
        }
        let mut basis = vec![usize::MAX; m];
        let mut binv_diag = vec![1.0; m];
        let mut arts: Vec<(usize, f64, f64)> = Vec::new();
        for (i, r) in p.rows().iter().enumerate() {
            let (slo, shi) = match r.kind {
                RowKind::Le => (0.0, f64::INFINITY),
                RowKind::Ge => (f64::NEG_INFINITY, 0.0),
                RowKind::Eq => (0.0, 0.0),
            };
            cols.push(vec![(i, 1.0)]);
            lo.push(slo);
            hi.push(shi);
            let sj = nstruct + i;
            let ri = resid[i];
            if ri >= slo && ri <= shi {
                x.push(ri);
                basis[i] = sj;
            } else {
                let c = ri.clamp(slo, shi);
                x.push(c);
                let sgn = if ri > c { 1.0 } else { -1.0 };
                arts.push((i, sgn, (ri - c).abs()));
            }
        }
        let nart = arts.len();
        for &(i, sgn, val) in &arts {
            cols.push(vec![(i, sgn)]);
            lo.push(0.0);
            hi.push(f64::INFINITY);
            x.push(val);
            basis[i] = cols.len() - 1;
            binv_diag[i] = sgn;
        }
        let ntot = cols.len();
        let mut pos = vec![-1isize; ntot];
        for (i, &j) in basis.iter().enumerate() {
            pos[j] = i as isize;
        }
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i + i * m] = binv_diag[i];
        }
        Tableau {
            m,
            nstruct,
            nart,
            ntot,
            cols,
            b,
            row_scale,
            lo,
            hi,
            x,
            basis,
            pos,
            binv,
            iterations: 0,
            since_refactor: 0,
        }
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m];
        for &(k, a) in &self.cols[j] {
            let col = &self.binv[k * m..(k + 1) * m];
            for (o, &v) in out.iter_mut().zip(col) {
                *o += a * v;
            }
        }
        out
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let cb: Vec<f64> = self.basis.iter().map(|&j| cost[j]).collect();
        (0..m)
            .map(|k| {
                let col = &self.binv[k * m..(k + 1) * m];
                cb.iter().zip(col).map(|(c, v)| c * v).sum()
            })
            .collect()
    }

    /// Rebuilds B^-1 by Gauss-Jordan elimination and recomputes basic values.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        self.since_refactor = 0;
        if m == 0 {
            return Ok(());
        }
        // Row-major augmented [B | I].
        let w = 2 * m;
        let mut a = vec![0.0; m * w];
        for (k, &j) in self.basis.iter().enumerate() {
            for &(i, v) in &self.cols[j] {
                a[i * w + k] = v;
            }
        }
        for i in 0..m {
            a[i * w + m + i] = 1.0;
        }
        for c in 0..m {
            let mut piv = c;
            let mut best = a[c * w + c].abs();
            for r in c + 1..m {
                let v = a[r * w + c].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-12 {
                return Err(LpError::NumericalBreakdown { iterations: self.iterations });
            }
            if piv != c {
                for k in 0..w {
                    a.swap(c * w + k, piv * w + k);
                }
            }
            let inv = 1.0 / a[c * w + c];
            for k in 0..w {
                a[c * w + k] *= inv;
            }
            let (head, rest) = a.split_at_mut(c * w);
            let (prow, tail) = rest.split_at_mut(w);
            for r in (0..c).chain(c + 1..m) {
                let row = if r < c { &mut head[r * w..(r + 1) * w] } else { &mut tail[(r - c - 1) * w..(r - c) * w] };
                let f = row[c];
                if f != 0.0 {
                    for k in c..w {
                        row[k] -= f * prow[k];
                    }
                }
            }
        }
        // Rows of the right half are rows of B^-1; store column-major.
        for i in 0..m {
            for k in 0..m {
                self.binv[i + k * m] = a[i * w + m + k];
            }
        }
        // x_B = B^-1 (b - N x_N)
        let mut r = self.b.clone();
        for j in 0..self.ntot {
            if self.pos[j] < 0 && self.x[j] != 0.0 {
                for &(i, v) in &self.cols[j] {
                    r[i] -= v * self.x[j];
                }
            }
        }
        for i in 0..m {
            let mut s = 0.0;
            for k in 0..m {
                s += self.binv[i + k * m] * r[k];
            }
            self.x[self.basis[i]] = s;
        }
        Ok(())
    }

    fn pivot(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let inv = 1.0 / alpha[r];
        for k in 0..m {
            let col = &mut self.binv[k * m..(k + 1) * m];
            let pr = col[r] * inv;
            if pr != 0.0 {
                for (i, v) in col.iter_mut().enumerate() {
                    if i != r {
                        *v -= alpha[i] * pr;
                    }
                }
            }
            col[r] = pr;
        }
    }

    /// Runs simplex iterations minimising `cost` from the current basis.
    /// Two-pass Harris ratio test: the loosest step allowed with slightly
    /// relaxed bounds, then the largest pivot among rows blocking within it.
    fn harris_ratio(&self, alpha: &[f64], dir: f64) -> (Option<usize>, f64) {
        let mut theta_max = f64::INFINITY;
        for i in 0..self.m {
            let rate = -dir * alpha[i];
            if rate.abs() <= PIVOT_TOL {
                continue;
            }
            let bj = self.basis[i];
            let xi = self.x[bj];
            let lim = if rate < 0.0 {
                (xi - self.lo[bj] + HARRIS_TOL) / -rate
            } else {
                (self.hi[bj] - xi + HARRIS_TOL) / rate
            };
            theta_max = theta_max.min(lim);
        }
        let mut leave = None;
        let mut theta = f64::INFINITY;
        if theta_max.is_finite() {
            let mut best_piv = 0.0;
            for i in 0..self.m {
                let rate = -dir * alpha[i];
                if rate.abs() <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.ratio(i, rate);
                if ratio <= theta_max && alpha[i].abs() > best_piv {
                    best_piv = alpha[i].abs();
                    leave = Some(i);
                    theta = ratio.max(0.0);
                }
            }
        }
        (leave, theta)
    }

    /// Textbook minimum-ratio test with ties broken by the smallest basic
    /// index, as Bland's rule requires.
    fn bland_ratio(&self, alpha: &[f64], dir: f64) -> (Option<usize>, f64) {
        let mut min_ratio = f64::INFINITY;
        for i in 0..self.m {
            let rate = -dir * alpha[i];
            if rate.abs() > PIVOT_TOL {
                min_ratio = min_ratio.min(self.ratio(i, rate).max(0.0));
            }
        }
        if !min_ratio.is_finite() {
            return (None, f64::INFINITY);
        }
        let leave = (0..self.m)
            .filter(|&i| {
                let rate = -dir * alpha[i];
                rate.abs() > PIVOT_TOL && self.ratio(i, rate).max(0.0) <= min_ratio + 1e-12
            })
            .min_by_key(|&i| self.basis[i]);
        (leave, min_ratio)
    }

    fn ratio(&self, i: usize, rate: f64) -> f64 {
        let bj = self.basis[i];
        if rate < 0.0 {
            (self.x[bj] - self.lo[bj]) / -rate
        } else {
            (self.hi[bj] - self.x[bj]) / rate
        }
    }

    fn run(&mut self, cost: &[f64], cap: usize) -> Result<LpStatus, LpError> {
        let m = self.m;
        let mut degenerate = 0usize;
        let mut bland = false;
        loop {
            if self.iterations >= cap {
                return Err(LpError::NumericalBreakdown { iterations: self.iterations });
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let pi = self.duals(cost);

            // Pricing.
            let mut enter: Option<(usize, f64, f64)> = None;
            let mut best = 0.0;
            for j in 0..self.ntot {
                if self.pos[j] >= 0 || self.lo[j] == self.hi[j] {
                    continue;
                }
                let (dot, mag) =
                    self.cols[j].iter().fold((0.0, 0.0), |(s, m), &(i, a)| (s + pi[i] * a, m + (pi[i] * a).abs()));
                let d = cost[j] - dot;
                // relative to the terms that cancel in `d`, so large costs do
                // not turn rounding noise into attractive columns
                let tol = OPT_TOL * (1.0 + cost[j].abs() + mag);
                let (xj, lj, hj) = (self.x[j], self.lo[j], self.hi[j]);
                let dir = if d < -tol && xj < hj {
                    1.0
                } else if d > tol && xj > lj {
                    -1.0
                } else {
                    continue;
                };
                if bland {
                    enter = Some((j, dir, d));
                    break;
                }
                if d.abs() > best {
                    best = d.abs();
                    enter = Some((j, dir, d));
                }
            }
            let Some((j, dir, dj)) = enter else {
                return Ok(LpStatus::Optimal);
            };
            self.iterations += 1;
            self.since_refactor += 1;

            let alpha = self.ftran(j);
            let (mut leave, mut theta) =
                if bland { self.bland_ratio(&alpha, dir) } else { self.harris_ratio(&alpha, dir) };
            let range = self.hi[j] - self.lo[j];
            let flip = range <= theta;
            if flip {
                theta = range;
                leave = None;
            }
            if !theta.is_finite() {
                return Ok(LpStatus::Unbounded);
            }

            // Steps that barely move the objective count as degenerate; after
            // too many in a row switch to Bland's rule for the rest of the run.
            if theta * dj.abs() <= 1e-12 {
                degenerate += 1;
                if degenerate > BLAND_AFTER {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }

            if theta != 0.0 {
                self.x[j] += dir * theta;
                for i in 0..m {
                    let bj = self.basis[i];
                    self.x[bj] -= dir * theta * alpha[i];
                }
            }
            if flip {
                self.x[j] = if dir > 0.0 { self.hi[j] } else { self.lo[j] };
                continue;
            }
            let r = leave.expect("finite step without a blocking row");
            let out = self.basis[r];
            let rate = -dir * alpha[r];
            self.x[out] = if rate < 0.0 { self.lo[out] } else { self.hi[out] };
            self.pivot(r, &alpha);
            self.basis[r] = j;
            self.pos[j] = r as isize;
            self.pos[out] = -1;
        }
    }
}

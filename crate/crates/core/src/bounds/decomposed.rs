//! Column generation for the relaxed Charnes-Cooper LP.
//!
//! For fixed `t_z > 0` the scaled pair `(omega_i, Delta_i)` of each unit lives
//! in the trapezoid with vertices `(0,0)`, `(k,0)`, `(k a_low,1)`,
//! `(k a_up,1)`. The arm's feasible cone (before counting, balance and
//! normalisation) is therefore generated by "rays" that put every unit at one
//! vertex, and the relaxed LP becomes a master problem over nonnegative ray
//! multipliers `mu` with only `4 + dim g` rows:
//!
//! * `sum mu W = 1` per arm (normalisation),
//! * `sum mu (b_z - D) <= 0` per arm (counting),
//! * `sum_T mu G - sum_C mu G = 0` (balance).
//!
//! Pricing separates by unit, so each iteration costs O(n). The master is
//! exact: at convergence its value equals the literal LP optimum, and
//! `t_z = sum mu`, `omega_bar = sum mu w`, `Delta_bar = sum mu d` recover the
//! literal solution.

use std::collections::HashSet;

use super::charnes_cooper::arm_sign;
use super::{BoundsProblem, Extremum, SolutionPoint, SolverStats, UnitState};
use crate::linprog::{solve_lp, LpProblem, LpStatus, Sense};

/// Master iterations before giving up in favour of the literal LP.
pub const MAX_ROUNDS: usize = 5000;
const PHASE1_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct CgFailure {
    pub stats: SolverStats,
    pub reason: String,
}

struct Ray {
    arm: u8,
    /// Per unit of the arm, in `arm_units` order.
    w: Vec<f64>,
    d: Vec<f64>,
    sum_w: f64,
    sum_d: f64,
    sum_y: f64,
    sum_g: Vec<f64>,
}

struct Ctx<'a> {
    p: &'a BoundsProblem,
    units: [Vec<usize>; 2],
    /// Balance rows rescaled to unit max-abs per column of g.
    g_scale: Vec<f64>,
}

impl<'a> Ctx<'a> {
    fn arm_units(&self, arm: u8) -> &[usize] {
        &self.units[arm as usize]
    }

    fn make_ray(&self, arm: u8, w: Vec<f64>, d: Vec<f64>) -> Ray {
        let units = self.arm_units(arm);
        let dg = self.p.g.ncols();
        let mut sum_g = vec![0.0; dg];
        let mut sum_y = 0.0;
        for (pos, &i) in units.iter().enumerate() {
            sum_y += w[pos] * self.p.y[i];
            for (j, sg) in sum_g.iter_mut().enumerate() {
                *sg += w[pos] * self.p.g[(i, j)] * self.g_scale[j];
            }
        }
        Ray { arm, sum_w: w.iter().sum(), sum_d: d.iter().sum(), sum_y, sum_g, w, d }
    }

    fn vertices(&self, i: usize) -> impl Iterator<Item = (u8, f64, f64)> {
        let (k, b) = (self.p.k[i], self.p.boxes[i]);
        let all = [(0u8, 0.0, 0.0), (1, k, 0.0), (2, k * b.a_low, 1.0), (3, k * b.a_up, 1.0)];
        let state = self.p.states[i];
        all.into_iter().filter(move |&(c, _, _)| match state {
            UnitState::Free => true,
            UnitState::Bounded => c >= 2,
            UnitState::Unbounded => c < 2,
        })
    }
}

const ROW_NORM: [usize; 2] = [1, 0]; // index by arm: norm_0 is row 1, norm_1 is row 0
const ROW_COUNT: [usize; 2] = [3, 2];
const ROW_BAL: usize = 4;

fn build_master(ctx: &Ctx, rays: &[Ray], phase1: bool, sigma: f64, caps: &[f64]) -> LpProblem {
    let dg = ctx.p.g.ncols();
    let mut lp = LpProblem::new(Sense::Maximize);
    let mut cols: Vec<Vec<(usize, f64)>> = Vec::new();
    for (r, ray) in rays.iter().enumerate() {
        let cost = if phase1 { 0.0 } else { sigma * arm_sign(ray.arm) * ray.sum_y };
        lp.add_var(format!("mu{r}"), cost, 0.0, f64::INFINITY);
        let a = ray.arm as usize;
        let mut c = vec![(ROW_NORM[a], ray.sum_w), (ROW_COUNT[a], ctx.p.budget(ray.arm) - ray.sum_d)];
        for j in 0..dg {
            c.push((ROW_BAL + j, arm_sign(ray.arm) * ray.sum_g[j]));
        }
        cols.push(c);
    }
    // Artificials: (row, sign).
    let mut arts = vec![(0usize, 1.0), (1, 1.0), (2, -1.0), (3, -1.0)];
    for j in 0..dg {
        arts.push((ROW_BAL + j, 1.0));
        arts.push((ROW_BAL + j, -1.0));
    }
    for (a, &(row, sgn)) in arts.iter().enumerate() {
        let (cost, hi) = if phase1 { (-1.0, f64::INFINITY) } else { (0.0, caps[a]) };
        lp.add_var(format!("art{a}"), cost, 0.0, hi);
        cols.push(vec![(row, sgn)]);
    }
    let nrows = ROW_BAL + dg;
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
    for (j, col) in cols.iter().enumerate() {
        for &(r, v) in col {
            rows[r].push((j, v));
        }
    }
    lp.add_eq("norm_1", &rows[0], 1.0);
    lp.add_eq("norm_0", &rows[1], 1.0);
    lp.add_le("count_1", &rows[2], 0.0);
    lp.add_le("count_0", &rows[3], 0.0);
    for j in 0..dg {
        lp.add_eq(format!("balance_{j}"), &rows[ROW_BAL + j], 0.0);
    }
    lp
}

/// Best vertex ray for `arm` under the duals; returns (reduced cost, ray codes).
fn price(ctx: &Ctx, arm: u8, duals: &[f64], phase1: bool, sigma: f64) -> (f64, Vec<u8>, Vec<f64>, Vec<f64>) {
    let a = arm as usize;
    let s = arm_sign(arm);
    let y_norm = duals[ROW_NORM[a]];
    let y_count = duals[ROW_COUNT[a]];
    let dg = ctx.p.g.ncols();
    let units = ctx.arm_units(arm);
    let mut total = -y_count * ctx.p.budget(arm);
    let mut codes = Vec::with_capacity(units.len());
    let mut ws = Vec::with_capacity(units.len());
    let mut ds = Vec::with_capacity(units.len());
    for &i in units {
        let mut cw = -y_norm;
        if !phase1 {
            cw += sigma * s * ctx.p.y[i];
        }
        for j in 0..dg {
            cw -= s * duals[ROW_BAL + j] * ctx.p.g[(i, j)] * ctx.g_scale[j];
        }
        let mut best: Option<(f64, u8, f64, f64)> = None;
        for (c, w, d) in ctx.vertices(i) {
            let v = cw * w + y_count * d;
            if best.is_none_or(|(bv, ..)| v > bv) {
                best = Some((v, c, w, d));
            }
        }
        let (v, c, w, d) = best.expect("every unit has a vertex");
        total += v;
        codes.push(c);
        ws.push(w);
        ds.push(d);
    }
    (total, codes, ws, ds)
}

pub fn solve(problem: &BoundsProblem, sense: Sense) -> Result<(Extremum, SolverStats), CgFailure> {
    let n = problem.n();
    let units = [
        (0..n).filter(|&i| problem.z[i] == 0).collect::<Vec<_>>(),
        (0..n).filter(|&i| problem.z[i] == 1).collect::<Vec<_>>(),
    ];
    let g_scale = (0..problem.g.ncols())
        .map(|j| {
            let m = problem.g.column(j).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if m > 0.0 {
                1.0 / m
            } else {
                1.0
            }
        })
        .collect();
    let ctx = Ctx { p: problem, units, g_scale };
    let sigma = sense.sign();
    let mut stats = SolverStats::default();
    let mut seen: HashSet<(u8, Vec<u8>)> = HashSet::new();
    let mut rays: Vec<Ray> = Vec::new();

    for arm in [1u8, 0] {
        let (w, d): (Vec<f64>, Vec<f64>) = ctx
            .arm_units(arm)
            .iter()
            .map(|&i| {
                let bounded = problem.states[i] != UnitState::Unbounded;
                (problem.k[i] * problem.reference[i], if bounded { 1.0 } else { 0.0 })
            })
            .unzip();
        rays.push(ctx.make_ray(arm, w, d));
    }

    let n_art = 4 + 2 * problem.g.ncols();
    let mut caps = vec![0.0; n_art];
    let mut phase1 = true;
    loop {
        if stats.master_solves >= MAX_ROUNDS {
            stats.columns = rays.len();
            return Err(CgFailure { stats, reason: format!("no convergence in {MAX_ROUNDS} rounds") });
        }
        let lp = build_master(&ctx, &rays, phase1, sigma, &caps);
        let sol = solve_lp(&lp).map_err(|e| CgFailure {
            stats: SolverStats { columns: rays.len(), ..stats.clone() },
            reason: format!("master LP: {e}"),
        })?;
        stats.master_solves += 1;
        stats.lp_iterations += sol.iterations;
        if sol.status != LpStatus::Optimal {
            stats.columns = rays.len();
            return Err(CgFailure { stats, reason: format!("master LP {:?}", sol.status) });
        }
        let tol = if phase1 { 1e-11 } else { 1e-9 * (1.0 + sol.objective_value.abs()) };
        let mut added = false;
        for arm in [1u8, 0] {
            let (rc, codes, w, d) = price(&ctx, arm, &sol.duals, phase1, sigma);
            if rc > tol && seen.insert((arm, codes)) {
                rays.push(ctx.make_ray(arm, w, d));
                added = true;
            }
        }
        if added {
            continue;
        }
        if phase1 {
            let art = &sol.x[rays.len()..];
            let infeas: f64 = art.iter().sum();
            if infeas > PHASE1_TOL {
                stats.columns = rays.len();
                return Ok((Extremum::Infeasible, stats));
            }
            caps = art.iter().map(|v| v.max(0.0)).collect();
            phase1 = false;
            continue;
        }
        stats.columns = rays.len();
        return Ok((Extremum::Optimal(recover(&ctx, &rays, &sol.x)), stats));
    }
}

fn recover(ctx: &Ctx, rays: &[Ray], mu: &[f64]) -> SolutionPoint {
    let n = ctx.p.n();
    let mut omega_bar = vec![0.0; n];
    let mut delta_bar = vec![0.0; n];
    let mut t = [0.0f64; 2];
    for (r, ray) in rays.iter().enumerate() {
        let m = mu[r];
        if m == 0.0 {
            continue;
        }
        t[ray.arm as usize] += m;
        for (pos, &i) in ctx.arm_units(ray.arm).iter().enumerate() {
            omega_bar[i] += m * ray.w[pos];
            delta_bar[i] += m * ray.d[pos];
        }
    }
    let value = (0..n).map(|i| arm_sign(ctx.p.z[i]) * ctx.p.y[i] * omega_bar[i]).sum();
    SolutionPoint { omega_bar, delta_bar, t1: t[1], t0: t[0], value }
}

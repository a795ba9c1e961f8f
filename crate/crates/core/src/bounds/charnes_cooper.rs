//! Literal Charnes-Cooper LP / Glover MILP.
//!
//! Variable layout: `omega_bar[0..n]`, `delta_bar[n..2n]`, `t1`, `t0`, and in
//! MILP mode the indicators `delta_tilde[2n+2..3n+2]`.

use super::{BoundsProblem, Relaxation, SolutionPoint, UnitState};
use crate::linprog::{LpProblem, Sense};

#[derive(Debug, Clone, Copy)]
pub struct LiteralLayout {
    pub n: usize,
    pub t1: usize,
    pub t0: usize,
    pub tilde: Option<usize>,
    pub big_m: f64,
}

impl LiteralLayout {
    pub fn omega(&self, i: usize) -> usize {
        i
    }

    pub fn delta(&self, i: usize) -> usize {
        self.n + i
    }

    pub fn t(&self, z: u8) -> usize {
        if z == 1 {
            self.t1
        } else {
            self.t0
        }
    }

    pub fn decode(&self, problem: &BoundsProblem, x: &[f64]) -> SolutionPoint {
        let n = self.n;
        let omega_bar = x[..n].to_vec();
        let value = (0..n).map(|i| arm_sign(problem.z[i]) * problem.y[i] * omega_bar[i]).sum();
        SolutionPoint { omega_bar, delta_bar: x[n..2 * n].to_vec(), t1: x[self.t1], t0: x[self.t0], value }
    }

    /// Literal variable vector for a point, with indicators rounded from `Delta`.
    pub fn encode(&self, problem: &BoundsProblem, p: &SolutionPoint) -> Vec<f64> {
        let n = self.n;
        let mut x = vec![0.0; if self.tilde.is_some() { 3 * n + 2 } else { 2 * n + 2 }];
        x[..n].copy_from_slice(&p.omega_bar);
        x[self.t1] = p.t1;
        x[self.t0] = p.t0;
        for i in 0..n {
            let t = p.t(problem.z[i]);
            let on = p.delta_bar[i] > 0.5 * t;
            x[n + i] = if on { t } else { 0.0 };
            if let Some(base) = self.tilde {
                x[base + i] = if on { 1.0 } else { 0.0 };
            }
        }
        x
    }
}

pub(crate) fn arm_sign(z: u8) -> f64 {
    if z == 1 {
        1.0
    } else {
        -1.0
    }
}

/// `max(1 / (a_min * budget_min), 1e6)` with `a_min` the smallest positive
/// lower box coefficient among sampled units.
pub fn big_m(problem: &BoundsProblem) -> f64 {
    let a_min = problem
        .boxes
        .iter()
        .zip(&problem.k)
        .filter(|(b, &k)| k > 0.0 && b.a_low > 0.0)
        .map(|(b, _)| b.a_low)
        .fold(f64::INFINITY, f64::min);
    let b_min = [problem.budgets.0, problem.budgets.1].into_iter().filter(|&b| b > 0.0).fold(f64::INFINITY, f64::min);
    if a_min.is_finite() && b_min.is_finite() {
        (1.0 / (a_min * b_min)).max(1e6)
    } else {
        1e6
    }
}

pub fn build_charnes_cooper(problem: &BoundsProblem, sense: Sense, mode: Relaxation) -> (LpProblem, LiteralLayout) {
    let n = problem.n();
    let inf = f64::INFINITY;
    let mut lp = LpProblem::new(sense);
    for i in 0..n {
        lp.add_var(format!("w{i}"), arm_sign(problem.z[i]) * problem.y[i], 0.0, inf);
    }
    for i in 0..n {
        let hi = if problem.states[i] == UnitState::Unbounded { 0.0 } else { inf };
        lp.add_var(format!("d{i}"), 0.0, 0.0, hi);
    }
    let t1 = lp.add_var("t1", 0.0, 0.0, inf);
    let t0 = lp.add_var("t0", 0.0, 0.0, inf);
    let m = big_m(problem);
    let tilde = (mode == Relaxation::Milp).then(|| {
        let base = lp.num_vars();
        for i in 0..n {
            lp.add_binary(format!("b{i}"), 0.0);
        }
        base
    });
    let layout = LiteralLayout { n, t1, t0, tilde, big_m: m };

    for i in 0..n {
        let (k, b) = (problem.k[i], problem.boxes[i]);
        let t = layout.t(problem.z[i]);
        let (w, d) = (i, n + i);
        // k a_low Delta_bar <= omega_bar <= k t - k (1 - a_up) Delta_bar
        lp.add_ge(format!("box_lo_{i}"), &[(w, 1.0), (d, -k * b.a_low)], 0.0);
        lp.add_le(format!("box_up_{i}"), &[(w, 1.0), (t, -k), (d, k * (1.0 - b.a_up))], 0.0);
        match tilde {
            None => {
                lp.add_le(format!("dcap_{i}"), &[(d, 1.0), (t, -1.0)], 0.0);
            }
            Some(base) => {
                let bt = base + i;
                lp.add_le(format!("glover_on_{i}"), &[(d, 1.0), (bt, -m)], 0.0);
                lp.add_ge(format!("glover_off_{i}"), &[(d, 1.0), (t, -1.0), (bt, -m)], -m);
                lp.add_le(format!("glover_cap_{i}"), &[(d, 1.0), (t, -1.0)], 0.0);
            }
        }
        if problem.states[i] == UnitState::Bounded {
            lp.add_eq(format!("fix_{i}"), &[(d, 1.0), (t, -1.0)], 0.0);
        }
    }
    for (arm, t) in [(1u8, t1), (0u8, t0)] {
        let mut row: Vec<(usize, f64)> = (0..n).filter(|&i| problem.z[i] == arm).map(|i| (n + i, 1.0)).collect();
        row.push((t, -problem.budget(arm)));
        lp.add_ge(format!("count_{arm}"), &row, 0.0);
    }
    for j in 0..problem.g.ncols() {
        let row: Vec<(usize, f64)> = (0..n).map(|i| (i, arm_sign(problem.z[i]) * problem.g[(i, j)])).collect();
        lp.add_eq(format!("balance_{j}"), &row, 0.0);
    }
    for arm in [1u8, 0] {
        let row: Vec<(usize, f64)> = (0..n).filter(|&i| problem.z[i] == arm).map(|i| (i, 1.0)).collect();
        lp.add_eq(format!("norm_{arm}"), &row, 1.0);
    }
    (lp, layout)
}

#[cfg(test)]
mod tests {
    use super::super::tests::toy;
    use super::*;
    use crate::linprog::{solve_lp, LpStatus};

    #[test]
    fn template_row_counts() {
        let (lp, _) = build_charnes_cooper(&toy(0.5, 2.0), Sense::Maximize, Relaxation::RelaxedLp);
        assert_eq!(lp.num_vars(), 10);
        assert_eq!(lp.count_rows("norm_"), 2);
        assert_eq!(lp.count_rows("count_"), 2);
        assert_eq!(lp.count_rows("box_"), 8);
        let (lp, _) = build_charnes_cooper(&toy(0.5, 2.0), Sense::Maximize, Relaxation::Milp);
        assert_eq!(lp.num_vars(), 14);
        assert_eq!(lp.binaries().len(), 4);
        assert_eq!(lp.count_rows("glover_"), 12);
    }

    #[test]
    fn indicator_on_forces_delta_bar_to_t() {
        let p = toy(0.5, 2.0);
        let (mut lp, lay) = build_charnes_cooper(&p, Sense::Maximize, Relaxation::Milp);
        let b0 = lay.tilde.unwrap();
        lp.set_bounds(b0, 1.0, 1.0);
        // push Delta_bar_0 down as far as possible
        lp.set_cost(lay.delta(0), -1e3);
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[lay.delta(0)] - s.x[lay.t1]).abs() < 1e-9);
    }

    #[test]
    fn zero_multiplier_zeroes_weight() {
        let mut p = toy(0.5, 2.0);
        p.k = vec![0.0, 2.0, 1.0, 1.0];
        for sense in [Sense::Minimize, Sense::Maximize] {
            let (lp, lay) = build_charnes_cooper(&p, sense, Relaxation::RelaxedLp);
            let s = solve_lp(&lp).unwrap();
            assert_eq!(s.x[lay.omega(0)], 0.0);
            assert!((s.objective_value - 3.0).abs() < 1e-9);
        }
    }
}

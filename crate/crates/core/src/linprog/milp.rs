//! Best-first branch-and-bound over binary variables.
//!
//! Big-M encodings make LP relaxations report binaries like `1e-8` that pass
//! an integrality test while the continuous variables they gate are not at
//! either branch. So a node whose binaries all look integral is not trusted:
//! the binaries are fixed to their rounded values and the LP re-solved, and
//! only that verified point may become the incumbent.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::simplex::solve_with_bounds;
use super::{LpError, LpProblem, LpSolution, LpStatus, GAP_TOL, INT_TOL};

#[derive(Debug, Clone)]
pub struct MilpOptions {
    pub gap_tol: f64,
    pub node_limit: usize,
    /// A known feasible point used to seed the incumbent; ignored if it
    /// fails the feasibility or integrality check.
    pub incumbent: Option<Vec<f64>>,
}

impl Default for MilpOptions {
    fn default() -> Self {
        MilpOptions { gap_tol: GAP_TOL, node_limit: 1_000_000, incumbent: None }
    }
}

struct Node {
    /// Bound in maximisation form (larger is more promising).
    bound: f64,
    depth: usize,
    seq: usize,
    fixes: Vec<(usize, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound.total_cmp(&other.bound).then(self.depth.cmp(&other.depth)).then(other.seq.cmp(&self.seq))
    }
}

struct Incumbent {
    value: f64,
    x: Vec<f64>,
}

pub fn solve_milp(problem: &LpProblem, opts: &MilpOptions) -> Result<LpSolution, LpError> {
    problem.validate()?;
    let binaries = problem.binaries();
    for &j in &binaries {
        if problem.lower()[j] < 0.0 || problem.upper()[j] > 1.0 {
            return Err(LpError::InvalidProblem(format!("binary {} has bounds outside [0,1]", problem.name(j))));
        }
    }
    let sgn = problem.sense.sign();
    let mut iterations = 0usize;
    let mut best: Option<Incumbent> = None;
    if let Some(x) = &opts.incumbent {
        let integral = binaries.iter().all(|&j| (x[j] - x[j].round()).abs() <= INT_TOL);
        if x.len() == problem.num_vars() && integral && problem.max_violation(x) <= 1e-7 {
            best = Some(Incumbent { value: sgn * problem.objective_of(x), x: x.clone() });
        }
    }
    let closes = |bound: f64, best: &Option<Incumbent>, gap: f64| -> bool {
        match best {
            Some(inc) => bound <= inc.value + gap * inc.value.abs().max(1.0),
            None => false,
        }
    };

    let mut heap = BinaryHeap::new();
    heap.push(Node { bound: f64::INFINITY, depth: 0, seq: 0, fixes: Vec::new() });
    let mut seq = 1usize;
    let mut nodes = 0usize;
    while let Some(node) = heap.pop() {
        if closes(node.bound, &best, opts.gap_tol) {
            break;
        }
        nodes += 1;
        if nodes > opts.node_limit {
            return Err(LpError::NodeLimitExceeded { nodes: opts.node_limit });
        }
        let (mut lo, mut hi) = (problem.lower().to_vec(), problem.upper().to_vec());
        for &(j, v) in &node.fixes {
            lo[j] = v;
            hi[j] = v;
        }
        let relax = solve_with_bounds(problem, &lo, &hi)?;
        iterations += relax.iterations;
        match relax.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                if node.depth == 0 {
                    return Ok(LpSolution::without_point(LpStatus::Unbounded, iterations));
                }
                continue;
            }
            LpStatus::Optimal => {}
        }
        let bound = sgn * relax.objective_value;
        if closes(bound, &best, opts.gap_tol) {
            continue;
        }
        let fixed: Vec<bool> = {
            let mut f = vec![false; problem.num_vars()];
            for &(j, _) in &node.fixes {
                f[j] = true;
            }
            f
        };
        let frac = |j: usize| {
            let v = relax.x[j];
            v.min(1.0 - v).max(0.0)
        };
        let mut branch_on = binaries.iter().copied().filter(|&j| !fixed[j] && frac(j) > INT_TOL).fold(
            None::<usize>,
            |acc, j| match acc {
                Some(a) if frac(a) >= frac(j) => Some(a),
                _ => Some(j),
            },
        );

        if branch_on.is_none() {
            // Fix-and-verify the apparently integral point.
            for &j in &binaries {
                let v = relax.x[j].round();
                lo[j] = v;
                hi[j] = v;
            }
            let check = solve_with_bounds(problem, &lo, &hi)?;
            iterations += check.iterations;
            if check.status == LpStatus::Optimal {
                let value = sgn * check.objective_value;
                if best.as_ref().is_none_or(|b| value > b.value) {
                    best = Some(Incumbent { value, x: check.x.clone() });
                }
                if value >= bound - opts.gap_tol * bound.abs().max(1.0) {
                    continue;
                }
            }
            // Rounding lost value: branch on the least integral free binary.
            branch_on = binaries.iter().copied().filter(|&j| !fixed[j]).fold(None::<usize>, |acc, j| match acc {
                Some(a) if frac(a) >= frac(j) => Some(a),
                _ => Some(j),
            });
            if branch_on.is_none() {
                continue;
            }
        }
        let j = branch_on.expect("branch variable");
        for v in [0.0, 1.0] {
            let mut fixes = node.fixes.clone();
            fixes.push((j, v));
            heap.push(Node { bound, depth: node.depth + 1, seq, fixes });
            seq += 1;
        }
    }

    match best {
        Some(inc) => Ok(LpSolution {
            status: LpStatus::Optimal,
            objective_value: problem.objective_of(&inc.x),
            x: inc.x,
            iterations,
            duals: Vec::new(),
        }),
        None => Ok(LpSolution::without_point(LpStatus::Infeasible, iterations)),
    }
}

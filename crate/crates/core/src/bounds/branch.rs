//! Exact bounds by branch-and-bound on the unit indicators.
//!
//! Each node fixes some units to `Bounded` (`Delta_i = 1`) or `Unbounded`
//! (`Delta_i = 0`) and solves the relaxation of the rest. Unlike the big-M
//! linearisation this relaxation is the convex hull of each unit's
//! trapezoid, so nodes give tight bounds and branching stays shallow.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{solve_relaxed_extremum, BoundsError, BoundsProblem, Extremum, SolutionPoint, SolverStats, UnitState};
use crate::linprog::{LpError, Sense};

/// `Delta` values this close to 0 or 1 count as integral.
const INT_TOL: f64 = 1e-7;
/// Relative optimality gap at which the search stops.
const GAP_TOL: f64 = 1e-10;
pub const NODE_LIMIT: usize = 200_000;

struct Node {
    /// Sense-adjusted relaxation value of the parent (larger is better).
    bound: f64,
    depth: usize,
    seq: usize,
    states: Vec<UnitState>,
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

/// Exact optimum over integral indicators, seeded with an optional
/// integral `incumbent`.
pub fn solve_exact(
    problem: &BoundsProblem,
    sense: Sense,
    incumbent: Option<SolutionPoint>,
    stats: &mut SolverStats,
) -> Result<Extremum, BoundsError> {
    let sg = sense.sign();
    let mut best: Option<(f64, SolutionPoint)> = incumbent.map(|p| (sg * p.value, p));
    let closes = |bound: f64, best: &Option<(f64, SolutionPoint)>| {
        best.as_ref().is_some_and(|(v, _)| bound <= v + GAP_TOL * v.abs().max(1.0))
    };
    let mut heap = BinaryHeap::new();
    heap.push(Node { bound: f64::INFINITY, depth: 0, seq: 0, states: problem.states.clone() });
    let mut seq = 1;
    let mut nodes = 0;
    while let Some(node) = heap.pop() {
        if closes(node.bound, &best) {
            break;
        }
        nodes += 1;
        if nodes > NODE_LIMIT {
            return Err(BoundsError::Solver(LpError::NodeLimitExceeded { nodes: NODE_LIMIT }));
        }
        let sub = problem.with_states(node.states.clone());
        let point = match solve_relaxed_extremum(&sub, sense, stats)? {
            Extremum::Optimal(p) => p,
            Extremum::Infeasible => continue,
            Extremum::Unbounded => return Ok(Extremum::Unbounded),
        };
        let bound = sg * point.value;
        if closes(bound, &best) {
            continue;
        }
        let delta = point.delta(&problem.z);
        let frac = |i: usize| delta[i].min(1.0 - delta[i]).max(0.0);
        let branch_on = (0..problem.n()).filter(|&i| node.states[i] == UnitState::Free && frac(i) > INT_TOL).fold(
            None::<usize>,
            |acc, i| match acc {
                Some(a) if frac(a) >= frac(i) => Some(a),
                _ => Some(i),
            },
        );
        match branch_on {
            None => {
                // Integral: the relaxation optimum is attainable.
                best = Some((bound, point));
            }
            Some(i) => {
                for state in [UnitState::Bounded, UnitState::Unbounded] {
                    let mut states = node.states.clone();
                    states[i] = state;
                    heap.push(Node { bound, depth: node.depth + 1, seq, states });
                    seq += 1;
                }
            }
        }
    }
    log::debug!("exact bound search used {nodes} nodes");
    Ok(match best {
        Some((_, p)) => Extremum::Optimal(p),
        None => Extremum::Infeasible,
    })
}

//! Branch-and-bound over the built-in simplex: depth-first with a
//! best-first restart every 10^4 nodes, branching on the most fractional
//! integer variable with lowest-index tie-break.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::milp::simplex::{self, LpStatus, Workspace};
use crate::milp::{MilpModel, MilpResult, SolveStatus, VarId, INT_TOL};

const BEST_FIRST_EVERY: u64 = 10_000;

struct Node {
    /// Bound overrides accumulated along the path from the root.
    overrides: Vec<(VarId, f64, f64)>,
    /// Parent relaxation bound, used for pruning and the best-first restart.
    bound: f64,
}

pub(crate) fn solve(
    model: &MilpModel,
    node_limit: Option<u64>,
    time_limit: Option<Duration>,
    cutoff: Option<f64>,
) -> Result<MilpResult> {
    let int_vars: Vec<VarId> =
        (0..model.n_vars()).filter(|&j| model.var(j).integer).collect();

    let started = Instant::now();
    let mut ws = Workspace::default();
    let mut stack: Vec<Node> = vec![Node { overrides: Vec::new(), bound: f64::NEG_INFINITY }];
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut nodes: u64 = 0;
    let mut limit_hit = false;

    while !stack.is_empty() {
        if let Some(limit) = node_limit {
            if nodes >= limit {
                limit_hit = true;
                break;
            }
        }
        if let Some(limit) = time_limit {
            if started.elapsed() >= limit {
                limit_hit = true;
                break;
            }
        }
        nodes += 1;

        let node = if nodes % BEST_FIRST_EVERY == 0 {
            let best = stack
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.bound.total_cmp(&b.1.bound).then(a.0.cmp(&b.0)))
                .map(|(i, _)| i)
                .unwrap();
            stack.remove(best)
        } else {
            stack.pop().unwrap()
        };

        let prune_at = prune_threshold(&incumbent, cutoff);
        if node.bound >= prune_at - 1e-9 {
            continue;
        }

        let out = simplex::solve_bounded(model, &node.overrides, &mut ws);
        match out.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                return Ok(MilpResult::new(SolveStatus::Unbounded, f64::NEG_INFINITY, Vec::new()))
            }
            LpStatus::IterLimit => {
                return Err(Error::SolveFailed(
                    "node relaxation hit the simplex iteration limit".into(),
                ))
            }
            LpStatus::Optimal => {}
        }
        if out.objective >= prune_at - 1e-9 {
            continue;
        }

        // most fractional integer variable; ties by lowest index
        let mut branch: Option<(VarId, f64, f64)> = None; // (var, value, |frac-0.5|)
        for &j in &int_vars {
            let v = out.x[j];
            let frac = v - v.floor();
            let dist = (frac.min(1.0 - frac)).abs();
            if dist <= INT_TOL {
                continue;
            }
            let score = (frac - 0.5).abs();
            match branch {
                Some((_, _, s)) if score >= s => {}
                _ => branch = Some((j, v, score)),
            }
        }

        let Some((bvar, bval, _)) = branch else {
            // integral relaxation: candidate incumbent
            let better = incumbent.as_ref().map_or(true, |(z, _)| out.objective < z - 1e-9);
            if better {
                incumbent = Some((out.objective, out.x));
            }
            continue;
        };

        let (eff_lo, eff_hi) = effective_bounds(model, &node.overrides, bvar);
        let mut down = node.overrides.clone();
        down.push((bvar, eff_lo, bval.floor()));
        let mut up = node.overrides;
        up.push((bvar, bval.ceil(), eff_hi));
        let down = Node { overrides: down, bound: out.objective };
        let up = Node { overrides: up, bound: out.objective };
        // dive toward the nearer integer first (popped last-in-first-out)
        if bval - bval.floor() >= 0.5 {
            stack.push(down);
            stack.push(up);
        } else {
            stack.push(up);
            stack.push(down);
        }
    }

    match incumbent {
        Some((z, x)) => {
            let status = if limit_hit { SolveStatus::IterationLimit } else { SolveStatus::Optimal };
            Ok(MilpResult::new(status, z, x))
        }
        None if limit_hit => {
            Ok(MilpResult::new(SolveStatus::IterationLimit, f64::INFINITY, Vec::new()))
        }
        None => Ok(MilpResult::new(SolveStatus::Infeasible, f64::INFINITY, Vec::new())),
    }
}

fn prune_threshold(incumbent: &Option<(f64, Vec<f64>)>, cutoff: Option<f64>) -> f64 {
    let inc = incumbent.as_ref().map_or(f64::INFINITY, |(z, _)| *z);
    let cut = cutoff.map_or(f64::INFINITY, |c| c + 1e-6);
    inc.min(cut)
}

fn effective_bounds(
    model: &MilpModel,
    overrides: &[(VarId, f64, f64)],
    var: VarId,
) -> (f64, f64) {
    for &(j, lo, hi) in overrides.iter().rev() {
        if j == var {
            return (lo, hi);
        }
    }
    let v = model.var(var);
    (v.lo, v.hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{Rel, SolverBackend};

    #[test]
    fn forced_binary_rounds_up() {
        let mut m = MilpModel::new();
        let x = m.add_binary("x", 1.0).unwrap();
        m.add_row(vec![(x, 1.0)], Rel::Ge, 0.5).unwrap();
        let r = crate::milp::solve_ilp(&m, &SolverBackend::builtin()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.value(x) - 1.0).abs() < 1e-6);
        assert!((r.objective - 1.0).abs() < 1e-6);
    }

    #[test]
    fn knapsack_matches_enumeration() {
        // max 4a+5b+3c+7d+2e s.t. 3a+4b+2c+5d+1e <= 8, all binary
        // (as minimization of the negated profit)
        let profits = [4.0, 5.0, 3.0, 7.0, 2.0];
        let weights = [3.0, 4.0, 2.0, 5.0, 1.0];
        let cap = 8.0;
        let mut m = MilpModel::new();
        let vars: Vec<_> = (0..5)
            .map(|i| m.add_binary(format!("v{i}"), -profits[i]).unwrap())
            .collect();
        let row: Vec<_> = vars.iter().zip(weights).map(|(&v, w)| (v, w)).collect();
        m.add_row(row, Rel::Le, cap).unwrap();

        // exhaustive oracle over the 2^5 subsets
        let mut best = 0.0f64;
        for mask in 0..32u32 {
            let w: f64 = (0..5).filter(|i| mask >> i & 1 == 1).map(|i| weights[i]).sum();
            if w <= cap {
                let p: f64 = (0..5).filter(|i| mask >> i & 1 == 1).map(|i| profits[i]).sum();
                best = best.max(p);
            }
        }

        let r = crate::milp::solve_ilp(&m, &SolverBackend::builtin()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((-r.objective - best).abs() < 1e-6, "ilp {} vs oracle {best}", -r.objective);
    }

    #[test]
    fn assignment_polytope_is_integral_at_root() {
        // 3x3 assignment: the LP optimum is already integral, so the ILP
        // equals the LP and the exhaustive-permutation oracle.
        let cost = [[4.0, 2.0, 8.0], [4.0, 3.0, 7.0], [3.0, 1.0, 6.0]];
        let mut m = MilpModel::new();
        let mut ids = [[0usize; 3]; 3];
        for (i, row) in cost.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                ids[i][j] = m.add_binary(format!("a{i}{j}"), c).unwrap();
            }
        }
        for i in 0..3 {
            m.add_row((0..3).map(|j| (ids[i][j], 1.0)).collect(), Rel::Eq, 1.0).unwrap();
            m.add_row((0..3).map(|j| (ids[j][i], 1.0)).collect(), Rel::Eq, 1.0).unwrap();
        }

        let mut oracle = f64::INFINITY;
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for p in perms {
            oracle = oracle.min((0..3).map(|i| cost[i][p[i]]).sum());
        }

        let backend = SolverBackend::builtin();
        let lp = crate::milp::solve_lp(&m, &backend).unwrap();
        let ilp = crate::milp::solve_ilp(&m, &backend).unwrap();
        assert!((lp.objective - ilp.objective).abs() < 1e-6);
        assert!((ilp.objective - oracle).abs() < 1e-6);
    }

    #[test]
    fn node_limit_reports_iteration_limit() {
        // a small problem forced to stop immediately
        let mut m = MilpModel::new();
        let x = m.add_binary("x", -1.0).unwrap();
        let y = m.add_binary("y", -1.0).unwrap();
        m.add_row(vec![(x, 1.0), (y, 1.0)], Rel::Le, 1.5).unwrap();
        let backend = SolverBackend::builtin().with_node_limit(0);
        let r = crate::milp::solve_ilp(&m, &backend).unwrap();
        assert_eq!(r.status, SolveStatus::IterationLimit);
    }

    #[test]
    fn lp_bound_never_exceeds_ilp() {
        let mut m = MilpModel::new();
        let vars: Vec<_> = (0..6).map(|i| m.add_binary(format!("x{i}"), (i as f64) - 2.5).unwrap()).collect();
        m.add_row(vars.iter().map(|&v| (v, 1.0)).collect(), Rel::Ge, 2.0).unwrap();
        let backend = SolverBackend::builtin();
        let lp = crate::milp::solve_lp(&m, &backend).unwrap();
        let ilp = crate::milp::solve_ilp(&m, &backend).unwrap();
        assert!(lp.objective <= ilp.objective + 1e-9);
    }
}

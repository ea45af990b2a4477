//! Integral subtour separation: solve the ILP without subtour elimination
//! constraints, add one constraint per cycle found in the integral solution,
//! and repeat until a single cycle remains.

use crate::error::{Error, Result};
use crate::milp::{MilpModel, MilpResult, Rel, SolveStatus, SolverBackend, VarId};

/// Separation rounds are capped; the loop is expected to terminate long
/// before this in practice.
pub const SEC_ROUND_CAP: usize = 500;

#[derive(Debug)]
pub struct SecOutcome {
    pub result: MilpResult,
    pub rounds: usize,
    pub constraints_added: usize,
}

/// Iterates integral solves of `model`, separating subtours.
///
/// `extract_cycles` maps an integral solution to the cycles it contains
/// (vertex lists over the caller's universe); `sec_terms` produces the
/// left-hand side `sum of edge variables inside S` for a cycle `S`, which is
/// constrained to `|S| - 1`. Terminates when at most one cycle remains.
pub fn solve_with_integral_sec<FE, FS>(
    model: &MilpModel,
    backend: &SolverBackend,
    extract_cycles: FE,
    sec_terms: FS,
    cutoff: Option<f64>,
) -> Result<SecOutcome>
where
    FE: Fn(&MilpResult) -> Vec<Vec<usize>>,
    FS: Fn(&[usize]) -> Vec<(VarId, f64)>,
{
    let mut work = model.clone();
    let mut added = 0usize;
    for round in 1..=SEC_ROUND_CAP {
        let result = crate::milp::solve_ilp_with_cutoff(&work, backend, cutoff)?;
        match result.status {
            SolveStatus::Optimal => {}
            SolveStatus::IterationLimit => {
                return Err(Error::LimitExceeded(format!(
                    "integral separation stopped by solver limits in round {round}"
                )))
            }
            SolveStatus::Infeasible | SolveStatus::Unbounded => {
                return Err(Error::SolveFailed(format!(
                    "separation round {round} ended with status {:?}",
                    result.status
                )))
            }
        }
        let cycles = extract_cycles(&result);
        if cycles.len() <= 1 {
            return Ok(SecOutcome { result, rounds: round, constraints_added: added });
        }
        for cycle in &cycles {
            let terms = sec_terms(cycle);
            work.add_row(terms, Rel::Le, cycle.len() as f64 - 1.0)?;
            added += 1;
        }
    }
    Err(Error::LimitExceeded(format!(
        "integral separation exceeded {SEC_ROUND_CAP} rounds"
    )))
}

/// Cycles in the undirected graph selected by `chosen` edges over `n`
/// vertices: connected components in which every vertex has degree exactly
/// two. Path and isolated components are ignored. Each cycle is listed from
/// its smallest vertex toward its smaller neighbour.
pub fn cycles_of_edges(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
    }
    let mut seen = vec![false; n];
    let mut cycles = Vec::new();
    for start in 0..n {
        if seen[start] || adj[start].len() != 2 {
            continue;
        }
        // walk the component; it is a cycle iff every vertex has degree 2
        // and the walk returns to the start
        let mut comp = vec![start];
        seen[start] = true;
        let mut prev = start;
        let mut cur = adj[start][0];
        let mut is_cycle = true;
        while cur != start {
            if adj[cur].len() != 2 {
                is_cycle = false;
                break;
            }
            seen[cur] = true;
            comp.push(cur);
            let next = if adj[cur][0] == prev { adj[cur][1] } else { adj[cur][0] };
            prev = cur;
            cur = next;
        }
        if is_cycle && comp.len() >= 3 {
            cycles.push(comp);
        } else {
            // mark the rest of the path component as handled
            for &v in &comp {
                seen[v] = true;
            }
        }
    }
    cycles
}

//! Cubic linearization of the quadratic tour objective, its LP relaxation,
//! threshold rounding, path/cycle merge ILPs, and the LP-based heuristic
//! family with the rerun strategy.

use crate::auxgraph::{self, Component, EdgeClass};
use crate::construct;
use crate::core::{Instance, Tour};
use crate::error::{Error, Result};
use crate::milp::{
    cycles_of_edges, solve_lp, solve_with_integral_sec, MilpModel, Rel, SolveStatus,
    SolverBackend, VarId,
};

/// Canonical index of the unordered pair (u, v), u < v.
pub(crate) fn pair_index(n: usize, u: usize, v: usize) -> usize {
    debug_assert!(u < v && v < n);
    u * n - u * (u + 1) / 2 + (v - u - 1)
}

fn y_index(n: usize, a: usize, v: usize, b: usize) -> usize {
    debug_assert!(a < b && v != a && v != b);
    let rank = v - usize::from(v > a) - usize::from(v > b);
    pair_index(n, a, b) * (n - 2) + rank
}

/// Linearized tour model: one binary `x` per edge, one binary `y` per
/// canonical transition triple (the symmetric pair y_uvt / y_tvu collapses
/// onto u < t), degree rows, and two coupling rows per edge. Subtour
/// elimination constraints are intentionally absent.
pub struct QtspLinearization {
    pub model: MilpModel,
    pub n: usize,
    n_edges: usize,
}

impl QtspLinearization {
    pub fn edge_var(&self, u: usize, v: usize) -> VarId {
        pair_index(self.n, u.min(v), u.max(v))
    }

    pub fn triple_var(&self, u: usize, v: usize, t: usize) -> VarId {
        let (a, b) = (u.min(t), u.max(t));
        self.n_edges + y_index(self.n, a, v, b)
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn n_triples(&self) -> usize {
        self.model.n_vars() - self.n_edges
    }

    /// Edge values of a solution, indexed by [`Self::edge_var`].
    pub fn edge_values(&self, values: &[f64]) -> Vec<f64> {
        values[..self.n_edges].to_vec()
    }
}

/// Builds the linearization for arbitrary symmetric transition costs.
pub(crate) fn build_linearization_from_costs(
    n: usize,
    cost: &dyn Fn(usize, usize, usize) -> f64,
) -> Result<QtspLinearization> {
    if n < 3 {
        return Err(Error::InvalidInstance("linearization needs n >= 3".into()));
    }
    let mut model = MilpModel::new();
    for u in 0..n {
        for v in u + 1..n {
            model.add_binary(format!("x_{u}_{v}"), 0.0)?;
        }
    }
    let n_edges = model.n_vars();
    for a in 0..n {
        for b in a + 1..n {
            for v in 0..n {
                if v != a && v != b {
                    model.add_binary(format!("y_{a}_{v}_{b}"), cost(a, v, b))?;
                }
            }
        }
    }
    let lin = QtspLinearization { model, n, n_edges };
    let mut model = lin.model;
    // degree rows
    for v in 0..n {
        let terms: Vec<(VarId, f64)> = (0..n)
            .filter(|&u| u != v)
            .map(|u| (pair_index(n, u.min(v), u.max(v)), 1.0))
            .collect();
        model.add_row(terms, Rel::Eq, 2.0)?;
    }
    // coupling rows: for every edge {u, v}, the transitions through v using
    // this edge sum to x_uv, and likewise through u
    for u in 0..n {
        for v in u + 1..n {
            let x = pair_index(n, u, v);
            let mut through_v: Vec<(VarId, f64)> = vec![(x, 1.0)];
            let mut through_u: Vec<(VarId, f64)> = vec![(x, 1.0)];
            for t in 0..n {
                if t != u && t != v {
                    through_v.push((n_edges + y_index(n, u.min(t), v, u.max(t)), -1.0));
                    through_u.push((n_edges + y_index(n, t.min(v), u, t.max(v)), -1.0));
                }
            }
            model.add_row(through_v, Rel::Eq, 0.0)?;
            model.add_row(through_u, Rel::Eq, 0.0)?;
        }
    }
    Ok(QtspLinearization { model, n, n_edges })
}

pub fn build_linearization(inst: &Instance) -> Result<QtspLinearization> {
    build_linearization_from_costs(inst.n(), &|a, v, b| inst.transition_cost(a, v, b))
}

/// Solves the LP relaxation with the given edges fixed to one; returns the
/// objective and the fractional edge values.
pub fn solve_relaxation(
    lin: &QtspLinearization,
    fixings: &[(usize, usize)],
    backend: &SolverBackend,
) -> Result<(f64, Vec<f64>)> {
    let result = if fixings.is_empty() {
        solve_lp(&lin.model, backend)?
    } else {
        let mut model = lin.model.clone();
        for &(u, v) in fixings {
            model.fix_var(lin.edge_var(u, v), 1.0);
        }
        solve_lp(&model, backend)?
    };
    if result.status != SolveStatus::Optimal {
        return Err(Error::SolveFailed(format!(
            "LP relaxation ended with status {:?}",
            result.status
        )));
    }
    Ok((result.objective, lin.edge_values(result.values())))
}

/// Rounding output: vertex-disjoint paths, cycles and isolated vertices
/// partitioning the vertex set.
#[derive(Debug, Clone, Default)]
pub struct PartialSolution {
    pub paths: Vec<Vec<usize>>,
    pub cycles: Vec<Vec<usize>>,
    pub isolated: Vec<usize>,
}

impl PartialSolution {
    /// All accepted edges (path edges plus cycle edges).
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for p in &self.paths {
            for w in p.windows(2) {
                out.push((w[0].min(w[1]), w[0].max(w[1])));
            }
        }
        for c in &self.cycles {
            for i in 0..c.len() {
                let (a, b) = (c[i], c[(i + 1) % c.len()]);
                out.push((a.min(b), a.max(b)));
            }
        }
        out
    }

    pub fn component_count(&self) -> usize {
        self.paths.len() + self.cycles.len()
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    fn find(&mut self, v: usize) -> usize {
        if self.0[v] != v {
            let root = self.find(self.0[v]);
            self.0[v] = root;
        }
        self.0[v]
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        self.0[ra] = rb;
    }
}

/// Threshold rounding: edges with `x > threshold` are scanned in decreasing
/// value (ties: lexicographic) and accepted while every vertex degree stays
/// at most two (condition C1) and, unless `allow_cycles`, no cycle closes
/// (condition C2). The accepted structure is classified into paths, cycles
/// and isolated vertices.
pub fn round_fractional(
    n: usize,
    x: &[f64],
    threshold: f64,
    allow_cycles: bool,
) -> PartialSolution {
    let mut cands: Vec<(f64, usize, usize)> = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let val = x[pair_index(n, u, v)];
            if val > threshold {
                cands.push((val, u, v));
            }
        }
    }
    cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut deg = vec![0u8; n];
    let mut uf = UnionFind::new(n);
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (_, u, v) in cands {
        if deg[u] >= 2 || deg[v] >= 2 {
            continue; // C1
        }
        if !allow_cycles && uf.find(u) == uf.find(v) {
            continue; // C2
        }
        deg[u] += 1;
        deg[v] += 1;
        uf.union(u, v);
        adj[u].push(v);
        adj[v].push(u);
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
    }

    let mut out = PartialSolution::default();
    let mut visited = vec![false; n];
    for start in 0..n {
        if visited[start] {
            continue;
        }
        if deg[start] == 0 {
            visited[start] = true;
            out.isolated.push(start);
            continue;
        }
        // collect the component
        let mut comp = vec![start];
        let mut stack = vec![start];
        visited[start] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !visited[w] {
                    visited[w] = true;
                    comp.push(w);
                    stack.push(w);
                }
            }
        }
        if comp.iter().all(|&v| deg[v] == 2) {
            // cycle: walk from the smallest vertex toward its smaller neighbour
            let s = *comp.iter().min().unwrap();
            let mut ring = vec![s];
            let mut prev = s;
            let mut cur = adj[s][0];
            while cur != s {
                ring.push(cur);
                let next = if adj[cur][0] == prev { adj[cur][1] } else { adj[cur][0] };
                prev = cur;
                cur = next;
            }
            out.cycles.push(ring);
        } else {
            // path: walk from its smallest endpoint
            let s = comp.iter().copied().filter(|&v| deg[v] == 1).min().unwrap();
            let mut path = vec![s];
            let mut prev = s;
            let mut cur = adj[s][0];
            loop {
                path.push(cur);
                if deg[cur] == 1 {
                    break;
                }
                let next = if adj[cur][0] == prev { adj[cur][1] } else { adj[cur][0] };
                prev = cur;
                cur = next;
            }
            out.paths.push(path);
        }
    }
    out
}

/// Auxiliary path-merge graph: two ports per path joined by a zero-weight
/// path edge, and connecting edges between ports of different paths whose
/// weights carry the two junction transitions.
#[derive(Debug)]
pub struct PathMergeGraph {
    pub n_aux_vertices: usize,
    pub path_edges: Vec<(usize, usize, f64)>,
    pub connecting_edges: Vec<(usize, usize, f64)>,
    pub aux_to_vertex: Vec<usize>,
}

pub fn build_path_merge_graph(inst: &Instance, paths: &[Vec<usize>]) -> Result<PathMergeGraph> {
    let comps: Vec<Component> = paths.iter().map(|p| Component::Path(p.clone())).collect();
    let graph = auxgraph::build_merge_graph(inst, comps)?;
    let mut out = PathMergeGraph {
        n_aux_vertices: graph.n_ports(),
        path_edges: Vec::new(),
        connecting_edges: Vec::new(),
        aux_to_vertex: (0..graph.n_ports()).map(|p| graph.port_anchor(p)).collect(),
    };
    for e in &graph.edges {
        let item = (e.u, e.v, e.weight);
        match e.class {
            EdgeClass::PathEdge => out.path_edges.push(item),
            EdgeClass::Connecting => out.connecting_edges.push(item),
            _ => unreachable!("path merge graph has no cycle components"),
        }
    }
    Ok(out)
}

/// Merges at least two paths into a single cycle over their union: the
/// degree-two model with fixed path edges solved by integral separation.
pub fn merge_paths_ilp(
    inst: &Instance,
    paths: &[Vec<usize>],
    backend: &SolverBackend,
) -> Result<Vec<usize>> {
    if paths.len() < 2 {
        return Err(Error::InvalidInput("path merge needs at least two paths".into()));
    }
    let comps: Vec<Component> = paths.iter().map(|p| Component::Path(p.clone())).collect();
    let merge = auxgraph::build_merge_model(inst, comps)?;
    auxgraph::solve_merge(&merge, backend)
}

/// Merges all paths and cycles of a partial solution at once: cycles expand
/// to port pairs, paths shrink to their endpoints, connecting edges run
/// between all components.
pub fn merge_paths_and_cycles_ilp(
    inst: &Instance,
    partial: &PartialSolution,
    backend: &SolverBackend,
) -> Result<Vec<usize>> {
    if partial.component_count() < 2 {
        return Err(Error::InvalidInput("combined merge needs at least two components".into()));
    }
    let mut comps: Vec<Component> =
        partial.cycles.iter().map(|c| Component::Cycle(c.clone())).collect();
    comps.extend(partial.paths.iter().map(|p| Component::Path(p.clone())));
    let merge = auxgraph::build_merge_model(inst, comps)?;
    auxgraph::solve_merge(&merge, backend)
}

/// Inserts the isolated vertices into the cycle by repeated cheapest
/// insertion; cycle plus isolated must cover the whole instance.
pub fn insert_isolated(inst: &Instance, cycle: &[usize], isolated: &[usize]) -> Result<Tour> {
    if cycle.len() < 3 {
        return Err(Error::InvalidInput("insertion base cycle needs >= 3 vertices".into()));
    }
    let mut ring = cycle.to_vec();
    let mut rest = isolated.to_vec();
    construct::cif_insert_all(inst, &mut ring, &mut rest);
    Tour::new(ring, inst.n())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpVariant {
    /// Round to paths only (no cycles), merge the paths (LPP).
    Paths,
    /// Allow cycles and merge paths and cycles at once (LPC1).
    Combined,
    /// Allow cycles, merge paths first and then all cycles (LPC2).
    Sequential,
}

#[derive(Debug, Clone, Copy)]
pub struct LpConfig {
    pub variant: LpVariant,
    pub rerun: bool,
    /// Rounding threshold on the fractional edge values; distinct from the
    /// angle-distance weighting parameter `rho` of the cost model.
    pub round_threshold: f64,
}

impl Default for LpConfig {
    fn default() -> Self {
        LpConfig { variant: LpVariant::Sequential, rerun: true, round_threshold: 0.5 }
    }
}

/// Shared root relaxation for running several LP-based variants on one
/// instance; the root objective doubles as the instance lower bound.
pub struct LpPipeline {
    lin: QtspLinearization,
    root_objective: f64,
    root_x: Vec<f64>,
}

impl LpPipeline {
    pub fn new(inst: &Instance, backend: &SolverBackend) -> Result<Self> {
        let lin = build_linearization(inst)?;
        let (root_objective, root_x) = solve_relaxation(&lin, &[], backend)?;
        Ok(LpPipeline { lin, root_objective, root_x })
    }

    /// LP value of the unfixed relaxation: a lower bound on every tour.
    pub fn lower_bound(&self) -> f64 {
        self.root_objective
    }

    pub fn run(&self, inst: &Instance, config: &LpConfig, backend: &SolverBackend) -> Result<Tour> {
        let n = inst.n();
        let allow_cycles = config.variant != LpVariant::Paths;
        let mut partial =
            round_fractional(n, &self.root_x, config.round_threshold, allow_cycles);

        if config.rerun {
            // fix the accepted edges, re-solve, re-round; repeat while the
            // isolated count keeps strictly decreasing
            loop {
                let fixed = partial.edges();
                if fixed.is_empty() {
                    break;
                }
                let (_, x2) = solve_relaxation(&self.lin, &fixed, backend)?;
                let next = round_fractional(n, &x2, config.round_threshold, allow_cycles);
                let improved = next.isolated.len() < partial.isolated.len();
                let same = next.isolated.len() == partial.isolated.len();
                if improved || same {
                    partial = next;
                }
                if !improved {
                    break;
                }
            }
        }

        let mut isolated = partial.isolated.clone();
        let mut ring: Vec<usize>;
        match config.variant {
            LpVariant::Paths => {
                ring = match partial.paths.len() {
                    0 => return construct::cheapest_insertion(inst, None),
                    1 => {
                        let p = &partial.paths[0];
                        if p.len() >= 3 {
                            p.clone() // close the single path
                        } else {
                            return construct::cheapest_insertion(inst, Some(p));
                        }
                    }
                    _ => merge_paths_ilp(inst, &partial.paths, backend)?,
                };
            }
            LpVariant::Combined => {
                ring = match partial.component_count() {
                    0 => return construct::cheapest_insertion(inst, None),
                    1 => {
                        if let Some(c) = partial.cycles.first() {
                            c.clone()
                        } else {
                            let p = &partial.paths[0];
                            if p.len() >= 3 {
                                p.clone()
                            } else {
                                return construct::cheapest_insertion(inst, Some(p));
                            }
                        }
                    }
                    _ => merge_paths_and_cycles_ilp(inst, &partial, backend)?,
                };
            }
            LpVariant::Sequential => {
                let mut cycles = partial.cycles.clone();
                match partial.paths.len() {
                    0 => {}
                    1 => {
                        let p = partial.paths[0].clone();
                        if p.len() >= 3 {
                            cycles.push(p);
                        } else if cycles.is_empty() {
                            return construct::cheapest_insertion(inst, Some(&p));
                        } else {
                            // a lone 2-vertex path cannot close; its vertices
                            // join the isolated set for the final insertion
                            isolated.extend(p);
                            isolated.sort_unstable();
                        }
                    }
                    _ => cycles.push(merge_paths_ilp(inst, &partial.paths, backend)?),
                }
                ring = match cycles.len() {
                    0 => return construct::cheapest_insertion(inst, None),
                    1 => cycles.pop().unwrap(),
                    _ => crate::hull_heur::ilp_merge_cycles(inst, &cycles, backend)?,
                };
            }
        }

        construct::cif_insert_all(inst, &mut ring, &mut isolated);
        Tour::new(ring, n)
    }
}

/// LP-based heuristic: relax, (optionally) rerun, round, merge per variant,
/// insert the leftovers.
pub fn lp_heuristic(inst: &Instance, config: &LpConfig, backend: &SolverBackend) -> Result<Tour> {
    LpPipeline::new(inst, backend)?.run(inst, config, backend)
}

/// Exact tour through the integral separation approach on the linearization;
/// `cutoff` may carry a known upper bound (for instance a heuristic tour).
pub fn solve_exact_order(
    inst: &Instance,
    backend: &SolverBackend,
    cutoff: Option<f64>,
) -> Result<Vec<usize>> {
    let n = inst.n();
    let lin = build_linearization(inst)?;
    let outcome = solve_with_integral_sec(
        &lin.model,
        backend,
        |res| {
            let mut edges = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    if res.value(pair_index(n, u, v)) > 0.5 {
                        edges.push((u, v));
                    }
                }
            }
            cycles_of_edges(n, &edges)
        },
        |s| {
            let mut terms = Vec::new();
            for i in 0..s.len() {
                for j in i + 1..s.len() {
                    terms.push((pair_index(n, s[i].min(s[j]), s[i].max(s[j])), 1.0));
                }
            }
            terms
        },
        cutoff,
    )?;
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if outcome.result.value(pair_index(n, u, v)) > 0.5 {
                edges.push((u, v));
            }
        }
    }
    let cycles = cycles_of_edges(n, &edges);
    match cycles.into_iter().next() {
        Some(ring) if ring.len() == n => Ok(ring),
        _ => Err(Error::SolveFailed("separation ended without a Hamiltonian cycle".into())),
    }
}

//! Shared auxiliary-graph machinery for the merge ILPs: cycles are expanded
//! into port pairs joined by short/long edges, paths shrink to two ports
//! joined by a fixed path edge, and connecting edges across components carry
//! the two transition costs a new junction would create. This turns the
//! quadratic transition costs into linear edge weights.

use std::collections::HashMap;

use crate::core::Instance;
use crate::error::{Error, Result};
use crate::milp::{
    cycles_of_edges, solve_with_integral_sec, MilpModel, Rel, SolverBackend, VarId,
};

#[derive(Debug, Clone)]
pub(crate) enum Component {
    /// Closed ring, at least 3 vertices.
    Cycle(Vec<usize>),
    /// Open path, at least 2 vertices.
    Path(Vec<usize>),
}

impl Component {
    fn vertices(&self) -> &[usize] {
        match self {
            Component::Cycle(v) | Component::Path(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum EdgeClass {
    Short,
    Long,
    PathEdge,
    Connecting,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct AuxEdge {
    pub u: usize,
    pub v: usize,
    pub class: EdgeClass,
    pub weight: f64,
}

/// A port stands for one end of an original vertex: `anchor` is the vertex,
/// `ctx` the neighbour it keeps when the other side is rewired.
#[derive(Debug, Clone, Copy)]
struct Port {
    comp: usize,
    anchor: usize,
    ctx: usize,
}

#[derive(Debug)]
pub(crate) struct MergeGraph {
    comps: Vec<Component>,
    ports: Vec<Port>,
    pub(crate) edges: Vec<AuxEdge>,
    comp_base: Vec<usize>,
    /// Per component: indices into `edges` for its short and long edges
    /// (cycles) or its path edge (paths).
    cycle_short: Vec<Vec<usize>>,
    cycle_long: Vec<Vec<usize>>,
    path_edge: Vec<Option<usize>>,
}

impl MergeGraph {
    pub(crate) fn n_ports(&self) -> usize {
        self.ports.len()
    }

    pub(crate) fn port_anchor(&self, port: usize) -> usize {
        self.ports[port].anchor
    }

    /// The other port of the same original vertex (cycles) or the other end
    /// of the same path.
    fn partner(&self, port: usize) -> usize {
        let comp = self.ports[port].comp;
        let local = port - self.comp_base[comp];
        self.comp_base[comp] + (local ^ 1)
    }
}

/// Builds the auxiliary graph. Cycle components get ports
/// `a_j = base + 2j` (context: predecessor) and `b_j = base + 2j + 1`
/// (context: successor); path components get one `a` (head) and one `b`
/// (tail) port.
pub(crate) fn build_merge_graph(inst: &Instance, comps: Vec<Component>) -> Result<MergeGraph> {
    let mut seen = vec![false; inst.n()];
    for comp in &comps {
        match comp {
            Component::Cycle(ring) if ring.len() < 3 => {
                return Err(Error::InvalidInput("merge cycle shorter than 3 vertices".into()))
            }
            Component::Path(p) if p.len() < 2 => {
                return Err(Error::InvalidInput("merge path shorter than 2 vertices".into()))
            }
            _ => {}
        }
        for &v in comp.vertices() {
            if seen[v] {
                return Err(Error::InvalidInput(format!("vertex {v} in two merge components")));
            }
            seen[v] = true;
        }
    }

    let mut ports = Vec::new();
    let mut comp_base = Vec::with_capacity(comps.len());
    for (ci, comp) in comps.iter().enumerate() {
        comp_base.push(ports.len());
        match comp {
            Component::Cycle(ring) => {
                let m = ring.len();
                for j in 0..m {
                    let prev = ring[(j + m - 1) % m];
                    let next = ring[(j + 1) % m];
                    ports.push(Port { comp: ci, anchor: ring[j], ctx: prev }); // a_j
                    ports.push(Port { comp: ci, anchor: ring[j], ctx: next }); // b_j
                }
            }
            Component::Path(p) => {
                ports.push(Port { comp: ci, anchor: p[0], ctx: p[1] }); // a
                ports.push(Port { comp: ci, anchor: p[p.len() - 1], ctx: p[p.len() - 2] });
                // b
            }
        }
    }

    let mut edges = Vec::new();
    let mut cycle_short = vec![Vec::new(); comps.len()];
    let mut cycle_long = vec![Vec::new(); comps.len()];
    let mut path_edge = vec![None; comps.len()];
    for (ci, comp) in comps.iter().enumerate() {
        let base = comp_base[ci];
        match comp {
            Component::Cycle(ring) => {
                let m = ring.len();
                for j in 0..m {
                    let prev = ring[(j + m - 1) % m];
                    let next = ring[(j + 1) % m];
                    cycle_short[ci].push(edges.len());
                    edges.push(AuxEdge {
                        u: base + 2 * j,
                        v: base + 2 * j + 1,
                        class: EdgeClass::Short,
                        weight: inst.transition_cost(prev, ring[j], next),
                    });
                }
                for j in 0..m {
                    // long edge joins b_j to a_{j+1}
                    cycle_long[ci].push(edges.len());
                    edges.push(AuxEdge {
                        u: base + 2 * j + 1,
                        v: base + 2 * ((j + 1) % m),
                        class: EdgeClass::Long,
                        weight: 0.0,
                    });
                }
            }
            Component::Path(_) => {
                path_edge[ci] = Some(edges.len());
                edges.push(AuxEdge {
                    u: base,
                    v: base + 1,
                    class: EdgeClass::PathEdge,
                    weight: 0.0,
                });
            }
        }
    }
    // connecting edges across components, both port orientations
    for u in 0..ports.len() {
        for v in u + 1..ports.len() {
            let (pu, pv) = (ports[u], ports[v]);
            if pu.comp == pv.comp {
                continue;
            }
            let weight = inst.transition_cost(pu.ctx, pu.anchor, pv.anchor)
                + inst.transition_cost(pu.anchor, pv.anchor, pv.ctx);
            edges.push(AuxEdge { u, v, class: EdgeClass::Connecting, weight });
        }
    }

    Ok(MergeGraph { comps, ports, edges, comp_base, cycle_short, cycle_long, path_edge })
}

pub(crate) struct MergeModel {
    pub model: MilpModel,
    pub edge_vars: Vec<VarId>,
    pub graph: MergeGraph,
    edge_by_ports: HashMap<(usize, usize), VarId>,
}

/// Builds the merge ILP on the auxiliary graph: degree rows (exactly two at
/// path ports, at most two at cycle ports), per-cycle long/short edge
/// counts, the open-long-edge implications, the two-connecting-edges cut per
/// cycle, and fixed path edges. Subtour elimination is left to the integral
/// separation loop.
pub(crate) fn build_merge_model(inst: &Instance, comps: Vec<Component>) -> Result<MergeModel> {
    let graph = build_merge_graph(inst, comps)?;
    let mut model = MilpModel::new();
    let mut edge_vars = Vec::with_capacity(graph.edges.len());
    let mut edge_by_ports = HashMap::new();
    for (idx, e) in graph.edges.iter().enumerate() {
        let id = model.add_binary(format!("f_{}_{}", e.u, e.v), e.weight)?;
        edge_vars.push(id);
        edge_by_ports.insert((e.u.min(e.v), e.u.max(e.v)), id);
        if e.class == EdgeClass::PathEdge {
            model.fix_var(id, 1.0);
        }
        let _ = idx;
    }

    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); graph.n_ports()];
    for (idx, e) in graph.edges.iter().enumerate() {
        incident[e.u].push(idx);
        incident[e.v].push(idx);
    }

    for port in 0..graph.n_ports() {
        let terms: Vec<(VarId, f64)> =
            incident[port].iter().map(|&e| (edge_vars[e], 1.0)).collect();
        let rel = match graph.comps[graph.ports[port].comp] {
            Component::Path(_) => Rel::Eq,
            Component::Cycle(_) => Rel::Le,
        };
        model.add_row(terms, rel, 2.0)?;
    }

    for (ci, comp) in graph.comps.iter().enumerate() {
        let Component::Cycle(ring) = comp else { continue };
        let m = ring.len() as f64;
        model.add_row(
            graph.cycle_long[ci].iter().map(|&e| (edge_vars[e], 1.0)).collect(),
            Rel::Eq,
            m - 1.0,
        )?;
        model.add_row(
            graph.cycle_short[ci].iter().map(|&e| (edge_vars[e], 1.0)).collect(),
            Rel::Eq,
            m - 2.0,
        )?;
        // per long edge: if it is opened, its endpoints lose all short and
        // connecting edges; if kept, they can carry at most two
        for &le in &graph.cycle_long[ci] {
            let long = graph.edges[le];
            let mut terms: Vec<(VarId, f64)> = vec![(edge_vars[le], 2.0)];
            for &port in [long.u, long.v].iter() {
                for &other in &incident[port] {
                    match graph.edges[other].class {
                        EdgeClass::Short | EdgeClass::Connecting => {
                            terms.push((edge_vars[other], -1.0));
                        }
                        _ => {}
                    }
                }
            }
            model.add_row(terms, Rel::Ge, 0.0)?;
            // an opened long edge requires one of its flanking shorts opened
            let s1 = graph.cycle_short[ci]
                .iter()
                .copied()
                .find(|&s| {
                    let e = graph.edges[s];
                    e.u == long.u || e.v == long.u
                })
                .expect("flanking short edge");
            let s2 = graph.cycle_short[ci]
                .iter()
                .copied()
                .find(|&s| {
                    let e = graph.edges[s];
                    e.u == long.v || e.v == long.v
                })
                .expect("flanking short edge");
            model.add_row(
                vec![(edge_vars[le], 1.0), (edge_vars[s1], -1.0), (edge_vars[s2], -1.0)],
                Rel::Le,
                0.0,
            )?;
        }
        // the cycle connects to its complement by exactly two edges
        let base = graph.comp_base[ci];
        let end = base + 2 * ring.len();
        let cut: Vec<(VarId, f64)> = graph
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| {
                e.class == EdgeClass::Connecting
                    && ((base..end).contains(&e.u) != (base..end).contains(&e.v))
            })
            .map(|(idx, _)| (edge_vars[idx], 1.0))
            .collect();
        model.add_row(cut, Rel::Eq, 2.0)?;
    }

    Ok(MergeModel { model, edge_vars, graph, edge_by_ports })
}

/// Solves the merge model with integral subtour separation and decodes the
/// single auxiliary cycle back to an original-vertex ring.
pub(crate) fn solve_merge(merge: &MergeModel, backend: &SolverBackend) -> Result<Vec<usize>> {
    let n_ports = merge.graph.n_ports();
    let edge_vars = merge.edge_vars.clone();
    let edges: Vec<(usize, usize)> = merge.graph.edges.iter().map(|e| (e.u, e.v)).collect();
    let by_ports = merge.edge_by_ports.clone();
    let outcome = solve_with_integral_sec(
        &merge.model,
        backend,
        move |res| {
            let chosen: Vec<(usize, usize)> = edges
                .iter()
                .zip(&edge_vars)
                .filter(|(_, &id)| res.value(id) > 0.5)
                .map(|(&e, _)| e)
                .collect();
            cycles_of_edges(n_ports, &chosen)
        },
        move |s| {
            let mut terms = Vec::new();
            for i in 0..s.len() {
                for j in i + 1..s.len() {
                    let key = (s[i].min(s[j]), s[i].max(s[j]));
                    if let Some(&id) = by_ports.get(&key) {
                        terms.push((id, 1.0));
                    }
                }
            }
            terms
        },
        None,
    )?;

    let chosen: Vec<usize> = (0..merge.graph.edges.len())
        .filter(|&i| outcome.result.value(merge.edge_vars[i]) > 0.5)
        .collect();
    decode_cycle(&merge.graph, &chosen)
}

/// Walks the unique auxiliary cycle and expands it to original vertices:
/// port pairs of one vertex collapse, path edges expand to their full paths.
pub(crate) fn decode_cycle(graph: &MergeGraph, chosen_edges: &[usize]) -> Result<Vec<usize>> {
    let pairs: Vec<(usize, usize)> =
        chosen_edges.iter().map(|&e| (graph.edges[e].u, graph.edges[e].v)).collect();
    let cycles = cycles_of_edges(graph.n_ports(), &pairs);
    if cycles.len() != 1 {
        return Err(Error::SolveFailed(format!(
            "merge decode expected one auxiliary cycle, found {}",
            cycles.len()
        )));
    }
    let walk = &cycles[0];
    let m = walk.len();
    let mut out = Vec::new();
    for t in 0..m {
        let port = walk[t];
        let prev = walk[(t + m - 1) % m];
        let next = walk[(t + 1) % m];
        let info = graph.ports[port];
        match &graph.comps[info.comp] {
            Component::Cycle(_) => {
                // skip the second port of a vertex traversed over its short edge
                if graph.partner(port) == prev {
                    continue;
                }
                out.push(info.anchor);
            }
            Component::Path(p) => {
                if graph.partner(port) == prev {
                    continue; // path already emitted when entering its first port
                }
                if graph.partner(port) == next {
                    let local = port - graph.comp_base[info.comp];
                    if local == 0 {
                        out.extend(p.iter().copied());
                    } else {
                        out.extend(p.iter().rev().copied());
                    }
                } else {
                    return Err(Error::SolveFailed(
                        "path ports are not adjacent in the auxiliary cycle".into(),
                    ));
                }
            }
        }
    }

    // the decode must cover every component vertex exactly once
    let mut expected: Vec<usize> =
        graph.comps.iter().flat_map(|c| c.vertices().iter().copied()).collect();
    expected.sort_unstable();
    let mut got = out.clone();
    got.sort_unstable();
    if got != expected {
        return Err(Error::SolveFailed("merge decode lost or duplicated vertices".into()));
    }
    Ok(out)
}

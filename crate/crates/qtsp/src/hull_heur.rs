//! Convex-hull peeling heuristics: onion rings (optionally lens-extended)
//! merged into one tour greedily or through the merge ILP, with a truncated
//! peel whose remainder is solved exactly.

use std::collections::BTreeSet;

use crate::auxgraph::{self, Component, EdgeClass};
use crate::construct;
use crate::core::{cycle_cost, Instance, Tour};
use crate::error::{Error, Result};
use crate::geometry::convex_hull;
use crate::milp::SolverBackend;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeKind {
    Greedy,
    Ilp,
}

#[derive(Debug, Clone, Copy)]
pub struct HullConfig {
    /// Stop peeling once at most this many vertices remain.
    pub stop_at: usize,
    /// Lens-extend every fresh ring over the still-free vertices.
    pub lens_gamma: Option<f64>,
    pub merge: MergeKind,
}

impl Default for HullConfig {
    fn default() -> Self {
        HullConfig { stop_at: 2, lens_gamma: None, merge: MergeKind::Greedy }
    }
}

/// Greedy cycle merging: over all cycle pairs, all edge pairs and both
/// reconnection patterns, apply the merge with the smallest total objective
/// (ties: lexicographic by cycle pair, edge positions, pattern) until a
/// single cycle remains.
pub fn greedy_merge(inst: &Instance, cycles: &[Vec<usize>]) -> Result<Vec<usize>> {
    if cycles.is_empty() {
        return Err(Error::InvalidInput("greedy merge needs at least one cycle".into()));
    }
    if cycles.iter().any(|c| c.len() < 3) {
        return Err(Error::InvalidInput("greedy merge got a cycle shorter than 3".into()));
    }
    let mut rings: Vec<Vec<usize>> = cycles.to_vec();
    while rings.len() > 1 {
        let costs: Vec<f64> = rings.iter().map(|r| cycle_cost(inst, r)).collect();
        let mut best: Option<(f64, usize, usize, usize, usize, u8, Vec<usize>)> = None;
        for i in 0..rings.len() {
            for l in i + 1..rings.len() {
                for s in 0..rings[i].len() {
                    for t in 0..rings[l].len() {
                        for pattern in 0..2u8 {
                            let merged = merge_rings(&rings[i], s, &rings[l], t, pattern);
                            let delta = cycle_cost(inst, &merged) - costs[i] - costs[l];
                            let better = match &best {
                                Some((bd, ..)) => delta < *bd - 0.0,
                                None => true,
                            };
                            if better {
                                best = Some((delta, i, l, s, t, pattern, merged));
                            }
                        }
                    }
                }
            }
        }
        let (_, i, l, _, _, _, merged) = best.expect("at least one merge candidate");
        rings[i] = merged;
        rings.remove(l);
    }
    Ok(rings.pop().unwrap())
}

/// Opens edge `(a[s], a[s+1])` and `(b[t], b[t+1])` and reconnects:
/// pattern 0 joins `a[s]-b[t]` and `a[s+1]-b[t+1]`, pattern 1 joins
/// `a[s]-b[t+1]` and `a[s+1]-b[t]`.
fn merge_rings(a: &[usize], s: usize, b: &[usize], t: usize, pattern: u8) -> Vec<usize> {
    let rot = |ring: &[usize], cut: usize| -> Vec<usize> {
        // path from ring[cut+1] around to ring[cut]
        let m = ring.len();
        (1..=m).map(|k| ring[(cut + k) % m]).collect()
    };
    let pa = rot(a, s); // starts a[s+1], ends a[s]
    let pb = rot(b, t); // starts b[t+1], ends b[t]
    let mut out = pa;
    match pattern {
        0 => out.extend(pb.iter().rev()), // a[s] -> b[t] ... b[t+1] -> a[s+1]
        _ => out.extend(pb.iter()),       // a[s] -> b[t+1] ... b[t] -> a[s+1]
    }
    out
}

/// Auxiliary cycle-merge graph in the shape used by the merge ILP: one
/// (a, b) port pair per original vertex, short edges carrying the turn cost
/// at their vertex, zero-weight long edges along each cycle, and connecting
/// edges across cycles.
#[derive(Debug)]
pub struct CycleMergeGraph {
    pub n_aux_vertices: usize,
    /// `(u, v, weight)` with aux vertex ids.
    pub short_edges: Vec<(usize, usize, f64)>,
    pub long_edges: Vec<(usize, usize, f64)>,
    pub connecting_edges: Vec<(usize, usize, f64)>,
    /// Aux vertex id to original vertex.
    pub aux_to_vertex: Vec<usize>,
}

pub fn build_cycle_merge_graph(inst: &Instance, cycles: &[Vec<usize>]) -> Result<CycleMergeGraph> {
    let comps: Vec<Component> = cycles.iter().map(|c| Component::Cycle(c.clone())).collect();
    let graph = auxgraph::build_merge_graph(inst, comps)?;
    let mut out = CycleMergeGraph {
        n_aux_vertices: graph.n_ports(),
        short_edges: Vec::new(),
        long_edges: Vec::new(),
        connecting_edges: Vec::new(),
        aux_to_vertex: (0..graph.n_ports()).map(|p| graph.port_anchor(p)).collect(),
    };
    for e in &graph.edges {
        let item = (e.u, e.v, e.weight);
        match e.class {
            EdgeClass::Short => out.short_edges.push(item),
            EdgeClass::Long => out.long_edges.push(item),
            EdgeClass::Connecting => out.connecting_edges.push(item),
            EdgeClass::PathEdge => unreachable!("cycle merge graph has no path components"),
        }
    }
    Ok(out)
}

/// Merges vertex-disjoint cycles into one cycle through the merge ILP with
/// integral subtour separation; returns the merged ring over the original
/// vertices.
pub fn ilp_merge_cycles(
    inst: &Instance,
    cycles: &[Vec<usize>],
    backend: &SolverBackend,
) -> Result<Vec<usize>> {
    if cycles.len() < 2 {
        return Err(Error::InvalidInput("ILP merge needs at least two cycles".into()));
    }
    let comps: Vec<Component> = cycles.iter().map(|c| Component::Cycle(c.clone())).collect();
    let merge = auxgraph::build_merge_model(inst, comps)?;
    auxgraph::solve_merge(&merge, backend)
}

/// The convex-hull construction: peel rings until at most `stop_at` vertices
/// remain (lens-extending each fresh ring when configured), complete the
/// remainder (cheapest insertion into the innermost ring for up to two
/// leftovers, an exact subtour otherwise), and merge everything into a tour.
pub fn convex_hull_heuristic(
    inst: &Instance,
    config: &HullConfig,
    backend: &SolverBackend,
) -> Result<Tour> {
    let n = inst.n();
    if n < 3 {
        return Err(Error::InvalidInstance("hull heuristic needs n >= 3".into()));
    }
    if config.stop_at < 2 {
        return Err(Error::Parameter("stop_at must be >= 2".into()));
    }

    let mut remaining: BTreeSet<usize> = (0..n).collect();
    let mut rings: Vec<Vec<usize>> = Vec::new();
    while remaining.len() > config.stop_at {
        let live: Vec<usize> = remaining.iter().copied().collect();
        let pts: Vec<_> = live.iter().map(|&v| inst.point(v)).collect();
        let hull = convex_hull(&pts);
        if hull.len() < 3 {
            break; // collinear leftovers are handled with the remainder
        }
        let mut ring: Vec<usize> = hull.into_iter().map(|i| live[i]).collect();
        for &v in &ring {
            remaining.remove(&v);
        }
        if let Some(gamma) = config.lens_gamma {
            let mut pos = 0;
            while pos < ring.len() {
                let inserted =
                    construct::lens_extend(inst, &mut ring, pos, &mut remaining, gamma, true);
                pos += inserted + 1;
            }
        }
        rings.push(ring);
    }
    let remainder: Vec<usize> = remaining.into_iter().collect();

    if rings.is_empty() {
        // nothing was peeled (n <= stop_at or collinear): solve exactly
        let order = exact_subcycle(inst, &remainder, backend)?;
        return Tour::new(order, n);
    }
    match remainder.len() {
        0 => {}
        1 | 2 => {
            // cheapest-insertion positions in the innermost ring
            let innermost = rings.last_mut().unwrap();
            let mut rest = remainder.clone();
            construct::cif_insert_all(inst, innermost, &mut rest);
        }
        _ => {
            let order = exact_subcycle(inst, &remainder, backend)?;
            rings.push(order);
        }
    }

    let merged = if rings.len() == 1 {
        rings.pop().unwrap()
    } else {
        match config.merge {
            MergeKind::Greedy => greedy_merge(inst, &rings)?,
            MergeKind::Ilp => ilp_merge_cycles(inst, &rings, backend)?,
        }
    };
    Tour::new(merged, n)
}

/// Optimal subtour on a vertex subset via the exact integral approach,
/// warm-started by cheapest insertion plus 2-opt on the sub-instance.
fn exact_subcycle(
    inst: &Instance,
    vertices: &[usize],
    backend: &SolverBackend,
) -> Result<Vec<usize>> {
    debug_assert!(vertices.len() >= 3);
    let (sub, back) = inst.sub_instance(vertices)?;
    let warm = construct::cheapest_insertion(&sub, None)?;
    let warm = crate::improve::two_opt(&sub, &warm);
    let cutoff = cycle_cost(&sub, warm.order());
    let order = crate::lp_heur::solve_exact_order(&sub, backend, Some(cutoff))?;
    Ok(order.into_iter().map(|i| back[i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{brute_force_optimum, generate_instance};
    use crate::core::{tour_objective, CostModel, ModelKind, Point};

    fn inst_of(points: &[(f64, f64)]) -> Instance {
        let pts = points.iter().map(|&(x, y)| Point::new(x, y)).collect();
        Instance::new(pts, CostModel::angle().with_scale(1.0), "t", None).unwrap()
    }

    /// Two unit squares side by side, vertex-disjoint.
    fn two_squares() -> (Instance, Vec<Vec<usize>>) {
        let inst = inst_of(&[
            (0.0, 0.0),
            (1.0, 0.0),
            (1.0, 1.0),
            (0.0, 1.0),
            (3.0, 0.0),
            (4.0, 0.0),
            (4.0, 1.0),
            (3.0, 1.0),
        ]);
        let cycles = vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7]];
        (inst, cycles)
    }

    #[test]
    fn greedy_merge_single_cycle_unchanged() {
        let (inst, cycles) = two_squares();
        let out = greedy_merge(&inst, &cycles[..1]).unwrap();
        assert_eq!(out, cycles[0]);
    }

    #[test]
    fn greedy_merge_rejects_degenerate_cycles() {
        let (inst, _) = two_squares();
        assert!(greedy_merge(&inst, &[vec![0, 1]]).is_err());
    }

    #[test]
    fn greedy_merge_matches_exhaustive_on_two_squares() {
        let (inst, cycles) = two_squares();
        let merged = greedy_merge(&inst, &cycles).unwrap();
        // exhaustive oracle over all 4*4*2 reconnections
        let mut best = f64::INFINITY;
        for s in 0..4 {
            for t in 0..4 {
                for pat in 0..2u8 {
                    let m = merge_rings(&cycles[0], s, &cycles[1], t, pat);
                    best = best.min(cycle_cost(&inst, &m));
                }
            }
        }
        assert!((cycle_cost(&inst, &merged) - best).abs() < 1e-9);
        let mut sorted = merged.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn greedy_merge_bounded_by_optimum() {
        for seed in 0..3 {
            let inst = generate_instance(8, seed, ModelKind::Angle).unwrap();
            let cycles = vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7]];
            let merged = greedy_merge(&inst, &cycles).unwrap();
            assert!(cycle_cost(&inst, &merged) >= brute_force_optimum(&inst).unwrap() - 1e-6);
        }
    }

    #[test]
    fn cycle_merge_graph_counts() {
        let (inst, cycles) = two_squares();
        let g = build_cycle_merge_graph(&inst, &cycles).unwrap();
        assert_eq!(g.n_aux_vertices, 16);
        assert_eq!(g.short_edges.len(), 8);
        assert_eq!(g.long_edges.len(), 8);
        assert_eq!(g.connecting_edges.len(), 64);
        assert!(g.long_edges.iter().all(|&(_, _, w)| w == 0.0));
    }

    #[test]
    fn cycle_merge_graph_short_weight_identity() {
        let (inst, cycles) = two_squares();
        let g = build_cycle_merge_graph(&inst, &cycles).unwrap();
        // short edge of v_2^1 (0-indexed vertex 1 of ring 0, ports 2 and 3)
        let (u, v, w) = g.short_edges[1];
        assert_eq!((u, v), (2, 3));
        assert_eq!(g.aux_to_vertex[u], 1);
        assert!((w - inst.transition_cost(0, 1, 2)).abs() < 1e-12);
    }

    #[test]
    fn connecting_weight_identity() {
        let (inst, cycles) = two_squares();
        let g = build_cycle_merge_graph(&inst, &cycles).unwrap();
        // w(a_2^1, b_1^2) = c(v_1^1, v_2^1, v_1^2) + c(v_2^1, v_1^2, v_2^2):
        // a_2^1 is aux 2 (vertex 1, ctx 0), b_1^2 is aux 9 (vertex 4, ctx 5)
        let expect = inst.transition_cost(0, 1, 4) + inst.transition_cost(1, 4, 5);
        let found = g
            .connecting_edges
            .iter()
            .find(|&&(u, v, _)| (u, v) == (2, 9) || (u, v) == (9, 2))
            .unwrap();
        assert!((found.2 - expect).abs() < 1e-12);
    }

    #[test]
    fn ilp_merge_two_squares_matches_greedy_search_space() {
        let (inst, cycles) = two_squares();
        let backend = SolverBackend::builtin();
        let merged = ilp_merge_cycles(&inst, &cycles, &backend).unwrap();
        let mut best = f64::INFINITY;
        for s in 0..4 {
            for t in 0..4 {
                for pat in 0..2u8 {
                    let m = merge_rings(&cycles[0], s, &cycles[1], t, pat);
                    best = best.min(cycle_cost(&inst, &m));
                }
            }
        }
        // a single merge of two cycles has the same search space as greedy
        assert!((cycle_cost(&inst, &merged) - best).abs() < 1e-6);
    }

    #[test]
    fn ilp_merge_two_triangles() {
        let inst = inst_of(&[
            (0.0, 0.0),
            (2.0, 0.0),
            (1.0, 1.5),
            (5.0, 0.0),
            (7.0, 0.0),
            (6.0, 1.5),
        ]);
        let cycles = vec![vec![0, 1, 2], vec![3, 4, 5]];
        let merged = ilp_merge_cycles(&inst, &cycles, &SolverBackend::builtin()).unwrap();
        let mut best = f64::INFINITY;
        for s in 0..3 {
            for t in 0..3 {
                for pat in 0..2u8 {
                    best = best
                        .min(cycle_cost(&inst, &merge_rings(&cycles[0], s, &cycles[1], t, pat)));
                }
            }
        }
        assert!((cycle_cost(&inst, &merged) - best).abs() < 1e-6);
        let mut sorted = merged;
        sorted.sort_unstable();
        assert_eq!(sorted, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn example_decode_configuration() {
        // the worked two-squares example: opening long edges {b_2^1, a_3^1}
        // and {b_4^2, a_1^2} plus connectors {a_2^1, b_1^2}, {a_4^2, b_3^1}
        // decodes to (v_1^1, v_2^1, v_1^2, v_2^2, v_3^2, v_4^2, v_3^1, v_4^1)
        let (inst, cycles) = two_squares();
        let comps: Vec<Component> = cycles.iter().map(|c| Component::Cycle(c.clone())).collect();
        let graph = crate::auxgraph::build_merge_graph(&inst, comps).unwrap();
        // ports: ring 0 -> a_j = 2j, b_j = 2j+1 (j 0-based); ring 1 offset 8
        let dropped_longs = [(3usize, 4usize), (15, 8)];
        let dropped_shorts = [(2usize, 3usize), (4, 5), (8, 9), (14, 15)];
        let added_connect = [(2usize, 9usize), (14, 5)];
        let chosen: Vec<usize> = graph
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| {
                let key = (e.u.min(e.v), e.u.max(e.v));
                match e.class {
                    EdgeClass::Long => !dropped_longs.iter().any(|&(a, b)| key == (a.min(b), a.max(b))),
                    EdgeClass::Short => {
                        !dropped_shorts.iter().any(|&(a, b)| key == (a.min(b), a.max(b)))
                    }
                    EdgeClass::Connecting => {
                        added_connect.iter().any(|&(a, b)| key == (a.min(b), a.max(b)))
                    }
                    EdgeClass::PathEdge => false,
                }
            })
            .map(|(i, _)| i)
            .collect();
        let decoded = crate::auxgraph::decode_cycle(&graph, &chosen).unwrap();
        // normalize rotation/direction to compare rings
        let expect = vec![0usize, 1, 4, 5, 6, 7, 2, 3];
        assert!(same_ring(&decoded, &expect), "decoded {decoded:?}");
    }

    fn same_ring(a: &[usize], b: &[usize]) -> bool {
        if a.len() != b.len() {
            return false;
        }
        let m = a.len();
        let start = b.iter().position(|&v| v == a[0]);
        let Some(s) = start else { return false };
        let fwd = (0..m).all(|k| a[k] == b[(s + k) % m]);
        let bwd = (0..m).all(|k| a[k] == b[(s + m - k % m) % m]);
        fwd || bwd
    }

    #[test]
    fn hull_heuristic_on_convex_ring() {
        // all points on one convex ring: the ring itself is returned
        let inst = inst_of(&[
            (0.0, 0.0),
            (4.0, 0.0),
            (6.0, 3.0),
            (3.0, 6.0),
            (-1.0, 4.0),
        ]);
        let tour =
            convex_hull_heuristic(&inst, &HullConfig::default(), &SolverBackend::builtin())
                .unwrap();
        let two_pi = 2.0 * std::f64::consts::PI;
        assert!((tour_objective(&inst, &tour) - two_pi).abs() < 1e-6);
    }

    #[test]
    fn convex_ring_costs_two_pi_scaled() {
        let inst = generate_instance(40, 4, ModelKind::Angle).unwrap();
        let layering = crate::geometry::peel_hulls(&inst, 2).unwrap();
        let ring = &layering.layers[0];
        let expect = 1000.0 * 2.0 * std::f64::consts::PI;
        assert!((cycle_cost(&inst, ring) - expect).abs() < 1e-6 * ring.len() as f64);
    }

    #[test]
    fn hull_heuristic_small_instance_solved_exactly() {
        let inst = generate_instance(9, 17, ModelKind::Angle).unwrap();
        let cfg = HullConfig { stop_at: 20, ..HullConfig::default() };
        let tour = convex_hull_heuristic(&inst, &cfg, &SolverBackend::builtin()).unwrap();
        let opt = brute_force_optimum(&inst).unwrap();
        assert!((tour_objective(&inst, &tour) - opt).abs() < 1e-6);
    }

    #[test]
    fn hull_heuristic_variants_valid() {
        let inst = generate_instance(24, 8, ModelKind::Angle).unwrap();
        let backend = SolverBackend::builtin();
        for cfg in [
            HullConfig::default(),
            HullConfig { lens_gamma: Some(40f64.to_radians()), ..HullConfig::default() },
            HullConfig { stop_at: 8, ..HullConfig::default() },
            HullConfig {
                stop_at: 8,
                lens_gamma: Some(40f64.to_radians()),
                merge: MergeKind::Greedy,
            },
            HullConfig { merge: MergeKind::Ilp, ..HullConfig::default() },
        ] {
            let tour = convex_hull_heuristic(&inst, &cfg, &backend).unwrap();
            assert_eq!(tour.len(), 24);
        }
    }
}

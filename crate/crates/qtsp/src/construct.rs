//! Lens insertion and the simple constructors: the nearest-neighbour family
//! and cheapest insertion.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::core::{cycle_cost, Instance, Path, Tour};
use crate::error::{Error, Result};
use crate::geometry::lens_region;

#[derive(Debug, Clone, Copy)]
pub struct NnConfig {
    /// Run from every start edge and keep the best tour.
    pub all_starts: bool,
    /// Lens thickness for the lens-extended variants.
    pub lens_gamma: Option<f64>,
    /// Improve tours from start edges incident to the pivot vertex with
    /// 2-opt before taking the minimum. Implies `all_starts`.
    pub two_opt_per_start: bool,
}

impl NnConfig {
    pub fn plain() -> Self {
        NnConfig { all_starts: false, lens_gamma: None, two_opt_per_start: false }
    }
}

/// Pivot vertex for the per-start 2-opt variant.
const PIVOT_VERTEX: usize = 0;

/// Objective change when inserting `l` between positions `left` and
/// `left + 1` of `seq` (`closed` wraps the context around the ends).
fn insertion_delta(
    inst: &Instance,
    seq: &[usize],
    left: usize,
    l: usize,
    closed: bool,
) -> f64 {
    let len = seq.len();
    let p = seq[left];
    let q = seq[(left + 1) % len];
    let mut delta = inst.transition_cost(p, l, q);
    if closed || left > 0 {
        let pred = seq[(left + len - 1) % len];
        delta += inst.transition_cost(pred, p, l) - inst.transition_cost(pred, p, q);
    }
    if closed || left + 2 < len {
        let succ = seq[(left + 2) % len];
        delta += inst.transition_cost(l, q, succ) - inst.transition_cost(p, q, succ);
    }
    delta
}

/// Recursive lens extension of the edge starting at position `left`:
/// while the lens holds free vertices, the one whose insertion increases the
/// objective least (ties: lowest index) is inserted, then both new edges are
/// processed. Returns the number of vertices inserted. `seq` is interpreted
/// cyclically when `closed` is set, so `left == len - 1` addresses the wrap
/// edge.
pub(crate) fn lens_extend(
    inst: &Instance,
    seq: &mut Vec<usize>,
    left: usize,
    free: &mut BTreeSet<usize>,
    gamma: f64,
    closed: bool,
) -> usize {
    if free.is_empty() {
        return 0;
    }
    let len = seq.len();
    let p = seq[left];
    let q = seq[(left + 1) % len];
    let lens = match lens_region(inst.point(p), inst.point(q), gamma) {
        Ok(l) => l,
        Err(_) => return 0,
    };
    let mut best: Option<(f64, usize)> = None;
    for &cand in free.iter() {
        if !lens.contains(inst.point(cand)) {
            continue;
        }
        let delta = insertion_delta(inst, seq, left, cand, closed);
        match best {
            Some((bd, _)) if delta >= bd => {}
            _ => best = Some((delta, cand)),
        }
    }
    let Some((_, chosen)) = best else {
        return 0;
    };
    seq.insert(left + 1, chosen);
    free.remove(&chosen);
    let inner_left = lens_extend(inst, seq, left, free, gamma, closed);
    let inner_right = lens_extend(inst, seq, left + 1 + inner_left, free, gamma, closed);
    1 + inner_left + inner_right
}

/// Lens procedure on one open-path edge: extends `path` between positions
/// `edge_index` and `edge_index + 1`, consuming inserted vertices from
/// `free`.
pub fn lens_insert(
    inst: &Instance,
    path: &Path,
    edge_index: usize,
    free: &mut BTreeSet<usize>,
    gamma: f64,
) -> Result<Path> {
    if edge_index + 1 >= path.len() {
        return Err(Error::InvalidInput(format!(
            "edge index {edge_index} out of range for a path of {} vertices",
            path.len()
        )));
    }
    if path.order().iter().any(|v| free.contains(v)) {
        return Err(Error::InvalidInput("free set overlaps the path".into()));
    }
    let mut seq = path.order().to_vec();
    lens_extend(inst, &mut seq, edge_index, free, gamma, false);
    Path::new(seq)
}

/// Nearest-neighbour construction from a start edge: repeatedly appends, at
/// the cheaper end of the path, the vertex with the smallest transition
/// cost (ties: lowest vertex index, then the front end), lens-extending each
/// new edge when configured, and closes the tour at the end.
pub fn nearest_neighbour(
    inst: &Instance,
    start: (usize, usize),
    config: &NnConfig,
) -> Result<Tour> {
    let n = inst.n();
    if n < 3 {
        return Err(Error::InvalidInstance("nearest neighbour needs n >= 3".into()));
    }
    let (i, j) = start;
    if i == j || i >= n || j >= n {
        return Err(Error::InvalidInput(format!("invalid start edge ({i}, {j})")));
    }
    let mut path = vec![i, j];
    let mut free: BTreeSet<usize> = (0..n).filter(|v| *v != i && *v != j).collect();
    while !free.is_empty() {
        let (first, second) = (path[0], path[1]);
        let (last2, last) = (path[path.len() - 2], path[path.len() - 1]);
        // (cost, vertex, end) with front = 0, back = 1
        let mut best: Option<(f64, usize, u8)> = None;
        for &k in free.iter() {
            let front = inst.transition_cost(k, first, second);
            let back = inst.transition_cost(last2, last, k);
            for (cost, end) in [(front, 0u8), (back, 1u8)] {
                let key = (cost, k, end);
                match best {
                    Some(b) if (b.0, b.1, b.2) <= key => {}
                    _ => best = Some(key),
                }
            }
        }
        let (_, k, end) = best.unwrap();
        free.remove(&k);
        let new_edge_left = if end == 0 {
            path.insert(0, k);
            0
        } else {
            path.push(k);
            path.len() - 2
        };
        if let Some(gamma) = config.lens_gamma {
            lens_extend(inst, &mut path, new_edge_left, &mut free, gamma, false);
        }
    }
    Tour::new(path, n)
}

/// Runs [`nearest_neighbour`] from every undirected start edge and keeps the
/// minimum-objective tour (ties: first start in lexicographic order). With
/// `two_opt_per_start`, tours started from edges incident to the pivot
/// vertex are 2-opt improved before the minimum is taken.
pub fn nn_best_over_starts(inst: &Instance, config: &NnConfig) -> Result<Tour> {
    let n = inst.n();
    if n < 3 {
        return Err(Error::InvalidInstance("nearest neighbour needs n >= 3".into()));
    }
    let mut starts = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            starts.push((i, j));
        }
    }
    let best = starts
        .par_iter()
        .enumerate()
        .map(|(idx, &(i, j))| {
            let mut tour = nearest_neighbour(inst, (i, j), config)?;
            if config.two_opt_per_start && (i == PIVOT_VERTEX || j == PIVOT_VERTEX) {
                tour = crate::improve::two_opt(inst, &tour);
            }
            Ok((cycle_cost(inst, tour.order()), idx, tour))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .expect("at least one start edge");
    Ok(best.2)
}

/// Start pair of the cheapest-insertion heuristic: the ordered pair (u, v)
/// minimizing min_x c(x,u,v) + min_y c(u,v,y); ties by lexicographic order.
pub(crate) fn cif_start_pair(inst: &Instance) -> (usize, usize) {
    let n = inst.n();
    let mut best: Option<(f64, (usize, usize))> = None;
    for u in 0..n {
        for v in 0..n {
            if u == v {
                continue;
            }
            let in_min = (0..n)
                .filter(|&x| x != u && x != v)
                .map(|x| inst.transition_cost(x, u, v))
                .fold(f64::INFINITY, f64::min);
            let out_min = (0..n)
                .filter(|&y| y != u && y != v)
                .map(|y| inst.transition_cost(u, v, y))
                .fold(f64::INFINITY, f64::min);
            let val = in_min + out_min;
            match best {
                Some((b, _)) if val >= b => {}
                _ => best = Some((val, (u, v))),
            }
        }
    }
    best.unwrap().1
}

/// Repeatedly inserts, over all remaining vertices and all positions, the
/// pair minimizing the objective increase (ties: lowest vertex, then lowest
/// position) until `remaining` is exhausted. `cycle` is extended in place.
pub(crate) fn cif_insert_all(inst: &Instance, cycle: &mut Vec<usize>, remaining: &mut Vec<usize>) {
    remaining.sort_unstable();
    while !remaining.is_empty() {
        let len = cycle.len();
        let mut best: Option<(f64, usize, usize)> = None; // (delta, vertex, pos)
        for &w in remaining.iter() {
            for pos in 0..len {
                let delta = insertion_delta(inst, cycle, pos, w, true);
                let key = (delta, w, pos);
                match best {
                    Some(b) if (b.0, b.1, b.2) <= key => {}
                    _ => best = Some(key),
                }
            }
        }
        let (_, w, pos) = best.unwrap();
        cycle.insert(pos + 1, w);
        remaining.retain(|&v| v != w);
    }
}

/// Cheapest-insertion construction. Without an initial subtour the start
/// triangle comes from the double-minimum rule (n <= 4 falls back to
/// enumerating the at most three distinct tours); a 2-vertex initial acts as
/// the start edge, a larger one is extended as given.
pub fn cheapest_insertion(inst: &Instance, initial: Option<&[usize]>) -> Result<Tour> {
    let n = inst.n();
    if n < 3 {
        return Err(Error::InvalidInstance("cheapest insertion needs n >= 3".into()));
    }
    let mut cycle: Vec<usize>;
    match initial {
        None => {
            if n == 3 {
                return Tour::new(vec![0, 1, 2], 3);
            }
            if n == 4 {
                let tours = [[0, 1, 2, 3], [0, 1, 3, 2], [0, 2, 1, 3]];
                let best = tours
                    .iter()
                    .map(|t| (cycle_cost(inst, t), t))
                    .min_by(|a, b| a.0.total_cmp(&b.0))
                    .unwrap();
                return Tour::new(best.1.to_vec(), 4);
            }
            let (u, v) = cif_start_pair(inst);
            let w = third_vertex(inst, u, v);
            cycle = vec![u, v, w];
        }
        Some(seq) => {
            if seq.len() < 2 {
                return Err(Error::InvalidInput("initial subtour needs >= 2 vertices".into()));
            }
            let mut sorted = seq.to_vec();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) || sorted.iter().any(|&v| v >= n) {
                return Err(Error::InvalidInput("initial subtour invalid".into()));
            }
            if seq.len() == 2 {
                let w = third_vertex(inst, seq[0], seq[1]);
                cycle = vec![seq[0], seq[1], w];
            } else {
                cycle = seq.to_vec();
            }
        }
    }
    let in_cycle: BTreeSet<usize> = cycle.iter().copied().collect();
    let mut remaining: Vec<usize> = (0..n).filter(|v| !in_cycle.contains(v)).collect();
    cif_insert_all(inst, &mut cycle, &mut remaining);
    Tour::new(cycle, n)
}

/// Third start vertex: minimizes the triangle objective (ties: lowest w).
fn third_vertex(inst: &Instance, u: usize, v: usize) -> usize {
    (0..inst.n())
        .filter(|&w| w != u && w != v)
        .map(|w| (cycle_cost(inst, &[u, v, w]), w))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .expect("n >= 3")
        .1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{brute_force_optimum, generate_instance};
    use crate::core::{path_objective, tour_objective, CostModel, ModelKind, Point};

    fn raw_angle_instance(points: &[(f64, f64)]) -> Instance {
        let pts = points.iter().map(|&(x, y)| Point::new(x, y)).collect();
        Instance::new(pts, CostModel::angle().with_scale(1.0), "test", None).unwrap()
    }

    // Example layout from the lens-procedure walkthrough (0-indexed).
    fn lens_example() -> Instance {
        raw_angle_instance(&[
            (0.0, 3.0),
            (2.0, 1.5),
            (8.0, 1.5),
            (10.0, 0.0),
            (3.5, 1.9),
            (5.0, 1.7),
        ])
    }

    #[test]
    fn lens_insert_walkthrough() {
        let inst = lens_example();
        let path = Path::new(vec![0, 1, 2, 3]).unwrap();
        let mut free: BTreeSet<usize> = [4, 5].into_iter().collect();
        let out = lens_insert(&inst, &path, 1, &mut free, 30f64.to_radians()).unwrap();
        assert_eq!(out.order(), &[0, 1, 4, 5, 2, 3]); // (1,2,5,6,3,4) 1-indexed
        assert!(free.is_empty());
    }

    #[test]
    fn lens_insert_empty_free_set() {
        let inst = lens_example();
        let path = Path::new(vec![0, 1, 2, 3]).unwrap();
        let mut free = BTreeSet::new();
        let out = lens_insert(&inst, &path, 1, &mut free, 30f64.to_radians()).unwrap();
        assert_eq!(out.order(), path.order());
    }

    #[test]
    fn lens_insert_collinear_candidate() {
        // candidate exactly on the segment: inserted at zero angle cost,
        // detour zero
        let inst = raw_angle_instance(&[(0.0, 0.0), (4.0, 0.0), (2.0, 0.0), (9.0, 5.0)]);
        let path = Path::new(vec![0, 1]).unwrap();
        let mut free: BTreeSet<usize> = [2].into_iter().collect();
        let before = path_objective(&inst, &path);
        let out = lens_insert(&inst, &path, 0, &mut free, 20f64.to_radians()).unwrap();
        assert_eq!(out.order(), &[0, 2, 1]);
        let after = path_objective(&inst, &out);
        assert!(after - before < 1e-12, "collinear insertion must be free");
    }

    #[test]
    fn lens_insert_consumes_exactly_inserted() {
        let inst = generate_instance(40, 11, ModelKind::Angle).unwrap();
        let path = Path::new(vec![0, 1]).unwrap();
        let mut free: BTreeSet<usize> = (2..40).collect();
        let before = free.len();
        let out = lens_insert(&inst, &path, 0, &mut free, 40f64.to_radians()).unwrap();
        assert_eq!(out.len() - 2, before - free.len());
        for v in out.order() {
            assert!(!free.contains(v));
        }
    }

    #[test]
    fn nn_three_vertices_unique_tour() {
        let inst = generate_instance(3, 1, ModelKind::Angle).unwrap();
        let t = nearest_neighbour(&inst, (0, 1), &NnConfig::plain()).unwrap();
        assert_eq!(t.len(), 3);
    }

    #[test]
    fn nn_hand_traced_fixture() {
        // square with one perturbed corner; the argmin rule appends vertex 2
        // at the back (cost ~1.47113) and vertex 3 at the front (pi/2),
        // ending at path (3,0,1,2); the closed tour costs 2 pi.
        let inst = raw_angle_instance(&[(0.0, 0.0), (1.0, 0.0), (1.1, 1.0), (0.0, 1.0)]);
        let t = nearest_neighbour(&inst, (0, 1), &NnConfig::plain()).unwrap();
        assert_eq!(t.order(), &[3, 0, 1, 2]);
        assert!((tour_objective(&inst, &t) - 6.283185307179586).abs() < 1e-9);
    }

    #[test]
    fn nn_valid_on_random_instances() {
        for seed in [0, 1, 2] {
            let inst = generate_instance(50, seed, ModelKind::AngleDistance).unwrap();
            let t = nearest_neighbour(&inst, (0, 1), &NnConfig::plain()).unwrap();
            assert_eq!(t.len(), 50); // Tour::new validated the permutation
        }
    }

    #[test]
    fn nn_lens_flag_neutrality() {
        // with no lens gamma the lens variant equals plain NN exactly
        let inst = generate_instance(25, 3, ModelKind::Angle).unwrap();
        let plain = nearest_neighbour(&inst, (2, 7), &NnConfig::plain()).unwrap();
        let cfg = NnConfig { lens_gamma: None, ..NnConfig::plain() };
        let nolens = nearest_neighbour(&inst, (2, 7), &cfg).unwrap();
        assert_eq!(plain.order(), nolens.order());
    }

    #[test]
    fn nns_not_worse_than_sampled_single_starts() {
        let inst = generate_instance(12, 5, ModelKind::Angle).unwrap();
        let cfg = NnConfig { all_starts: true, ..NnConfig::plain() };
        let best = nn_best_over_starts(&inst, &cfg).unwrap();
        let best_obj = tour_objective(&inst, &best);
        for (i, j) in [(0, 1), (3, 9), (2, 11), (4, 5), (7, 8)] {
            let single = nearest_neighbour(&inst, (i, j), &NnConfig::plain()).unwrap();
            assert!(best_obj <= tour_objective(&inst, &single) + 1e-9);
        }
    }

    #[test]
    fn nns_bounded_below_by_brute_force() {
        for seed in [0, 1, 2, 3] {
            let inst = generate_instance(8, seed, ModelKind::Angle).unwrap();
            let opt = brute_force_optimum(&inst).unwrap();
            let cfg = NnConfig { all_starts: true, ..NnConfig::plain() };
            let t = nn_best_over_starts(&inst, &cfg).unwrap();
            assert!(tour_objective(&inst, &t) >= opt - 1e-6);
        }
    }

    #[test]
    fn nns2_no_worse_than_nns() {
        for seed in 0..4 {
            let inst = generate_instance(20, seed, ModelKind::AngleDistance).unwrap();
            let nns = nn_best_over_starts(
                &inst,
                &NnConfig { all_starts: true, ..NnConfig::plain() },
            )
            .unwrap();
            let nns2 = nn_best_over_starts(
                &inst,
                &NnConfig { all_starts: true, two_opt_per_start: true, ..NnConfig::plain() },
            )
            .unwrap();
            assert!(
                tour_objective(&inst, &nns2) <= tour_objective(&inst, &nns) + 1e-9,
                "seed {seed}"
            );
        }
    }

    #[test]
    fn cif_small_cases() {
        let inst = generate_instance(3, 9, ModelKind::Angle).unwrap();
        assert_eq!(cheapest_insertion(&inst, None).unwrap().len(), 3);
        let inst4 = generate_instance(4, 9, ModelKind::Angle).unwrap();
        let t = cheapest_insertion(&inst4, None).unwrap();
        assert!((tour_objective(&inst4, &t) - brute_force_optimum(&inst4).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn cif_bounded_below_by_brute_force() {
        let mut hit_optimum = 0;
        for seed in 0..6 {
            let inst = generate_instance(8, seed, ModelKind::AngleDistance).unwrap();
            let opt = brute_force_optimum(&inst).unwrap();
            let t = cheapest_insertion(&inst, None).unwrap();
            let z = tour_objective(&inst, &t);
            assert!(z >= opt - 1e-6, "seed {seed}");
            if (z - opt).abs() < 1e-6 {
                hit_optimum += 1;
            }
        }
        let _ = hit_optimum; // equality happens but is not guaranteed per seed
    }

    #[test]
    fn cif_start_pair_matches_direct_scan() {
        let inst = generate_instance(6, 13, ModelKind::Angle).unwrap();
        let (u, v) = cif_start_pair(&inst);
        // independent evaluation of the double-minimum over ordered pairs
        let n = inst.n();
        let mut best = f64::INFINITY;
        let mut best_pair = (0, 0);
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                let mut pre = f64::INFINITY;
                let mut post = f64::INFINITY;
                for x in 0..n {
                    if x != a && x != b {
                        pre = pre.min(inst.transition_cost(x, a, b));
                        post = post.min(inst.transition_cost(a, b, x));
                    }
                }
                if pre + post < best {
                    best = pre + post;
                    best_pair = (a, b);
                }
            }
        }
        assert_eq!((u, v), best_pair);
    }

    #[test]
    fn cif_with_seed_edge() {
        let inst = generate_instance(7, 21, ModelKind::Angle).unwrap();
        let t = cheapest_insertion(&inst, Some(&[2, 5])).unwrap();
        assert_eq!(t.len(), 7);
        let unseeded = cheapest_insertion(&inst, None).unwrap();
        assert_eq!(unseeded.len(), 7);
    }

    #[test]
    fn constructors_always_return_permutations() {
        for (n, seed) in [(5usize, 0u64), (17, 1), (33, 2), (60, 3)] {
            let inst = generate_instance(n, seed, ModelKind::Angle).unwrap();
            for tour in [
                nearest_neighbour(&inst, (0, 1), &NnConfig::plain()).unwrap(),
                cheapest_insertion(&inst, None).unwrap(),
            ] {
                assert_eq!(tour.len(), n); // Tour::new validates
            }
        }
    }
}

//! Tour improvement: 2-opt and 3-opt local search, the magnifying-glass
//! window matheuristic, and simulated annealing over the lens
//! neighbourhood.

use std::time::Duration;

use crate::core::{cycle_cost, path_cost, Instance, Tour};
use crate::error::{Error, Result};
use crate::geometry::lens_region;
use crate::lp_heur::build_linearization_from_costs;
use crate::milp::{cycles_of_edges, solve_with_integral_sec, SolverBackend};
use crate::rng::SplitMix64;

const IMPROVE_EPS: f64 = 1e-9;

#[inline]
fn turn(inst: &Instance, order: &[usize], a: usize, b: usize, c: usize) -> f64 {
    let n = order.len();
    inst.transition_cost(order[a % n], order[b % n], order[c % n])
}

/// First-improvement 2-opt: scans segment reversals in canonical order
/// (i, j) and restarts after every applied move until no improving reversal
/// exists. The objective never increases.
pub fn two_opt(inst: &Instance, tour: &Tour) -> Tour {
    let n = tour.len();
    let mut order = tour.order().to_vec();
    'scan: loop {
        for i in 0..n.saturating_sub(2) {
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue; // full reversal is the identity tour
                }
                let old = turn(inst, &order, i + n - 1, i, i + 1)
                    + turn(inst, &order, i, i + 1, i + 2)
                    + turn(inst, &order, j + n - 1, j, j + 1)
                    + turn(inst, &order, j, j + 1, j + 2);
                let new = turn(inst, &order, i + n - 1, i, j)
                    + turn(inst, &order, i, j, j - 1)
                    + turn(inst, &order, i + 2, i + 1, j + 1)
                    + turn(inst, &order, i + 1, j + 1, j + 2);
                if new < old - IMPROVE_EPS {
                    order[i + 1..=j].reverse();
                    continue 'scan;
                }
            }
        }
        break;
    }
    Tour::new(order, n).expect("2-opt preserves the permutation")
}

/// The seven proper reconnections of three removed edges, 2-opt moves
/// included, in a fixed enumeration order.
fn three_opt_candidates(order: &[usize], i: usize, j: usize, k: usize) -> [Vec<usize>; 7] {
    let s1 = &order[i + 1..=j];
    let s2 = &order[j + 1..=k];
    let mut s3: Vec<usize> = order[k + 1..].to_vec();
    s3.extend_from_slice(&order[..=i]);
    let build = |a: &[usize], a_rev: bool, b: &[usize], b_rev: bool| -> Vec<usize> {
        let mut out = s3.clone();
        if a_rev {
            out.extend(a.iter().rev());
        } else {
            out.extend(a.iter());
        }
        if b_rev {
            out.extend(b.iter().rev());
        } else {
            out.extend(b.iter());
        }
        out
    };
    [
        build(s1, true, s2, false),  // 2-opt on (i, j)
        build(s1, false, s2, true),  // 2-opt on (j, k)
        build(s1, true, s2, true),
        build(s2, false, s1, false),
        build(s2, false, s1, true),
        build(s2, true, s1, false),
        build(s2, true, s1, true), // 2-opt on (i, k)
    ]
}

/// First-improvement 3-opt over all edge triples and all seven reconnection
/// patterns (the 2-opt moves are included); restarts after every applied
/// move. The objective never increases.
pub fn three_opt(inst: &Instance, tour: &Tour) -> Tour {
    let n = tour.len();
    let mut order = tour.order().to_vec();
    let mut cur = cycle_cost(inst, &order);
    'scan: loop {
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    for cand in three_opt_candidates(&order, i, j, k) {
                        let z = cycle_cost(inst, &cand);
                        if z < cur - IMPROVE_EPS {
                            order = cand;
                            cur = z;
                            continue 'scan;
                        }
                    }
                }
            }
        }
        break;
    }
    Tour::new(order, n).expect("3-opt preserves the permutation")
}

/// Rewires the tour optimally around a vertex window: all tour edges
/// touching `window` are removed, surviving paths of at most three vertices
/// dissolve into the isolated set, and the reduced problem (isolated
/// vertices plus one port pair per surviving path, path edges fixed) is
/// solved exactly through the linearization with integral separation.
///
/// The incumbent wiring stays feasible, so the result never degrades; on a
/// solver failure the input tour is returned unchanged with a warning.
pub fn reoptimize_window(
    inst: &Instance,
    tour: &Tour,
    window: &[usize],
    backend: &SolverBackend,
) -> Tour {
    match try_reoptimize(inst, tour, window, backend) {
        Ok(improved) => {
            let before = cycle_cost(inst, tour.order());
            let after = cycle_cost(inst, improved.order());
            if after <= before + IMPROVE_EPS {
                improved
            } else {
                log::warn!("window solve returned a worse tour ({after:.6} > {before:.6})");
                tour.clone()
            }
        }
        Err(e) => {
            log::warn!("window reoptimization kept the incumbent: {e}");
            tour.clone()
        }
    }
}

fn try_reoptimize(
    inst: &Instance,
    tour: &Tour,
    window: &[usize],
    backend: &SolverBackend,
) -> Result<Tour> {
    let n = inst.n();
    if window.is_empty() {
        return Ok(tour.clone());
    }
    let mut in_window = vec![false; n];
    for &v in window {
        in_window[v] = true;
    }
    let order = tour.order();
    let kept: Vec<bool> = (0..n)
        .map(|p| !in_window[order[p]] && !in_window[order[(p + 1) % n]])
        .collect();
    let Some(first_cut) = kept.iter().position(|&k| !k) else {
        return Ok(tour.clone());
    };

    // walk the cycle starting behind a removed edge, splitting into chains
    let start = (first_cut + 1) % n;
    let mut chains: Vec<Vec<usize>> = Vec::new();
    let mut chain = vec![order[start]];
    for step in 0..n - 1 {
        let pos = (start + step) % n;
        if kept[pos] {
            chain.push(order[(pos + 1) % n]);
        } else {
            chains.push(std::mem::take(&mut chain));
            chain.push(order[(pos + 1) % n]);
        }
    }
    chains.push(chain);

    // short fragments dissolve into the isolated set
    let mut isolated: Vec<usize> = Vec::new();
    let mut paths: Vec<Vec<usize>> = Vec::new();
    for chain in chains {
        if chain.len() <= 3 {
            isolated.extend(chain);
        } else {
            paths.push(chain);
        }
    }
    isolated.sort_unstable();

    let n_iso = isolated.len();
    let tau = paths.len();
    let n_aux = n_iso + 2 * tau;
    if n_aux < 3 || (tau == 1 && n_iso == 0) {
        return Ok(tour.clone());
    }

    // aux vertex a: isolated original vertex for a < n_iso, otherwise the
    // head (even) or tail (odd) port of path (a - n_iso) / 2
    let anchor = |a: usize| -> usize {
        if a < n_iso {
            isolated[a]
        } else {
            let p = &paths[(a - n_iso) / 2];
            if (a - n_iso) % 2 == 0 {
                p[0]
            } else {
                p[p.len() - 1]
            }
        }
    };
    let inner_ctx = |a: usize| -> usize {
        let p = &paths[(a - n_iso) / 2];
        if (a - n_iso) % 2 == 0 {
            p[1]
        } else {
            p[p.len() - 2]
        }
    };
    let partner = |a: usize| -> Option<usize> {
        if a < n_iso {
            None
        } else {
            Some(n_iso + 2 * ((a - n_iso) / 2) + (1 - (a - n_iso) % 2))
        }
    };
    let endpoint = |u: usize, middle: usize| -> usize {
        if partner(middle) == Some(u) {
            inner_ctx(middle)
        } else {
            anchor(u)
        }
    };
    let cost = |u: usize, v: usize, t: usize| -> f64 {
        inst.transition_cost(endpoint(u, v), anchor(v), endpoint(t, v))
    };

    let mut lin = build_linearization_from_costs(n_aux, &cost)?;
    for i in 0..tau {
        let e = lin.edge_var(n_iso + 2 * i, n_iso + 2 * i + 1);
        lin.model.fix_var(e, 1.0);
    }
    let interior: f64 = paths.iter().map(|p| path_cost(inst, p)).sum();
    let cutoff = cycle_cost(inst, order) - interior;

    let lin_ref = &lin;
    let outcome = solve_with_integral_sec(
        &lin.model,
        backend,
        move |res| {
            let mut edges = Vec::new();
            for u in 0..n_aux {
                for v in u + 1..n_aux {
                    if res.value(lin_ref.edge_var(u, v)) > 0.5 {
                        edges.push((u, v));
                    }
                }
            }
            cycles_of_edges(n_aux, &edges)
        },
        move |s| {
            let mut terms = Vec::new();
            for i in 0..s.len() {
                for j in i + 1..s.len() {
                    terms.push((lin_ref.edge_var(s[i], s[j]), 1.0));
                }
            }
            terms
        },
        Some(cutoff),
    )?;

    let mut edges = Vec::new();
    for u in 0..n_aux {
        for v in u + 1..n_aux {
            if outcome.result.value(lin.edge_var(u, v)) > 0.5 {
                edges.push((u, v));
            }
        }
    }
    let cycles = cycles_of_edges(n_aux, &edges);
    let [walk] = cycles.as_slice() else {
        return Err(Error::SolveFailed("window solve left multiple cycles".into()));
    };
    if walk.len() != n_aux {
        return Err(Error::SolveFailed("window cycle skips auxiliary vertices".into()));
    }
    let m = walk.len();
    let mut out = Vec::with_capacity(n);
    for t in 0..m {
        let a = walk[t];
        let prev = walk[(t + m - 1) % m];
        let next = walk[(t + 1) % m];
        if a < n_iso {
            out.push(isolated[a]);
            continue;
        }
        if partner(a) == Some(prev) {
            continue;
        }
        if partner(a) != Some(next) {
            return Err(Error::SolveFailed("path ports separated in window cycle".into()));
        }
        let p = &paths[(a - n_iso) / 2];
        if (a - n_iso) % 2 == 0 {
            out.extend(p.iter().copied());
        } else {
            out.extend(p.iter().rev().copied());
        }
    }
    Tour::new(out, n)
}

/// Magnifying-glass sweep configuration.
#[derive(Debug, Clone, Copy)]
pub struct GlassConfig {
    /// Expected number of vertices per window.
    pub k: usize,
    /// Overrides the bounding-box side used to derive the window size
    /// (`--domain 500` reproduces the benchmark geometry).
    pub domain: Option<f64>,
    /// Optional per-window solve limits; windows that hit a limit keep the
    /// incumbent wiring.
    pub node_limit: Option<u64>,
    pub time_limit: Option<Duration>,
}

impl Default for GlassConfig {
    fn default() -> Self {
        GlassConfig { k: 15, domain: None, node_limit: None, time_limit: None }
    }
}

/// Sweeps a square window of side `round(L * sqrt(k / n))` over the point
/// set, top-to-bottom and left-to-right with stride `round(2s/3)`,
/// reoptimizing every window. Every vertex is covered by at least one
/// window and the objective never increases.
pub fn magnifying_glass(
    inst: &Instance,
    tour: &Tour,
    config: &GlassConfig,
    backend: &SolverBackend,
) -> Tour {
    debug_assert!(config.k >= 4, "glass windows need k >= 4");
    let n = inst.n();
    let xs = inst.points().iter().map(|p| p.x);
    let ys = inst.points().iter().map(|p| p.y);
    let (x0, x1) = (xs.clone().fold(f64::INFINITY, f64::min), xs.fold(f64::NEG_INFINITY, f64::max));
    let (y0, y1) = (ys.clone().fold(f64::INFINITY, f64::min), ys.fold(f64::NEG_INFINITY, f64::max));
    let side = config.domain.unwrap_or_else(|| (x1 - x0).max(y1 - y0));
    let s = (side * (config.k as f64 / n as f64).sqrt()).round().max(1.0);
    let stride = (2.0 * s / 3.0).round().max(1.0);

    let mut win_backend = backend.clone();
    if config.node_limit.is_some() {
        win_backend.node_limit = config.node_limit;
    }
    if config.time_limit.is_some() {
        win_backend.time_limit = config.time_limit;
    }

    let mut current = tour.clone();
    let mut y_top = y1;
    loop {
        let mut x_left = x0;
        loop {
            let window: Vec<usize> = (0..n)
                .filter(|&v| {
                    let p = inst.point(v);
                    p.x >= x_left
                        && p.x <= x_left + s
                        && p.y >= y_top - s
                        && p.y <= y_top
                })
                .collect();
            if !window.is_empty() {
                current = reoptimize_window(inst, &current, &window, &win_backend);
            }
            x_left += stride;
            if x_left > x1 {
                break;
            }
        }
        y_top -= stride;
        if y_top < y0 {
            break;
        }
    }
    current
}

/// Lens relocation moves of a tour: for every tour edge and every
/// non-adjacent vertex inside the edge's lens, the vertex is moved between
/// the edge's endpoints. Returns `(edge position, vertex position)` pairs in
/// canonical enumeration order.
fn lens_moves(inst: &Instance, order: &[usize], gamma: f64) -> Vec<(usize, usize)> {
    let n = order.len();
    if n < 5 {
        return Vec::new();
    }
    let mut moves = Vec::new();
    for i in 0..n {
        let p = inst.point(order[i]);
        let q = inst.point(order[(i + 1) % n]);
        let Ok(lens) = lens_region(p, q, gamma) else { continue };
        for l in 0..n {
            // the three removed edges must be distinct and non-adjacent
            let rel = (l + n - i) % n;
            if rel <= 2 || rel == n - 1 {
                continue; // l in {i-1, i, i+1, i+2}
            }
            if lens.contains(inst.point(order[l])) {
                moves.push((i, l));
            }
        }
    }
    moves
}

fn apply_lens_move(order: &[usize], i: usize, l: usize) -> Vec<usize> {
    let n = order.len();
    let mut out = Vec::with_capacity(n);
    for p in 0..n {
        if p == l {
            continue;
        }
        out.push(order[p]);
        if p == i {
            out.push(order[l]);
        }
    }
    out
}

/// Objective change of a lens move, from the five affected turns.
fn lens_move_delta(inst: &Instance, order: &[usize], i: usize, l: usize) -> f64 {
    let n = order.len();
    let old = turn(inst, order, l + n - 1, l, l + 1)
        + turn(inst, order, l + n - 2, l + n - 1, l)
        + turn(inst, order, l, l + 1, l + 2)
        + turn(inst, order, i + n - 1, i, i + 1)
        + turn(inst, order, i, i + 1, i + 2);
    let new = turn(inst, order, i, l, i + 1)
        + turn(inst, order, l + n - 2, l + n - 1, l + 1)
        + turn(inst, order, l + n - 1, l + 1, l + 2)
        + turn(inst, order, i + n - 1, i, l)
        + turn(inst, order, l, i + 1, i + 2);
    new - old
}

/// The lens neighbourhood: all tours reachable by one lens relocation.
pub fn lens_neighbourhood(inst: &Instance, tour: &Tour, gamma: f64) -> Vec<Tour> {
    let order = tour.order();
    lens_moves(inst, order, gamma)
        .into_iter()
        .map(|(i, l)| {
            Tour::new(apply_lens_move(order, i, l), order.len())
                .expect("lens move preserves the permutation")
        })
        .collect()
}

/// Simulated-annealing configuration for the lens neighbourhood.
#[derive(Debug, Clone, Copy)]
pub struct SaConfig {
    pub gamma: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for SaConfig {
    fn default() -> Self {
        SaConfig { gamma: 20f64.to_radians(), iterations: 2000, seed: 0 }
    }
}

/// Linearly decreasing temperature: t(0) = 1, t(I) = 0.
pub fn temperature(iteration: usize, max_iterations: usize) -> f64 {
    debug_assert!(max_iterations >= 1);
    (max_iterations - iteration.min(max_iterations)) as f64 / max_iterations as f64
}

/// Acceptance probability for a non-improving move: exp(((z - z') / z) n / t),
/// defined as 0 when the temperature reaches zero or the current objective
/// is zero.
pub(crate) fn acceptance_probability(z: f64, z_new: f64, n: usize, t: f64) -> f64 {
    if t <= 0.0 || z <= 0.0 {
        return 0.0;
    }
    (((z - z_new) / z) * n as f64 / t).exp().min(1.0)
}

/// Least-cost simulated annealing over the lens neighbourhood: at every
/// iteration the cheapest neighbour is taken if improving, otherwise
/// accepted with the annealing probability. Runs for `iterations` steps or
/// until the neighbourhood is empty; returns the best tour seen.
pub fn lens_sa(inst: &Instance, tour: &Tour, config: &SaConfig) -> Tour {
    let n = inst.n();
    let i_max = config.iterations.max(1);
    let mut rng = SplitMix64::new(config.seed);
    let mut current = tour.order().to_vec();
    let mut current_z = cycle_cost(inst, &current);
    let mut best = current.clone();
    let mut best_z = current_z;

    for ell in 1..=i_max {
        let moves = lens_moves(inst, &current, config.gamma);
        if moves.is_empty() {
            break;
        }
        let (delta, i, l) = moves
            .iter()
            .map(|&(i, l)| (lens_move_delta(inst, &current, i, l), i, l))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap();
        let accept = if delta < -IMPROVE_EPS {
            true
        } else {
            let t = temperature(ell, i_max);
            let p = acceptance_probability(current_z, current_z + delta, n, t);
            rng.next_f64() < p
        };
        if accept {
            current = apply_lens_move(&current, i, l);
            current_z = cycle_cost(inst, &current);
            if current_z < best_z {
                best = current.clone();
                best_z = current_z;
            }
        }
    }
    Tour::new(best, n).expect("lens moves preserve the permutation")
}

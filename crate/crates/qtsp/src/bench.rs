//! Instance generation, lower bounds, exact baselines, the brute-force
//! oracle, the algorithm registry, metrics and report emission.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::core::{cycle_cost, CostModel, Instance, ModelKind, Point, Tour};
use crate::error::{Error, Result};
use crate::hull_heur::{self, HullConfig, MergeKind};
use crate::improve::{self, GlassConfig, SaConfig};
use crate::lp_heur::{self, LpConfig, LpVariant};
use crate::milp::{solve_lp, SolveStatus, SolverBackend};
use crate::rng::SplitMix64;
use crate::{construct, tour_objective};

/// Side of the integer sampling grid: coordinates are drawn uniformly from
/// `{0, ..., 500}^2`.
pub const GRID_MAX: u64 = 500;

/// Deterministic instance sampled from the integer grid; duplicate points
/// are rejected and redrawn.
pub fn generate_instance(n: usize, seed: u64, kind: ModelKind) -> Result<Instance> {
    if n < 3 {
        return Err(Error::InvalidInstance(format!("need n >= 3, got {n}")));
    }
    let model = match kind {
        ModelKind::Angle => CostModel::angle(),
        ModelKind::AngleDistance => CostModel::angle_distance(40.0),
    };
    let mut rng = SplitMix64::new(seed);
    let mut taken: HashSet<(u64, u64)> = HashSet::with_capacity(n);
    let mut points = Vec::with_capacity(n);
    while points.len() < n {
        let x = rng.next_below(GRID_MAX + 1);
        let y = rng.next_below(GRID_MAX + 1);
        if taken.insert((x, y)) {
            points.push(Point::new(x as f64, y as f64));
        }
    }
    Instance::new(points, model, format!("{kind}-n{n}-s{seed}"), Some(seed))
}

/// Minimum tour objective over all (n-1)!/2 distinct tours. Refused above
/// n = 10; this is the test oracle, independent of the solver stack.
pub fn brute_force_optimum(inst: &Instance) -> Result<f64> {
    let n = inst.n();
    if n > 10 {
        return Err(Error::InvalidInput(format!("brute force refused for n = {n} > 10")));
    }
    if n < 3 {
        return Err(Error::InvalidInstance("need n >= 3".into()));
    }
    // dense transition-cost table so the permutation scan stays cheap
    let mut cost = vec![0.0f64; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if i != j && j != k {
                    cost[(i * n + j) * n + k] = inst.transition_cost(i, j, k);
                }
            }
        }
    }
    let mut order: Vec<usize> = (1..n).collect();
    let mut best = f64::INFINITY;
    let mut seq = vec![0usize; n];
    permute(&mut order, 0, &mut |perm| {
        // vertex 0 stays first; reversed duplicates are skipped
        if perm[0] > perm[n - 2] {
            return;
        }
        seq[1..].copy_from_slice(perm);
        let mut full = 0.0;
        for i in 0..n {
            let a = seq[i];
            let b = seq[(i + 1) % n];
            let c = seq[(i + 2) % n];
            full += cost[(a * n + b) * n + c];
        }
        if full < best {
            best = full;
        }
    });
    Ok(best)
}

fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// LP-relaxation value of the linearization without subtour or integrality
/// constraints; a valid lower bound on the optimal tour objective.
pub fn lower_bound(inst: &Instance, backend: &SolverBackend) -> Result<f64> {
    let lin = lp_heur::build_linearization(inst)?;
    let result = solve_lp(&lin.model, backend)?;
    if result.status != SolveStatus::Optimal {
        return Err(Error::SolveFailed(format!(
            "lower bound relaxation ended with status {:?}",
            result.status
        )));
    }
    Ok(result.objective)
}

/// Exact optimum via the integral subtour-separation approach on the cubic
/// linearization. A fast heuristic tour seeds the branch-and-bound cutoff.
pub fn exact_optimum(inst: &Instance, backend: &SolverBackend) -> Result<(Tour, f64)> {
    let warm = construct::cheapest_insertion(inst, None)?;
    let warm = improve::two_opt(inst, &warm);
    let cutoff = tour_objective(inst, &warm);
    exact_optimum_with_cutoff(inst, backend, Some(cutoff))
}

pub(crate) fn exact_optimum_with_cutoff(
    inst: &Instance,
    backend: &SolverBackend,
    cutoff: Option<f64>,
) -> Result<(Tour, f64)> {
    let order = lp_heur::solve_exact_order(inst, backend, cutoff)?;
    let tour = Tour::new(order, inst.n())?;
    let value = tour_objective(inst, &tour);
    Ok((tour, value))
}

/// Identifiers for the stand-alone construction algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Nn,
    Nns,
    Nns2,
    Nnl,
    Nnsl,
    Cif,
    Ch,
    Chc,
    Chl,
    Chcl,
    Lpp,
    Lppr,
    Lpc1,
    Lpc1r,
    Lpc2,
    Lpc2r,
}

/// Default lens thickness for constructors and hull peeling (40 degrees).
pub fn default_lens_gamma() -> f64 {
    40f64.to_radians()
}

/// Default remaining-vertex threshold for the truncated hull peeling.
pub const DEFAULT_HULL_C: usize = 20;

impl Algorithm {
    pub const ALL: [Algorithm; 16] = [
        Algorithm::Nn,
        Algorithm::Nns,
        Algorithm::Nns2,
        Algorithm::Nnl,
        Algorithm::Nnsl,
        Algorithm::Cif,
        Algorithm::Ch,
        Algorithm::Chc,
        Algorithm::Chl,
        Algorithm::Chcl,
        Algorithm::Lpp,
        Algorithm::Lppr,
        Algorithm::Lpc1,
        Algorithm::Lpc1r,
        Algorithm::Lpc2,
        Algorithm::Lpc2r,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Algorithm::Nn => "nn",
            Algorithm::Nns => "nns",
            Algorithm::Nns2 => "nns2",
            Algorithm::Nnl => "nnl",
            Algorithm::Nnsl => "nnsl",
            Algorithm::Cif => "cif",
            Algorithm::Ch => "ch",
            Algorithm::Chc => "chc",
            Algorithm::Chl => "chl",
            Algorithm::Chcl => "chcl",
            Algorithm::Lpp => "lpp",
            Algorithm::Lppr => "lppr",
            Algorithm::Lpc1 => "lpc1",
            Algorithm::Lpc1r => "lpc1r",
            Algorithm::Lpc2 => "lpc2",
            Algorithm::Lpc2r => "lpc2r",
        }
    }

    pub fn parse(s: &str) -> Option<Algorithm> {
        Algorithm::ALL.iter().copied().find(|a| a.id() == s)
    }

    pub fn run(&self, inst: &Instance, backend: &SolverBackend) -> Result<Tour> {
        let nn_cfg = |all_starts: bool, lens: bool, two_opt: bool| construct::NnConfig {
            all_starts,
            lens_gamma: lens.then(default_lens_gamma),
            two_opt_per_start: two_opt,
        };
        let hull_cfg = |c: usize, lens: bool| HullConfig {
            stop_at: c,
            lens_gamma: lens.then(default_lens_gamma),
            merge: MergeKind::Greedy,
        };
        let lp_cfg = |variant, rerun| LpConfig { variant, rerun, round_threshold: 0.5 };
        match self {
            Algorithm::Nn => construct::nearest_neighbour(inst, (0, 1), &nn_cfg(false, false, false)),
            Algorithm::Nns => construct::nn_best_over_starts(inst, &nn_cfg(true, false, false)),
            Algorithm::Nns2 => construct::nn_best_over_starts(inst, &nn_cfg(true, false, true)),
            Algorithm::Nnl => construct::nearest_neighbour(inst, (0, 1), &nn_cfg(false, true, false)),
            Algorithm::Nnsl => construct::nn_best_over_starts(inst, &nn_cfg(true, true, false)),
            Algorithm::Cif => construct::cheapest_insertion(inst, None),
            Algorithm::Ch => hull_heur::convex_hull_heuristic(inst, &hull_cfg(2, false), backend),
            Algorithm::Chc => {
                hull_heur::convex_hull_heuristic(inst, &hull_cfg(DEFAULT_HULL_C, false), backend)
            }
            Algorithm::Chl => hull_heur::convex_hull_heuristic(inst, &hull_cfg(2, true), backend),
            Algorithm::Chcl => {
                hull_heur::convex_hull_heuristic(inst, &hull_cfg(DEFAULT_HULL_C, true), backend)
            }
            Algorithm::Lpp => lp_heur::lp_heuristic(inst, &lp_cfg(LpVariant::Paths, false), backend),
            Algorithm::Lppr => lp_heur::lp_heuristic(inst, &lp_cfg(LpVariant::Paths, true), backend),
            Algorithm::Lpc1 => {
                lp_heur::lp_heuristic(inst, &lp_cfg(LpVariant::Combined, false), backend)
            }
            Algorithm::Lpc1r => {
                lp_heur::lp_heuristic(inst, &lp_cfg(LpVariant::Combined, true), backend)
            }
            Algorithm::Lpc2 => {
                lp_heur::lp_heuristic(inst, &lp_cfg(LpVariant::Sequential, false), backend)
            }
            Algorithm::Lpc2r => {
                lp_heur::lp_heuristic(inst, &lp_cfg(LpVariant::Sequential, true), backend)
            }
        }
    }
}

/// Tour post-processors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Improver {
    TwoOpt,
    ThreeOpt,
    Glass { k: usize },
    LensSa { gamma: f64, iterations: usize },
}

impl Improver {
    pub fn id(&self) -> String {
        match self {
            Improver::TwoOpt => "2opt".into(),
            Improver::ThreeOpt => "3opt".into(),
            Improver::Glass { k } => format!("glass:{k}"),
            Improver::LensSa { gamma, iterations } => {
                format!("lenssa:{:.0}:{iterations}", gamma.to_degrees())
            }
        }
    }

    /// Parses `2opt`, `3opt`, `glass:K`, `lenssa`, `lenssa:GAMMA_DEG:ITERS`.
    pub fn parse(s: &str) -> Option<Improver> {
        match s {
            "2opt" => return Some(Improver::TwoOpt),
            "3opt" => return Some(Improver::ThreeOpt),
            "lenssa" => {
                return Some(Improver::LensSa { gamma: 20f64.to_radians(), iterations: 2000 })
            }
            _ => {}
        }
        if let Some(k) = s.strip_prefix("glass:") {
            let k: usize = k.parse().ok()?;
            if k >= 4 {
                return Some(Improver::Glass { k });
            }
            return None;
        }
        if let Some(rest) = s.strip_prefix("lenssa:") {
            let mut it = rest.split(':');
            let gamma: f64 = it.next()?.parse().ok()?;
            let iterations: usize = it.next()?.parse().ok()?;
            if it.next().is_some() {
                return None;
            }
            return Some(Improver::LensSa { gamma: gamma.to_radians(), iterations });
        }
        None
    }

    pub fn apply(
        &self,
        inst: &Instance,
        tour: &Tour,
        backend: &SolverBackend,
        domain: Option<f64>,
    ) -> Result<Tour> {
        Ok(match self {
            Improver::TwoOpt => improve::two_opt(inst, tour),
            Improver::ThreeOpt => improve::three_opt(inst, tour),
            Improver::Glass { k } => {
                let cfg = GlassConfig { k: *k, domain, ..GlassConfig::default() };
                improve::magnifying_glass(inst, tour, &cfg, backend)
            }
            Improver::LensSa { gamma, iterations } => {
                let cfg = SaConfig {
                    gamma: *gamma,
                    iterations: *iterations,
                    seed: inst.seed().unwrap_or(0),
                };
                improve::lens_sa(inst, tour, &cfg)
            }
        })
    }
}

/// One benchmark outcome row.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub instance: String,
    pub n: usize,
    pub model: ModelKind,
    pub algorithm: String,
    pub improver: String,
    pub objective: Option<f64>,
    pub lower_bound: Option<f64>,
    pub ratio: Option<f64>,
    pub time_ms: f64,
    pub seed: u64,
    pub status: RunStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    Failed,
    Skipped,
}

impl RunStatus {
    fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Failed => "failed",
            RunStatus::Skipped => "skipped",
        }
    }
}

/// Per-(n, model, algorithm+improver) aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub n: usize,
    pub model: ModelKind,
    pub algorithm: String,
    pub geo_mean_ratio: f64,
    pub mean_time_ms: f64,
    pub runs: usize,
}

/// Geometric mean of ratios and arithmetic mean of times per
/// (n, model, algorithm) group, in first-appearance order.
pub fn summarize(records: &[RunRecord]) -> Vec<Aggregate> {
    let mut order: Vec<(usize, ModelKind, String)> = Vec::new();
    for r in records {
        let key = (r.n, r.model, format!("{}{}", r.algorithm, fmt_improver_suffix(&r.improver)));
        if !order.contains(&key) {
            order.push(key);
        }
    }
    let mut out = Vec::new();
    for (n, model, algorithm) in order {
        let group: Vec<&RunRecord> = records
            .iter()
            .filter(|r| {
                r.n == n
                    && r.model == model
                    && format!("{}{}", r.algorithm, fmt_improver_suffix(&r.improver)) == algorithm
                    && r.status == RunStatus::Ok
            })
            .collect();
        if group.is_empty() {
            continue;
        }
        let log_sum: f64 = group.iter().map(|r| r.ratio.unwrap_or(1.0).ln()).sum();
        let geo = (log_sum / group.len() as f64).exp();
        let time = group.iter().map(|r| r.time_ms).sum::<f64>() / group.len() as f64;
        out.push(Aggregate {
            n,
            model,
            algorithm,
            geo_mean_ratio: geo,
            mean_time_ms: time,
            runs: group.len(),
        });
    }
    out
}

fn fmt_improver_suffix(improver: &str) -> String {
    if improver.is_empty() {
        String::new()
    } else {
        format!("+{improver}")
    }
}

/// Benchmark plan: the cross product of sizes, seeds, models and algorithms,
/// each optionally post-processed.
#[derive(Debug, Clone)]
pub struct BenchPlan {
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub models: Vec<ModelKind>,
    pub algorithms: Vec<Algorithm>,
    /// Improver per run; `None` entries run the bare construction.
    pub improvers: Vec<Option<Improver>>,
    pub backend: SolverBackend,
    pub domain: Option<f64>,
}

impl BenchPlan {
    pub fn seeds_from_count(count: u64) -> Vec<u64> {
        (0..count).collect()
    }
}

pub const CSV_HEADER: &str =
    "instance,n,model,algorithm,improver,objective,lower_bound,ratio,time_ms,seed,status";

/// Executes the plan (instances run concurrently, records merged in plan
/// order) and renders the CSV report.
pub fn run_benchmark(plan: &BenchPlan) -> Result<(Vec<RunRecord>, String)> {
    let improvers = if plan.improvers.is_empty() { vec![None] } else { plan.improvers.clone() };
    // one lower bound per instance, shared across algorithm runs
    let mut instances = Vec::new();
    for &model in &plan.models {
        for &n in &plan.sizes {
            for &seed in &plan.seeds {
                instances.push((model, n, seed));
            }
        }
    }
    let bounds: Vec<Result<(Instance, f64)>> = instances
        .par_iter()
        .map(|&(model, n, seed)| {
            let inst = generate_instance(n, seed, model)?;
            let lb = lower_bound(&inst, &plan.backend)?;
            Ok((inst, lb))
        })
        .collect();

    let mut tasks = Vec::new();
    for (idx, _) in instances.iter().enumerate() {
        for &algo in &plan.algorithms {
            for improver in &improvers {
                tasks.push((idx, algo, *improver));
            }
        }
    }
    let records: Vec<RunRecord> = tasks
        .par_iter()
        .map(|&(idx, algo, improver)| {
            let (model, n, seed) = instances[idx];
            let improver_id = improver.map(|i| i.id()).unwrap_or_default();
            let algo_id = algo.id().to_string();
            let (inst, lb) = match &bounds[idx] {
                Ok(pair) => pair,
                Err(e) => {
                    log::warn!("instance {model}-n{n}-s{seed} failed: {e}");
                    return RunRecord {
                        instance: format!("{model}-n{n}-s{seed}"),
                        n,
                        model,
                        algorithm: algo_id,
                        improver: improver_id,
                        objective: None,
                        lower_bound: None,
                        ratio: None,
                        time_ms: 0.0,
                        seed,
                        status: RunStatus::Failed,
                    };
                }
            };
            let started = Instant::now();
            let tour = algo.run(inst, &plan.backend).and_then(|t| match improver {
                Some(imp) => imp.apply(inst, &t, &plan.backend, plan.domain),
                None => Ok(t),
            });
            let time_ms = started.elapsed().as_secs_f64() * 1e3;
            match tour {
                Ok(tour) => {
                    let obj = tour_objective(inst, &tour);
                    RunRecord {
                        instance: inst.name().to_string(),
                        n,
                        model,
                        algorithm: algo_id,
                        improver: improver_id,
                        objective: Some(obj),
                        lower_bound: Some(*lb),
                        ratio: Some(obj / lb),
                        time_ms,
                        seed,
                        status: RunStatus::Ok,
                    }
                }
                Err(e) => {
                    log::warn!("{} on {} failed: {e}", algo.id(), inst.name());
                    RunRecord {
                        instance: inst.name().to_string(),
                        n,
                        model,
                        algorithm: algo_id,
                        improver: improver_id,
                        objective: None,
                        lower_bound: Some(*lb),
                        ratio: None,
                        time_ms,
                        seed,
                        status: RunStatus::Failed,
                    }
                }
            }
        })
        .collect();

    let csv = render_csv(&records);
    Ok((records, csv))
}

pub fn render_csv(records: &[RunRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    let num = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{:.6},{},{}",
            r.instance,
            r.n,
            r.model,
            r.algorithm,
            r.improver,
            num(r.objective),
            num(r.lower_bound),
            num(r.ratio),
            r.time_ms,
            r.seed,
            r.status.as_str()
        );
    }
    out
}

/// Scalable drawing of an instance with its tour: dots for points, a closed
/// polyline for the tour, view box from the bounding box with a 5% margin.
pub fn render_svg(inst: &Instance, tour: &Tour) -> String {
    let xs: Vec<f64> = inst.points().iter().map(|p| p.x).collect();
    let ys: Vec<f64> = inst.points().iter().map(|p| p.y).collect();
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (x0, x1, y0, y1) = (min(&xs), max(&xs), min(&ys), max(&ys));
    let w = (x1 - x0).max(1.0);
    let h = (y1 - y0).max(1.0);
    let margin = 0.05 * w.max(h);
    let flip = |y: f64| y1 - (y - y0); // SVG y axis points down

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}">"#,
        x0 - margin,
        y0 - margin,
        w + 2.0 * margin,
        h + 2.0 * margin
    );
    let mut pts = String::new();
    for &v in tour.order() {
        let p = inst.point(v);
        let _ = write!(pts, "{},{} ", p.x, flip(p.y));
    }
    let first = inst.point(tour.order()[0]);
    let _ = write!(pts, "{},{}", first.x, flip(first.y));
    let _ = writeln!(
        out,
        r#"  <polyline points="{}" fill="none" stroke="black" stroke-width="{}"/>"#,
        pts.trim(),
        0.004 * w.max(h)
    );
    let r = 0.008 * w.max(h);
    for p in inst.points() {
        let _ = writeln!(
            out,
            r#"  <circle cx="{}" cy="{}" r="{r}" fill="crimson"/>"#,
            p.x,
            flip(p.y)
        );
    }
    out.push_str("</svg>\n");
    out
}

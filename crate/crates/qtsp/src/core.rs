//! Instance representation, transition-cost models, tour/path types and
//! objective evaluation.

use std::fmt;

use crate::error::{Error, Result};

/// Absolute tolerance for comparing objective values.
pub const VALUE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Angle,
    AngleDistance,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Angle => write!(f, "angle"),
            ModelKind::AngleDistance => write!(f, "angledist"),
        }
    }
}

/// Transition-cost model. The angle model charges the turning angle scaled
/// by `scale`; the angle-distance model charges
/// `scale * (rho * angle + (d_in + d_out) / 2)`. All costs are rounded to
/// `decimals` decimal places after scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    pub kind: ModelKind,
    pub rho: f64,
    pub scale: f64,
    pub decimals: u32,
}

impl CostModel {
    /// Angle model with the standard benchmark scaling (x1000, 12 decimals).
    pub fn angle() -> Self {
        CostModel { kind: ModelKind::Angle, rho: 0.0, scale: 1000.0, decimals: 12 }
    }

    /// Angle-distance model with the standard benchmark scaling
    /// (x100, 12 decimals).
    pub fn angle_distance(rho: f64) -> Self {
        CostModel { kind: ModelKind::AngleDistance, rho, scale: 100.0, decimals: 12 }
    }

    /// Same model with a different scale; `scale = 1.0` yields raw angles.
    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::Parameter(format!("scale must be positive, got {}", self.scale)));
        }
        if !(self.rho >= 0.0) || !self.rho.is_finite() {
            return Err(Error::Parameter(format!("rho must be nonnegative, got {}", self.rho)));
        }
        Ok(())
    }
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel::angle()
    }
}

fn round_decimals(v: f64, decimals: u32) -> f64 {
    let f = 10f64.powi(decimals as i32);
    (v * f).round() / f
}

/// A point set together with its cost model; the sole source of transition
/// costs. Read-only after construction.
#[derive(Debug, Clone)]
pub struct Instance {
    points: Vec<Point>,
    model: CostModel,
    name: String,
    seed: Option<u64>,
    dist: Vec<f64>,
}

impl Instance {
    pub fn new(
        points: Vec<Point>,
        model: CostModel,
        name: impl Into<String>,
        seed: Option<u64>,
    ) -> Result<Self> {
        model.validate()?;
        if points.is_empty() {
            return Err(Error::InvalidInstance("no points".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(Error::InvalidInstance(format!("point {i} has non-finite coordinates")));
            }
        }
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                if points[i] == points[j] {
                    return Err(Error::DuplicatePoint { a: i, b: j });
                }
            }
        }
        let n = points.len();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = points[i].distance(points[j]);
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        Ok(Instance { points, model, name: name.into(), seed, dist })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn point(&self, i: usize) -> Point {
        self.points[i]
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn model(&self) -> &CostModel {
        &self.model
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.points.len() + j]
    }

    /// Raw turning angle at `j` when arriving from `i` and leaving to `k`,
    /// in radians within [0, pi]. The arccos argument is clamped to [-1, 1]
    /// so exactly collinear triples do not fall out of the domain.
    ///
    /// Panics if `i == j` or `j == k` (zero-length direction vector); the
    /// constructor guarantees distinct points for distinct indices.
    pub fn turn_angle(&self, i: usize, j: usize, k: usize) -> f64 {
        assert!(i != j && j != k, "turn_angle requires i != j and j != k");
        let (pi, pj, pk) = (self.points[i], self.points[j], self.points[k]);
        let (ux, uy) = (pj.x - pi.x, pj.y - pi.y);
        let (vx, vy) = (pk.x - pj.x, pk.y - pj.y);
        let dot = ux * vx + uy * vy;
        let norm = self.distance(i, j) * self.distance(j, k);
        (dot / norm).clamp(-1.0, 1.0).acos()
    }

    /// Cost of the transition through `j` between `i` and `k`. Symmetric in
    /// `i` and `k`.
    pub fn transition_cost(&self, i: usize, j: usize, k: usize) -> f64 {
        let alpha = self.turn_angle(i, j, k);
        let raw = match self.model.kind {
            ModelKind::Angle => self.model.scale * alpha,
            ModelKind::AngleDistance => {
                self.model.scale
                    * (self.model.rho * alpha + 0.5 * (self.distance(i, j) + self.distance(j, k)))
            }
        };
        round_decimals(raw, self.model.decimals)
    }

    /// Instance induced by a vertex subset (used for exact sub-solves);
    /// returns the sub-instance and the map from sub-index to original index.
    pub fn sub_instance(&self, vertices: &[usize]) -> Result<(Instance, Vec<usize>)> {
        let pts: Vec<Point> = vertices.iter().map(|&v| self.points[v]).collect();
        let inst = Instance::new(pts, self.model, format!("{}-sub", self.name), self.seed)?;
        Ok((inst, vertices.to_vec()))
    }
}

/// Closed tour: a permutation of the instance vertices, interpreted
/// cyclically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tour {
    order: Vec<usize>,
}

impl Tour {
    pub fn new(order: Vec<usize>, n: usize) -> Result<Self> {
        if order.len() != n || n < 3 {
            return Err(Error::InvalidTour(format!(
                "tour must visit all {n} vertices (n >= 3), got {} entries",
                order.len()
            )));
        }
        let mut seen = vec![false; n];
        for &v in &order {
            if v >= n || seen[v] {
                return Err(Error::InvalidTour(format!("vertex {v} repeated or out of range")));
            }
            seen[v] = true;
        }
        Ok(Tour { order })
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn into_order(self) -> Vec<usize> {
        self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Open path: a sequence of distinct vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    order: Vec<usize>,
}

impl Path {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        if order.is_empty() {
            return Err(Error::InvalidInput("path must contain at least one vertex".into()));
        }
        let mut sorted = order.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("path repeats a vertex".into()));
        }
        Ok(Path { order })
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn into_order(self) -> Vec<usize> {
        self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Cost of a closed ring over any set of distinct vertices (cyclic
/// wrap-around). The per-vertex turn costs are summed in sorted value order,
/// which makes the result exactly invariant under rotation and reversal of
/// the ring.
pub fn cycle_cost(inst: &Instance, ring: &[usize]) -> f64 {
    let m = ring.len();
    debug_assert!(m >= 3);
    let mut turns: Vec<f64> = Vec::with_capacity(m);
    for p in 0..m {
        let prev = ring[(p + m - 1) % m];
        let cur = ring[p];
        let next = ring[(p + 1) % m];
        turns.push(inst.transition_cost(prev, cur, next));
    }
    turns.sort_unstable_by(f64::total_cmp);
    turns.iter().sum()
}

/// Contribution of an open vertex sequence: zero for length <= 2, otherwise
/// the sum over interior transitions.
pub fn path_cost(inst: &Instance, seq: &[usize]) -> f64 {
    if seq.len() <= 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for w in seq.windows(3) {
        total += inst.transition_cost(w[0], w[1], w[2]);
    }
    total
}

pub fn tour_objective(inst: &Instance, tour: &Tour) -> f64 {
    debug_assert_eq!(tour.len(), inst.n());
    cycle_cost(inst, tour.order())
}

pub fn path_objective(inst: &Instance, path: &Path) -> f64 {
    path_cost(inst, path.order())
}

/// Parses the plain-text instance format: `qtsp 1`, the vertex count, then
/// one `x y` pair per line. Lines starting with `#` are ignored.
pub fn parse_instance(text: &str, model: CostModel) -> Result<Instance> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (line, header) = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 1, msg: "empty file".into() })?;
    if header != "qtsp 1" {
        return Err(Error::Parse { line, msg: format!("expected `qtsp 1`, got `{header}`") });
    }

    let (line, count) = lines
        .next()
        .ok_or_else(|| Error::Parse { line: line + 1, msg: "missing vertex count".into() })?;
    let n: usize = count
        .parse()
        .map_err(|_| Error::Parse { line, msg: format!("invalid vertex count `{count}`") })?;

    let mut points = Vec::with_capacity(n);
    let mut last_line = line;
    for _ in 0..n {
        let (line, coords) = lines.next().ok_or_else(|| Error::Parse {
            line: last_line + 1,
            msg: format!("expected {n} coordinate lines"),
        })?;
        last_line = line;
        let mut parts = coords.split_whitespace();
        let parse_num = |tok: Option<&str>| -> Result<f64> {
            let tok = tok.ok_or_else(|| Error::Parse {
                line,
                msg: "expected two coordinates".into(),
            })?;
            tok.parse::<f64>()
                .map_err(|_| Error::Parse { line, msg: format!("invalid number `{tok}`") })
        };
        let x = parse_num(parts.next())?;
        let y = parse_num(parts.next())?;
        if parts.next().is_some() {
            return Err(Error::Parse { line, msg: "trailing tokens after coordinates".into() });
        }
        points.push(Point::new(x, y));
    }
    if let Some((line, extra)) = lines.next() {
        return Err(Error::Parse { line, msg: format!("unexpected trailing line `{extra}`") });
    }
    Instance::new(points, model, "unnamed", None)
}

/// Canonical text form; `parse` then `write` normalizes whitespace and
/// comments away.
pub fn write_instance(inst: &Instance) -> String {
    let mut out = String::with_capacity(16 + inst.n() * 12);
    out.push_str("qtsp 1\n");
    out.push_str(&inst.n().to_string());
    out.push('\n');
    for p in inst.points() {
        out.push_str(&format!("{} {}\n", p.x, p.y));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(points: &[(f64, f64)], model: CostModel) -> Instance {
        let pts = points.iter().map(|&(x, y)| Point::new(x, y)).collect();
        Instance::new(pts, model, "test", None).unwrap()
    }

    // Example 2.1 point set (1-indexed in the source material; 0-indexed here).
    fn lens_example() -> Instance {
        inst(
            &[(0.0, 3.0), (2.0, 1.5), (8.0, 1.5), (10.0, 0.0), (3.5, 1.9), (5.0, 1.7)],
            CostModel::angle().with_scale(1.0),
        )
    }

    #[test]
    fn collinear_forward_motion_is_free() {
        let i = inst(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)], CostModel::angle());
        assert_eq!(i.transition_cost(0, 1, 2), 0.0);
    }

    #[test]
    fn right_angle_turn() {
        let i = inst(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)], CostModel::angle());
        assert!((i.transition_cost(0, 1, 2) - 1570.796326794897).abs() < 1e-9);
    }

    #[test]
    fn angle_distance_cost() {
        let i = inst(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)], CostModel::angle_distance(40.0));
        // 100 * (40 * pi/2 + (1 + 1)/2), computed independently.
        assert!((i.transition_cost(0, 1, 2) - 6383.185307179586).abs() < 1e-9);
    }

    #[test]
    fn transition_cost_symmetry() {
        let i = lens_example();
        for a in 0..6 {
            for b in 0..6 {
                for c in 0..6 {
                    if a != b && b != c {
                        assert_eq!(i.transition_cost(a, b, c), i.transition_cost(c, b, a));
                    }
                }
            }
        }
    }

    #[test]
    fn reversal_cost_allowed() {
        // i == k is a valid transition (turning back), angle pi.
        let i = inst(&[(0.0, 0.0), (1.0, 0.0)], CostModel::angle().with_scale(1.0));
        assert!((i.transition_cost(0, 1, 0) - std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn unit_square_tour_costs_two_pi() {
        let i = inst(
            &[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)],
            CostModel::angle().with_scale(1.0),
        );
        let t = Tour::new(vec![0, 1, 2, 3], 4).unwrap();
        assert!((tour_objective(&i, &t) - 2.0 * std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn lens_example_path_values() {
        let i = lens_example();
        let good = Path::new(vec![0, 1, 5, 2, 3]).unwrap(); // (1,2,6,3,4)
        let worse = Path::new(vec![0, 1, 4, 2, 3]).unwrap(); // (1,2,5,3,4)
        assert!((path_objective(&i, &good) - 1.4201385451382167).abs() < 1e-9);
        assert!((path_objective(&i, &worse) - 1.8082070010812510).abs() < 1e-9);
        // Published rounded values.
        assert!((path_objective(&i, &good) - 1.4201).abs() < 5e-4);
        assert!((path_objective(&i, &worse) - 1.8082).abs() < 5e-4);
    }

    #[test]
    fn short_paths_cost_nothing() {
        let i = lens_example();
        assert_eq!(path_objective(&i, &Path::new(vec![0, 1]).unwrap()), 0.0);
        assert_eq!(path_objective(&i, &Path::new(vec![4]).unwrap()), 0.0);
    }

    #[test]
    fn tour_objective_rotation_reversal_exact() {
        let i = lens_example();
        let base = vec![0, 3, 1, 4, 2, 5];
        let z = cycle_cost(&i, &base);
        for r in 0..base.len() {
            let mut rotated: Vec<usize> = base[r..].to_vec();
            rotated.extend_from_slice(&base[..r]);
            assert_eq!(cycle_cost(&i, &rotated), z);
            rotated.reverse();
            assert_eq!(cycle_cost(&i, &rotated), z);
        }
    }

    #[test]
    fn tour_equals_path_plus_wrap_terms() {
        let i = lens_example();
        let order = vec![0, 2, 4, 1, 5, 3];
        let n = order.len();
        let wrap = i.transition_cost(order[n - 2], order[n - 1], order[0])
            + i.transition_cost(order[n - 1], order[0], order[1]);
        assert!((cycle_cost(&i, &order) - (path_cost(&i, &order) + wrap)).abs() < 1e-9);
    }

    #[test]
    fn duplicate_points_rejected() {
        let pts = vec![Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(0.0, 0.0)];
        match Instance::new(pts, CostModel::angle(), "dup", None) {
            Err(Error::DuplicatePoint { a: 0, b: 2 }) => {}
            other => panic!("expected duplicate-point error, got {other:?}"),
        }
    }

    #[test]
    fn tour_validation() {
        assert!(Tour::new(vec![0, 1, 2], 3).is_ok());
        assert!(Tour::new(vec![0, 1], 2).is_err());
        assert!(Tour::new(vec![0, 1, 1], 3).is_err());
        assert!(Tour::new(vec![0, 1, 3], 3).is_err());
    }

    #[test]
    fn parse_basic() {
        let text = "# demo\nqtsp 1\n3\n0 0\n1 0\n# interior comment\n2 1\n";
        let i = parse_instance(text, CostModel::angle()).unwrap();
        assert_eq!(i.n(), 3);
        assert_eq!(i.point(2), Point::new(2.0, 1.0));
    }

    #[test]
    fn parse_rejects_duplicates_and_garbage() {
        let dup = "qtsp 1\n2\n1 2\n1 2\n";
        assert!(matches!(
            parse_instance(dup, CostModel::angle()),
            Err(Error::DuplicatePoint { .. })
        ));
        let bad = "qtsp 1\n2\n1 2\nx y\n";
        match parse_instance(bad, CostModel::angle()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(parse_instance("qtsp 2\n1\n0 0\n", CostModel::angle()).is_err());
    }

    #[test]
    fn write_parse_roundtrip_normalizes() {
        let text = "qtsp 1\n# comment\n4\n0 0\n500 0\n  500   500\n0 500\n";
        let inst = parse_instance(text, CostModel::angle()).unwrap();
        let canonical = write_instance(&inst);
        let reparsed = parse_instance(&canonical, CostModel::angle()).unwrap();
        assert_eq!(write_instance(&reparsed), canonical);
        assert_eq!(reparsed.points(), inst.points());
    }
}

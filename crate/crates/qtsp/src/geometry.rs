//! Convex hulls and the lens region between two vertices.

use crate::core::{Instance, Point};
use crate::error::{Error, Result};

/// Cross product of (b - a) x (c - a); positive for a counter-clockwise turn.
fn cross(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Strict convex hull by monotone chain: counter-clockwise ring of extreme
/// points, collinear boundary points excluded. Inputs of one or two points
/// are returned as-is. The returned values are indices into `points`.
pub fn convex_hull(points: &[Point]) -> Vec<usize> {
    let n = points.len();
    if n <= 2 {
        return (0..n).collect();
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_unstable_by(|&a, &b| {
        points[a]
            .x
            .total_cmp(&points[b].x)
            .then(points[a].y.total_cmp(&points[b].y))
    });

    let mut hull: Vec<usize> = Vec::with_capacity(n + 1);
    // lower hull
    for &p in &idx {
        while hull.len() >= 2
            && cross(points[hull[hull.len() - 2]], points[hull[hull.len() - 1]], points[p]) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    // upper hull
    let lower_len = hull.len() + 1;
    for &p in idx.iter().rev().skip(1) {
        while hull.len() >= lower_len
            && cross(points[hull[hull.len() - 2]], points[hull[hull.len() - 1]], points[p]) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Onion layering: the hull rings peeled from an instance, outermost first,
/// plus the vertices left over once at most `stop_at` remain (or once the
/// remaining points are collinear).
#[derive(Debug, Clone)]
pub struct HullLayering {
    pub layers: Vec<Vec<usize>>,
    pub remainder: Vec<usize>,
}

/// Repeatedly removes the convex hull of the remaining vertices; stops as
/// soon as at most `stop_at` vertices remain.
pub fn peel_hulls(inst: &Instance, stop_at: usize) -> Result<HullLayering> {
    if stop_at < 2 {
        return Err(Error::Parameter(format!("stop_at must be >= 2, got {stop_at}")));
    }
    let mut remaining: Vec<usize> = (0..inst.n()).collect();
    let mut layers = Vec::new();
    while remaining.len() > stop_at {
        let pts: Vec<Point> = remaining.iter().map(|&v| inst.point(v)).collect();
        let ring = convex_hull(&pts);
        if ring.len() < 3 {
            break; // collinear leftovers join the remainder
        }
        let ring: Vec<usize> = ring.into_iter().map(|i| remaining[i]).collect();
        let on_ring: std::collections::HashSet<usize> = ring.iter().copied().collect();
        remaining.retain(|v| !on_ring.contains(v));
        layers.push(ring);
    }
    Ok(HullLayering { layers, remainder: remaining })
}

/// Lens between two vertices: the intersection of the two congruent disks
/// whose boundary circles pass through both endpoints, with tangent-chord
/// angle `gamma`.
#[derive(Debug, Clone, Copy)]
pub struct Lens {
    pub p: Point,
    pub q: Point,
    pub gamma: f64,
    pub radius: f64,
    pub centers: [Point; 2],
}

/// Builds the lens on segment `pq` with thickness `gamma` in (0, pi/2):
/// radius d / (2 sin gamma), centers on the perpendicular bisector at
/// distance d / (2 tan gamma) from the midpoint.
pub fn lens_region(p: Point, q: Point, gamma: f64) -> Result<Lens> {
    if !(gamma > 0.0 && gamma < std::f64::consts::FRAC_PI_2) {
        return Err(Error::Parameter(format!("lens gamma must lie in (0, pi/2), got {gamma}")));
    }
    if p == q {
        return Err(Error::Parameter("lens endpoints coincide".into()));
    }
    let d = p.distance(q);
    let radius = d / (2.0 * gamma.sin());
    let offset = d / (2.0 * gamma.tan());
    let mid = Point::new(0.5 * (p.x + q.x), 0.5 * (p.y + q.y));
    let (nx, ny) = (-(q.y - p.y) / d, (q.x - p.x) / d);
    let centers = [
        Point::new(mid.x + offset * nx, mid.y + offset * ny),
        Point::new(mid.x - offset * nx, mid.y - offset * ny),
    ];
    Ok(Lens { p, q, gamma, radius, centers })
}

impl Lens {
    /// Closed containment in both disks; the endpoints themselves are
    /// excluded so a vertex never inserts into its own edge.
    pub fn contains(&self, r: Point) -> bool {
        if r == self.p || r == self.q {
            return false;
        }
        let tol = 1e-9 * self.radius.max(1.0);
        self.centers
            .iter()
            .all(|&c| c.distance(r) <= self.radius + tol)
    }
}

/// Upper bound on the extra Euclidean length from detouring through any lens
/// point: d (1/cos gamma - 1), the closed form of
/// d (sqrt(2 / (1 - cos(pi - 2 gamma))) - 1).
pub fn detour_bound(d: f64, gamma: f64) -> f64 {
    d * (1.0 / gamma.cos() - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::CostModel;
    use crate::rng::SplitMix64;
    use proptest::prelude::*;

    fn pts(coords: &[(f64, f64)]) -> Vec<Point> {
        coords.iter().map(|&(x, y)| Point::new(x, y)).collect()
    }

    #[test]
    fn hull_of_square_plus_center() {
        let p = pts(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5, 0.5)]);
        let mut hull = convex_hull(&p);
        assert_eq!(hull.len(), 4);
        hull.sort_unstable();
        assert_eq!(hull, vec![0, 1, 2, 3]);
    }

    #[test]
    fn hull_of_triangle_is_everything() {
        let p = pts(&[(0.0, 0.0), (2.0, 0.0), (1.0, 1.0)]);
        assert_eq!(convex_hull(&p).len(), 3);
    }

    #[test]
    fn hull_is_ccw_and_strict() {
        // collinear midpoint on the bottom edge must be excluded
        let p = pts(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)]);
        let hull = convex_hull(&p);
        assert_eq!(hull.len(), 4);
        assert!(!hull.contains(&1));
        for w in 0..hull.len() {
            let a = p[hull[w]];
            let b = p[hull[(w + 1) % hull.len()]];
            let c = p[hull[(w + 2) % hull.len()]];
            assert!(cross(a, b, c) > 0.0, "hull corner not strictly convex");
        }
    }

    #[test]
    fn hull_tiny_inputs() {
        assert_eq!(convex_hull(&pts(&[(3.0, 4.0)])), vec![0]);
        assert_eq!(convex_hull(&pts(&[(3.0, 4.0), (0.0, 0.0)])), vec![0, 1]);
    }

    #[test]
    fn hull_interior_points_verified_by_point_in_polygon() {
        let mut rng = SplitMix64::new(11);
        let mut coords = Vec::new();
        let mut seen = std::collections::HashSet::new();
        while coords.len() < 50 {
            let x = rng.next_below(1000) as f64;
            let y = rng.next_below(1000) as f64;
            if seen.insert((x as i64, y as i64)) {
                coords.push(Point::new(x, y));
            }
        }
        let hull = convex_hull(&coords);
        let on_hull: std::collections::HashSet<usize> = hull.iter().copied().collect();
        for (i, &pt) in coords.iter().enumerate() {
            if on_hull.contains(&i) {
                continue;
            }
            // every non-hull point must lie weakly inside every hull edge
            for w in 0..hull.len() {
                let a = coords[hull[w]];
                let b = coords[hull[(w + 1) % hull.len()]];
                assert!(cross(a, b, pt) >= 0.0, "point {i} outside hull edge");
            }
        }
    }

    #[test]
    fn peel_square_with_center() {
        let inst = Instance::new(
            pts(&[(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0), (2.0, 2.0)]),
            CostModel::angle(),
            "t",
            None,
        )
        .unwrap();
        let layering = peel_hulls(&inst, 2).unwrap();
        assert_eq!(layering.layers.len(), 1);
        assert_eq!(layering.layers[0].len(), 4);
        assert_eq!(layering.remainder, vec![4]);
    }

    #[test]
    fn peel_stops_immediately_when_small() {
        let inst = crate::bench::generate_instance(15, 3, crate::core::ModelKind::Angle).unwrap();
        let layering = peel_hulls(&inst, 20).unwrap();
        assert!(layering.layers.is_empty());
        assert_eq!(layering.remainder.len(), 15);
    }

    #[test]
    fn peel_partitions_vertices() {
        let inst = crate::bench::generate_instance(30, 9, crate::core::ModelKind::Angle).unwrap();
        let layering = peel_hulls(&inst, 2).unwrap();
        let mut all: Vec<usize> = layering.layers.iter().flatten().copied().collect();
        all.extend_from_slice(&layering.remainder);
        all.sort_unstable();
        assert_eq!(all, (0..30).collect::<Vec<_>>());
    }

    #[test]
    fn lens_radius_and_offset() {
        let p = Point::new(0.0, 0.0);
        let q = Point::new(2.0, 0.0);
        let lens30 = lens_region(p, q, 30f64.to_radians()).unwrap();
        assert!((lens30.radius - 2.0).abs() < 1e-12);
        let lens45 = lens_region(p, q, 45f64.to_radians()).unwrap();
        assert!((lens45.centers[0].y.abs() - 1.0).abs() < 1e-12);
        assert!((lens45.centers[1].y.abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lens_rejects_bad_gamma() {
        let p = Point::new(0.0, 0.0);
        let q = Point::new(1.0, 0.0);
        assert!(lens_region(p, q, 0.0).is_err());
        assert!(lens_region(p, q, std::f64::consts::FRAC_PI_2).is_err());
    }

    #[test]
    fn lens_example_memberships() {
        // Example layout from the lens walkthrough: lens on {2,3} holds both
        // free vertices, the follow-up lens on {6,3} is empty.
        let v2 = Point::new(2.0, 1.5);
        let v3 = Point::new(8.0, 1.5);
        let v5 = Point::new(3.5, 1.9);
        let v6 = Point::new(5.0, 1.7);
        let g = 30f64.to_radians();
        let lens = lens_region(v2, v3, g).unwrap();
        assert!(lens.contains(v5));
        assert!(lens.contains(v6));
        let lens2 = lens_region(v6, v3, g).unwrap();
        assert!(!lens2.contains(v5));
        let mid = Point::new(5.0, 1.5);
        assert!(lens.contains(mid));
    }

    #[test]
    fn detour_bound_values() {
        assert!(detour_bound(1.0, 1e-9) < 1e-8);
        assert!((detour_bound(3.0, 60f64.to_radians()) - 3.0).abs() < 1e-12);
        // algebraic identity with the trigonometric form
        for g_deg in [10.0, 25.0, 40.0, 70.0] {
            let g: f64 = (g_deg as f64).to_radians();
            let alt = (2.0 / (1.0 - (std::f64::consts::PI - 2.0 * g).cos())).sqrt() - 1.0;
            assert!((detour_bound(5.0, g) - 5.0 * alt).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn lens_centers_pass_through_endpoints(
            px in -100.0..100.0f64, py in -100.0..100.0f64,
            qx in -100.0..100.0f64, qy in -100.0..100.0f64,
            gamma in 0.05..1.5f64,
        ) {
            let p = Point::new(px, py);
            let q = Point::new(qx, qy);
            prop_assume!(p.distance(q) > 1e-6);
            let lens = lens_region(p, q, gamma).unwrap();
            for c in lens.centers {
                prop_assert!((c.distance(p) - lens.radius).abs() < 1e-9 * lens.radius.max(1.0));
                prop_assert!((c.distance(q) - lens.radius).abs() < 1e-9 * lens.radius.max(1.0));
            }
        }

        #[test]
        fn lens_membership_symmetric(
            px in -50.0..50.0f64, py in -50.0..50.0f64,
            qx in -50.0..50.0f64, qy in -50.0..50.0f64,
            rx in -60.0..60.0f64, ry in -60.0..60.0f64,
            gamma in 0.05..1.5f64,
        ) {
            let p = Point::new(px, py);
            let q = Point::new(qx, qy);
            prop_assume!(p.distance(q) > 1e-6);
            let r = Point::new(rx, ry);
            let a = lens_region(p, q, gamma).unwrap();
            let b = lens_region(q, p, gamma).unwrap();
            prop_assert_eq!(a.contains(r), b.contains(r));
        }

        #[test]
        fn detour_of_lens_points_is_bounded(
            qx in 0.5..80.0f64,
            gamma in 0.05..1.5f64,
            seed in 0u64..1_000,
        ) {
            let p = Point::new(0.0, 0.0);
            let q = Point::new(qx, 0.0);
            let lens = lens_region(p, q, gamma).unwrap();
            let bound = detour_bound(qx, gamma);
            let mut rng = SplitMix64::new(seed);
            // rejection-sample a few interior points from the bounding box
            let mut found = 0;
            for _ in 0..200 {
                let x = rng.next_f64() * qx;
                let h = lens.radius - qx / (2.0 * gamma.tan());
                let y = (rng.next_f64() * 2.0 - 1.0) * h;
                let r = Point::new(x, y);
                if lens.contains(r) {
                    found += 1;
                    let detour = p.distance(r) + r.distance(q) - qx;
                    prop_assert!(detour <= bound + 1e-7 * qx.max(1.0));
                }
            }
            prop_assert!(found > 0, "sampling produced no lens points");
        }
    }
}

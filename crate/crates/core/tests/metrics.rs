use std::sync::OnceLock;

use capdual::geometry::*;
use capdual::mesh::triangulate;
use capdual::metrics::*;
use capdual::{Error, SolverConfig, TriMesh};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn disk() -> JordanPolygon {
    regular_polygon(256, 1.0, Point2::ORIGIN).unwrap()
}

fn disk_mesh_fine() -> &'static TriMesh {
    static M: OnceLock<TriMesh> = OnceLock::new();
    M.get_or_init(|| triangulate(&disk(), 0.01).unwrap())
}

fn square_mesh() -> &'static TriMesh {
    static M: OnceLock<TriMesh> = OnceLock::new();
    M.get_or_init(|| triangulate(&unit_square(), 0.04).unwrap())
}

/// `∫₀^x (1 − s)^e ds` for the radial path in the unit disk.
fn radial(e: f64, x: f64) -> f64 {
    if e == -1.0 {
        -(1.0 - x).ln()
    } else {
        (1.0 - (1.0 - x).powf(1.0 + e)) / (1.0 + e)
    }
}

#[test]
fn subhyperbolic_radial_oracle() {
    let g = build_graph(&disk(), disk_mesh_fine(), -0.5).unwrap();
    let r = subhyperbolic_distance(&g, Point2::ORIGIN, Point2::new(0.9, 0.0)).unwrap();
    let exact = radial(-0.5, 0.9);
    assert!(((1.0 - 0.1f64.sqrt()) / 0.5 - exact).abs() < 1e-12);
    assert!((r.weighted_length / exact - 1.0).abs() <= 0.05, "{} vs {exact}", r.weighted_length);
    assert_eq!(r.path.first(), Point2::ORIGIN);
    assert_eq!(r.path.last(), Point2::new(0.9, 0.0));
}

#[test]
fn quasihyperbolic_radial_oracle() {
    let g = build_graph(&disk(), disk_mesh_fine(), -1.0).unwrap();
    let r = quasihyperbolic_distance(&g, Point2::ORIGIN, Point2::new(0.9, 0.0)).unwrap();
    let exact = 10f64.ln();
    assert!((r.weighted_length / exact - 1.0).abs() <= 0.05);
    let back = quasihyperbolic_distance(&g, Point2::new(0.9, 0.0), Point2::ORIGIN).unwrap();
    assert!((back.weighted_length / r.weighted_length - 1.0).abs() < 1e-6);
    assert_eq!(back.graph_length, r.graph_length);
}

#[test]
fn quasihyperbolic_requires_exponent_minus_one() {
    let g = build_graph(&unit_square(), square_mesh(), -0.5).unwrap();
    assert!(matches!(
        quasihyperbolic_distance(&g, Point2::new(0.3, 0.3), Point2::new(0.6, 0.6)),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn quasihyperbolic_grows_toward_boundary() {
    let d = disk();
    let m = triangulate(&d, 0.02).unwrap();
    let g = build_graph(&d, &m, -1.0).unwrap();
    for angle in [0.3f64, 2.0, 4.4] {
        let u = Point2::new(angle.cos(), angle.sin());
        let vals: Vec<f64> = [0.3, 0.6, 0.8, 0.9]
            .iter()
            .map(|&r| quasihyperbolic_distance(&g, Point2::ORIGIN, u * r).unwrap().weighted_length)
            .collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]), "{vals:?}");
    }
}

#[test]
fn euclidean_paths_in_square_are_straight() {
    let g = build_graph(&unit_square(), square_mesh(), 0.0).unwrap();
    for (a, b) in [((0.1, 0.1), (0.9, 0.9)), ((0.2, 0.1), (0.35, 0.8)), ((0.05, 0.6), (0.93, 0.41))] {
        let (a, b) = (Point2::new(a.0, a.1), Point2::new(b.0, b.1));
        let r = subhyperbolic_distance(&g, a, b).unwrap();
        assert!((r.weighted_length / a.dist(b) - 1.0).abs() <= 0.03);
        assert_eq!(r.weighted_length, r.euclid_length);
    }
}

#[test]
fn coincident_points_have_zero_distance() {
    let g = build_graph(&unit_square(), square_mesh(), -0.5).unwrap();
    let z = Point2::new(0.4, 0.7);
    let r = subhyperbolic_distance(&g, z, z).unwrap();
    assert_eq!(r.weighted_length, 0.0);
    assert_eq!(r.snap, [0.0, 0.0]);
}

#[test]
fn graph_structure() {
    let g = build_graph(&unit_square(), square_mesh(), -0.5).unwrap();
    assert!(g.warning().is_none());
    for i in 0..g.nodes().len() {
        for (j, w) in g.edges_of(i) {
            assert!(w.is_finite() && w > 0.0);
            let back = g.edges_of(j).find(|&(k, _)| k == i).expect("symmetric adjacency").1;
            assert_eq!(back, w);
        }
    }
    // connectivity: every node reachable from node 0
    let last = g.nodes().len() - 1;
    assert!(g.node_distance(0, last).unwrap().is_finite());
    assert!(build_graph(&unit_square(), square_mesh(), -2.0).unwrap().warning().is_some());
}

#[test]
fn graph_distance_is_a_metric() {
    let g = build_graph(&l_hexagon(), &triangulate(&l_hexagon(), 0.05).unwrap(), -0.5).unwrap();
    let n = g.nodes().len();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..15 {
        let (a, b, c) = (rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n));
        let ab = g.node_distance(a, b).unwrap();
        assert_eq!(ab, g.node_distance(b, a).unwrap());
        let ac = g.node_distance(a, c).unwrap();
        let bc = g.node_distance(b, c).unwrap();
        assert!(ac <= ab + bc + 1e-9);
    }
}

#[test]
fn shortcuts_never_lengthen() {
    let (d, m) = (unit_square(), square_mesh());
    let with = build_graph(&d, m, -0.5).unwrap();
    let without = build_graph_with(&d, m, -0.5, false).unwrap();
    assert!(with.num_edges() > without.num_edges());
    let n = with.nodes().len();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        assert!(with.node_distance(a, b).unwrap() <= without.node_distance(a, b).unwrap());
    }
}

#[test]
fn more_negative_exponent_is_longer() {
    let (d, m) = (unit_square(), square_mesh());
    let g1 = build_graph(&d, m, -0.75).unwrap();
    let g2 = build_graph(&d, m, -0.25).unwrap();
    let n = g1.nodes().len();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        assert!(g1.node_distance(a, b).unwrap() >= g2.node_distance(a, b).unwrap());
    }
}

#[test]
fn graph_and_quadrature_agree() {
    let d = disk();
    let m = triangulate(&d, 0.04).unwrap();
    for e in [-0.5, -1.0] {
        let g = build_graph(&d, &m, e).unwrap();
        let r = subhyperbolic_distance(&g, Point2::new(-0.3, 0.2), Point2::new(0.7, -0.1)).unwrap();
        assert!((r.graph_length / r.weighted_length - 1.0).abs() <= 0.02, "{} vs {}", r.graph_length, r.weighted_length);
    }
}

#[test]
fn snapping_and_domain_checks() {
    let g = build_graph(&unit_square(), square_mesh(), -0.5).unwrap();
    assert!(subhyperbolic_distance(&g, Point2::new(1.2, 0.5), Point2::new(0.5, 0.5)).is_err());
    let r = subhyperbolic_distance(&g, Point2::new(0.31, 0.52), Point2::new(0.77, 0.18)).unwrap();
    assert!(r.snap.iter().all(|&s| s <= 2.0 * g.h()));
}

#[test]
fn csv_rows() {
    let g = build_graph(&unit_square(), square_mesh(), -0.5).unwrap();
    let r = subhyperbolic_distance(&g, Point2::new(0.3, 0.5), Point2::new(0.7, 0.5)).unwrap();
    let csv = to_csv(&[r.row()]).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "z1_x,z1_y,z2_x,z2_y,exponent,weighted_length,euclid_length,graph_length,snap1,snap2"
    );
    assert!(lines.next().unwrap().starts_with("0.3,0.5,0.7,0.5,-0.5,"));
}

#[test]
fn capacity_metric_candidates_agree_on_disk() {
    let cfg = SolverConfig::new(1.5);
    let m = capacity_metric(&disk(), Point2::new(-0.4, 0.0), Point2::new(0.4, 0.0), &cfg, 0.04).unwrap();
    let vals: Vec<f64> = m.candidates.iter().filter_map(|c| c.capacity.as_ref().map(|r| r.value)).collect();
    assert_eq!(vals.len(), 3);
    let (lo, hi) = vals.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    assert!(hi / lo <= 2.0, "{vals:?}");
    assert_eq!(m.value, lo);
    assert!(m.converged);
}

#[test]
fn capacity_metric_of_coincident_points() {
    let cfg = SolverConfig::new(1.5);
    let z = Point2::new(0.5, 0.5);
    let m = capacity_metric(&unit_square(), z, z, &cfg, 0.04).unwrap();
    assert_eq!(m.kind, Candidate::Point);
    let tiny = Polyline::segment(Point2::new(0.4995, 0.5), Point2::new(0.5005, 0.5)).unwrap();
    let seg = capdual::variational::curve_capacity(&unit_square(), &tiny, &cfg, 0.04).unwrap();
    assert!((m.value / seg.value - 1.0).abs() <= 0.1, "{} vs {}", m.value, seg.value);
}

#[test]
fn capacity_metric_skips_exiting_segment() {
    let cfg = SolverConfig::new(1.5);
    let l = l_hexagon();
    let (a, b) = (Point2::new(1.6, 0.5), Point2::new(0.5, 1.6));
    assert!(!l.segment_inside(a, b));
    let m = capacity_metric(&l, a, b, &cfg, 0.05).unwrap();
    assert!(m.candidates.iter().all(|c| c.kind != Candidate::Segment));
    assert_ne!(m.kind, Candidate::Segment);
    assert!(m.value > 0.0 && l.polyline_inside(&m.curve));
}

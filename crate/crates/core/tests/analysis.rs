use std::sync::OnceLock;

use capdual::analysis::*;
use capdual::confmap::*;
use capdual::geometry::*;
use capdual::metrics::to_csv;
use capdual::svg::Scene;
use capdual::{Error, SolverConfig};

fn disk() -> JordanPolygon {
    regular_polygon(256, 1.0, Point2::ORIGIN).unwrap()
}

/// Disk map graded toward both ends of the horizontal diameter, with that
/// diameter as a boundary geodesic.
fn disk_diameter() -> &'static (RiemannMap, Geodesic) {
    static M: OnceLock<(RiemannMap, Geodesic)> = OnceLock::new();
    M.get_or_init(|| {
        let d = disk();
        let per = d.perimeter();
        let ends = [d.point_at(0.0).0, d.point_at(0.5 * per).0];
        let map = build_map_with(&d, Point2::ORIGIN, &MapOptions::new(0.04).with_focus(ends)).unwrap();
        let g = boundary_geodesic_full(&map, 0.0, 0.5 * per, BOUNDARY_GEODESIC_SAMPLES).unwrap();
        (map, g)
    })
}

#[test]
fn duality_square_product_near_one() {
    let sq = unit_square();
    let quad = split_boundary(&sq, [0.0, 1.0, 2.0, 3.0]).unwrap();
    let r = duality_check(&sq, &quad, 1.5, 0.05).unwrap();
    assert!(r.extrapolated && r.converged);
    assert_eq!(r.hs, vec![0.1, 0.05]);
    assert!(r.deviation < 0.03, "product {}", r.product);
    assert_eq!(r.rows().len(), 3);
}

#[test]
fn duality_rectangle_capacities() {
    // opposite sides at distance 2 and 1/2 per unit width
    let d = rectangle(2.0, 1.0).unwrap();
    let quad = split_boundary(&d, [2.0, 3.0, 5.0, 6.0]).unwrap();
    let p = 1.25;
    let r = duality_check(&d, &quad, p, 0.05).unwrap();
    let q = p / (p - 1.0);
    let exact_13 = 2f64.powf(1.0 - p);
    let exact_24 = 2.0 * 1f64.powf(1.0 - q);
    assert!((r.cap_13 / exact_13 - 1.0).abs() < 0.02, "{} vs {exact_13}", r.cap_13);
    assert!((r.cap_24 / exact_24 - 1.0).abs() < 0.02, "{} vs {exact_24}", r.cap_24);
    assert!(r.deviation < 0.05);
}

#[test]
fn duality_p2_is_self_dual() {
    let sq = unit_square();
    let quad = split_boundary(&sq, [0.0, 1.0, 2.0, 3.0]).unwrap();
    let r = duality_check_with(&sq, &quad, &SolverConfig::new(2.0), &[0.1]).unwrap();
    assert_eq!(r.q, 2.0);
    assert!(!r.extrapolated);
    // on the square both condensers are the same up to a rotation
    assert!((r.cap_13_by_h[0] / r.cap_24_by_h[0] - 1.0).abs() < 0.02);
    assert!(r.deviation < 0.02);
}

#[test]
fn duality_product_is_scale_invariant() {
    let sq = unit_square();
    let big = sq.scaled(3.0).unwrap();
    let cfg = SolverConfig::new(1.5);
    let quad = split_boundary(&sq, [0.0, 1.0, 2.0, 3.0]).unwrap();
    let quad_big = split_boundary(&big, [0.0, 3.0, 6.0, 9.0]).unwrap();
    let a = duality_check_with(&sq, &quad, &cfg, &[0.1]).unwrap();
    let b = duality_check_with(&big, &quad_big, &cfg, &[0.3]).unwrap();
    assert!((a.product - b.product).abs() < 1e-3 * a.product, "{} vs {}", a.product, b.product);
    // individual capacities carry the factor 3^{2-p}
    let s = 3f64.powf(0.5);
    assert!((b.cap_13 / a.cap_13 / s - 1.0).abs() < 1e-3);
}

#[test]
fn duality_rejects_bad_mesh_sizes() {
    let sq = unit_square();
    let quad = split_boundary(&sq, [0.0, 1.0, 2.0, 3.0]).unwrap();
    let r = duality_check_with(&sq, &quad, &SolverConfig::new(1.5), &[0.1, 0.07]);
    assert!(matches!(r, Err(Error::Precondition(_))));
}

#[test]
fn comparability_single_pair() {
    let r = comparability_report(&disk(), Point2::new(-0.3, 0.1), Point2::new(0.4, -0.2), 1.5, 0.08).unwrap();
    assert!(r.quantities().iter().all(|v| v.is_finite() && *v > 0.0));
    assert!(r.max_ratio >= 1.0 && r.max_ratio <= 10.0, "{}", r.max_ratio);
    assert!(r.d_cap <= r.cap_geodesic * (1.0 + 1e-12));
}

#[test]
fn comparability_preconditions() {
    let z = Point2::new(0.1, 0.1);
    assert!(matches!(comparability_report(&disk(), z, z, 1.5, 0.1), Err(Error::Precondition(_))));
    let w = Point2::new(-0.2, 0.3);
    assert!(matches!(comparability_report(&disk(), z, w, 2.0, 0.1), Err(Error::Precondition(_))));
    assert!(matches!(comparability_report(&disk(), z, w, 1.0, 0.1), Err(Error::Precondition(_))));
}

#[test]
fn comparability_batch_is_deterministic() {
    let sq = unit_square();
    let a = comparability_batch(&sq, 1.5, 0.04, 3, 11).unwrap();
    let b = comparability_batch(&sq, 1.5, 0.04, 3, 11).unwrap();
    assert_eq!(to_csv(&a.reports).unwrap(), to_csv(&b.reports).unwrap());
    assert_eq!(a.reports.len(), 3);
}

#[test]
fn sampled_pairs_respect_margin_and_separation() {
    let sq = unit_square();
    let pairs = sample_pairs(&sq, 40, 5, 0.1, 0.2).unwrap();
    assert_eq!(pairs, sample_pairs(&sq, 40, 5, 0.1, 0.2).unwrap());
    for (a, b) in pairs {
        assert!(sq.dist_to_boundary(a) >= 0.1 && sq.dist_to_boundary(b) >= 0.1);
        assert!(a.dist(b) >= 0.2);
    }
}

#[test]
fn disk_diameter_annuli_ratios() {
    let (map, g) = disk_diameter();
    let r = annuli_report(map, g, 5).unwrap();
    assert!(r.truncated.is_empty());
    assert_eq!(r.records.len(), 10);
    for rec in &r.records {
        for x in rec.ratios() {
            let x = x.unwrap();
            assert!((0.125..=8.0).contains(&x), "{rec:?}");
        }
        // the diameter crosses the half-open ring radially: ℓ halves per scale
        let halving = rec.length / rec.length_next.unwrap();
        assert!((halving - 2.0).abs() < 0.05, "{rec:?}");
    }
}

#[test]
fn annulus_pieces_need_boundary_geodesic() {
    let (map, _) = disk_diameter();
    let g = geodesic(map, Point2::new(-0.5, 0.0), Point2::new(0.5, 0.0), 64).unwrap();
    assert!(matches!(annulus_pieces(map, &g, 0, 1), Err(Error::Precondition(_))));
}

#[test]
fn annulus_lower_bound_is_stable() {
    let (map, g) = disk_diameter();
    let a = annulus_lower_bound_check(map, g, 0, 2, 1.5, 0.1).unwrap();
    let b = annulus_lower_bound_check(map, g, 0, 2, 1.5, 0.05).unwrap();
    assert!(a.converged && b.converged);
    for e in [&a, &b] {
        assert!((0.05..=50.0).contains(&e.ratio), "{e:?}");
    }
    assert!((a.ratio / b.ratio - 1.0).abs() < 0.3);
}

#[test]
fn curve_condition_square_is_stable() {
    let sq = unit_square();
    let a = curve_condition_check(&sq, 3.0, 20, 7, 0.08).unwrap();
    let b = curve_condition_check(&sq, 3.0, 20, 7, 0.04).unwrap();
    assert!(a.sup_ratio.is_finite() && a.sup_ratio > 0.0);
    assert!((a.sup_ratio / b.sup_ratio - 1.0).abs() < 0.25);
    // 20 interior pairs and all pairs of the 4 edge midpoints
    assert_eq!(a.pairs.len(), 26);
    assert!(a.exponent_identity_error < 1e-12);
    assert_eq!(a.exponent, -0.5);
}

#[test]
fn curve_condition_literal_exponent_flag() {
    let sq = unit_square();
    let opts = CurveConditionOptions { literal_exponent: true, boundary_pairs: false };
    let r = curve_condition_check_with(&sq, 3.0, 5, 7, 0.08, opts).unwrap();
    assert!(r.literal_exponent);
    assert_eq!(r.exponent, 0.5);
    assert_eq!(r.pairs.len(), 5);
    assert!(matches!(curve_condition_check(&sq, 2.0, 5, 7, 0.08), Err(Error::Precondition(_))));
}

#[test]
fn curve_condition_grows_with_spike_aspect() {
    let sups: Vec<f64> = [10.0, 30.0]
        .iter()
        .map(|a| curve_condition_check(&notched_square(0.5 / a, 0.5).unwrap(), 3.0, 10, 7, 0.04).unwrap().sup_ratio)
        .collect();
    assert!(sups[1] > sups[0], "{sups:?}");
}

#[test]
fn gehring_osgood_on_disk() {
    let r = gehring_osgood_check(&disk(), 30, 3, 0.08).unwrap();
    assert_eq!(r.excluded + r.pairs.len(), r.requested);
    assert!(!r.pairs.is_empty());
    assert!(r.sup_ratio <= 20.0, "{}", r.sup_ratio);
    for p in &r.pairs {
        assert!((p.ratio - p.quasihyperbolic_length / p.log_term).abs() < 1e-12);
    }
}

#[test]
fn svg_scene_is_deterministic() {
    let (map, g) = disk_diameter();
    let ann = conformal_annulus(map, 0.0, 2).unwrap();
    let build = || {
        let mut s = Scene::new();
        s.domain(map.domain()).region(map.mesh(), &ann.triangles).curve(&g.path).point(Point2::ORIGIN);
        s.render()
    };
    let a = build();
    assert_eq!(a, build());
    assert!(a.starts_with("<svg") && a.trim_end().ends_with("</svg>"));
    assert_eq!(a.matches("<polyline").count(), 1);
    let mut disk_view = Scene::new();
    disk_view.unit_circle().disk_curve(&g.disk);
    assert!(disk_view.render().contains("<circle"));
}

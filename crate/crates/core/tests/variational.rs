use std::f64::consts::PI;
use std::sync::Arc;

use capdual::geometry::{annular_sector, rectangle, regular_polygon, unit_square, BoundaryArc, Point2, Polyline};
use capdual::mesh::{tag_arc, triangulate, NodeSet};
use capdual::variational::*;
use capdual::Error;

/// `2π (∫_r^R ρ^{−1/(p−1)} dρ)^{1−p}` by composite Simpson.
fn radial_oracle(p: f64, r: f64, big_r: f64) -> f64 {
    let n = 20_000;
    let f = |rho: f64| rho.powf(-1.0 / (p - 1.0));
    let step = (big_r - r) / n as f64;
    let mut s = f(r) + f(big_r);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(r + k as f64 * step);
    }
    2.0 * PI * (s * step / 3.0).powf(1.0 - p)
}

fn sides(l: f64) -> (capdual::JordanPolygon, BoundaryArc, BoundaryArc) {
    let d = rectangle(l, 1.0).unwrap();
    let per = d.perimeter();
    let left = BoundaryArc::new(&d, per - 1.0, 0.0).unwrap();
    let right = BoundaryArc::new(&d, l, l + 1.0).unwrap();
    (d, left, right)
}

#[test]
fn energy_of_linear_fields() {
    let m = Arc::new(triangulate(&unit_square(), 0.2).unwrap());
    let u = ScalarField::new(m.clone(), m.nodes().iter().map(|z| z.x).collect()).unwrap();
    assert!((p_energy(&u, 1.5, 0.0) - 1.0).abs() < 1e-12);
    let c = ScalarField::new(m.clone(), vec![0.3; m.num_nodes()]).unwrap();
    assert_eq!(p_energy(&c, 2.7, 0.0), 0.0);

    let m = Arc::new(triangulate(&rectangle(2.0, 1.0).unwrap(), 0.2).unwrap());
    let u = ScalarField::new(m.clone(), m.nodes().iter().map(|z| 0.5 * z.x).collect()).unwrap();
    assert!((p_energy(&u, 1.5, 0.0) - 2.0 * 0.5f64.powf(1.5)).abs() < 1e-12);
}

#[test]
fn field_rejects_bad_values() {
    let m = Arc::new(triangulate(&unit_square(), 0.5).unwrap());
    assert!(ScalarField::new(m.clone(), vec![0.0; 2]).is_err());
    let mut v = vec![0.0; m.num_nodes()];
    v[0] = f64::NAN;
    assert!(ScalarField::new(m, v).is_err());
}

#[test]
fn rectangle_capacity_is_linear_profile() {
    for (l, p) in [(2.0, 1.5), (2.0, 3.0)] {
        let (d, e, f) = sides(l);
        let r = capacity(&d, &e, &f, &SolverConfig::new(p), 0.05).unwrap();
        assert!(r.converged);
        assert!((r.value / l.powf(1.0 - p) - 1.0).abs() < 0.02, "L={l} p={p}: {}", r.value);
    }
}

#[test]
fn equal_plate_values_give_constant_field() {
    let m = Arc::new(triangulate(&unit_square(), 0.1).unwrap());
    let d = m.domain().clone();
    let e = tag_arc(&m, &BoundaryArc::new(&d, 3.0, 0.0).unwrap()).unwrap();
    let f = tag_arc(&m, &BoundaryArc::new(&d, 1.0, 2.0).unwrap()).unwrap();
    let r = minimize(&m, &[(e, 0.4), (f, 0.4)], &SolverConfig::new(1.5)).unwrap();
    assert!(r.value < 1e-12);
    assert!(r.field.values().iter().all(|v| (v - 0.4).abs() < 1e-9));
}

#[test]
fn shared_node_is_a_conflict() {
    let m = Arc::new(triangulate(&unit_square(), 0.25).unwrap());
    let d = m.domain().clone();
    // bottom and right sides share the corner (1, 0)
    let e = tag_arc(&m, &BoundaryArc::new(&d, 0.0, 1.0).unwrap()).unwrap();
    let f = tag_arc(&m, &BoundaryArc::new(&d, 1.0, 2.0).unwrap()).unwrap();
    let err = minimize(&m, &[(e, 1.0), (f, 0.0)], &SolverConfig::new(1.5)).unwrap_err();
    assert!(matches!(err, Error::DirichletConflict(_)));
}

#[test]
fn half_ring_matches_radial_formula() {
    assert!((radial_oracle(1.5, 0.5, 1.0) - 2.0 * PI).abs() < 1e-8);
    let closed = PI / 2.0 * (1.0 - 0.5f64.sqrt()).powi(-2);
    assert!((radial_oracle(3.0, 0.5, 1.0) / closed - 1.0).abs() < 1e-8);

    let seg = 128;
    let d = annular_sector(0.5, 1.0, PI, seg).unwrap();
    let outer = BoundaryArc::new(&d, d.vertex_param(0), d.vertex_param(seg)).unwrap();
    let inner = BoundaryArc::new(&d, d.vertex_param(seg + 1), d.vertex_param(2 * seg + 1)).unwrap();
    for p in [1.5, 3.0] {
        let r = capacity(&d, &inner, &outer, &SolverConfig::new(p), 0.04).unwrap();
        let full = 2.0 * r.value;
        assert!((full / radial_oracle(p, 0.5, 1.0) - 1.0).abs() < 0.03, "p={p}: {full}");
    }
}

#[test]
fn square_modulus_is_one() {
    let (d, e, f) = sides(1.0);
    let r = capacity(&d, &e, &f, &SolverConfig::new(2.0), 0.05).unwrap();
    assert!((r.value - 1.0).abs() < 0.01);
}

#[test]
fn overlapping_plates_are_rejected() {
    let d = unit_square();
    let e = BoundaryArc::new(&d, 0.0, 1.5).unwrap();
    let f = BoundaryArc::new(&d, 1.0, 2.0).unwrap();
    let err = capacity(&d, &e, &f, &SolverConfig::new(1.5), 0.1).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)));
}

#[test]
fn invalid_configs() {
    assert!(SolverConfig::new(1.0).validate().is_err());
    let mut c = SolverConfig::new(1.5);
    c.eps_schedule = vec![1e-2, 1e-1];
    assert!(c.validate().is_err());
    c.eps_schedule = vec![];
    assert!(c.validate().is_err());
    let mut c = SolverConfig::new(1.5);
    c.tol_energy = 0.0;
    assert!(c.validate().is_err());
}

#[test]
fn conjugate_exponents() {
    for p in [1.1, 1.25, 1.5, 1.75, 2.0, 3.0, 7.5] {
        let c = SolverConfig::new(p);
        assert!((1.0 / c.p + 1.0 / c.conjugate().p - 1.0).abs() < 1e-12);
        assert!((c.conjugate().conjugate().p - p).abs() < 1e-12);
    }
}

#[test]
fn tiny_segment_matches_ball_condenser() {
    let d = regular_polygon(256, 1.0, Point2::ORIGIN).unwrap();
    let h = 0.02;
    let g = Polyline::segment(Point2::new(-1e-3, 0.0), Point2::new(1e-3, 0.0)).unwrap();
    let r = curve_capacity(&d, &g, &SolverConfig::new(1.5), h).unwrap();
    // Cap_p(B(0, r), S¹) with the tube radius as r
    let oracle = radial_oracle(1.5, h, 1.0);
    assert!((r.value / oracle - 1.0).abs() < 0.10, "{} vs {oracle}", r.value);
}

#[test]
fn curve_capacity_grows_with_the_curve() {
    let d = regular_polygon(256, 1.0, Point2::ORIGIN).unwrap();
    let cfg = SolverConfig::new(1.5);
    let mut last = f64::INFINITY;
    for a in [0.9, 0.6, 0.3] {
        let g = Polyline::segment(Point2::new(-a, 0.0), Point2::new(a, 0.0)).unwrap();
        let v = curve_capacity(&d, &g, &cfg, 0.025).unwrap().value;
        assert!(v.is_finite() && v < last, "half-length {a}: {v} after {last}");
        last = v;
    }
}

#[test]
fn curve_touching_boundary_is_rejected() {
    let d = unit_square();
    let g = Polyline::segment(Point2::new(0.5, 0.5), Point2::new(0.5, 1.0)).unwrap();
    assert!(matches!(curve_capacity(&d, &g, &SolverConfig::new(1.5), 0.05), Err(Error::Precondition(_))));
}

#[test]
fn point_capacity_scaling() {
    let a = point_capacity(3.0, 0.5, 5e-4, 4.0).unwrap();
    let b = point_capacity(3.0, 0.25, 5e-4, 4.0).unwrap();
    assert!(a.converged && b.converged);
    assert!((a.value / b.value / 0.5 - 1.0).abs() < 0.15);

    let half_eps = point_capacity(3.0, 0.5, 2.5e-4, 4.0).unwrap();
    assert!((half_eps.value / a.value - 1.0).abs() < 0.10);

    let big_box = point_capacity(3.0, 0.5, 5e-4, 8.0).unwrap();
    assert!((big_box.value / a.value - 1.0).abs() < 0.05);
}

#[test]
fn point_capacity_preconditions() {
    assert!(point_capacity(2.0, 0.5, 1e-3, 4.0).is_err());
    assert!(point_capacity(3.0, 0.5, 0.2, 4.0).is_err());
    assert!(point_capacity(3.0, 0.5, 1e-3, 3.0).is_err());
}

#[test]
fn larger_plate_never_lowers_capacity() {
    let m = Arc::new(triangulate(&unit_square(), 0.05).unwrap());
    let d = m.domain().clone();
    let f = tag_arc(&m, &BoundaryArc::new(&d, 1.0, 2.0).unwrap()).unwrap();
    let cfg = SolverConfig::new(1.5);
    let mut last = 0.0;
    let mut prev: Option<NodeSet> = None;
    for start in [3.6, 3.3, 3.0] {
        let e = tag_arc(&m, &BoundaryArc::new(&d, start, 0.0).unwrap()).unwrap();
        if let Some(p) = &prev {
            assert!(e.is_superset(p));
        }
        let v = minimize(&m, &[(e.clone(), 1.0), (f.clone(), 0.0)], &cfg).unwrap().value;
        assert!(v >= last - 1e-10, "{v} < {last}");
        last = v;
        prev = Some(e);
    }
}

#[test]
fn scaling_law() {
    let m = Arc::new(triangulate(&unit_square(), 0.05).unwrap());
    let d = m.domain().clone();
    let e = tag_arc(&m, &BoundaryArc::new(&d, 0.0, 1.0).unwrap()).unwrap();
    let f = tag_arc(&m, &BoundaryArc::new(&d, 2.0, 3.0).unwrap()).unwrap();
    let lam = 3.0;
    let ms = Arc::new(m.scaled(lam).unwrap());
    for p in [1.5, 3.0] {
        let cfg = SolverConfig::new(p);
        let a = minimize(&m, &[(e.clone(), 1.0), (f.clone(), 0.0)], &cfg).unwrap().value;
        let b = minimize(&ms, &[(e.clone(), 1.0), (f.clone(), 0.0)], &cfg).unwrap().value;
        assert!((b / (a * lam.powf(2.0 - p)) - 1.0).abs() < 0.02);
    }
}

#[test]
fn maximum_principle_and_monotone_energy() {
    let seg = 64;
    let d = annular_sector(0.5, 1.0, PI, seg).unwrap();
    let outer = BoundaryArc::new(&d, d.vertex_param(0), d.vertex_param(seg)).unwrap();
    let inner = BoundaryArc::new(&d, d.vertex_param(seg + 1), d.vertex_param(2 * seg + 1)).unwrap();
    for p in [1.25, 1.5, 3.0] {
        for method in [Method::Newton, Method::Irls] {
            let cfg = SolverConfig { method, ..SolverConfig::new(p) };
            let r = capacity(&d, &inner, &outer, &cfg, 0.05).unwrap();
            assert!(r.field.min() >= -1e-8 && r.field.max() <= 1.0 + 1e-8);
            assert!(r.energy_history.windows(2).all(|w| w[1] <= w[0]), "p={p} {method:?}");
        }
    }
}

#[test]
fn iteration_budget_reports_nonconvergence() {
    let (d, e, f) = sides(1.0);
    let cfg = SolverConfig { max_iters: 2, ..SolverConfig::new(3.0) };
    let sq = unit_square();
    let g = Polyline::segment(Point2::new(0.3, 0.5), Point2::new(0.7, 0.5)).unwrap();
    let r = curve_capacity(&sq, &g, &cfg, 0.05).unwrap();
    assert!(!r.converged);
    assert!(r.value > 0.0);
    // the rectangle field is exact after the initial solve
    assert!(capacity(&d, &e, &f, &cfg, 0.1).is_ok());
}

#[test]
fn richardson_removes_quadratic_error() {
    let f = |h: f64| 3.0 + 0.7 * h * h;
    assert!((richardson(f(0.04), f(0.02), 2.0) - 3.0).abs() < 1e-12);
}

#[test]
fn summary_serializes() {
    let (d, e, f) = sides(2.0);
    let r = capacity(&d, &e, &f, &SolverConfig::new(1.5), 0.1).unwrap();
    let s = serde_json::to_string(&r.summary()).unwrap();
    for key in ["\"p\"", "\"h\"", "\"value\"", "\"iterations\"", "\"converged\"", "\"energy_history\""] {
        assert!(s.contains(key));
    }
}

use capdual::geometry::Point2;
use capdual::locate::{nearest_on_edges, TriLocator};

fn square() -> (Vec<Point2>, Vec<[usize; 3]>) {
    let pts = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(1.0, 1.0), Point2::new(0.0, 1.0)];
    (pts, vec![[0, 1, 2], [0, 2, 3]])
}

#[test]
fn locates_interior_points() {
    let (pts, tris) = square();
    let loc = TriLocator::new(&pts, &tris, None);
    assert_eq!(loc.locate(Point2::new(0.8, 0.2)).unwrap().0, 0);
    assert_eq!(loc.locate(Point2::new(0.2, 0.8)).unwrap().0, 1);
    assert!(loc.locate(Point2::new(1.2, 0.5)).is_none());
    assert!(loc.locate(Point2::new(f64::NAN, 0.5)).is_none());
}

#[test]
fn shared_edge_resolves_to_lowest_index() {
    let (pts, tris) = square();
    let loc = TriLocator::new(&pts, &tris, None);
    assert_eq!(loc.locate(Point2::new(0.5, 0.5)).unwrap().0, 0);
}

#[test]
fn inactive_triangles_are_skipped() {
    let (pts, tris) = square();
    let loc = TriLocator::new(&pts, &tris, Some(&[false, true]));
    assert!(loc.locate(Point2::new(0.8, 0.2)).is_none());
    assert_eq!(loc.locate(Point2::new(0.5, 0.5)).unwrap().0, 1);
}

#[test]
fn interpolation_reproduces_linear_functions() {
    let (pts, tris) = square();
    let loc = TriLocator::new(&pts, &tris, None);
    let f = |p: Point2| 2.0 * p.x - 3.0 * p.y + 0.5;
    let vals: Vec<f64> = pts.iter().map(|&p| f(p)).collect();
    for q in [Point2::new(0.1, 0.7), Point2::new(0.9, 0.05), Point2::new(0.5, 0.5)] {
        assert!((loc.interpolate(q, &vals).unwrap() - f(q)).abs() < 1e-14);
        let (_, l) = loc.locate(q).unwrap();
        assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }
}

#[test]
fn nearest_edge() {
    let (pts, _) = square();
    let edges = [[0, 1], [1, 2], [2, 3], [3, 0]];
    let (k, s, d) = nearest_on_edges(&pts, &edges, Point2::new(1.5, 0.25)).unwrap();
    assert_eq!(k, 1);
    assert!((s - 0.25).abs() < 1e-14 && (d - 0.5).abs() < 1e-14);
    assert!(nearest_on_edges(&pts, &[], Point2::ORIGIN).is_none());
}

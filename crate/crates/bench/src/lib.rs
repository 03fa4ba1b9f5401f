//! Benchmark fixtures shared by the criterion targets.

use capdual::geometry::{regular_polygon, split_boundary, unit_square};
use capdual::{JordanPolygon, Point2, Quadrilateral};

pub fn disk() -> JordanPolygon {
    regular_polygon(256, 1.0, Point2::ORIGIN).expect("256-gon")
}

/// Unit square split at its corners.
pub fn square_quad() -> (JordanPolygon, Quadrilateral) {
    let sq = unit_square();
    let q = split_boundary(&sq, [0.0, 1.0, 2.0, 3.0]).expect("corner cuts");
    (sq, q)
}

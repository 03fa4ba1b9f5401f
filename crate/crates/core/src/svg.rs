//! Minimal SVG rendering of domains, curves, triangle regions and the
//! image disk. Colors come from a fixed palette in insertion order, so the
//! same scene always renders to the same bytes.

use std::fmt::Write;

use num_complex::Complex64;

use crate::geometry::{JordanPolygon, Point2, Polyline};
use crate::mesh::TriMesh;

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Canvas size in pixels along the longer side.
pub const CANVAS: f64 = 800.0;

enum Item {
    Polygon(Vec<Point2>, &'static str, &'static str),
    Line(Vec<Point2>, &'static str),
    Triangles(Vec<[Point2; 3]>, &'static str),
    Circle(Point2, f64),
    Dot(Point2),
}

#[derive(Default)]
pub struct Scene {
    items: Vec<Item>,
    colors: usize,
}

impl Scene {
    pub fn new() -> Self {
        Scene::default()
    }

    fn next_color(&mut self) -> &'static str {
        let c = PALETTE[self.colors % PALETTE.len()];
        self.colors += 1;
        c
    }

    pub fn domain(&mut self, d: &JordanPolygon) -> &mut Self {
        self.items.push(Item::Polygon(d.vertices().to_vec(), "#f4f4f4", "#000000"));
        self
    }

    pub fn curve(&mut self, g: &Polyline) -> &mut Self {
        let c = self.next_color();
        self.items.push(Item::Line(g.vertices().to_vec(), c));
        self
    }

    /// Filled triangles of `mesh` with the given indices.
    pub fn region(&mut self, mesh: &TriMesh, triangles: &[usize]) -> &mut Self {
        let c = self.next_color();
        let nodes = mesh.nodes();
        let tris = triangles.iter().map(|&t| mesh.triangles()[t].map(|i| nodes[i])).collect();
        self.items.push(Item::Triangles(tris, c));
        self
    }

    pub fn unit_circle(&mut self) -> &mut Self {
        self.items.push(Item::Circle(Point2::ORIGIN, 1.0));
        self
    }

    pub fn disk_curve(&mut self, w: &[Complex64]) -> &mut Self {
        let c = self.next_color();
        self.items.push(Item::Line(w.iter().map(|z| Point2::new(z.re, z.im)).collect(), c));
        self
    }

    pub fn point(&mut self, z: Point2) -> &mut Self {
        self.items.push(Item::Dot(z));
        self
    }

    fn bounds(&self) -> (Point2, Point2) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut add = |p: Point2| {
            lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
        };
        for it in &self.items {
            match it {
                Item::Polygon(v, ..) | Item::Line(v, _) => v.iter().for_each(|&p| add(p)),
                Item::Triangles(ts, _) => ts.iter().flatten().for_each(|&p| add(p)),
                Item::Circle(c, r) => {
                    add(*c - Point2::new(*r, *r));
                    add(*c + Point2::new(*r, *r));
                }
                Item::Dot(p) => add(*p),
            }
        }
        if !lo.x.is_finite() {
            return (Point2::ORIGIN, Point2::new(1.0, 1.0));
        }
        (lo, hi)
    }

    pub fn render(&self) -> String {
        let (lo, hi) = self.bounds();
        let span = (hi.x - lo.x).max(hi.y - lo.y).max(1e-12);
        let pad = 0.03 * span;
        let scale = CANVAS / (span + 2.0 * pad);
        let (w, h) = ((hi.x - lo.x + 2.0 * pad) * scale, (hi.y - lo.y + 2.0 * pad) * scale);
        // flip y so that the plane is drawn with y up
        let tx = |p: Point2| ((p.x - lo.x + pad) * scale, (hi.y - p.y + pad) * scale);
        let path = |v: &[Point2]| {
            v.iter().map(|&p| tx(p)).map(|(x, y)| format!("{x:.3},{y:.3}")).collect::<Vec<_>>().join(" ")
        };
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.3} {h:.3}">"#);
        for it in &self.items {
            match it {
                Item::Polygon(v, fill, stroke) => {
                    let _ = writeln!(s, r#"<polygon points="{}" fill="{fill}" stroke="{stroke}" stroke-width="1"/>"#, path(v));
                }
                Item::Line(v, c) => {
                    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.5"/>"#, path(v));
                }
                Item::Triangles(ts, c) => {
                    let _ = writeln!(s, r#"<g fill="{c}" fill-opacity="0.45" stroke="none">"#);
                    for t in ts {
                        let _ = writeln!(s, r#"<polygon points="{}"/>"#, path(t));
                    }
                    let _ = writeln!(s, "</g>");
                }
                Item::Circle(c, r) => {
                    let (x, y) = tx(*c);
                    let _ = writeln!(s, r##"<circle cx="{x:.3}" cy="{y:.3}" r="{:.3}" fill="none" stroke="#000000" stroke-width="1"/>"##, r * scale);
                }
                Item::Dot(p) => {
                    let (x, y) = tx(*p);
                    let _ = writeln!(s, r##"<circle cx="{x:.3}" cy="{y:.3}" r="3" fill="#000000"/>"##);
                }
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

//! Point location in triangulations by uniform bucketing of triangle
//! bounding boxes.

use crate::geometry::{closest_on_segment, orient, Point2};

#[derive(Debug, Clone)]
pub struct TriLocator {
    pts: Vec<Point2>,
    tris: Vec<[usize; 3]>,
    origin: Point2,
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

impl TriLocator {
    /// Buckets the triangles with `active[t]` set (all when `active` is `None`).
    pub fn new(pts: &[Point2], tris: &[[usize; 3]], active: Option<&[bool]>) -> TriLocator {
        let (mut lo, mut hi) = (Point2::new(f64::INFINITY, f64::INFINITY), Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
        for p in pts {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        let side = ((tris.len() as f64).sqrt().ceil() as usize).max(1);
        let cell = ((hi.x - lo.x).max(hi.y - lo.y) / side as f64).max(1e-300);
        let nx = (((hi.x - lo.x) / cell).floor() as usize + 1).max(1);
        let ny = (((hi.y - lo.y) / cell).floor() as usize + 1).max(1);
        let mut loc = TriLocator { pts: pts.to_vec(), tris: tris.to_vec(), origin: lo, cell, nx, ny, cells: vec![Vec::new(); nx * ny] };
        for (t, tri) in tris.iter().enumerate() {
            if active.is_some_and(|a| !a[t]) {
                continue;
            }
            let ps = tri.map(|i| pts[i]);
            let bx0 = ps.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
            let bx1 = ps.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
            let by0 = ps.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
            let by1 = ps.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
            let (i0, j0) = loc.cell_of(Point2::new(bx0, by0));
            let (i1, j1) = loc.cell_of(Point2::new(bx1, by1));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    loc.cells[j * nx + i].push(t as u32);
                }
            }
        }
        loc
    }

    fn cell_of(&self, p: Point2) -> (usize, usize) {
        let i = ((p.x - self.origin.x) / self.cell).floor().clamp(0.0, (self.nx - 1) as f64) as usize;
        let j = ((p.y - self.origin.y) / self.cell).floor().clamp(0.0, (self.ny - 1) as f64) as usize;
        (i, j)
    }

    pub fn barycentric(&self, t: usize, q: Point2) -> [f64; 3] {
        let [a, b, c] = self.tris[t].map(|i| self.pts[i]);
        let d = orient(a, b, c);
        [orient(q, b, c) / d, orient(a, q, c) / d, orient(a, b, q) / d]
    }

    /// Triangle containing `q` with its barycentric coordinates. Points on
    /// shared edges resolve to the lowest triangle index.
    pub fn locate(&self, q: Point2) -> Option<(usize, [f64; 3])> {
        if !q.is_finite() {
            return None;
        }
        let (i, j) = self.cell_of(q);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in &self.cells[j * self.nx + i] {
            let l = self.barycentric(t as usize, q);
            let worst = l[0].min(l[1]).min(l[2]);
            if worst >= -1e-12 && best.as_ref().is_none_or(|b| worst > b.2 + 1e-15 || (worst >= b.2 - 1e-15 && (t as usize) < b.0)) {
                best = Some((t as usize, l, worst));
            }
        }
        best.map(|(t, l, _)| (t, l))
    }

    /// Linear interpolation of nodal values at `q`.
    pub fn interpolate(&self, q: Point2, values: &[f64]) -> Option<f64> {
        let (t, l) = self.locate(q)?;
        let tri = self.tris[t];
        Some(l[0] * values[tri[0]] + l[1] * values[tri[1]] + l[2] * values[tri[2]])
    }
}

/// Closest point to `q` on a set of edges, with the edge index and the
/// parameter along it.
pub fn nearest_on_edges(pts: &[Point2], edges: &[[usize; 2]], q: Point2) -> Option<(usize, f64, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    for (k, e) in edges.iter().enumerate() {
        let (c, s) = closest_on_segment(q, pts[e[0]], pts[e[1]]);
        let d = c.dist(q);
        if best.is_none_or(|b| d < b.2) {
            best = Some((k, s, d));
        }
    }
    best
}

//! Planar primitives for polygonal Jordan domains.
//!
//! A [`JordanPolygon`] is a simple, counterclockwise polygon together with the
//! arc-length parametrization of its boundary. Boundary arcs are addressed by
//! arc-length parameters in `[0, perimeter)`, measured counterclockwise from
//! the first vertex.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    #[inline]
    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the cross product.
    #[inline]
    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    #[inline]
    pub fn dist(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    /// Counterclockwise rotation by a quarter turn.
    #[inline]
    pub fn perp(self) -> Point2 {
        Point2::new(-self.y, self.x)
    }

    #[inline]
    pub fn lerp(self, o: Point2, t: f64) -> Point2 {
        Point2::new(self.x + (o.x - self.x) * t, self.y + (o.y - self.y) * t)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl Add for Point2 {
    type Output = Point2;
    #[inline]
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Point2 {
    #[inline]
    fn add_assign(&mut self, o: Point2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Point2 {
    type Output = Point2;
    #[inline]
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    #[inline]
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

impl Div<f64> for Point2 {
    type Output = Point2;
    #[inline]
    fn div(self, s: f64) -> Point2 {
        Point2::new(self.x / s, self.y / s)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    #[inline]
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// Twice the signed area of triangle `abc` (positive when counterclockwise).
#[inline]
pub fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

/// Closest point on segment `ab` to `p`, with its segment parameter in `[0, 1]`.
#[inline]
pub fn closest_on_segment(p: Point2, a: Point2, b: Point2) -> (Point2, f64) {
    let d = b - a;
    let l2 = d.norm_sq();
    if l2 == 0.0 {
        return (a, 0.0);
    }
    let t = ((p - a).dot(d) / l2).clamp(0.0, 1.0);
    (a + d * t, t)
}

#[inline]
pub fn segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    p.dist(closest_on_segment(p, a, b).0)
}

/// True when closed segments `ab` and `cd` share at least one point.
pub fn segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |p: Point2, q: Point2, r: Point2| {
        r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
    };
    (d1 == 0.0 && on(c, d, a))
        || (d2 == 0.0 && on(c, d, b))
        || (d3 == 0.0 && on(a, b, c))
        || (d4 == 0.0 && on(a, b, d))
}

/// An ordered list of points joined by straight segments.
///
/// A single-vertex polyline is allowed and represents a degenerate curve
/// (a point); it arises for coincident query points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    vertices: Vec<Point2>,
}

impl Polyline {
    pub fn new(vertices: Vec<Point2>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::InvalidPolyline("no vertices".into()));
        }
        if vertices.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidPolyline("non-finite vertex".into()));
        }
        if vertices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidPolyline("repeated consecutive vertex".into()));
        }
        Ok(Polyline { vertices })
    }

    /// Builds a polyline, silently dropping repeated consecutive vertices.
    pub fn from_points_dedup(points: impl IntoIterator<Item = Point2>) -> Result<Self> {
        let mut v: Vec<Point2> = Vec::new();
        for p in points {
            if v.last() != Some(&p) {
                v.push(p);
            }
        }
        Polyline::new(v)
    }

    pub fn segment(a: Point2, b: Point2) -> Result<Self> {
        Polyline::from_points_dedup([a, b])
    }

    pub fn point(p: Point2) -> Self {
        Polyline { vertices: vec![p] }
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn first(&self) -> Point2 {
        self.vertices[0]
    }

    pub fn last(&self) -> Point2 {
        *self.vertices.last().unwrap()
    }

    pub fn is_degenerate(&self) -> bool {
        self.vertices.len() < 2
    }

    pub fn length(&self) -> f64 {
        self.vertices.windows(2).map(|w| w[0].dist(w[1])).sum()
    }

    /// Appends `other`, merging the shared endpoint when it coincides.
    pub fn concat(&self, other: &Polyline) -> Polyline {
        let mut v = self.vertices.clone();
        for &p in &other.vertices {
            if v.last() != Some(&p) {
                v.push(p);
            }
        }
        Polyline { vertices: v }
    }

    pub fn reversed(&self) -> Polyline {
        let mut v = self.vertices.clone();
        v.reverse();
        Polyline { vertices: v }
    }

    pub fn diameter(&self) -> f64 {
        let v = &self.vertices;
        let mut d: f64 = 0.0;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                d = d.max(v[i].dist(v[j]));
            }
        }
        d
    }
}

/// Uniform bucket grid over boundary edges, used to answer distance queries
/// on polygons with many edges.
#[derive(Debug)]
struct EdgeGrid {
    origin: Point2,
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

impl EdgeGrid {
    fn build(vertices: &[Point2], lo: Point2, hi: Point2) -> EdgeGrid {
        let n = vertices.len();
        let w = (hi.x - lo.x).max(1e-300);
        let h = (hi.y - lo.y).max(1e-300);
        let target = (n as f64).sqrt().ceil().max(1.0);
        let cell = (w.max(h) / target).max(1e-300);
        let nx = ((w / cell).ceil() as usize).max(1);
        let ny = ((h / cell).ceil() as usize).max(1);
        let mut cells = vec![Vec::new(); nx * ny];
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let (x0, x1) = (a.x.min(b.x), a.x.max(b.x));
            let (y0, y1) = (a.y.min(b.y), a.y.max(b.y));
            let cx0 = (((x0 - lo.x) / cell).floor() as isize).clamp(0, nx as isize - 1) as usize;
            let cx1 = (((x1 - lo.x) / cell).floor() as isize).clamp(0, nx as isize - 1) as usize;
            let cy0 = (((y0 - lo.y) / cell).floor() as isize).clamp(0, ny as isize - 1) as usize;
            let cy1 = (((y1 - lo.y) / cell).floor() as isize).clamp(0, ny as isize - 1) as usize;
            for cy in cy0..=cy1 {
                for cx in cx0..=cx1 {
                    cells[cy * nx + cx].push(i as u32);
                }
            }
        }
        EdgeGrid { origin: lo, cell, nx, ny, cells }
    }

    /// Nearest edge index and distance.
    fn nearest(&self, p: Point2, vertices: &[Point2]) -> (usize, f64) {
        let n = vertices.len();
        let fx = (p.x - self.origin.x) / self.cell;
        let fy = (p.y - self.origin.y) / self.cell;
        let cx = (fx.floor() as isize).clamp(0, self.nx as isize - 1);
        let cy = (fy.floor() as isize).clamp(0, self.ny as isize - 1);
        // distance from p to the clamped cell; rings are searched outward
        let outside = {
            let dx = (fx - fx.clamp(0.0, self.nx as f64)).abs();
            let dy = (fy - fy.clamp(0.0, self.ny as f64)).abs();
            dx.max(dy) * self.cell
        };
        let mut best = (usize::MAX, f64::INFINITY);
        let max_ring = self.nx.max(self.ny) as isize;
        for ring in 0..=max_ring {
            let x0 = cx - ring;
            let x1 = cx + ring;
            let y0 = cy - ring;
            let y1 = cy + ring;
            for y in y0..=y1 {
                if y < 0 || y >= self.ny as isize {
                    continue;
                }
                for x in x0..=x1 {
                    if x < 0 || x >= self.nx as isize {
                        continue;
                    }
                    if y != y0 && y != y1 && x != x0 && x != x1 {
                        continue;
                    }
                    for &e in &self.cells[y as usize * self.nx + x as usize] {
                        let e = e as usize;
                        let d = segment_distance(p, vertices[e], vertices[(e + 1) % n]);
                        if d < best.1 || (d == best.1 && e < best.0) {
                            best = (e, d);
                        }
                    }
                }
            }
            // unvisited cells lie at least `ring` cell widths away, and no
            // closer than the distance from p to the grid
            if best.0 != usize::MAX && best.1 <= (ring as f64 * self.cell).max(outside) {
                break;
            }
        }
        best
    }
}

/// A simple counterclockwise polygon: the computational Jordan domain.
#[derive(Debug, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point2>", into = "Vec<Point2>")]
pub struct JordanPolygon {
    vertices: Vec<Point2>,
    /// `cum[i]` is the arc length from vertex 0 to vertex i; `cum[n]` the perimeter.
    cum: Vec<f64>,
    diam: f64,
    lo: Point2,
    hi: Point2,
    grid: OnceLock<EdgeGrid>,
}

impl Clone for JordanPolygon {
    fn clone(&self) -> Self {
        JordanPolygon {
            vertices: self.vertices.clone(),
            cum: self.cum.clone(),
            diam: self.diam,
            lo: self.lo,
            hi: self.hi,
            grid: OnceLock::new(),
        }
    }
}

impl PartialEq for JordanPolygon {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices
    }
}

impl TryFrom<Vec<Point2>> for JordanPolygon {
    type Error = Error;
    fn try_from(v: Vec<Point2>) -> Result<Self> {
        JordanPolygon::new(v)
    }
}

impl From<JordanPolygon> for Vec<Point2> {
    fn from(p: JordanPolygon) -> Self {
        p.vertices
    }
}

impl JordanPolygon {
    /// Validates and normalizes a polygon.
    ///
    /// Duplicate and collinear vertices are merged with tolerance
    /// `1e-12 * diam`. The polygon must be simple and counterclockwise.
    pub fn new(vertices: Vec<Point2>) -> Result<Self> {
        if vertices.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidPolygon("non-finite vertex".into()));
        }
        if vertices.len() < 3 {
            return Err(Error::InvalidPolygon(format!("{} vertices, need at least 3", vertices.len())));
        }
        let diam = bbox_diag(&vertices);
        if diam == 0.0 {
            return Err(Error::InvalidPolygon("all vertices coincide".into()));
        }
        let v = merge_degenerate(vertices, 1e-12 * diam);
        if v.len() < 3 {
            return Err(Error::InvalidPolygon("fewer than 3 vertices after merging".into()));
        }
        let n = v.len();
        // simplicity: non-adjacent edges must not touch
        for i in 0..n {
            let (a, b) = (v[i], v[(i + 1) % n]);
            for j in i + 1..n {
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (c, d) = (v[j], v[(j + 1) % n]);
                if segments_intersect(a, b, c, d) {
                    return Err(Error::InvalidPolygon(format!("edges {i} and {j} intersect")));
                }
            }
        }
        let area = signed_area(&v);
        if area <= 0.0 {
            return Err(Error::InvalidPolygon("vertices must be counterclockwise".into()));
        }
        let mut cum = Vec::with_capacity(n + 1);
        cum.push(0.0);
        for i in 0..n {
            let l = cum[i] + v[i].dist(v[(i + 1) % n]);
            cum.push(l);
        }
        let mut lo = v[0];
        let mut hi = v[0];
        for p in &v {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        let mut d: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                d = d.max(v[i].dist(v[j]));
            }
        }
        Ok(JordanPolygon { vertices: v, cum, diam: d, lo, hi, grid: OnceLock::new() })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn perimeter(&self) -> f64 {
        self.cum[self.vertices.len()]
    }

    /// Arc-length parameter of vertex `i`.
    pub fn vertex_param(&self, i: usize) -> f64 {
        self.cum[i]
    }

    pub fn boundary_param(&self) -> &[f64] {
        &self.cum
    }

    pub fn diam(&self) -> f64 {
        self.diam
    }

    pub fn bbox(&self) -> (Point2, Point2) {
        (self.lo, self.hi)
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn centroid(&self) -> Point2 {
        let v = &self.vertices;
        let n = v.len();
        let mut c = Point2::ORIGIN;
        let mut a2 = 0.0;
        for i in 0..n {
            let (p, q) = (v[i], v[(i + 1) % n]);
            let w = p.cross(q);
            a2 += w;
            c += (p + q) * w;
        }
        c / (3.0 * a2)
    }

    pub fn edge(&self, i: usize) -> (Point2, Point2) {
        let n = self.vertices.len();
        (self.vertices[i % n], self.vertices[(i + 1) % n])
    }

    /// Wraps an arc-length parameter into `[0, perimeter)`.
    pub fn wrap_param(&self, s: f64) -> f64 {
        let p = self.perimeter();
        let r = s.rem_euclid(p);
        if r >= p {
            0.0
        } else {
            r
        }
    }

    /// Boundary point at arc-length `s` and the index of the edge containing it.
    pub fn point_at(&self, s: f64) -> (Point2, usize) {
        let s = self.wrap_param(s);
        let n = self.vertices.len();
        let i = match self.cum.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(n - 1),
            Err(i) => i - 1,
        };
        let (a, b) = self.edge(i);
        let len = self.cum[i + 1] - self.cum[i];
        let t = if len > 0.0 { (s - self.cum[i]) / len } else { 0.0 };
        (a.lerp(b, t.clamp(0.0, 1.0)), i)
    }

    /// Arc-length parameter of the point `p`, assumed to lie on edge `edge`.
    pub fn param_on_edge(&self, p: Point2, edge: usize) -> f64 {
        let (a, b) = self.edge(edge);
        let (_, t) = closest_on_segment(p, a, b);
        let len = self.cum[edge + 1] - self.cum[edge];
        self.wrap_param(self.cum[edge] + t * len)
    }

    fn grid(&self) -> &EdgeGrid {
        self.grid.get_or_init(|| EdgeGrid::build(&self.vertices, self.lo, self.hi))
    }

    /// Nearest boundary edge and the distance to it.
    fn nearest_edge(&self, z: Point2) -> (usize, f64) {
        let n = self.vertices.len();
        if n <= 24 {
            let mut best = (0, f64::INFINITY);
            for i in 0..n {
                let d = segment_distance(z, self.vertices[i], self.vertices[(i + 1) % n]);
                if d < best.1 {
                    best = (i, d);
                }
            }
            best
        } else {
            self.grid().nearest(z, &self.vertices)
        }
    }

    /// Euclidean distance from `z` to the closed boundary.
    pub fn dist_to_boundary(&self, z: Point2) -> f64 {
        self.nearest_edge(z).1
    }

    /// Nearest boundary point and its arc-length parameter.
    pub fn closest_boundary_point(&self, z: Point2) -> (Point2, f64) {
        let (e, _) = self.nearest_edge(z);
        let (a, b) = self.edge(e);
        let (p, _) = closest_on_segment(z, a, b);
        (p, self.param_on_edge(p, e))
    }

    fn on_boundary(&self, z: Point2) -> bool {
        self.dist_to_boundary(z) <= 1e-13 * self.diam
    }

    /// Strict interior test by the crossing-number rule. Boundary points are
    /// reported as outside.
    pub fn point_in_domain(&self, z: Point2) -> bool {
        if z.x < self.lo.x || z.x > self.hi.x || z.y < self.lo.y || z.y > self.hi.y {
            return false;
        }
        if self.on_boundary(z) {
            return false;
        }
        let v = &self.vertices;
        let n = v.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let (a, b) = (v[i], v[j]);
            if (a.y > z.y) != (b.y > z.y) {
                let x = a.x + (z.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if z.x < x {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    /// True when the open segment `ab` lies in the domain; the endpoints
    /// themselves must be interior.
    pub fn segment_inside(&self, a: Point2, b: Point2) -> bool {
        if !self.point_in_domain(a) || !self.point_in_domain(b) {
            return false;
        }
        let l = a.dist(b);
        if l < self.dist_to_boundary(a) || l < self.dist_to_boundary(b) {
            return true;
        }
        let n = self.vertices.len();
        (0..n).all(|i| {
            let (c, d) = self.edge(i);
            !segments_intersect(a, b, c, d)
        })
    }

    /// True when every vertex is interior and no segment touches the boundary.
    pub fn polyline_inside(&self, g: &Polyline) -> bool {
        let v = g.vertices();
        if v.len() == 1 {
            return self.point_in_domain(v[0]);
        }
        v.windows(2).all(|w| self.segment_inside(w[0], w[1]))
    }

    /// Returns a copy scaled by `s` about the origin.
    pub fn scaled(&self, s: f64) -> Result<JordanPolygon> {
        JordanPolygon::new(self.vertices.iter().map(|&p| p * s).collect())
    }

    /// Stable content hash of the vertex list (hex SHA-256 of the bit patterns).
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for p in &self.vertices {
            h.update(p.x.to_bits().to_le_bytes());
            h.update(p.y.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

fn bbox_diag(v: &[Point2]) -> f64 {
    let (mut lo, mut hi) = (v[0], v[0]);
    for p in v {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    lo.dist(hi)
}

fn signed_area(v: &[Point2]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| v[i].cross(v[(i + 1) % n])).sum::<f64>()
}

/// Drops repeated vertices and vertices lying on the segment between their
/// neighbours.
fn merge_degenerate(mut v: Vec<Point2>, tol: f64) -> Vec<Point2> {
    loop {
        let n = v.len();
        if n < 3 {
            return v;
        }
        let mut drop = None;
        for i in 0..n {
            let prev = v[(i + n - 1) % n];
            let cur = v[i];
            let next = v[(i + 1) % n];
            if cur.dist(next) <= tol {
                drop = Some(i);
                break;
            }
            let (_, t) = closest_on_segment(cur, prev, next);
            if t > 0.0 && t < 1.0 && segment_distance(cur, prev, next) <= tol {
                drop = Some(i);
                break;
            }
        }
        match drop {
            Some(i) => {
                v.remove(i);
            }
            None => return v,
        }
    }
}

/// Counterclockwise boundary arc `[s_start, s_end]` (wrapping allowed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryArc {
    pub s_start: f64,
    pub s_end: f64,
    /// Perimeter of the owning domain.
    pub perimeter: f64,
}

impl BoundaryArc {
    pub fn new(domain: &JordanPolygon, s_start: f64, s_end: f64) -> Result<Self> {
        let p = domain.perimeter();
        if !(0.0..p).contains(&s_start) || !(0.0..p).contains(&s_end) {
            return Err(Error::InvalidCuts(format!(
                "arc parameters ({s_start}, {s_end}) outside [0, {p})"
            )));
        }
        if s_start == s_end {
            return Err(Error::InvalidCuts("arc has zero length".into()));
        }
        Ok(BoundaryArc { s_start, s_end, perimeter: p })
    }

    /// The whole boundary, starting and ending at `s`.
    pub fn full(domain: &JordanPolygon, s: f64) -> Self {
        BoundaryArc { s_start: s, s_end: s, perimeter: domain.perimeter() }
    }

    pub fn is_full(&self) -> bool {
        self.s_start == self.s_end
    }

    pub fn length(&self) -> f64 {
        if self.is_full() {
            self.perimeter
        } else {
            (self.s_end - self.s_start).rem_euclid(self.perimeter)
        }
    }

    /// Closed membership test with absolute tolerance `tol` on the parameter.
    pub fn contains(&self, s: f64, tol: f64) -> bool {
        if self.is_full() {
            return true;
        }
        let off = (s - self.s_start).rem_euclid(self.perimeter);
        let len = self.length();
        off <= len + tol || off >= self.perimeter - tol
    }

    /// True when the two arcs share more than a single endpoint.
    pub fn overlaps(&self, other: &BoundaryArc) -> bool {
        let tol = 1e-12 * self.perimeter;
        if self.is_full() || other.is_full() {
            return true;
        }
        let interior = |a: &BoundaryArc, s: f64| {
            let off = (s - a.s_start).rem_euclid(a.perimeter);
            off > tol && off < a.length() - tol
        };
        interior(self, other.s_start)
            || interior(self, other.s_end)
            || interior(other, self.s_start)
            || interior(other, self.s_end)
            || (self.s_start == other.s_start && self.s_end == other.s_end)
    }

    /// Sample points along the arc, including both endpoints and every
    /// polygon vertex inside it.
    pub fn points(&self, domain: &JordanPolygon) -> Vec<Point2> {
        let mut params = vec![0.0];
        for i in 0..domain.len() {
            let off = (domain.vertex_param(i) - self.s_start).rem_euclid(self.perimeter);
            if off > 0.0 && off < self.length() {
                params.push(off);
            }
        }
        params.push(self.length());
        params.sort_by(|a, b| a.partial_cmp(b).unwrap());
        params.iter().map(|&o| domain.point_at(self.s_start + o).0).collect()
    }
}

/// Four boundary arcs in counterclockwise order partitioning the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadrilateral {
    pub arcs: [BoundaryArc; 4],
}

impl Quadrilateral {
    pub fn cuts(&self) -> [f64; 4] {
        [self.arcs[0].s_start, self.arcs[1].s_start, self.arcs[2].s_start, self.arcs[3].s_start]
    }

    /// Relabels so that arc `k` becomes arc 0.
    pub fn rotated(&self, k: usize) -> Quadrilateral {
        let a = self.arcs;
        Quadrilateral { arcs: [a[k % 4], a[(k + 1) % 4], a[(k + 2) % 4], a[(k + 3) % 4]] }
    }
}

/// Splits the boundary at four cyclically increasing arc-length parameters.
///
/// Arc `i` runs from `cuts[i]` to `cuts[i+1]` counterclockwise; opposite arcs
/// are `(0, 2)` and `(1, 3)`.
pub fn split_boundary(domain: &JordanPolygon, cuts: [f64; 4]) -> Result<Quadrilateral> {
    let p = domain.perimeter();
    let c: Vec<f64> = cuts.iter().map(|&s| domain.wrap_param(s)).collect();
    let tol = 1e-12 * p;
    let offs: Vec<f64> = c.iter().map(|&s| (s - c[0]).rem_euclid(p)).collect();
    for i in 0..4 {
        for j in i + 1..4 {
            let d = (c[i] - c[j]).abs();
            if d <= tol || (p - d) <= tol {
                return Err(Error::InvalidCuts(format!("cuts {i} and {j} coincide")));
            }
        }
    }
    if !(offs[1] < offs[2] && offs[2] < offs[3]) {
        return Err(Error::InvalidCuts("cuts are not counterclockwise ordered".into()));
    }
    let arc = |i: usize| BoundaryArc { s_start: c[i], s_end: c[(i + 1) % 4], perimeter: p };
    Ok(Quadrilateral { arcs: [arc(0), arc(1), arc(2), arc(3)] })
}

const SIMPSON_MAX_INTERVALS: usize = 1 << 14;

/// Adaptive Simpson on `[a, b]` with relative tolerance `rtol`, spending at
/// most `budget` subintervals. Returns the integral and intervals used.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rtol: f64, budget: usize) -> (f64, usize) {
    struct Piece {
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        depth: u32,
    }
    let simpson = |a: f64, b: f64, fa: f64, fm: f64, fb: f64| (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // coarse pass fixes the scale of the absolute tolerance
    let init = 8usize;
    let mut stack = Vec::new();
    let mut coarse = 0.0;
    for k in 0..init {
        let x0 = a + (b - a) * k as f64 / init as f64;
        let x1 = a + (b - a) * (k + 1) as f64 / init as f64;
        let (fa, fm, fb) = (f(x0), f(0.5 * (x0 + x1)), f(x1));
        let whole = simpson(x0, x1, fa, fm, fb);
        coarse += whole.abs();
        stack.push(Piece { a: x0, b: x1, fa, fm, fb, whole, depth: 0 });
    }
    let atol = rtol * coarse.max(f64::MIN_POSITIVE);
    let mut total = 0.0;
    let mut used = init;
    // process pieces left to right for a deterministic summation order
    stack.reverse();
    while let Some(pc) = stack.pop() {
        let m = 0.5 * (pc.a + pc.b);
        let (lm, rm) = (0.5 * (pc.a + m), 0.5 * (m + pc.b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(pc.a, m, pc.fa, flm, pc.fm);
        let right = simpson(m, pc.b, pc.fm, frm, pc.fb);
        let err = left + right - pc.whole;
        let width_share = (pc.b - pc.a) / (b - a);
        if err.abs() <= 15.0 * atol * width_share || used >= budget || pc.depth > 50 {
            total += left + right + err / 15.0;
        } else {
            used += 1;
            stack.push(Piece { a: m, b: pc.b, fa: pc.fm, fm: frm, fb: pc.fb, whole: right, depth: pc.depth + 1 });
            stack.push(Piece { a: pc.a, b: m, fa: pc.fa, fm: flm, fb: pc.fm, whole: left, depth: pc.depth + 1 });
        }
    }
    (total, used)
}

/// Line integral of `dist(z, ∂Ω)^exponent` along the polyline.
///
/// Each segment is integrated separately with adaptive Simpson (relative
/// tolerance 1e-6, at most 2^14 subintervals). For negative exponents the
/// segment is first cut geometrically toward the endpoint closest to the
/// boundary; a segment ending on the boundary gets an analytic tail.
pub fn weighted_length(g: &Polyline, domain: &JordanPolygon, exponent: f64) -> Result<f64> {
    if exponent == 0.0 {
        return Ok(g.length());
    }
    let mut total = 0.0;
    for w in g.vertices().windows(2) {
        total += weighted_segment(w[0], w[1], domain, exponent)?;
    }
    Ok(total)
}

fn weighted_segment(a: Point2, b: Point2, domain: &JordanPolygon, exponent: f64) -> Result<f64> {
    let len = a.dist(b);
    if len == 0.0 {
        return Ok(0.0);
    }
    let (da, db) = (domain.dist_to_boundary(a), domain.dist_to_boundary(b));
    let on_bdry_tol = 1e-13 * domain.diam();
    let (a_on, b_on) = (da <= on_bdry_tol, db <= on_bdry_tol);
    if exponent <= -1.0 && (a_on || b_on) {
        return Err(Error::DivergentIntegral(format!(
            "exponent {exponent} with segment endpoint on the boundary"
        )));
    }
    let rtol = 1e-6;
    if exponent > 0.0 {
        let f = |t: f64| domain.dist_to_boundary(a.lerp(b, t)).powf(exponent);
        return Ok(len * adaptive_simpson(&f, 0.0, 1.0, rtol, SIMPSON_MAX_INTERVALS).0);
    }
    // orient so that `s = 0` is the endpoint nearest the boundary
    let (p, q, dp) = if da <= db { (a, b, da) } else { (b, a, db) };
    let f = |t: f64| {
        let d = domain.dist_to_boundary(p.lerp(q, t));
        if d <= 0.0 {
            0.0
        } else {
            d.powf(exponent)
        }
    };
    // geometric breakpoints t_j = 2^{j-K} clustering toward p
    // a boundary endpoint keeps the first breakpoint resolvable in absolute
    // coordinates, otherwise the tail sample rounds onto the boundary
    let floor = if dp > on_bdry_tol { (dp / len).min(1.0) } else { (1e-10 * domain.diam() / len).clamp(1e-12, 0.5) };
    let k = ((1.0 / floor).log2().ceil() as i32 + 1).clamp(1, 60);
    let mut breaks: Vec<f64> = (0..=k).map(|j| 2f64.powi(j - k)).collect();
    breaks.insert(0, 0.0);
    let budget_each = (SIMPSON_MAX_INTERVALS / breaks.len()).max(16);
    let mut acc = 0.0;
    for (j, w) in breaks.windows(2).enumerate() {
        let (t0, t1) = (w[0], w[1]);
        if j == 0 && dp <= on_bdry_tol {
            // dist ~ c·t near a boundary endpoint: integral of (d(t1) t/t1)^e
            let d1 = domain.dist_to_boundary(p.lerp(q, t1));
            acc += t1 * d1.powf(exponent) / (1.0 + exponent);
        } else {
            acc += adaptive_simpson(&f, t0, t1, rtol, budget_each).0;
        }
    }
    Ok(len * acc)
}

/// Regular `n`-gon inscribed in the circle of radius `r` about `center`,
/// first vertex on the positive x-axis.
pub fn regular_polygon(n: usize, r: f64, center: Point2) -> Result<JordanPolygon> {
    let v = (0..n)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            center + Point2::new(r * t.cos(), r * t.sin())
        })
        .collect();
    JordanPolygon::new(v)
}

/// Axis-aligned rectangle `[0, w] × [0, h]`, vertices from the origin.
pub fn rectangle(w: f64, h: f64) -> Result<JordanPolygon> {
    JordanPolygon::new(vec![
        Point2::new(0.0, 0.0),
        Point2::new(w, 0.0),
        Point2::new(w, h),
        Point2::new(0.0, h),
    ])
}

pub fn unit_square() -> JordanPolygon {
    rectangle(1.0, 1.0).expect("unit square")
}

/// The L-shaped hexagon `[0,2]² \ (1,2]²`.
pub fn l_hexagon() -> JordanPolygon {
    JordanPolygon::new(vec![
        Point2::new(0.0, 0.0),
        Point2::new(2.0, 0.0),
        Point2::new(2.0, 1.0),
        Point2::new(1.0, 1.0),
        Point2::new(1.0, 2.0),
        Point2::new(0.0, 2.0),
    ])
    .expect("L hexagon")
}

/// Annular sector `{r ≤ |z| ≤ r_out, 0 ≤ arg z ≤ angle}` with `segments`
/// chords on each circular side. The outer arc runs first (counterclockwise),
/// followed by the inner arc traversed backwards.
pub fn annular_sector(r: f64, r_out: f64, angle: f64, segments: usize) -> Result<JordanPolygon> {
    let mut v = Vec::with_capacity(2 * segments + 2);
    for k in 0..=segments {
        let t = angle * k as f64 / segments as f64;
        v.push(Point2::new(r_out * t.cos(), r_out * t.sin()));
    }
    for k in (0..=segments).rev() {
        let t = angle * k as f64 / segments as f64;
        v.push(Point2::new(r * t.cos(), r * t.sin()));
    }
    JordanPolygon::new(v)
}

/// Unit square with a rectangular notch of the given width and depth cut
/// upward from the middle of the bottom side.
pub fn notched_square(width: f64, depth: f64) -> Result<JordanPolygon> {
    let (l, r) = (0.5 - 0.5 * width, 0.5 + 0.5 * width);
    JordanPolygon::new(vec![
        Point2::new(0.0, 0.0),
        Point2::new(l, 0.0),
        Point2::new(l, depth),
        Point2::new(r, depth),
        Point2::new(r, 0.0),
        Point2::new(1.0, 0.0),
        Point2::new(1.0, 1.0),
        Point2::new(0.0, 1.0),
    ])
}

/// On-disk domain description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainFile {
    pub vertices: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cuts: Option<[f64; 4]>,
}

impl DomainFile {
    pub fn from_polygon(p: &JordanPolygon, cuts: Option<[f64; 4]>) -> Self {
        DomainFile { vertices: p.vertices().iter().map(|v| [v.x, v.y]).collect(), cuts }
    }

    pub fn polygon(&self) -> Result<JordanPolygon> {
        JordanPolygon::new(self.vertices.iter().map(|v| Point2::new(v[0], v[1])).collect())
    }

    pub fn quadrilateral(&self, p: &JordanPolygon) -> Result<Option<Quadrilateral>> {
        self.cuts.map(|c| split_boundary(p, c)).transpose()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Serializes with shortest round-trip decimal literals.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("domain file serializes")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        DomainFile::from_json(&text)
    }
}

//! Triangulation of polygonal domains.
//!
//! Meshes are built by ear-clipping the polygon, flipping to the constrained
//! Delaunay triangulation, and then bisecting the longest edges until every
//! edge satisfies the requested size. Every insertion is followed by local
//! Delaunay flips; boundary edges are never flipped.

use std::collections::VecDeque;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{orient, BoundaryArc, JordanPolygon, Point2, Polyline};

/// Smallest angle (degrees) accepted in a finished mesh.
pub const MIN_ANGLE_DEG: f64 = 10.0;

const QUALITY_ROUNDS: usize = 200;

// Triangles just above the threshold are also improved, so that later size
// refinement does not push them below it.
const QUALITY_MARGIN_DEG: f64 = 2.0;

/// Local target edge length as a function of position.
pub type Sizing<'a> = dyn Fn(Point2) -> f64 + Sync + 'a;

/// A conforming triangulation of a polygonal domain.
#[derive(Debug, Clone)]
pub struct TriMesh {
    domain: JordanPolygon,
    nodes: Vec<Point2>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<Option<f64>>,
    h: f64,
    edges: Vec<[usize; 2]>,
    adj_offsets: Vec<usize>,
    adj: Vec<usize>,
}

/// A labelled set of mesh nodes, used as Dirichlet support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSet {
    pub indices: Vec<usize>,
    pub label: String,
}

impl NodeSet {
    pub fn new(mut indices: Vec<usize>, label: impl Into<String>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        NodeSet { indices, label: label.into() }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn is_superset(&self, other: &NodeSet) -> bool {
        other.indices.iter().all(|&i| self.contains(i))
    }
}

impl TriMesh {
    fn from_parts(
        domain: JordanPolygon,
        nodes: Vec<Point2>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<Option<f64>>,
    ) -> TriMesh {
        let mut edges: Vec<[usize; 2]> = triangles
            .iter()
            .flat_map(|t| [[t[0], t[1]], [t[1], t[2]], [t[2], t[0]]])
            .map(|[a, b]| if a < b { [a, b] } else { [b, a] })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        let mut deg = vec![0usize; nodes.len()];
        for e in &edges {
            deg[e[0]] += 1;
            deg[e[1]] += 1;
        }
        let mut adj_offsets = vec![0usize; nodes.len() + 1];
        for i in 0..nodes.len() {
            adj_offsets[i + 1] = adj_offsets[i] + deg[i];
        }
        let mut fill = adj_offsets.clone();
        let mut adj = vec![0usize; adj_offsets[nodes.len()]];
        for e in &edges {
            adj[fill[e[0]]] = e[1];
            fill[e[0]] += 1;
            adj[fill[e[1]]] = e[0];
            fill[e[1]] += 1;
        }
        for i in 0..nodes.len() {
            adj[adj_offsets[i]..adj_offsets[i + 1]].sort_unstable();
        }
        let h = edges.iter().map(|e| nodes[e[0]].dist(nodes[e[1]])).fold(0.0, f64::max);
        TriMesh { domain, nodes, triangles, boundary, h, edges, adj_offsets, adj }
    }

    pub fn domain(&self) -> &JordanPolygon {
        &self.domain
    }

    pub fn nodes(&self) -> &[Point2] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Longest edge length.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Arc-length parameter of a boundary node, `None` for interior nodes.
    pub fn boundary_param(&self, i: usize) -> Option<f64> {
        self.boundary[i]
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i].is_some()
    }

    /// Boundary nodes with their arc-length parameters, in node order.
    pub fn boundary_nodes(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.boundary.iter().enumerate().filter_map(|(i, s)| s.map(|s| (i, s)))
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Sorted neighbours of node `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[self.adj_offsets[i]..self.adj_offsets[i + 1]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        0.5 * orient(self.nodes[a], self.nodes[b], self.nodes[c])
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Smallest interior angle of any triangle, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| min_angle(self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]))
            .fold(180.0, f64::min)
    }

    /// Same connectivity with every node scaled by `s` about the origin.
    pub fn scaled(&self, s: f64) -> Result<TriMesh> {
        let domain = self.domain.scaled(s)?;
        let nodes = self.nodes.iter().map(|&p| p * s).collect();
        let boundary = self.boundary.iter().map(|b| b.map(|t| t * s)).collect();
        Ok(TriMesh::from_parts(domain, nodes, self.triangles.clone(), boundary))
    }

    /// Boundary node indices ordered by arc-length parameter.
    pub fn boundary_cycle(&self) -> Vec<usize> {
        let mut b: Vec<(usize, f64)> = self.boundary_nodes().collect();
        b.sort_by(|x, y| x.1.partial_cmp(&y.1).unwrap().then(x.0.cmp(&y.0)));
        b.into_iter().map(|(i, _)| i).collect()
    }

    pub fn export(&self) -> MeshExport {
        MeshExport {
            nodes: self.nodes.iter().map(|p| [p.x, p.y]).collect(),
            triangles: self.triangles.clone(),
            boundary: self.boundary_nodes().collect(),
            h: self.h,
        }
    }
}

/// Structured-text mesh dump.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshExport {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<(usize, f64)>,
    pub h: f64,
}

fn min_angle(a: Point2, b: Point2, c: Point2) -> f64 {
    let ang = |p: Point2, q: Point2, r: Point2| {
        let (u, v) = (q - p, r - p);
        u.cross(v).abs().atan2(u.dot(v)).to_degrees()
    };
    ang(a, b, c).min(ang(b, c, a)).min(ang(c, a, b))
}

/// Options for [`mesh_with`].
pub struct MeshSpec<'a> {
    /// Global upper bound on edge length.
    pub h: f64,
    /// Boundary arc-length parameters that must appear as mesh nodes.
    pub boundary_points: Vec<f64>,
    /// Optional local size; the effective size is `min(h, sizing(z))`.
    pub sizing: Option<Box<Sizing<'a>>>,
}

impl<'a> MeshSpec<'a> {
    pub fn uniform(h: f64) -> Self {
        MeshSpec { h, boundary_points: Vec::new(), sizing: None }
    }

    pub fn with_boundary_points(mut self, s: impl IntoIterator<Item = f64>) -> Self {
        self.boundary_points.extend(s);
        self
    }

    pub fn with_sizing(mut self, f: impl Fn(Point2) -> f64 + Sync + 'a) -> Self {
        self.sizing = Some(Box::new(f));
        self
    }
}

/// Size field that shrinks linearly toward a set of points:
/// `clamp(h_min + grading * dist, h_min, h)`.
pub fn graded_toward_points(points: Vec<Point2>, h_min: f64, h: f64, grading: f64) -> impl Fn(Point2) -> f64 + Sync {
    move |z| {
        let d = points.iter().map(|p| p.dist(z)).fold(f64::INFINITY, f64::min);
        (h_min + grading * d).clamp(h_min, h)
    }
}

/// Size field that shrinks linearly toward a polyline.
pub fn graded_toward_curve(curve: Polyline, h_min: f64, h: f64, grading: f64) -> impl Fn(Point2) -> f64 + Sync {
    move |z| (h_min + grading * polyline_distance(&curve, z)).clamp(h_min, h)
}

pub fn polyline_distance(g: &Polyline, z: Point2) -> f64 {
    let v = g.vertices();
    if v.len() == 1 {
        return v[0].dist(z);
    }
    v.windows(2)
        .map(|w| crate::geometry::segment_distance(z, w[0], w[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Conforming triangulation with every edge no longer than `h`.
pub fn triangulate(domain: &JordanPolygon, h: f64) -> Result<TriMesh> {
    mesh_with(domain, &MeshSpec::uniform(h))
}

pub fn mesh_with(domain: &JordanPolygon, spec: &MeshSpec<'_>) -> Result<TriMesh> {
    if !(spec.h > 0.0) || !spec.h.is_finite() {
        return Err(Error::Precondition(format!("mesh size h = {} must be positive", spec.h)));
    }
    let worst_corner = smallest_corner_deg(domain);
    if worst_corner < MIN_ANGLE_DEG {
        return Err(Error::MeshFailure {
            message: format!("polygon corner sharper than {MIN_ANGLE_DEG} deg"),
            worst_angle_deg: worst_corner,
        });
    }
    let mut b = Builder::from_polygon(domain)?;
    b.legalize_all();
    for &s in &spec.boundary_points {
        b.insert_boundary_point(s);
    }
    let h = spec.h;
    let size = |z: Point2| match &spec.sizing {
        Some(f) => f(z).min(h),
        None => h,
    };
    b.refine(&size);
    b.improve_quality()?;
    // circumcenter insertion can leave an occasional long edge
    for _ in 0..4 {
        if !b.has_long_edge(&|a: Point2, c: Point2| size(a.lerp(c, 0.5))) {
            break;
        }
        b.refine(&size);
        b.improve_quality()?;
    }
    Ok(b.finish())
}

fn smallest_corner_deg(domain: &JordanPolygon) -> f64 {
    let v = domain.vertices();
    let n = v.len();
    (0..n)
        .map(|i| {
            let (prev, cur, next) = (v[(i + n - 1) % n], v[i], v[(i + 1) % n]);
            let (a, b) = (next - cur, prev - cur);
            a.cross(b).atan2(a.dot(b)).rem_euclid(std::f64::consts::TAU).to_degrees()
        })
        .fold(360.0, f64::min)
}

/// Refines edges touching `region` down to `mesh.h() / factor`.
pub fn refine_near(mesh: &TriMesh, region: impl Fn(Point2) -> bool + Sync, factor: f64) -> Result<TriMesh> {
    if !(factor > 1.0) {
        return Err(Error::Precondition(format!("refinement factor {factor} must exceed 1")));
    }
    let target = mesh.h() / factor;
    let tgt = |a: Point2, c: Point2| {
        if region(a) || region(c) || region(a.lerp(c, 0.5)) {
            target
        } else {
            f64::INFINITY
        }
    };
    let mut b = Builder::from_mesh(mesh);
    b.refine_edges(&tgt);
    b.improve_quality()?;
    for _ in 0..4 {
        if !b.has_long_edge(&tgt) {
            break;
        }
        b.refine_edges(&tgt);
        b.improve_quality()?;
    }
    Ok(b.finish())
}

/// Boundary nodes whose parameter lies in the closed arc.
pub fn tag_arc(mesh: &TriMesh, arc: &BoundaryArc) -> Result<NodeSet> {
    let p = mesh.domain().perimeter();
    if (arc.perimeter - p).abs() > 1e-9 * p {
        return Err(Error::Precondition("arc belongs to a different domain".into()));
    }
    let tol = 1e-9 * p;
    let idx: Vec<usize> = mesh.boundary_nodes().filter(|&(_, s)| arc.contains(s, tol)).map(|(i, _)| i).collect();
    if idx.is_empty() {
        return Err(Error::EmptyTag(format!("arc [{}, {}]", arc.s_start, arc.s_end)));
    }
    Ok(NodeSet::new(idx, format!("arc[{:.6},{:.6}]", arc.s_start, arc.s_end)))
}

/// Interior nodes within `radius` of the curve; the set must be connected
/// through mesh edges.
pub fn tag_near_curve(mesh: &TriMesh, curve: &Polyline, radius: f64) -> Result<NodeSet> {
    let v = curve.vertices();
    let (mut lo, mut hi) = (v[0], v[0]);
    for p in v {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    let idx: Vec<usize> = (0..mesh.num_nodes())
        .filter(|&i| {
            let z = mesh.nodes[i];
            !mesh.is_boundary(i)
                && z.x >= lo.x - radius
                && z.x <= hi.x + radius
                && z.y >= lo.y - radius
                && z.y <= hi.y + radius
                && polyline_distance(curve, z) <= radius
        })
        .collect();
    if idx.is_empty() {
        return Err(Error::EmptyTag(format!("no interior node within {radius} of the curve")));
    }
    let set = NodeSet::new(idx, "curve");
    if !is_connected(mesh, &set) {
        return Err(Error::DisconnectedTag(format!("{} nodes within {radius} of the curve", set.len())));
    }
    Ok(set)
}

fn is_connected(mesh: &TriMesh, set: &NodeSet) -> bool {
    let mut seen = vec![false; set.len()];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(k) = queue.pop_front() {
        for &j in mesh.neighbors(set.indices[k]) {
            if let Ok(m) = set.indices.binary_search(&j) {
                if !seen[m] {
                    seen[m] = true;
                    count += 1;
                    queue.push_back(m);
                }
            }
        }
    }
    count == set.len()
}

/// Mutable triangulation used during construction. Directed edges map to the
/// triangle on their left.
struct Builder {
    domain: JordanPolygon,
    nodes: Vec<Point2>,
    param: Vec<Option<f64>>,
    tris: Vec<[u32; 3]>,
    edge_map: FxHashMap<(u32, u32), u32>,
}

fn circumcenter(a: Point2, b: Point2, c: Point2) -> Option<Point2> {
    let (u, v) = (b - a, c - a);
    let d = 2.0 * u.cross(v);
    if d.abs() <= f64::MIN_POSITIVE {
        return None;
    }
    let (lu, lv) = (u.norm_sq(), v.norm_sq());
    Some(a + Point2::new(v.y * lu - u.y * lv, u.x * lv - v.x * lu) / d)
}

/// Positive when `d` lies strictly inside the circumcircle of the
/// counterclockwise triangle `abc`, beyond rounding error.
fn incircle(a: Point2, b: Point2, c: Point2, d: Point2) -> f64 {
    let (ad, bd, cd) = (a - d, b - d, c - d);
    let (la, lb, lc) = (ad.norm_sq(), bd.norm_sq(), cd.norm_sq());
    let det = ad.x * (bd.y * lc - lb * cd.y) - ad.y * (bd.x * lc - lb * cd.x) + la * (bd.x * cd.y - bd.y * cd.x);
    let perm = ad.x.abs() * (bd.y.abs() * lc + lb * cd.y.abs())
        + ad.y.abs() * (bd.x.abs() * lc + lb * cd.x.abs())
        + la * (bd.x.abs() * cd.y.abs() + bd.y.abs() * cd.x.abs());
    if det.abs() <= 1e-13 * perm {
        0.0
    } else {
        det
    }
}

impl Builder {
    fn from_polygon(domain: &JordanPolygon) -> Result<Builder> {
        let n = domain.len();
        let nodes: Vec<Point2> = domain.vertices().to_vec();
        let param: Vec<Option<f64>> = (0..n).map(|i| Some(domain.vertex_param(i))).collect();
        let mut b = Builder { domain: domain.clone(), nodes, param, tris: Vec::new(), edge_map: FxHashMap::default() };
        for t in ear_clip(domain.vertices())? {
            b.add_tri(t);
        }
        Ok(b)
    }

    fn from_mesh(mesh: &TriMesh) -> Builder {
        let mut b = Builder {
            domain: mesh.domain.clone(),
            nodes: mesh.nodes.clone(),
            param: mesh.boundary.clone(),
            tris: Vec::new(),
            edge_map: FxHashMap::default(),
        };
        for t in &mesh.triangles {
            b.add_tri([t[0] as u32, t[1] as u32, t[2] as u32]);
        }
        b
    }

    fn add_tri(&mut self, t: [u32; 3]) -> u32 {
        let idx = self.tris.len() as u32;
        self.tris.push(t);
        for k in 0..3 {
            self.edge_map.insert((t[k], t[(k + 1) % 3]), idx);
        }
        idx
    }

    fn set_tri(&mut self, idx: u32, t: [u32; 3]) {
        let old = self.tris[idx as usize];
        for k in 0..3 {
            let e = (old[k], old[(k + 1) % 3]);
            if self.edge_map.get(&e) == Some(&idx) {
                self.edge_map.remove(&e);
            }
        }
        self.tris[idx as usize] = t;
        for k in 0..3 {
            self.edge_map.insert((t[k], t[(k + 1) % 3]), idx);
        }
    }

    /// Third vertex of the triangle left of the directed edge `a -> b`.
    fn apex(&self, a: u32, b: u32) -> Option<(u32, u32)> {
        let t = *self.edge_map.get(&(a, b))?;
        let tri = self.tris[t as usize];
        let c = tri.iter().copied().find(|&v| v != a && v != b).unwrap();
        Some((t, c))
    }

    fn p(&self, i: u32) -> Point2 {
        self.nodes[i as usize]
    }

    /// Restores the Delaunay property across edge `a -> b`, whose left
    /// triangle is `(a, b, v)`.
    fn legalize(&mut self, a: u32, b: u32, v: u32) {
        let mut stack = vec![(a, b, v)];
        while let Some((a, b, v)) = stack.pop() {
            let Some((t1, c)) = self.apex(a, b) else { continue };
            if c != v {
                continue;
            }
            let Some((t2, w)) = self.apex(b, a) else { continue };
            let (pa, pb, pv, pw) = (self.p(a), self.p(b), self.p(v), self.p(w));
            if incircle(pa, pb, pv, pw) <= 0.0 {
                continue;
            }
            if orient(pa, pw, pv) <= 0.0 || orient(pw, pb, pv) <= 0.0 {
                continue;
            }
            self.set_tri(t1, [a, w, v]);
            self.set_tri(t2, [w, b, v]);
            stack.push((a, w, v));
            stack.push((w, b, v));
        }
    }

    fn legalize_all(&mut self) {
        loop {
            let mut flipped = false;
            for t in 0..self.tris.len() {
                let tri = self.tris[t];
                for k in 0..3 {
                    let (a, b) = (tri[k], tri[(k + 1) % 3]);
                    let v = tri[(k + 2) % 3];
                    if self.tris[t] != tri {
                        break;
                    }
                    let Some((_, w)) = self.apex(b, a) else { continue };
                    let (pa, pb, pv, pw) = (self.p(a), self.p(b), self.p(v), self.p(w));
                    if incircle(pa, pb, pv, pw) > 0.0 && orient(pa, pw, pv) > 0.0 && orient(pw, pb, pv) > 0.0 {
                        self.legalize(a, b, v);
                        flipped = true;
                    }
                }
            }
            if !flipped {
                break;
            }
        }
    }

    /// Inserts `pt` on edge `a -> b`, splitting the one or two adjacent triangles.
    fn split_edge(&mut self, a: u32, b: u32, pt: Point2, param: Option<f64>) -> u32 {
        let m = self.nodes.len() as u32;
        self.nodes.push(pt);
        self.param.push(param);
        let (t1, c) = self.apex(a, b).expect("edge exists");
        let other = self.apex(b, a);
        self.set_tri(t1, [a, m, c]);
        self.add_tri([m, b, c]);
        if let Some((t2, d)) = other {
            self.set_tri(t2, [b, m, d]);
            self.add_tri([m, a, d]);
            self.legalize(d, b, m);
            self.legalize(a, d, m);
        }
        self.legalize(c, a, m);
        self.legalize(b, c, m);
        m
    }

    fn is_boundary_edge(&self, a: u32, b: u32) -> bool {
        self.edge_map.contains_key(&(a, b)) != self.edge_map.contains_key(&(b, a))
    }

    fn split_midpoint(&mut self, a: u32, b: u32) {
        // orient boundary edges along the domain (interior on the left)
        let (a, b) = if self.edge_map.contains_key(&(a, b)) { (a, b) } else { (b, a) };
        let pt = self.p(a).lerp(self.p(b), 0.5);
        let param = if self.is_boundary_edge(a, b) {
            let sa = self.param[a as usize].expect("boundary node has a parameter");
            Some(self.domain.wrap_param(sa + 0.5 * self.p(a).dist(self.p(b))))
        } else {
            None
        };
        self.split_edge(a, b, pt, param);
    }

    fn insert_boundary_point(&mut self, s: f64) {
        let s = self.domain.wrap_param(s);
        let per = self.domain.perimeter();
        let tol = 1e-12 * per;
        if self.param.iter().flatten().any(|&q| (q - s).abs() <= tol || per - (q - s).abs() <= tol) {
            return;
        }
        let mut found = None;
        for (&(a, b), _) in self.edge_map.iter() {
            if self.edge_map.contains_key(&(b, a)) {
                continue;
            }
            let sa = self.param[a as usize].unwrap();
            let len = self.p(a).dist(self.p(b));
            let off = (s - sa).rem_euclid(per);
            if off > 0.0 && off < len {
                found = Some((a, b));
                break;
            }
        }
        if let Some((a, b)) = found {
            let (pt, _) = self.domain.point_at(s);
            self.split_edge(a, b, pt, Some(s));
        }
    }

    /// Undirected edges `(a, b)` with `a < b` for interior edges, or in domain
    /// orientation for boundary edges.
    fn edge_list(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.tris.len() * 2);
        for tri in &self.tris {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                if a < b || !self.edge_map.contains_key(&(b, a)) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    fn edge_exists(&self, a: u32, b: u32) -> bool {
        self.edge_map.contains_key(&(a, b)) || self.edge_map.contains_key(&(b, a))
    }

    fn has_long_edge(&self, target: &(dyn Fn(Point2, Point2) -> f64 + Sync)) -> bool {
        self.edge_list().into_iter().any(|(a, b)| {
            let (pa, pb) = (self.p(a), self.p(b));
            pa.dist(pb) > target(pa, pb) * (1.0 + 1e-9)
        })
    }

    fn refine(&mut self, size: &(dyn Fn(Point2) -> f64 + Sync)) {
        self.refine_edges(&|a: Point2, b: Point2| size(a.lerp(b, 0.5)));
    }

    /// Longest-edge bisection until every edge is within its target length.
    fn refine_edges(&mut self, target: &(dyn Fn(Point2, Point2) -> f64 + Sync)) {
        loop {
            let mut long: Vec<(f64, u32, u32)> = self
                .edge_list()
                .into_iter()
                .filter_map(|(a, b)| {
                    let (pa, pb) = (self.p(a), self.p(b));
                    let l = pa.dist(pb);
                    (l > target(pa, pb) * (1.0 + 1e-9)).then_some((l, a, b))
                })
                .collect();
            if long.is_empty() {
                return;
            }
            long.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then((x.1, x.2).cmp(&(y.1, y.2))));
            for (_, a, b) in long {
                if self.edge_exists(a, b) {
                    self.split_midpoint(a, b);
                }
            }
        }
    }

    fn bad_triangles(&self) -> Vec<(u32, f64)> {
        let mut bad: Vec<(u32, f64)> = self
            .tris
            .iter()
            .enumerate()
            .filter_map(|(t, tri)| {
                let a = min_angle(self.p(tri[0]), self.p(tri[1]), self.p(tri[2]));
                (a < MIN_ANGLE_DEG + QUALITY_MARGIN_DEG).then_some((t as u32, a))
            })
            .collect();
        bad.sort_by(|x, y| x.1.partial_cmp(&y.1).unwrap().then(x.0.cmp(&y.0)));
        bad
    }

    fn boundary_edges(&self) -> Vec<(u32, u32)> {
        let mut out: Vec<(u32, u32)> =
            self.edge_map.keys().copied().filter(|&(a, b)| !self.edge_map.contains_key(&(b, a))).collect();
        out.sort_unstable();
        out
    }

    /// Walks from triangle `t` toward `q`. Returns the containing triangle, or
    /// the boundary edge crossed on the way.
    fn locate_from(&self, mut t: u32, q: Point2) -> std::result::Result<u32, (u32, u32)> {
        for _ in 0..4 * self.tris.len() + 16 {
            let tri = self.tris[t as usize];
            let mut next = None;
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                if orient(self.p(a), self.p(b), q) < 0.0 {
                    match self.apex(b, a) {
                        Some((t2, _)) => next = Some(t2),
                        None => return Err((a, b)),
                    }
                    break;
                }
            }
            match next {
                Some(t2) => t = t2,
                None => return Ok(t),
            }
        }
        Err((u32::MAX, u32::MAX))
    }

    fn insert_in_triangle(&mut self, t: u32, q: Point2) {
        let [a, b, c] = self.tris[t as usize];
        let m = self.nodes.len() as u32;
        self.nodes.push(q);
        self.param.push(None);
        self.set_tri(t, [a, b, m]);
        self.add_tri([b, c, m]);
        self.add_tri([c, a, m]);
        self.legalize(a, b, m);
        self.legalize(b, c, m);
        self.legalize(c, a, m);
    }

    /// Splits boundary edges whose opposite vertex lies inside their
    /// diametral circle, until none remain. Returns false if the node budget
    /// ran out.
    fn split_encroached(&mut self, limit: usize) -> bool {
        loop {
            let enc: Vec<(u32, u32)> = self
                .boundary_edges()
                .into_iter()
                .filter(|&(a, b)| {
                    let (_, c) = self.apex(a, b).unwrap();
                    (self.p(a) - self.p(c)).dot(self.p(b) - self.p(c)) < 0.0
                })
                .collect();
            if enc.is_empty() {
                return true;
            }
            for (a, b) in enc {
                if self.nodes.len() > limit {
                    return false;
                }
                if self.edge_map.contains_key(&(a, b)) && !self.edge_map.contains_key(&(b, a)) {
                    self.split_midpoint(a, b);
                }
            }
        }
    }

    /// Boundary edges of the Delaunay cavity of `q`, grown from triangle `t`.
    fn cavity_boundary_edges(&self, t: u32, q: Point2) -> Vec<(u32, u32)> {
        let mut seen = rustc_hash::FxHashSet::default();
        let mut stack = vec![t];
        seen.insert(t);
        let mut out = Vec::new();
        while let Some(t) = stack.pop() {
            let tri = self.tris[t as usize];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                match self.apex(b, a) {
                    None => out.push((a, b)),
                    Some((t2, _)) => {
                        if seen.contains(&t2) {
                            continue;
                        }
                        let [u, v, w] = self.tris[t2 as usize];
                        if incircle(self.p(u), self.p(v), self.p(w), q) > 0.0 {
                            seen.insert(t2);
                            stack.push(t2);
                        }
                    }
                }
            }
        }
        out
    }

    /// Delaunay refinement: circumcenters of poor triangles are inserted
    /// unless they encroach on a boundary edge, which is bisected instead.
    fn improve_quality(&mut self) -> Result<()> {
        let limit = 9 * self.nodes.len() + 20_000;
        for _ in 0..QUALITY_ROUNDS {
            if !self.split_encroached(limit) {
                break;
            }
            let bad = self.bad_triangles();
            if bad.iter().all(|x| x.1 >= MIN_ANGLE_DEG) {
                return Ok(());
            }
            let mut progress = false;
            for (t, _) in bad {
                if self.nodes.len() > limit {
                    break;
                }
                let tri = self.tris[t as usize];
                let (pa, pb, pc) = (self.p(tri[0]), self.p(tri[1]), self.p(tri[2]));
                if min_angle(pa, pb, pc) >= MIN_ANGLE_DEG + QUALITY_MARGIN_DEG {
                    continue;
                }
                let Some(cc) = circumcenter(pa, pb, pc) else { continue };
                let t2 = match self.locate_from(t, cc) {
                    Ok(t2) => t2,
                    Err((a, b)) => {
                        if a != u32::MAX {
                            self.split_midpoint(a, b);
                            progress = true;
                        }
                        continue;
                    }
                };
                let encroached: Vec<(u32, u32)> = self
                    .cavity_boundary_edges(t2, cc)
                    .into_iter()
                    .filter(|&(a, b)| {
                        let (p, q) = (self.p(a), self.p(b));
                        cc.dist(p.lerp(q, 0.5)) < 0.5 * p.dist(q)
                    })
                    .collect();
                if !encroached.is_empty() {
                    for (a, b) in encroached {
                        if self.edge_map.contains_key(&(a, b)) && !self.edge_map.contains_key(&(b, a)) {
                            self.split_midpoint(a, b);
                        }
                    }
                    progress = true;
                    continue;
                }
                let tri2 = self.tris[t2 as usize];
                let r = pa.dist(cc);
                if tri2.iter().any(|&v| self.p(v).dist(cc) < 1e-9 * r) {
                    continue;
                }
                // points on an edge go through the edge split
                let on_edge = (0..3).find(|&k| {
                    let (u, v) = (self.p(tri2[k]), self.p(tri2[(k + 1) % 3]));
                    orient(u, v, cc).abs() <= 1e-12 * u.dist(v) * u.dist(v)
                });
                match on_edge {
                    Some(k) => {
                        let (u, v) = (tri2[k], tri2[(k + 1) % 3]);
                        if self.is_boundary_edge(u, v) {
                            self.split_midpoint(u, v);
                        } else {
                            self.split_edge(u, v, cc, None);
                        }
                    }
                    None => self.insert_in_triangle(t2, cc),
                }
                progress = true;
            }
            if !progress {
                break;
            }
        }
        let worst = self.bad_triangles().first().map(|x| x.1).unwrap_or(180.0);
        if worst < MIN_ANGLE_DEG {
            return Err(Error::MeshFailure {
                message: format!("minimum angle {MIN_ANGLE_DEG} deg not reached"),
                worst_angle_deg: worst,
            });
        }
        Ok(())
    }

    fn finish(self) -> TriMesh {
        let triangles: Vec<[usize; 3]> =
            self.tris.iter().map(|t| [t[0] as usize, t[1] as usize, t[2] as usize]).collect();
        TriMesh::from_parts(self.domain, self.nodes, triangles, self.param)
    }
}

/// Ear-clipping triangulation of a simple counterclockwise polygon.
fn ear_clip(v: &[Point2]) -> Result<Vec<[u32; 3]>> {
    let n = v.len();
    let mut idx: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(n - 2);
    let mut guard = 0usize;
    let mut i = 0usize;
    while idx.len() > 3 {
        let m = idx.len();
        let (ip, ic, inx) = (idx[(i + m - 1) % m], idx[i % m], idx[(i + 1) % m]);
        let (a, b, c) = (v[ip], v[ic], v[inx]);
        let convex = orient(a, b, c) > 0.0;
        let is_ear = convex
            && idx.iter().all(|&k| {
                if k == ip || k == ic || k == inx {
                    return true;
                }
                let p = v[k];
                !(orient(a, b, p) >= 0.0 && orient(b, c, p) >= 0.0 && orient(c, a, p) >= 0.0)
            });
        if is_ear {
            out.push([ip as u32, ic as u32, inx as u32]);
            idx.remove(i % m);
            guard = 0;
            if i >= idx.len() {
                i = 0;
            }
        } else {
            i = (i + 1) % m;
            guard += 1;
            if guard > 2 * m {
                return Err(Error::MeshFailure { message: "ear clipping found no ear".into(), worst_angle_deg: 0.0 });
            }
        }
    }
    out.push([idx[0] as u32, idx[1] as u32, idx[2] as u32]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{l_hexagon, regular_polygon, split_boundary, unit_square};

    fn check_invariants(m: &TriMesh) {
        let area = m.domain().area();
        assert!((m.area() - area).abs() <= 1e-10 * area, "area {} vs {}", m.area(), area);
        for t in 0..m.triangles().len() {
            assert!(m.triangle_area(t) > 0.0);
        }
        assert!(m.min_angle_deg() >= MIN_ANGLE_DEG, "min angle {}", m.min_angle_deg());
        // each boundary edge of the triangulation lies on the polygon
        let mut count: FxHashMap<(usize, usize), usize> = FxHashMap::default();
        for t in m.triangles() {
            for k in 0..3 {
                let (a, b) = (t[k].min(t[(k + 1) % 3]), t[k].max(t[(k + 1) % 3]));
                *count.entry((a, b)).or_default() += 1;
            }
        }
        for (&(a, b), &c) in &count {
            assert!(c <= 2);
            if c == 1 {
                assert!(m.is_boundary(a) && m.is_boundary(b));
                let mid = m.nodes()[a].lerp(m.nodes()[b], 0.5);
                assert!(m.domain().dist_to_boundary(mid) < 1e-12);
            }
        }
        for (i, s) in m.boundary_nodes() {
            assert!(m.domain().point_at(s).0.dist(m.nodes()[i]) < 1e-12);
        }
    }

    #[test]
    fn square_coarse() {
        let m = triangulate(&unit_square(), 0.5).unwrap();
        assert!(m.triangles().len() >= 8);
        assert!(m.h() <= 0.5 + 1e-12);
        check_invariants(&m);
    }

    #[test]
    fn node_count_scales_like_inverse_square() {
        let n1 = triangulate(&unit_square(), 0.1).unwrap().num_nodes() as f64;
        let n2 = triangulate(&unit_square(), 0.05).unwrap().num_nodes() as f64;
        let predicted = n1 * 4.0;
        let ratio = n2 / predicted;
        assert!((0.25..=4.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn invariants_on_several_domains() {
        check_invariants(&triangulate(&regular_polygon(256, 1.0, Point2::ORIGIN).unwrap(), 0.08).unwrap());
        check_invariants(&triangulate(&l_hexagon(), 0.1).unwrap());
        check_invariants(&triangulate(&crate::geometry::notched_square(0.02, 0.5).unwrap(), 0.05).unwrap());
        check_invariants(&triangulate(&crate::geometry::annular_sector(0.5, 1.0, std::f64::consts::PI, 64).unwrap(), 0.05).unwrap());
    }

    #[test]
    fn collinear_vertices_are_merged() {
        let p = JordanPolygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(0.5, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ])
        .unwrap();
        check_invariants(&triangulate(&p, 0.3).unwrap());
    }

    #[test]
    fn sharp_corner_fails() {
        let p = JordanPolygon::new(vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(1.0, 0.05)]).unwrap();
        assert!(matches!(triangulate(&p, 0.1), Err(Error::MeshFailure { .. })));
    }

    #[test]
    fn side_tag_counts() {
        let sq = unit_square();
        let m = triangulate(&sq, 0.25).unwrap();
        let side = BoundaryArc::new(&sq, 0.0, 1.0).unwrap();
        assert_eq!(tag_arc(&m, &side).unwrap().len(), 5);
        let all = tag_arc(&m, &BoundaryArc::full(&sq, 0.0)).unwrap();
        assert_eq!(all.len(), m.boundary_nodes().count());
        let tiny = BoundaryArc::new(&sq, 0.01, 0.011).unwrap();
        assert!(matches!(tag_arc(&m, &tiny), Err(Error::EmptyTag(_))));
    }

    #[test]
    fn quadrilateral_tags_meet_at_cuts() {
        let sq = unit_square();
        let q = split_boundary(&sq, [0.5, 1.5, 2.5, 3.5]).unwrap();
        let spec = MeshSpec::uniform(0.1).with_boundary_points(q.cuts());
        let m = mesh_with(&sq, &spec).unwrap();
        let sets: Vec<NodeSet> = q.arcs.iter().map(|a| tag_arc(&m, a).unwrap()).collect();
        let total: usize = sets.iter().map(|s| s.len()).sum();
        assert_eq!(total, m.boundary_nodes().count() + 4);
        for i in 0..4 {
            let shared: Vec<usize> =
                sets[i].indices.iter().copied().filter(|&k| sets[(i + 1) % 4].contains(k)).collect();
            assert_eq!(shared.len(), 1);
            let s = m.boundary_param(shared[0]).unwrap();
            assert!((s - q.cuts()[(i + 1) % 4]).abs() < 1e-12);
        }
    }

    #[test]
    fn curve_tags() {
        let sq = unit_square();
        let m = triangulate(&sq, 0.1).unwrap();
        let g = Polyline::segment(Point2::new(0.2, 0.5), Point2::new(0.8, 0.5)).unwrap();
        let set = tag_near_curve(&m, &g, m.h()).unwrap();
        let mut rows: Vec<i64> = set.indices.iter().map(|&i| (m.nodes()[i].y * 1e6).round() as i64).collect();
        rows.sort_unstable();
        rows.dedup();
        assert!((1..=3).contains(&rows.len()), "rows {rows:?}");
        let short = Polyline::segment(Point2::new(0.5, 0.5), Point2::new(0.52, 0.5)).unwrap();
        assert!(!tag_near_curve(&m, &short, 2.0 * m.h()).unwrap().is_empty());
        let off = Polyline::segment(Point2::new(0.5123, 0.5311), Point2::new(0.5124, 0.5312)).unwrap();
        assert!(tag_near_curve(&m, &off, 0.0).is_err());
    }

    #[test]
    fn refine_near_bounds_edges() {
        let m = triangulate(&unit_square(), 0.2).unwrap();
        let region = |z: Point2| z.x < 0.3;
        let r = refine_near(&m, region, 4.0).unwrap();
        check_invariants(&r);
        for e in r.edges() {
            let (a, b) = (r.nodes()[e[0]], r.nodes()[e[1]]);
            if region(a) || region(b) || region(a.lerp(b, 0.5)) {
                assert!(a.dist(b) <= m.h() / 4.0 * (1.0 + 1e-9));
            }
        }
        assert!(r.num_nodes() > m.num_nodes());
        assert!(refine_near(&m, region, 1.0).is_err());
    }
}

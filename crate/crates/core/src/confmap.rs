//! Numerical Riemann map `φ: Ω → 𝔻` from the Green's function.
//!
//! With `H` the harmonic function equal to `log|z − z₀|` on the boundary and
//! `H̃` its harmonic conjugate, the Green's function is
//! `G = −log|z − z₀| + H` and
//!
//! ```text
//! φ(z) = exp(−G − iG̃) = (z − z₀) · exp(−(H + iH̃)).
//! ```
//!
//! Only the smooth pair `(H, H̃)` is discretized; the logarithmic part is kept
//! in closed form, so `φ(z₀) = 0` exactly and no branch cut of `arg(z − z₀)`
//! ever enters the mesh. `H̃` is integrated along a breadth-first tree of
//! edge midpoints from a boundary reference node.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{JordanPolygon, Point2, Polyline};
use crate::locate::{nearest_on_edges, TriLocator};
use crate::mesh::{graded_toward_points, mesh_with, MeshSpec, TriMesh};
use crate::variational::{basis_gradients, solve_dirichlet, ScalarField};

/// Largest accepted discrepancy of the conjugate around a mesh cycle.
pub const BRANCH_TOL: f64 = 1e-4;

/// Distance from the unit circle of the outermost interior sample on
/// boundary-to-boundary geodesics.
pub const IDEAL_GAP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct MapOptions {
    pub h: f64,
    /// Points near which the mesh is graded down to `h_min`.
    pub focus: Vec<Point2>,
    pub h_min: f64,
    pub grading: f64,
}

impl MapOptions {
    pub fn new(h: f64) -> Self {
        MapOptions { h, focus: Vec::new(), h_min: h / 16.0, grading: 0.25 }
    }

    pub fn with_focus(mut self, pts: impl IntoIterator<Item = Point2>) -> Self {
        self.focus.extend(pts);
        self
    }
}

#[derive(Debug, Clone)]
pub struct RiemannMap {
    domain: JordanPolygon,
    base_point: Point2,
    mesh: Arc<TriMesh>,
    /// Harmonic part `H` of the Green's function.
    correction: ScalarField,
    /// Conjugate `H̃` of the harmonic part.
    correction_conjugate: ScalarField,
    image: Vec<Complex64>,
    folded: Vec<bool>,
    domain_locator: TriLocator,
    image_locator: TriLocator,
    boundary_edges: Vec<[usize; 2]>,
    /// Boundary nodes in parameter order with their unwrapped angles.
    boundary_table: Vec<(usize, f64, f64)>,
    branch_residual: f64,
}

/// Deterministic interior base point: the polygon centroid when it lies well
/// inside, otherwise the point of a 64×64 grid farthest from the boundary.
pub fn default_base_point(domain: &JordanPolygon) -> Point2 {
    let c = domain.centroid();
    let (lo, hi) = domain.bbox();
    let mut best = (c, if domain.point_in_domain(c) { domain.dist_to_boundary(c) } else { -1.0 });
    let inradius_guess = 0.25 * (hi.x - lo.x).min(hi.y - lo.y);
    if best.1 >= 0.5 * inradius_guess {
        return c;
    }
    let n = 64;
    for j in 0..n {
        for i in 0..n {
            let z = Point2::new(
                lo.x + (hi.x - lo.x) * (i as f64 + 0.5) / n as f64,
                lo.y + (hi.y - lo.y) * (j as f64 + 0.5) / n as f64,
            );
            if domain.point_in_domain(z) {
                let d = domain.dist_to_boundary(z);
                if d > best.1 {
                    best = (z, d);
                }
            }
        }
    }
    best.0
}

pub fn build_map(domain: &JordanPolygon, z0: Point2, h: f64) -> Result<RiemannMap> {
    build_map_with(domain, z0, &MapOptions::new(h))
}

pub fn build_map_with(domain: &JordanPolygon, z0: Point2, opts: &MapOptions) -> Result<RiemannMap> {
    let h = opts.h;
    if !(h > 0.0) {
        return Err(Error::Precondition(format!("mesh size h = {h} must be positive")));
    }
    if !domain.point_in_domain(z0) || domain.dist_to_boundary(z0) < 4.0 * h {
        return Err(Error::Precondition(format!("base point {z0} must be interior with distance ≥ 4h to the boundary")));
    }
    let mut spec = MeshSpec::uniform(h);
    if !opts.focus.is_empty() {
        let tol = 1e-12 * domain.diam();
        for &p in &opts.focus {
            let (q, s) = domain.closest_boundary_point(p);
            if q.dist(p) <= tol {
                spec.boundary_points.push(s);
            }
        }
        spec = spec.with_sizing(graded_toward_points(opts.focus.clone(), opts.h_min, h, opts.grading));
    }
    let mesh = Arc::new(mesh_with(domain, &spec)?);
    let nodes = mesh.nodes();

    let fixed: Vec<Option<f64>> =
        (0..mesh.num_nodes()).map(|i| mesh.is_boundary(i).then(|| (nodes[i] - z0).norm().ln())).collect();
    let correction = solve_dirichlet(&mesh, &fixed)?;
    let hv = correction.values();

    let cycle = mesh.boundary_cycle();
    let reference = cycle[0];
    let (conj, branch_residual) = conjugate_by_midpoints(&mesh, hv, reference);
    if branch_residual > BRANCH_TOL {
        return Err(Error::BranchFailure(format!(
            "conjugate cycle residual {branch_residual:.3e} exceeds {BRANCH_TOL:e}"
        )));
    }
    let correction_conjugate = ScalarField::new(mesh.clone(), conj)?;

    let image: Vec<Complex64> = (0..mesh.num_nodes())
        .map(|i| phi_formula(nodes[i], z0, hv[i], correction_conjugate.values()[i]))
        .collect();
    let img_pts: Vec<Point2> = image.iter().map(|w| Point2::new(w.re, w.im)).collect();
    let folded: Vec<bool> = mesh
        .triangles()
        .iter()
        .map(|t| crate::geometry::orient(img_pts[t[0]], img_pts[t[1]], img_pts[t[2]]) <= 0.0)
        .collect();
    let active: Vec<bool> = folded.iter().map(|f| !f).collect();
    let image_locator = TriLocator::new(&img_pts, mesh.triangles(), Some(&active));
    let domain_locator = TriLocator::new(nodes, mesh.triangles(), None);

    let boundary_edges: Vec<[usize; 2]> = (0..cycle.len()).map(|k| [cycle[k], cycle[(k + 1) % cycle.len()]]).collect();
    let mut boundary_table = Vec::with_capacity(cycle.len());
    let mut prev = f64::NAN;
    for &i in &cycle {
        let raw = (nodes[i] - z0).y.atan2((nodes[i] - z0).x) - correction_conjugate.values()[i];
        let theta = if prev.is_nan() { raw } else { prev + wrap_angle(raw - prev) };
        boundary_table.push((i, mesh.boundary_param(i).unwrap(), theta));
        prev = theta;
    }

    Ok(RiemannMap {
        domain: domain.clone(),
        base_point: z0,
        mesh,
        correction,
        correction_conjugate,
        image,
        folded,
        domain_locator,
        image_locator,
        boundary_edges,
        boundary_table,
        branch_residual,
    })
}

/// Harmonic conjugate of the nodal field `hv`.
///
/// The rotated gradient `(−H_y, H_x)`, constant on each triangle, is
/// integrated between edge midpoints along a breadth-first tree that starts
/// at the boundary edge leaving `reference`. For a discrete harmonic `hv` the
/// increments around every interior vertex sum to zero, so the midpoint
/// values are single valued; the returned residual is the largest mismatch
/// over all midpoint pairs that share a triangle. Nodal values are the
/// area-weighted average of each incident triangle's linear extrapolation,
/// shifted to vanish at `reference`.
fn conjugate_by_midpoints(mesh: &TriMesh, hv: &[f64], reference: usize) -> (Vec<f64>, f64) {
    let nodes = mesh.nodes();
    let edges = mesh.edges();
    let edge_id = |a: usize, b: usize| edges.binary_search(&if a < b { [a, b] } else { [b, a] }).expect("mesh edge");
    let mid: Vec<Point2> = edges.iter().map(|e| nodes[e[0]].lerp(nodes[e[1]], 0.5)).collect();
    let tris = mesh.triangles();
    // local edge k joins vertices k and k+1
    let tri_edges: Vec<[usize; 3]> =
        tris.iter().map(|t| [edge_id(t[0], t[1]), edge_id(t[1], t[2]), edge_id(t[2], t[0])]).collect();
    let rot: Vec<Point2> = (0..tris.len())
        .map(|t| {
            let g = basis_gradients(mesh, t);
            let tri = tris[t];
            (g[0] * hv[tri[0]] + g[1] * hv[tri[1]] + g[2] * hv[tri[2]]).perp()
        })
        .collect();
    let mut edge_tris: Vec<Vec<usize>> = vec![Vec::new(); edges.len()];
    for (t, te) in tri_edges.iter().enumerate() {
        for &e in te {
            edge_tris[e].push(t);
        }
    }

    let start = mesh
        .neighbors(reference)
        .iter()
        .copied()
        .filter(|&b| mesh.is_boundary(b) && edge_tris[edge_id(reference, b)].len() == 1)
        .map(|b| edge_id(reference, b))
        .min()
        .expect("boundary node has a boundary edge");
    let mut val = vec![f64::NAN; edges.len()];
    val[start] = 0.0;
    let mut queue = VecDeque::from([start]);
    while let Some(e) = queue.pop_front() {
        for &t in &edge_tris[e] {
            for &f in &tri_edges[t] {
                if val[f].is_nan() {
                    val[f] = val[e] + rot[t].dot(mid[f] - mid[e]);
                    queue.push_back(f);
                }
            }
        }
    }
    let mut residual: f64 = 0.0;
    for (t, te) in tri_edges.iter().enumerate() {
        for k in 0..3 {
            let (e, f) = (te[k], te[(k + 1) % 3]);
            residual = residual.max((val[f] - val[e] - rot[t].dot(mid[f] - mid[e])).abs());
        }
    }

    let mut acc = vec![0.0; nodes.len()];
    let mut wsum = vec![0.0; nodes.len()];
    for (t, tri) in tris.iter().enumerate() {
        let te = tri_edges[t];
        let a = mesh.triangle_area(t);
        for k in 0..3 {
            // vertex k lies on local edges k and k+2; edge k+1 is opposite
            let v = val[te[k]] + val[te[(k + 2) % 3]] - val[te[(k + 1) % 3]];
            acc[tri[k]] += a * v;
            wsum[tri[k]] += a;
        }
    }
    let mut conj: Vec<f64> = acc.iter().zip(&wsum).map(|(a, w)| a / w).collect();
    let shift = conj[reference];
    for c in &mut conj {
        *c -= shift;
    }
    (conj, residual)
}

fn phi_formula(z: Point2, z0: Point2, h: f64, h_conj: f64) -> Complex64 {
    Complex64::new(z.x - z0.x, z.y - z0.y) * Complex64::new(-h, -h_conj).exp()
}

/// Reduces an angle difference to `(−π, π]`.
fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

fn to_p(w: Complex64) -> Point2 {
    Point2::new(w.re, w.im)
}

/// One row of the boundary correspondence: arc-length parameter and the
/// unwrapped angle of its image on the unit circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceRow {
    pub s: f64,
    pub theta: f64,
}

impl RiemannMap {
    pub fn domain(&self) -> &JordanPolygon {
        &self.domain
    }

    pub fn base_point(&self) -> Point2 {
        self.base_point
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    /// Harmonic part `H` of the Green's function at the nodes.
    pub fn correction(&self) -> &ScalarField {
        &self.correction
    }

    pub fn correction_conjugate(&self) -> &ScalarField {
        &self.correction_conjugate
    }

    /// Green's function at the nodes; `+∞` at a node placed on the base point.
    pub fn green_nodal(&self) -> Vec<f64> {
        self.mesh
            .nodes()
            .iter()
            .zip(self.correction.values())
            .map(|(z, h)| -(*z - self.base_point).norm().ln() + h)
            .collect()
    }

    /// Nodal conjugate `G̃ = −arg(z − z₀) + H̃`, with `arg` in `(−π, π]`.
    pub fn conjugate_nodal(&self) -> Vec<f64> {
        self.mesh
            .nodes()
            .iter()
            .zip(self.correction_conjugate.values())
            .map(|(z, c)| {
                let d = *z - self.base_point;
                -d.y.atan2(d.x) + c
            })
            .collect()
    }

    /// `φ` at the mesh nodes: the vertices of the image triangulation.
    pub fn image_nodes(&self) -> &[Complex64] {
        &self.image
    }

    /// Per-triangle flag for triangles whose image has nonpositive area.
    pub fn folded(&self) -> &[bool] {
        &self.folded
    }

    /// Largest conjugate discrepancy over the cycles closed by non-tree links.
    pub fn branch_residual(&self) -> f64 {
        self.branch_residual
    }

    /// `φ(z)` for a point of the closed domain.
    pub fn phi(&self, z: Point2) -> Result<Complex64> {
        if z == self.base_point {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let (t, l) = self
            .domain_locator
            .locate(z)
            .ok_or_else(|| Error::Precondition(format!("point {z} is outside the meshed domain")))?;
        let tri = self.mesh.triangles()[t];
        let h: f64 = (0..3).map(|k| l[k] * self.correction.values()[tri[k]]).sum();
        let hc: f64 = (0..3).map(|k| l[k] * self.correction_conjugate.values()[tri[k]]).sum();
        Ok(phi_formula(z, self.base_point, h, hc))
    }

    fn phi_interior(&self, z: Point2) -> Result<Complex64> {
        if !self.domain.point_in_domain(z) {
            return Err(Error::Precondition(format!("point {z} is not interior")));
        }
        self.phi(z)
    }

    /// Piecewise-linear inverse `φ⁻¹(w)` through the image triangulation.
    /// Disk points between the unit circle and the image boundary polygon
    /// are projected onto the nearest image boundary edge.
    pub fn inverse(&self, w: Complex64) -> Result<Point2> {
        let q = to_p(w);
        let nodes = self.mesh.nodes();
        if let Some((t, l)) = self.image_locator.locate(q) {
            let tri = self.mesh.triangles()[t];
            return Ok(nodes[tri[0]] * l[0] + nodes[tri[1]] * l[1] + nodes[tri[2]] * l[2]);
        }
        if w.norm() <= 1.0 + 1e-12 {
            let img: Vec<Point2> = self.image.iter().map(|&w| to_p(w)).collect();
            if let Some((k, s, d)) = nearest_on_edges(&img, &self.boundary_edges, q) {
                let [a, b] = self.boundary_edges[k];
                let chord = img[a].dist(img[b]);
                // sagitta of the chord on the unit circle, with slack
                let sag = 1.0 - (1.0 - 0.25 * chord * chord).max(0.0).sqrt();
                if d <= 2.0 * sag + 1e-12 {
                    return Ok(nodes[a].lerp(nodes[b], s));
                }
            }
        }
        Err(Error::LookupFailure(format!("disk point ({:.6}, {:.6}) is not covered by the image mesh", w.re, w.im)))
    }

    /// Unwrapped boundary angle `θ(s) = arg φ` at arc-length parameter `s`,
    /// increasing from the reference node at the smallest parameter.
    pub fn boundary_angle(&self, s: f64) -> f64 {
        let s = self.domain.wrap_param(s);
        let t = &self.boundary_table;
        let per = self.domain.perimeter();
        let k = t.partition_point(|r| r.1 <= s);
        let (s0, th0, s1, th1) = if k == 0 {
            let last = t[t.len() - 1];
            (last.1 - per, last.2 - 2.0 * PI, t[0].1, t[0].2)
        } else if k == t.len() {
            let last = t[t.len() - 1];
            (last.1, last.2, t[0].1 + per, t[0].2 + 2.0 * PI)
        } else {
            (t[k - 1].1, t[k - 1].2, t[k].1, t[k].2)
        };
        let f = if s1 > s0 { (s - s0) / (s1 - s0) } else { 0.0 };
        th0 + f * (th1 - th0)
    }

    /// Image of the boundary point with parameter `s` on the unit circle.
    pub fn boundary_image(&self, s: f64) -> Complex64 {
        Complex64::from_polar(1.0, self.boundary_angle(s))
    }

    pub fn correspondence_table(&self) -> Vec<CorrespondenceRow> {
        self.boundary_table.iter().map(|&(_, s, theta)| CorrespondenceRow { s, theta }).collect()
    }

    /// Total increase of the boundary angle around the boundary.
    pub fn boundary_winding(&self) -> f64 {
        let t = &self.boundary_table;
        let first = t[0];
        let last = t[t.len() - 1];
        let closing = wrap_angle(first.2 - last.2);
        last.2 + closing - first.2
    }
}

/// Hyperbolic distance `2 artanh |(w₁ − w₂) / (1 − w₁ w̄₂)|` with `w = φ(z)`.
pub fn hyperbolic_distance(map: &RiemannMap, z1: Point2, z2: Point2) -> Result<f64> {
    let w1 = map.phi_interior(z1)?;
    let w2 = map.phi_interior(z2)?;
    Ok(disk_distance(w1, w2))
}

pub fn disk_distance(w1: Complex64, w2: Complex64) -> f64 {
    let r = (w1 - w2).norm() / (Complex64::new(1.0, 0.0) - w1 * w2.conj()).norm();
    2.0 * r.min(1.0 - f64::EPSILON).atanh()
}

/// A geodesic with its samples in the disk and their preimages.
#[derive(Debug, Clone)]
pub struct Geodesic {
    pub disk: Vec<Complex64>,
    pub path: Polyline,
    /// Boundary parameters of the endpoints for boundary-to-boundary geodesics.
    pub boundary_params: Option<[f64; 2]>,
}

fn mobius(w: Complex64, a: Complex64) -> Complex64 {
    (w + a) / (Complex64::new(1.0, 0.0) + a.conj() * w)
}

fn pull_back(map: &RiemannMap, disk: &[Complex64], first: Point2, last: Point2) -> Result<Vec<Point2>> {
    let mut pts = Vec::with_capacity(disk.len());
    pts.push(first);
    for &w in &disk[1..disk.len() - 1] {
        pts.push(map.inverse(w)?);
    }
    pts.push(last);
    Ok(pts)
}

/// Hyperbolic geodesic between interior points, `n` samples equidistributed
/// in hyperbolic length.
pub fn geodesic(map: &RiemannMap, z1: Point2, z2: Point2, n: usize) -> Result<Geodesic> {
    if n < 16 {
        return Err(Error::Precondition(format!("{n} samples, need at least 16")));
    }
    if z1 == z2 {
        return Err(Error::Precondition("geodesic endpoints coincide".into()));
    }
    let w1 = map.phi_interior(z1)?;
    let w2 = map.phi_interior(z2)?;
    // move w1 to the origin; the geodesic becomes a radius
    let v = mobius(w2, -w1);
    let d = disk_distance(w1, w2);
    let dir = if v.norm() > 0.0 { v / v.norm() } else { Complex64::new(1.0, 0.0) };
    let disk: Vec<Complex64> = (0..n)
        .map(|k| {
            let t = k as f64 / (n - 1) as f64;
            mobius(dir * (0.5 * t * d).tanh(), w1)
        })
        .collect();
    let mut disk = disk;
    disk[0] = w1;
    disk[n - 1] = w2;
    let pts = pull_back(map, &disk, z1, z2)?;
    Ok(Geodesic { disk, path: Polyline::from_points_dedup(pts)?, boundary_params: None })
}

pub fn hyperbolic_geodesic(map: &RiemannMap, z1: Point2, z2: Point2, n: usize) -> Result<Polyline> {
    Ok(geodesic(map, z1, z2, n)?.path)
}

/// Geodesic between the boundary points with parameters `y1` and `y2`.
/// Interior samples are equidistributed in hyperbolic length and stop at
/// [`IDEAL_GAP`] from the unit circle; the endpoints are the boundary points.
pub fn boundary_geodesic_full(map: &RiemannMap, y1: f64, y2: f64, n: usize) -> Result<Geodesic> {
    if n < 16 {
        return Err(Error::Precondition(format!("{n} samples, need at least 16")));
    }
    let dom = map.domain();
    let (s1, s2) = (dom.wrap_param(y1), dom.wrap_param(y2));
    if (s1 - s2).abs() <= 1e-12 * dom.perimeter() {
        return Err(Error::Precondition("boundary geodesic endpoints coincide".into()));
    }
    let u1 = map.boundary_image(s1);
    let u2 = map.boundary_image(s2);
    let sum = u1 + u2;
    // closest point of the geodesic to the origin, and the direction of the
    // diameter that the Möbius shift carries onto the geodesic
    let (m, axis) = if sum.norm() < 1e-14 {
        (Complex64::new(0.0, 0.0), u1)
    } else {
        let mdir = sum / sum.norm();
        let cos_b = (u1 * mdir.conj()).re.clamp(-1.0, 1.0);
        let sin_b = (1.0 - cos_b * cos_b).sqrt();
        let rho = (1.0 - sin_b) / cos_b;
        let axis = Complex64::new(0.0, 1.0) * mdir;
        // orient the axis toward u1
        let axis = if (mobius(axis, mdir * rho) - u1).norm() <= (mobius(-axis, mdir * rho) - u1).norm() { axis } else { -axis };
        (mdir * rho, axis)
    };
    let big_s = (1.0 - IDEAL_GAP).atanh();
    let mut disk = Vec::with_capacity(n);
    disk.push(u1);
    for k in 0..n - 2 {
        let s = big_s - 2.0 * big_s * k as f64 / (n - 3) as f64;
        disk.push(mobius(axis * s.tanh(), m));
    }
    disk.push(u2);
    let p1 = dom.point_at(s1).0;
    let p2 = dom.point_at(s2).0;
    let pts = pull_back(map, &disk, p1, p2)?;
    // keep interior samples strictly inside
    let mut keep_disk = vec![disk[0]];
    let mut keep_pts = vec![pts[0]];
    for k in 1..n - 1 {
        if dom.point_in_domain(pts[k]) {
            keep_disk.push(disk[k]);
            keep_pts.push(pts[k]);
        }
    }
    keep_disk.push(disk[n - 1]);
    keep_pts.push(pts[n - 1]);
    Ok(Geodesic { disk: keep_disk, path: Polyline::from_points_dedup(keep_pts)?, boundary_params: Some([s1, s2]) })
}

pub fn boundary_geodesic(map: &RiemannMap, y1: f64, y2: f64, n: usize) -> Result<Polyline> {
    Ok(boundary_geodesic_full(map, y1, y2, n)?.path)
}

/// Preimage of `{r/2 < |w − φ(y)| < r}`, `r = 2^{−k}`.
#[derive(Debug, Clone)]
pub struct ConformalAnnulus {
    pub center_param: f64,
    pub center_boundary_point: Point2,
    pub center_image: Complex64,
    pub k: u32,
    pub r: f64,
    /// Triangles whose image centroid lies in the disk annulus.
    pub triangles: Vec<usize>,
    /// Nodes whose image lies in the disk annulus.
    pub nodes: Vec<usize>,
}

impl ConformalAnnulus {
    pub fn contains_image(&self, w: Complex64) -> bool {
        let d = (w - self.center_image).norm();
        0.5 * self.r < d && d < self.r
    }

    /// Pieces of a geodesic whose disk image lies in the annulus, clipped at
    /// the two circles.
    pub fn pieces(&self, g: &Geodesic) -> Vec<Polyline> {
        let pts = g.path.vertices();
        if pts.len() != g.disk.len() {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut cur: Vec<Point2> = Vec::new();
        for j in 0..pts.len() - 1 {
            let (a, b) = (g.disk[j], g.disk[j + 1]);
            for (t0, t1) in self.inside_intervals(a, b) {
                let p0 = pts[j].lerp(pts[j + 1], t0);
                let p1 = pts[j].lerp(pts[j + 1], t1);
                if cur.last() != Some(&p0) {
                    if cur.len() > 1 {
                        out.push(std::mem::take(&mut cur));
                    }
                    cur = vec![p0];
                }
                if p1 != p0 {
                    cur.push(p1);
                }
            }
        }
        if cur.len() > 1 {
            out.push(cur);
        }
        out.into_iter().filter_map(|v| Polyline::from_points_dedup(v).ok()).filter(|p| !p.is_degenerate()).collect()
    }

    /// Parameter intervals of the disk segment `a + t (b − a)` inside the annulus.
    fn inside_intervals(&self, a: Complex64, b: Complex64) -> Vec<(f64, f64)> {
        let c = self.center_image;
        let (d, e) = (b - a, a - c);
        let qa = d.norm_sqr();
        let qb = 2.0 * (d.re * e.re + d.im * e.im);
        let qc = e.norm_sqr();
        let mut cuts = vec![0.0, 1.0];
        for rad in [0.5 * self.r, self.r] {
            let disc = qb * qb - 4.0 * qa * (qc - rad * rad);
            if qa > 0.0 && disc > 0.0 {
                for t in [(-qb - disc.sqrt()) / (2.0 * qa), (-qb + disc.sqrt()) / (2.0 * qa)] {
                    if t > 0.0 && t < 1.0 {
                        cuts.push(t);
                    }
                }
            }
        }
        cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut out: Vec<(f64, f64)> = Vec::new();
        for w in cuts.windows(2) {
            if w[1] <= w[0] {
                continue;
            }
            let mid = a + d * (0.5 * (w[0] + w[1]));
            if self.contains_image(mid) {
                match out.last_mut() {
                    Some(last) if last.1 == w[0] => last.1 = w[1],
                    _ => out.push((w[0], w[1])),
                }
            }
        }
        out
    }
}

/// Minimum number of mesh nodes whose image must fall in the annulus.
pub const MIN_ANNULUS_NODES: usize = 8;

pub fn conformal_annulus(map: &RiemannMap, y: f64, k: u32) -> Result<ConformalAnnulus> {
    let s = map.domain().wrap_param(y);
    let r = 0.5f64.powi(k as i32);
    let wy = map.boundary_image(s);
    let mut ann = ConformalAnnulus {
        center_param: s,
        center_boundary_point: map.domain().point_at(s).0,
        center_image: wy,
        k,
        r,
        triangles: Vec::new(),
        nodes: Vec::new(),
    };
    ann.nodes = (0..map.image.len()).filter(|&i| ann.contains_image(map.image[i])).collect();
    if ann.nodes.len() < MIN_ANNULUS_NODES {
        return Err(Error::UnresolvedScale(format!(
            "{} nodes in the image annulus at k = {k}, need {MIN_ANNULUS_NODES}",
            ann.nodes.len()
        )));
    }
    ann.triangles = map
        .mesh
        .triangles()
        .iter()
        .enumerate()
        .filter(|(_, t)| {
            let c = (map.image[t[0]] + map.image[t[1]] + map.image[t[2]]) / 3.0;
            ann.contains_image(c)
        })
        .map(|(i, _)| i)
        .collect();
    Ok(ann)
}

/// Area in Ω of the triangles assigned to an annulus.
pub fn annulus_area(map: &RiemannMap, ann: &ConformalAnnulus) -> f64 {
    ann.triangles.iter().map(|&t| map.mesh.triangle_area(t)).sum()
}

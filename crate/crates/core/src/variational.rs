//! Minimization of the p-Dirichlet energy over continuous piecewise-linear
//! fields, and the condenser capacities built on it.
//!
//! The regularized energy `∑_T |T| (eps² + |∇u|²)^{p/2}` is minimized for a
//! decreasing sequence of `eps`, each stage warm-starting the next. Every
//! step solves a weighted stiffness system: either the plain reweighted
//! Laplacian (IRLS) or the full Hessian of the regularized energy (Newton).
//! Steps are damped by backtracking so the energy never increases.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{segment_distance, BoundaryArc, JordanPolygon, Point2, Polyline};
use crate::linsolve::{Local, StiffnessPattern};
use crate::mesh::{graded_toward_curve, graded_toward_points, mesh_with, tag_arc, tag_near_curve, MeshSpec, NodeSet, TriMesh};

/// Triangles per task in parallel loops. Fixed so that reductions are
/// independent of the thread count.
const CHUNK: usize = 2048;

/// Nodal values of a continuous piecewise-linear function.
#[derive(Debug, Clone)]
pub struct ScalarField {
    mesh: Arc<TriMesh>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(mesh: Arc<TriMesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_nodes() {
            return Err(Error::Precondition(format!(
                "{} values for {} nodes",
                values.len(),
                mesh.num_nodes()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("non-finite field value".into()));
        }
        Ok(ScalarField { mesh, values })
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Constant gradient on triangle `t`.
    pub fn gradient(&self, t: usize) -> Point2 {
        let tri = self.mesh.triangles()[t];
        let g = basis_gradients(&self.mesh, t);
        g[0] * self.values[tri[0]] + g[1] * self.values[tri[1]] + g[2] * self.values[tri[2]]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Gradients of the three barycentric basis functions of triangle `t`.
pub fn basis_gradients(mesh: &TriMesh, t: usize) -> [Point2; 3] {
    let [a, b, c] = mesh.triangles()[t].map(|i| mesh.nodes()[i]);
    let two_area = crate::geometry::orient(a, b, c);
    [(c - b).perp() / two_area, (a - c).perp() / two_area, (b - a).perp() / two_area]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Reweighted Laplacian with weights `(eps² + |∇u|²)^{(p−2)/2}`.
    Irls,
    /// Hessian of the regularized energy, which adds the anisotropic term
    /// `(p−2) ∇u ∇uᵀ / (eps² + |∇u|²)` to the IRLS weight.
    Newton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub p: f64,
    /// Regularization levels in units of `1 / diam(Ω)`, strictly decreasing.
    pub eps_schedule: Vec<f64>,
    /// Relative energy decrement accepted as converged in the final stage.
    pub tol_energy: f64,
    /// Largest nodal update accepted as converged in the final stage.
    pub tol_field: f64,
    /// Total step budget over all stages.
    pub max_iters: usize,
    pub method: Method,
}

impl SolverConfig {
    pub fn new(p: f64) -> Self {
        SolverConfig {
            p,
            eps_schedule: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
            tol_energy: 1e-10,
            tol_field: 1e-7,
            max_iters: 400,
            method: Method::Newton,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(Error::Precondition(format!("exponent p = {} must satisfy 1 < p < ∞", self.p)));
        }
        if self.eps_schedule.is_empty() || self.eps_schedule.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
            return Err(Error::Precondition("eps schedule must be nonempty and positive".into()));
        }
        if self.eps_schedule.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Precondition("eps schedule must be strictly decreasing".into()));
        }
        if !(self.tol_energy > 0.0) || !(self.tol_field > 0.0) {
            return Err(Error::Precondition("tolerances must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Precondition("max_iters must be positive".into()));
        }
        Ok(())
    }

    /// Conjugate exponent `p / (p − 1)`.
    pub fn q(&self) -> f64 {
        conjugate_exponent(self.p)
    }

    /// The same configuration with `p` replaced by its conjugate.
    pub fn conjugate(&self) -> SolverConfig {
        SolverConfig { p: self.q(), ..self.clone() }
    }

    pub fn with_p(&self, p: f64) -> SolverConfig {
        SolverConfig { p, ..self.clone() }
    }
}

pub fn conjugate_exponent(p: f64) -> f64 {
    p / (p - 1.0)
}

/// Minimizer of the p-energy with its capacity value and diagnostics.
#[derive(Debug, Clone)]
pub struct CapacityResult {
    /// Unregularized energy of the final field.
    pub value: f64,
    pub field: ScalarField,
    pub iterations: usize,
    pub converged: bool,
    /// Nominal mesh size.
    pub h: f64,
    pub p: f64,
    /// Regularized energy after the initial solve and every accepted step.
    pub energy_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacitySummary {
    pub p: f64,
    pub h: f64,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub energy_history: Vec<f64>,
}

impl CapacityResult {
    pub fn summary(&self) -> CapacitySummary {
        CapacitySummary {
            p: self.p,
            h: self.h,
            value: self.value,
            iterations: self.iterations,
            converged: self.converged,
            energy_history: self.energy_history.clone(),
        }
    }
}

struct Elements {
    area: Vec<f64>,
    grads: Vec<[Point2; 3]>,
}

impl Elements {
    /// Triangles with `active[t] == false` get zero area and drop out.
    fn new(mesh: &TriMesh, active: Option<&[bool]>) -> Elements {
        let n = mesh.triangles().len();
        Elements {
            area: (0..n).map(|t| if active.is_none_or(|a| a[t]) { mesh.triangle_area(t) } else { 0.0 }).collect(),
            grads: (0..n).map(|t| basis_gradients(mesh, t)).collect(),
        }
    }

    fn grad(&self, mesh: &TriMesh, u: &[f64], t: usize) -> Point2 {
        let tri = mesh.triangles()[t];
        let g = &self.grads[t];
        g[0] * u[tri[0]] + g[1] * u[tri[1]] + g[2] * u[tri[2]]
    }

    fn energy(&self, mesh: &TriMesh, u: &[f64], p: f64, eps: f64) -> f64 {
        let n = self.area.len();
        let idx: Vec<usize> = (0..n).step_by(CHUNK).collect();
        let partial: Vec<f64> = idx
            .par_iter()
            .map(|&s| {
                (s..(s + CHUNK).min(n))
                    .map(|t| {
                        let g = self.grad(mesh, u, t);
                        self.area[t] * (eps * eps + g.norm_sq()).powf(0.5 * p)
                    })
                    .sum::<f64>()
            })
            .collect();
        partial.iter().sum()
    }
}

/// Regularized p-energy `∑_T |T| (eps² + |∇u|²)^{p/2}`.
pub fn p_energy(u: &ScalarField, p: f64, eps: f64) -> f64 {
    Elements::new(&u.mesh, None).energy(&u.mesh, &u.values, p, eps)
}

/// Minimizes the p-energy with constant Dirichlet values on node sets.
pub fn minimize(mesh: &Arc<TriMesh>, dirichlet: &[(NodeSet, f64)], cfg: &SolverConfig) -> Result<CapacityResult> {
    cfg.validate()?;
    if dirichlet.is_empty() {
        return Err(Error::Precondition("no Dirichlet data".into()));
    }
    let mut fixed: Vec<Option<f64>> = vec![None; mesh.num_nodes()];
    let mut owner = vec![usize::MAX; mesh.num_nodes()];
    for (k, (set, v)) in dirichlet.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Precondition(format!("Dirichlet value {v} on {}", set.label)));
        }
        for &i in &set.indices {
            if i >= mesh.num_nodes() {
                return Err(Error::Precondition(format!("node {i} out of range in {}", set.label)));
            }
            if owner[i] != usize::MAX {
                return Err(Error::DirichletConflict(format!(
                    "node {i} belongs to both {} and {}",
                    dirichlet[owner[i]].0.label, set.label
                )));
            }
            owner[i] = k;
            fixed[i] = Some(*v);
        }
    }
    minimize_fixed(mesh, &fixed, cfg, f64::NAN)
}

/// Harmonic (p = 2) extension of nodal Dirichlet data.
pub fn solve_dirichlet(mesh: &Arc<TriMesh>, fixed: &[Option<f64>]) -> Result<ScalarField> {
    if fixed.len() != mesh.num_nodes() {
        return Err(Error::Precondition("Dirichlet data length differs from node count".into()));
    }
    Ok(minimize_fixed(mesh, fixed, &SolverConfig::new(2.0), f64::NAN)?.field)
}

/// Minimizes the p-energy summed over the triangles with `active[t]` only.
/// Nodes of the active region that are not coupled to any Dirichlet node
/// through active triangles, and nodes outside it, are fixed to zero; they
/// carry no energy.
pub fn minimize_on(
    mesh: &Arc<TriMesh>,
    fixed: &[Option<f64>],
    active: &[bool],
    cfg: &SolverConfig,
) -> Result<CapacityResult> {
    cfg.validate()?;
    if fixed.len() != mesh.num_nodes() || active.len() != mesh.triangles().len() {
        return Err(Error::Precondition("node or triangle data length differs from the mesh".into()));
    }
    let n = mesh.num_nodes();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        if active[t] {
            for k in 0..3 {
                adj[tri[k]].push(tri[(k + 1) % 3]);
                adj[tri[(k + 1) % 3]].push(tri[k]);
            }
        }
    }
    // free nodes reachable from a Dirichlet node through active triangles
    let mut reached = vec![false; n];
    let mut stack: Vec<usize> = (0..n).filter(|&i| fixed[i].is_some() && !adj[i].is_empty()).collect();
    for &i in &stack {
        reached[i] = true;
    }
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !reached[v] && fixed[v].is_none() {
                reached[v] = true;
                stack.push(v);
            }
        }
    }
    let full: Vec<Option<f64>> = (0..n)
        .map(|i| match fixed[i] {
            Some(v) => Some(v),
            None if reached[i] => None,
            None => Some(0.0),
        })
        .collect();
    minimize_fixed_on(mesh, &full, cfg, f64::NAN, Some(active))
}

fn minimize_fixed(mesh: &Arc<TriMesh>, fixed: &[Option<f64>], cfg: &SolverConfig, h: f64) -> Result<CapacityResult> {
    minimize_fixed_on(mesh, fixed, cfg, h, None)
}

fn minimize_fixed_on(
    mesh: &Arc<TriMesh>,
    fixed: &[Option<f64>],
    cfg: &SolverConfig,
    h: f64,
    active: Option<&[bool]>,
) -> Result<CapacityResult> {
    let is_fixed: Vec<bool> = fixed.iter().map(Option::is_some).collect();
    let p = cfg.p;
    let h = if h.is_nan() { mesh.h() } else { h };
    if is_fixed.iter().all(|&f| f) {
        let values: Vec<f64> = fixed.iter().map(|v| v.unwrap()).collect();
        let field = ScalarField::new(mesh.clone(), values)?;
        let value = Elements::new(mesh, active).energy(mesh, field.values(), p, 0.0);
        return Ok(CapacityResult { value, field, iterations: 0, converged: true, h, p, energy_history: vec![value] });
    }
    let pattern = StiffnessPattern::new(mesh, &is_fixed)?;
    let el = Elements::new(mesh, active);
    let tris = mesh.triangles();

    // harmonic initial guess
    let mut u: Vec<f64> = fixed.iter().map(|v| v.unwrap_or(0.0)).collect();
    let local: Vec<Local> = (0..tris.len()).map(|t| laplace_local(&el, t, 1.0, None)).collect();
    let r = residual(&pattern, mesh, &el, &u, &vec![1.0; tris.len()]);
    let d = pattern.solve(&local, &r.iter().map(|x| -x).collect::<Vec<_>>())?;
    scatter_add(&pattern, &mut u, &d, 1.0);

    let diam = mesh.domain().diam();
    let mut history = Vec::new();
    if p == 2.0 {
        let value = el.energy(mesh, &u, 2.0, 0.0);
        history.push(value);
        let field = ScalarField::new(mesh.clone(), u)?;
        return Ok(CapacityResult { value, field, iterations: 1, converged: true, h, p, energy_history: history });
    }

    let mut iterations = 1;
    let mut converged = false;
    let stages = cfg.eps_schedule.len();
    'stages: for (stage, &factor) in cfg.eps_schedule.iter().enumerate() {
        let eps = factor / diam;
        let last = stage + 1 == stages;
        // intermediate stages only need a rough minimizer
        let (tol_e, tol_u) = if last { (cfg.tol_energy, cfg.tol_field) } else { (cfg.tol_energy * 1e4, cfg.tol_field * 1e2) };
        let mut energy = el.energy(mesh, &u, p, eps);
        history.push(energy);
        loop {
            if iterations >= cfg.max_iters {
                break 'stages;
            }
            iterations += 1;
            let grads: Vec<Point2> = (0..tris.len()).map(|t| el.grad(mesh, &u, t)).collect();
            let weights: Vec<f64> = grads.iter().map(|g| (eps * eps + g.norm_sq()).powf(0.5 * (p - 2.0))).collect();
            let local: Vec<Local> = (0..tris.len())
                .into_par_iter()
                .with_min_len(CHUNK)
                .map(|t| {
                    let aniso = match cfg.method {
                        Method::Irls => None,
                        Method::Newton => Some((grads[t], (p - 2.0) / (eps * eps + grads[t].norm_sq()))),
                    };
                    laplace_local(&el, t, weights[t], aniso)
                })
                .collect();
            let r = residual(&pattern, mesh, &el, &u, &weights);
            let neg: Vec<f64> = r.iter().map(|x| -x).collect();
            let d = pattern.solve(&local, &neg)?;
            // directional derivative of the energy along d is p·(r·d)
            let slope = p * r.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>();
            if slope >= 0.0 {
                // no descent direction left at this precision
                if last {
                    converged = true;
                }
                break;
            }
            let mut alpha = 1.0;
            let mut trial = u.clone();
            let mut accepted = None;
            for _ in 0..50 {
                trial.copy_from_slice(&u);
                scatter_add(&pattern, &mut trial, &d, alpha);
                let e = el.energy(mesh, &trial, p, eps);
                if e <= energy + 1e-4 * alpha * slope {
                    accepted = Some(e);
                    break;
                }
                alpha *= 0.5;
            }
            let Some(e_new) = accepted else {
                if last {
                    // stalled at rounding level; converged only if the
                    // predicted decrease is already negligible
                    converged = -slope <= cfg.tol_energy * energy.max(f64::MIN_POSITIVE);
                }
                break;
            };
            let step = d.iter().fold(0.0f64, |m, x| m.max(x.abs())) * alpha;
            let rel = (energy - e_new) / energy.max(f64::MIN_POSITIVE);
            std::mem::swap(&mut u, &mut trial);
            energy = e_new;
            history.push(energy);
            if rel <= tol_e && step <= tol_u {
                if last {
                    converged = true;
                }
                break;
            }
        }
    }
    let value = el.energy(mesh, &u, p, 0.0);
    let field = ScalarField::new(mesh.clone(), u)?;
    Ok(CapacityResult { value, field, iterations, converged, h, p, energy_history: history })
}

/// Element matrix `|T| w Gᵀ A G`, with `A = I + c g gᵀ` when `aniso = (g, c)`.
fn laplace_local(el: &Elements, t: usize, w: f64, aniso: Option<(Point2, f64)>) -> Local {
    let g = &el.grads[t];
    let s = el.area[t] * w;
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut v = g[i].dot(g[j]);
            if let Some((gu, c)) = aniso {
                v += c * g[i].dot(gu) * g[j].dot(gu);
            }
            m[i][j] = s * v;
        }
    }
    m
}

/// Free-node residual `∑_T |T| w_T (∇φ_i · ∇u)`, one p-th of the energy gradient.
fn residual(pattern: &StiffnessPattern, mesh: &TriMesh, el: &Elements, u: &[f64], w: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; pattern.n_free()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = el.grad(mesh, u, t);
        let s = el.area[t] * w[t];
        for k in 0..3 {
            if let Some(f) = pattern.free_index(tri[k]) {
                r[f] += s * el.grads[t][k].dot(g);
            }
        }
    }
    r
}

fn scatter_add(pattern: &StiffnessPattern, u: &mut [f64], d: &[f64], alpha: f64) {
    for (i, ui) in u.iter_mut().enumerate() {
        if let Some(f) = pattern.free_index(i) {
            *ui += alpha * d[f];
        }
    }
}

/// `Cap_p(E, F; Ω)` on a mesh of size `h` refined toward the arc endpoints.
pub fn capacity(
    domain: &JordanPolygon,
    e: &BoundaryArc,
    f: &BoundaryArc,
    cfg: &SolverConfig,
    h: f64,
) -> Result<CapacityResult> {
    cfg.validate()?;
    let per = domain.perimeter();
    if (e.perimeter - per).abs() > 1e-9 * per || (f.perimeter - per).abs() > 1e-9 * per {
        return Err(Error::Precondition("arcs belong to a different domain".into()));
    }
    if e.overlaps(f) {
        return Err(Error::Precondition("the two plates overlap".into()));
    }
    let mut ends = Vec::new();
    for arc in [e, f] {
        if !arc.is_full() {
            ends.push(arc.s_start);
            ends.push(arc.s_end);
        }
    }
    let pts: Vec<Point2> = ends.iter().map(|&s| domain.point_at(s).0).collect();
    let sizing = graded_toward_points(pts, 0.25 * h, h, 0.5);
    let spec = MeshSpec::uniform(h).with_boundary_points(ends).with_sizing(sizing);
    let mesh = Arc::new(mesh_with(domain, &spec)?);
    let se = tag_arc(&mesh, e)?;
    let sf = tag_arc(&mesh, f)?;
    minimize_fixed(&mesh, &dirichlet_vec(&mesh, &[(se, 1.0), (sf, 0.0)])?, cfg, h)
}

fn dirichlet_vec(mesh: &TriMesh, sets: &[(NodeSet, f64)]) -> Result<Vec<Option<f64>>> {
    let mut fixed = vec![None; mesh.num_nodes()];
    for (set, v) in sets {
        for &i in &set.indices {
            if fixed[i].is_some() {
                return Err(Error::DirichletConflict(format!("node {i} shared by two plates")));
            }
            fixed[i] = Some(*v);
        }
    }
    Ok(fixed)
}

/// Smallest distance between a polyline inside the domain and the boundary.
pub fn curve_boundary_distance(domain: &JordanPolygon, g: &Polyline) -> f64 {
    let v = g.vertices();
    let mut d = v.iter().map(|&z| domain.dist_to_boundary(z)).fold(f64::INFINITY, f64::min);
    for w in v.windows(2) {
        for i in 0..domain.len() {
            let (a, b) = domain.edge(i);
            d = d.min(segment_distance(a, w[0], w[1])).min(segment_distance(b, w[0], w[1]));
        }
    }
    d
}

/// `Cap_p(γ, ∂Ω; Ω)` with the curve thickened to a tube of radius `h`.
pub fn curve_capacity(domain: &JordanPolygon, g: &Polyline, cfg: &SolverConfig, h: f64) -> Result<CapacityResult> {
    cfg.validate()?;
    if !(h > 0.0) {
        return Err(Error::Precondition(format!("mesh size h = {h} must be positive")));
    }
    if !domain.polyline_inside(g) {
        return Err(Error::Precondition("curve is not inside the domain".into()));
    }
    let gap = curve_boundary_distance(domain, g);
    if gap <= 1.5 * h {
        return Err(Error::Precondition(format!("curve is {gap:.3e} from the boundary, within 1.5 h")));
    }
    let sizing = graded_toward_curve(g.clone(), 0.25 * h, h, 0.5);
    let mesh = Arc::new(mesh_with(domain, &MeshSpec::uniform(h).with_sizing(sizing))?);
    let plate = tag_near_curve(&mesh, g, h)?;
    let mut fixed = vec![None; mesh.num_nodes()];
    for (i, _) in mesh.boundary_nodes() {
        fixed[i] = Some(0.0);
    }
    for &i in &plate.indices {
        fixed[i] = Some(1.0);
    }
    minimize_fixed(&mesh, &fixed, cfg, h)
}

/// Capacity between two small disks of radius `eps` at distance `d`, inside
/// a square of side `box_size` with free boundary.
pub fn point_capacity(q: f64, d: f64, eps: f64, box_size: f64) -> Result<CapacityResult> {
    if !(q > 2.0) {
        return Err(Error::Precondition(format!("exponent {q} must exceed 2")));
    }
    if !(eps > 0.0 && eps < 0.25 * d) {
        return Err(Error::Precondition(format!("need 0 < eps < d/4, got eps = {eps}, d = {d}")));
    }
    if !(box_size >= 8.0 * d) {
        return Err(Error::Precondition(format!("box size {box_size} below 8 d")));
    }
    let half = 0.5 * box_size;
    let domain = JordanPolygon::new(vec![
        Point2::new(-half, -half),
        Point2::new(half, -half),
        Point2::new(half, half),
        Point2::new(-half, half),
    ])?;
    let (z1, z2) = (Point2::new(-0.5 * d, 0.0), Point2::new(0.5 * d, 0.0));
    let h = box_size / 16.0;
    let sizing = graded_toward_points(vec![z1, z2], 0.25 * eps, h, 0.3);
    let mesh = Arc::new(mesh_with(&domain, &MeshSpec::uniform(h).with_sizing(sizing))?);
    let mut fixed = vec![None; mesh.num_nodes()];
    for (i, z) in mesh.nodes().iter().enumerate() {
        if z.dist(z1) <= eps {
            fixed[i] = Some(1.0);
        } else if z.dist(z2) <= eps {
            fixed[i] = Some(0.0);
        }
    }
    if !fixed.iter().any(|v| *v == Some(1.0)) || !fixed.iter().any(|v| *v == Some(0.0)) {
        return Err(Error::EmptyTag("no mesh node inside a point plate".into()));
    }
    minimize_fixed(&mesh, &fixed, &SolverConfig::new(q), h)
}

/// Richardson extrapolation from values on meshes of size `2h` and `h`,
/// assuming an error of order `h^order`.
pub fn richardson(coarse: f64, fine: f64, order: f64) -> f64 {
    fine + (fine - coarse) / (2f64.powf(order) - 1.0)
}

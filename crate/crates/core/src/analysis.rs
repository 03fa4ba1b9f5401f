//! Numerical checks of the capacity duality identity, the comparability of
//! capacity and subhyperbolic quantities, the conformal annulus estimates,
//! the curve condition for extension domains and the Gehring–Osgood bound.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::confmap::{boundary_geodesic_full, conformal_annulus, hyperbolic_geodesic, Geodesic, RiemannMap};
use crate::error::{Error, Result};
use crate::geometry::{weighted_length, JordanPolygon, Point2, Polyline, Quadrilateral};
use crate::mesh::{graded_toward_points, mesh_with, polyline_distance, MeshSpec};
use crate::metrics::{capacity_metric_in, subhyperbolic_distance, Candidate, MetricContext, GEODESIC_SAMPLES};
use crate::variational::{
    capacity, conjugate_exponent, curve_boundary_distance, curve_capacity, minimize_on, richardson, SolverConfig,
};

/// Samples on boundary-to-boundary geodesics.
pub const BOUNDARY_GEODESIC_SAMPLES: usize = 256;

// ---------------------------------------------------------------- duality

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub p: f64,
    pub q: f64,
    /// Mesh sizes, coarse first.
    pub hs: Vec<f64>,
    pub cap_13_by_h: Vec<f64>,
    pub cap_24_by_h: Vec<f64>,
    /// Final values: Richardson-extrapolated when two sizes were used.
    pub cap_13: f64,
    pub cap_24: f64,
    /// `cap_13^{1/p} · cap_24^{1/q}`.
    pub product: f64,
    pub deviation: f64,
    pub extrapolated: bool,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityRow {
    pub h: f64,
    pub extrapolated: bool,
    pub cap_13: f64,
    pub cap_24: f64,
    pub product: f64,
}

impl DualityReport {
    pub fn rows(&self) -> Vec<DualityRow> {
        let mut rows: Vec<DualityRow> = self
            .hs
            .iter()
            .enumerate()
            .map(|(k, &h)| DualityRow {
                h,
                extrapolated: false,
                cap_13: self.cap_13_by_h[k],
                cap_24: self.cap_24_by_h[k],
                product: dual_product(self.cap_13_by_h[k], self.cap_24_by_h[k], self.p, self.q),
            })
            .collect();
        if self.extrapolated {
            rows.push(DualityRow { h: 0.0, extrapolated: true, cap_13: self.cap_13, cap_24: self.cap_24, product: self.product });
        }
        rows
    }
}

fn dual_product(c13: f64, c24: f64, p: f64, q: f64) -> f64 {
    c13.powf(1.0 / p) * c24.powf(1.0 / q)
}

/// `Cap_p(γ₁, γ₃)^{1/p} · Cap_q(γ₂, γ₄)^{1/q}` from meshes of size `2h`
/// and `h`, Richardson-extrapolated with order 2.
pub fn duality_check(domain: &JordanPolygon, quad: &Quadrilateral, p: f64, h: f64) -> Result<DualityReport> {
    duality_check_with(domain, quad, &SolverConfig::new(p), &[2.0 * h, h])
}

/// Duality product on the given mesh sizes: one size gives raw values, two
/// sizes in ratio 2 (coarse first) give extrapolated values.
pub fn duality_check_with(domain: &JordanPolygon, quad: &Quadrilateral, cfg: &SolverConfig, hs: &[f64]) -> Result<DualityReport> {
    cfg.validate()?;
    let p = cfg.p;
    let q = conjugate_exponent(p);
    match hs {
        [_] => {}
        [a, b] if ((a / b) - 2.0).abs() <= 1e-9 => {}
        _ => return Err(Error::Precondition(format!("mesh sizes {hs:?}: need [h] or [2h, h]"))),
    }
    let arcs = quad.arcs;
    let cfg_q = cfg.conjugate();
    let mut c13 = Vec::new();
    let mut c24 = Vec::new();
    let mut converged = true;
    for &h in hs {
        let a = capacity(domain, &arcs[0], &arcs[2], cfg, h)?;
        let b = capacity(domain, &arcs[1], &arcs[3], &cfg_q, h)?;
        converged &= a.converged && b.converged;
        c13.push(a.value);
        c24.push(b.value);
    }
    let extrapolated = hs.len() == 2;
    let (cap_13, cap_24) =
        if extrapolated { (richardson(c13[0], c13[1], 2.0), richardson(c24[0], c24[1], 2.0)) } else { (c13[0], c24[0]) };
    let product = dual_product(cap_13, cap_24, p, q);
    Ok(DualityReport {
        p,
        q,
        hs: hs.to_vec(),
        cap_13_by_h: c13,
        cap_24_by_h: c24,
        cap_13,
        cap_24,
        product,
        deviation: (product - 1.0).abs(),
        extrapolated,
        converged,
    })
}

// ---------------------------------------------------------- comparability

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparabilityReport {
    pub p: f64,
    pub h: f64,
    pub z1_x: f64,
    pub z1_y: f64,
    pub z2_x: f64,
    pub z2_y: f64,
    /// `Cap_p(γ, ∂Ω; Ω)` for the hyperbolic geodesic `γ`.
    pub cap_geodesic: f64,
    pub d_p: f64,
    pub d_cap: f64,
    pub d_cap_curve: Candidate,
    /// `∫_γ dist(z, ∂Ω)^{1−p} ds` along the hyperbolic geodesic.
    pub geodesic_integral: f64,
    /// Largest over smallest of the four quantities.
    pub max_ratio: f64,
    pub converged: bool,
}

impl ComparabilityReport {
    pub fn quantities(&self) -> [f64; 4] {
        [self.cap_geodesic, self.d_p, self.d_cap, self.geodesic_integral]
    }
}

impl ComparabilityReport {
    pub fn points(&self) -> (Point2, Point2) {
        (Point2::new(self.z1_x, self.z1_y), Point2::new(self.z2_x, self.z2_y))
    }
}

pub fn comparability_report(domain: &JordanPolygon, z1: Point2, z2: Point2, p: f64, h: f64) -> Result<ComparabilityReport> {
    check_subhyperbolic_p(p)?;
    let ctx = MetricContext::new(domain, &SolverConfig::new(p), h)?;
    comparability_in(&ctx, z1, z2)
}

fn check_subhyperbolic_p(p: f64) -> Result<()> {
    if !(p > 1.0 && p < 2.0) {
        return Err(Error::Precondition(format!("comparability needs 1 < p < 2, got {p}")));
    }
    Ok(())
}

/// The four comparable quantities for one pair on a prepared context.
pub fn comparability_in(ctx: &MetricContext, z1: Point2, z2: Point2) -> Result<ComparabilityReport> {
    let p = ctx.cfg.p;
    check_subhyperbolic_p(p)?;
    if z1 == z2 {
        return Err(Error::Precondition("comparability needs distinct points".into()));
    }
    let gamma = hyperbolic_geodesic(&ctx.map, z1, z2, GEODESIC_SAMPLES)?;
    let cap = curve_capacity(&ctx.domain, &gamma, &ctx.cfg, ctx.h)?;
    let integral = weighted_length(&gamma, &ctx.domain, 1.0 - p)?;
    let dp = subhyperbolic_distance(&ctx.graph, z1, z2)?;
    let dcap = capacity_metric_in(ctx, z1, z2, Some((&gamma, &cap)))?;
    let q = [cap.value, dp.weighted_length, dcap.value, integral];
    if q.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Precondition(format!("non-positive comparability quantity in {q:?}")));
    }
    let hi = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = q.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ComparabilityReport {
        p,
        h: ctx.h,
        z1_x: z1.x,
        z1_y: z1.y,
        z2_x: z2.x,
        z2_y: z2.y,
        cap_geodesic: cap.value,
        d_p: dp.weighted_length,
        d_cap: dcap.value,
        d_cap_curve: dcap.kind,
        geodesic_integral: integral,
        max_ratio: hi / lo,
        converged: cap.converged && dcap.converged,
    })
}

/// Seeded interior points at distance at least `margin` from the boundary,
/// paired with separation at least `min_sep`.
pub fn sample_pairs(domain: &JordanPolygon, n: usize, seed: u64, margin: f64, min_sep: f64) -> Result<Vec<(Point2, Point2)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = domain.bbox();
    let point = |rng: &mut ChaCha8Rng| -> Result<Point2> {
        for _ in 0..100_000 {
            let z = Point2::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
            if domain.point_in_domain(z) && domain.dist_to_boundary(z) >= margin {
                return Ok(z);
            }
        }
        Err(Error::Precondition(format!("no interior point at distance {margin} from the boundary")))
    };
    let mut out = Vec::with_capacity(n);
    let mut tries = 0;
    while out.len() < n {
        tries += 1;
        if tries > 100 * n + 1000 {
            return Err(Error::Precondition(format!("cannot draw pairs separated by {min_sep}")));
        }
        let a = point(&mut rng)?;
        let b = point(&mut rng)?;
        if a.dist(b) >= min_sep {
            out.push((a, b));
        }
    }
    Ok(out)
}

/// Default sampling for comparability: margin `0.07·diam`, separation `0.05·diam`.
pub fn comparability_pairs(domain: &JordanPolygon, n: usize, seed: u64) -> Result<Vec<(Point2, Point2)>> {
    let d = domain.diam();
    sample_pairs(domain, n, seed, 0.07 * d, 0.05 * d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparabilityBatch {
    pub p: f64,
    pub h: f64,
    pub seed: u64,
    pub reports: Vec<ComparabilityReport>,
    pub max_ratio: f64,
    pub converged: bool,
}

/// Comparability on `n` seeded pairs sharing one map and one path graph.
pub fn comparability_batch(domain: &JordanPolygon, p: f64, h: f64, n: usize, seed: u64) -> Result<ComparabilityBatch> {
    check_subhyperbolic_p(p)?;
    let pairs = comparability_pairs(domain, n, seed)?;
    let ctx = MetricContext::new(domain, &SolverConfig::new(p), h)?;
    let reports: Vec<ComparabilityReport> =
        pairs.par_iter().map(|&(a, b)| comparability_in(&ctx, a, b)).collect::<Result<_>>()?;
    let max_ratio = reports.iter().map(|r| r.max_ratio).fold(1.0, f64::max);
    let converged = reports.iter().all(|r| r.converged);
    Ok(ComparabilityBatch { p, h, seed, reports, max_ratio, converged })
}

// ------------------------------------------------------------------ annuli

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusRecord {
    /// Endpoint index: 0 for the first geodesic endpoint, 1 for the last.
    pub i: usize,
    pub k: u32,
    pub pieces: usize,
    pub diam: f64,
    pub dist_to_boundary: f64,
    pub length: f64,
    pub length_next: Option<f64>,
}

impl AnnulusRecord {
    /// `diam/dist`, `diam/ℓ` and `ℓ/ℓ_next` (the last when resolved).
    pub fn ratios(&self) -> [Option<f64>; 3] {
        [
            Some(self.diam / self.dist_to_boundary),
            Some(self.diam / self.length),
            self.length_next.map(|n| self.length / n),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub i: usize,
    pub k: u32,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnuliReport {
    pub records: Vec<AnnulusRecord>,
    pub truncated: Vec<Truncation>,
}

/// Pieces `γ_{i,k}` of a boundary-to-boundary geodesic in the conformal
/// annulus of scale `k` about endpoint `i`.
pub fn annulus_pieces(map: &RiemannMap, geodesic: &Geodesic, i: usize, k: u32) -> Result<Vec<Polyline>> {
    let params = geodesic
        .boundary_params
        .ok_or_else(|| Error::Precondition("geodesic does not end on the boundary".into()))?;
    if i > 1 {
        return Err(Error::Precondition(format!("endpoint index {i} is not 0 or 1")));
    }
    let ann = conformal_annulus(map, params[i], k)?;
    let pieces = ann.pieces(geodesic);
    if pieces.is_empty() {
        return Err(Error::UnresolvedScale(format!("geodesic has no samples in the annulus k = {k}")));
    }
    Ok(pieces)
}

fn pieces_measures(domain: &JordanPolygon, pieces: &[Polyline]) -> (f64, f64, f64) {
    let pts: Vec<Point2> = pieces.iter().flat_map(|p| p.vertices().iter().copied()).collect();
    let mut diam: f64 = 0.0;
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            diam = diam.max(pts[a].dist(pts[b]));
        }
    }
    let dist = pieces.iter().map(|p| curve_boundary_distance(domain, p)).fold(f64::INFINITY, f64::min);
    let length = pieces.iter().map(Polyline::length).sum();
    (diam, dist, length)
}

/// Diameter, boundary distance and length of `γ_{i,k}` for both endpoints
/// and `k = 1..=k_max`. An unresolved scale ends the list for that endpoint.
pub fn annuli_report(map: &RiemannMap, geodesic: &Geodesic, k_max: u32) -> Result<AnnuliReport> {
    let mut records = Vec::new();
    let mut truncated = Vec::new();
    for i in 0..2 {
        let mut measured: Vec<(u32, usize, (f64, f64, f64))> = Vec::new();
        for k in 1..=k_max + 1 {
            match annulus_pieces(map, geodesic, i, k) {
                Ok(pieces) => measured.push((k, pieces.len(), pieces_measures(map.domain(), &pieces))),
                Err(e @ Error::UnresolvedScale(_)) => {
                    if k <= k_max {
                        truncated.push(Truncation { i, k, reason: e.to_string() });
                    }
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        for (j, &(k, pieces, (diam, dist, length))) in measured.iter().enumerate() {
            if k > k_max {
                break;
            }
            let length_next = measured.get(j + 1).map(|m| m.2 .2);
            records.push(AnnulusRecord { i, k, pieces, diam, dist_to_boundary: dist, length, length_next });
        }
    }
    Ok(AnnuliReport { records, truncated })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusEnergy {
    pub i: usize,
    pub k: u32,
    pub p: f64,
    pub h: f64,
    pub energy: f64,
    pub length: f64,
    /// `energy / ℓ(γ_{i,k})^{2−p}`.
    pub ratio: f64,
    pub converged: bool,
    pub triangles: usize,
}

/// Least p-energy of the annulus condenser: 1 on `γ_{i,k}`, 0 on the part of
/// `∂Ω` in the annulus, free on the rest of the annulus boundary; divided
/// by `ℓ(γ_{i,k})^{2−p}`.
///
/// The condenser is solved on a fresh mesh of size `h`, refined to
/// `min(h, ℓ/8)/2` at the pieces, whose triangles are assigned to the
/// annulus by the image of their centroid under the map.
pub fn annulus_lower_bound_check(map: &RiemannMap, geodesic: &Geodesic, i: usize, k: u32, p: f64, h: f64) -> Result<AnnulusEnergy> {
    check_subhyperbolic_p(p)?;
    let pieces = annulus_pieces(map, geodesic, i, k)?;
    let params = geodesic.boundary_params.expect("checked by annulus_pieces");
    let ann = conformal_annulus(map, params[i], k)?;
    let length: f64 = pieces.iter().map(Polyline::length).sum();
    let h_loc = 0.5 * h.min(length / 8.0);
    let domain = map.domain();
    let mut focus: Vec<Point2> = pieces.iter().flat_map(|p| p.vertices().iter().copied()).collect();
    focus.push(ann.center_boundary_point);
    let mesh = Arc::new(mesh_with(domain, &MeshSpec::uniform(h).with_sizing(graded_toward_points(focus, h_loc, h, 0.5)))?);
    let images: Vec<_> = mesh.nodes().iter().map(|&z| map.phi(z)).collect::<Result<_>>()?;
    let active: Vec<bool> =
        mesh.triangles().iter().map(|t| ann.contains_image((images[t[0]] + images[t[1]] + images[t[2]]) / 3.0)).collect();
    let mut touched = vec![false; mesh.num_nodes()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        if active[t] {
            for &v in tri {
                touched[v] = true;
            }
        }
    }
    let mut fixed = vec![None; mesh.num_nodes()];
    for (v, z) in mesh.nodes().iter().enumerate() {
        let on_plate = pieces.iter().any(|g| polyline_distance(g, *z) <= h_loc);
        let on_boundary = mesh.is_boundary(v) && touched[v];
        match (on_plate, on_boundary) {
            (true, true) => {
                return Err(Error::DirichletConflict(format!("node {v} is on the curve plate and on the boundary")))
            }
            (true, false) => fixed[v] = Some(1.0),
            (false, true) => fixed[v] = Some(0.0),
            _ => {}
        }
    }
    if !fixed.iter().zip(&touched).any(|(f, &t)| t && *f == Some(0.0)) {
        return Err(Error::EmptyTag(format!("no boundary node in the annulus region k = {k}")));
    }
    let res = minimize_on(&mesh, &fixed, &active, &SolverConfig::new(p))?;
    Ok(AnnulusEnergy {
        i,
        k,
        p,
        h,
        energy: res.value,
        length,
        ratio: res.value / length.powf(2.0 - p),
        converged: res.converged,
        triangles: active.iter().filter(|a| **a).count(),
    })
}

// --------------------------------------------------------- curve condition

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Segment,
    HyperbolicGeodesic,
    SubhyperbolicPath,
    /// `[x₁, z₁] ∪ γ ∪ [z₂, x₂]` through the nearest boundary points.
    BoundaryDetour,
    BoundaryGeodesic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePairRecord {
    pub z1_x: f64,
    pub z1_y: f64,
    pub z2_x: f64,
    pub z2_y: f64,
    pub on_boundary: bool,
    pub curve: CurveKind,
    pub weighted_length: f64,
    /// `|z₁ − z₂|^{(q−2)/(q−1)}`.
    pub scale: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveConditionReport {
    pub q: f64,
    pub p: f64,
    /// Integrand exponent used.
    pub exponent: f64,
    pub literal_exponent: bool,
    /// `|(1 − p) − 1/(1 − q)|`.
    pub exponent_identity_error: f64,
    pub seed: u64,
    pub h: f64,
    pub pairs: Vec<CurvePairRecord>,
    pub sup_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveConditionOptions {
    /// Use the exponent `1/(q−1)` instead of `1/(1−q)`.
    pub literal_exponent: bool,
    /// Add all pairs of polygon edge midpoints, joined by boundary geodesics.
    pub boundary_pairs: bool,
}

impl Default for CurveConditionOptions {
    fn default() -> Self {
        CurveConditionOptions { literal_exponent: false, boundary_pairs: true }
    }
}

pub fn curve_condition_check(domain: &JordanPolygon, q: f64, sample_pairs: usize, seed: u64, h: f64) -> Result<CurveConditionReport> {
    curve_condition_check_with(domain, q, sample_pairs, seed, h, CurveConditionOptions::default())
}

/// Sup over seeded interior pairs (and boundary edge-midpoint pairs) of the
/// least weighted length over the candidate curves, divided by
/// `|z₁ − z₂|^{(q−2)/(q−1)}`. Internally `p = q/(q−1)`, so that the
/// integrand exponent `1 − p` equals `1/(1 − q)`.
pub fn curve_condition_check_with(
    domain: &JordanPolygon,
    q: f64,
    sample_pairs: usize,
    seed: u64,
    h: f64,
    opts: CurveConditionOptions,
) -> Result<CurveConditionReport> {
    if !(q > 2.0 && q.is_finite()) {
        return Err(Error::Precondition(format!("curve condition needs q > 2, got {q}")));
    }
    let p = conjugate_exponent(q);
    let exponent = if opts.literal_exponent { 1.0 / (q - 1.0) } else { 1.0 - p };
    let identity = ((1.0 - p) - 1.0 / (1.0 - q)).abs();
    let ctx = MetricContext::new_with_exponent(domain, &SolverConfig::new(p), h, exponent)?;
    let scale_exp = (q - 2.0) / (q - 1.0);
    let pairs = sample_pairs_for_curves(domain, sample_pairs, seed)?;
    let mut records: Vec<CurvePairRecord> = pairs
        .par_iter()
        .map(|&(a, b)| interior_curve_record(&ctx, a, b, exponent, scale_exp))
        .collect::<Result<_>>()?;
    if opts.boundary_pairs {
        let n = domain.len();
        let mids: Vec<f64> = (0..n).map(|e| 0.5 * (domain.vertex_param(e) + domain.vertex_param(e + 1))).collect();
        let jobs: Vec<(f64, f64)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).map(|(a, b)| (mids[a], mids[b])).collect();
        let extra: Vec<CurvePairRecord> = jobs
            .par_iter()
            .map(|&(s1, s2)| boundary_curve_record(&ctx, s1, s2, exponent, scale_exp))
            .collect::<Result<_>>()?;
        records.extend(extra);
    }
    let sup_ratio = records.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(CurveConditionReport {
        q,
        p,
        exponent,
        literal_exponent: opts.literal_exponent,
        exponent_identity_error: identity,
        seed,
        h,
        pairs: records,
        sup_ratio,
    })
}

/// Interior pairs for the curve condition: margin `0.01·diam`, separation `0.01·diam`.
fn sample_pairs_for_curves(domain: &JordanPolygon, n: usize, seed: u64) -> Result<Vec<(Point2, Point2)>> {
    let d = domain.diam();
    sample_pairs(domain, n, seed, 0.01 * d, 0.01 * d)
}

fn interior_curve_record(ctx: &MetricContext, a: Point2, b: Point2, exponent: f64, scale_exp: f64) -> Result<CurvePairRecord> {
    let dom = &ctx.domain;
    let scale = a.dist(b).powf(scale_exp);
    let record = |curve, w: f64| CurvePairRecord {
        z1_x: a.x,
        z1_y: a.y,
        z2_x: b.x,
        z2_y: b.y,
        on_boundary: false,
        curve,
        weighted_length: w,
        scale,
        ratio: w / scale,
    };
    if 2.0 * a.dist(b) <= dom.dist_to_boundary(a).max(dom.dist_to_boundary(b)) {
        let w = weighted_length(&Polyline::segment(a, b)?, dom, exponent)?;
        return Ok(record(CurveKind::Segment, w));
    }
    let mut best: Option<(CurveKind, f64)> = None;
    let mut consider = |kind, w: Result<f64>| -> Result<()> {
        match w {
            Ok(w) => {
                if best.is_none_or(|b| w < b.1) {
                    best = Some((kind, w));
                }
                Ok(())
            }
            Err(Error::LookupFailure(_) | Error::Precondition(_)) => Ok(()),
            Err(e) => Err(e),
        }
    };
    consider(
        CurveKind::HyperbolicGeodesic,
        hyperbolic_geodesic(&ctx.map, a, b, GEODESIC_SAMPLES).and_then(|g| weighted_length(&g, dom, exponent)),
    )?;
    consider(CurveKind::SubhyperbolicPath, subhyperbolic_distance(&ctx.graph, a, b).map(|r| r.weighted_length))?;
    consider(CurveKind::BoundaryDetour, detour(ctx, a, b).and_then(|g| weighted_length(&g, dom, exponent)))?;
    let (kind, w) = best.ok_or_else(|| Error::LookupFailure(format!("no candidate curve between {a} and {b}")))?;
    Ok(record(kind, w))
}

/// `[x₁, z₁] ∪ γ(z₁, z₂) ∪ [z₂, x₂]` with `z_i` the nearest boundary points.
fn detour(ctx: &MetricContext, a: Point2, b: Point2) -> Result<Polyline> {
    let dom = &ctx.domain;
    let sa = dom.closest_boundary_point(a).1;
    let sb = dom.closest_boundary_point(b).1;
    let g = boundary_geodesic_full(&ctx.map, sa, sb, BOUNDARY_GEODESIC_SAMPLES)?.path;
    let mut pts = vec![a];
    pts.extend(g.vertices().iter().copied());
    pts.push(b);
    Polyline::from_points_dedup(pts)
}

fn boundary_curve_record(ctx: &MetricContext, s1: f64, s2: f64, exponent: f64, scale_exp: f64) -> Result<CurvePairRecord> {
    let dom = &ctx.domain;
    let g = boundary_geodesic_full(&ctx.map, s1, s2, BOUNDARY_GEODESIC_SAMPLES)?.path;
    let (a, b) = (g.first(), g.last());
    let w = weighted_length(&g, dom, exponent)?;
    let scale = a.dist(b).powf(scale_exp);
    Ok(CurvePairRecord {
        z1_x: a.x,
        z1_y: a.y,
        z2_x: b.x,
        z2_y: b.y,
        on_boundary: true,
        curve: CurveKind::BoundaryGeodesic,
        weighted_length: w,
        scale,
        ratio: w / scale,
    })
}

// ----------------------------------------------------------- Gehring–Osgood

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoPairRecord {
    pub z1_x: f64,
    pub z1_y: f64,
    pub z2_x: f64,
    pub z2_y: f64,
    /// `∫_Γ dist(z, ∂Ω)^{−1} ds` along the hyperbolic geodesic.
    pub quasihyperbolic_length: f64,
    /// `log(1 + |z₁ − z₂| / min dist(z_i, ∂Ω))`.
    pub log_term: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoReport {
    pub seed: u64,
    pub h: f64,
    pub requested: usize,
    /// Pairs dropped because `|z₁ − z₂| < 4 min dist(z_i, ∂Ω)`.
    pub excluded: usize,
    pub pairs: Vec<GoPairRecord>,
    pub sup_ratio: f64,
}

/// Sup over seeded pairs with `|z₁ − z₂| ≥ 4 min dist(z_i, ∂Ω)` of the
/// quasihyperbolic length of the hyperbolic geodesic over the log term.
pub fn gehring_osgood_check(domain: &JordanPolygon, sample_pairs: usize, seed: u64, h: f64) -> Result<GoReport> {
    let map = crate::confmap::build_map(domain, crate::confmap::default_base_point(domain), h)?;
    gehring_osgood_on(&map, sample_pairs, seed, h)
}

pub fn gehring_osgood_on(map: &RiemannMap, sample_pairs: usize, seed: u64, h: f64) -> Result<GoReport> {
    let dom = map.domain();
    let pairs = sample_pairs_for_curves(dom, sample_pairs, seed)?;
    let kept: Vec<(Point2, Point2)> = pairs
        .iter()
        .copied()
        .filter(|(a, b)| a.dist(*b) >= 4.0 * dom.dist_to_boundary(*a).min(dom.dist_to_boundary(*b)))
        .collect();
    let records: Vec<GoPairRecord> = kept
        .par_iter()
        .map(|&(a, b)| {
            let g = hyperbolic_geodesic(map, a, b, GEODESIC_SAMPLES)?;
            let len = weighted_length(&g, dom, -1.0)?;
            let m = dom.dist_to_boundary(a).min(dom.dist_to_boundary(b));
            let log_term = (1.0 + a.dist(b) / m).ln();
            Ok(GoPairRecord { z1_x: a.x, z1_y: a.y, z2_x: b.x, z2_y: b.y, quasihyperbolic_length: len, log_term, ratio: len / log_term })
        })
        .collect::<Result<_>>()?;
    let sup_ratio = records.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(GoReport { seed, h, requested: sample_pairs, excluded: pairs.len() - kept.len(), pairs: records, sup_ratio })
}

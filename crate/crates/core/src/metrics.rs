//! Distance-weighted shortest paths: the subhyperbolic distance `d_p`
//! (weight `dist(z, ∂Ω)^{1−p}`), the quasihyperbolic distance (weight
//! `dist^{−1}`) and the best-of-candidates capacity metric.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::confmap::{build_map, default_base_point, hyperbolic_geodesic};
use crate::error::{Error, Result};
use crate::geometry::{weighted_length, JordanPolygon, Point2, Polyline};
use crate::mesh::{triangulate, TriMesh};
use crate::variational::{curve_capacity, CapacityResult, SolverConfig};

pub use crate::report::to_csv;

/// Samples per hyperbolic geodesic used as a capacity-metric candidate.
pub const GEODESIC_SAMPLES: usize = 64;

/// Weighted graph on the interior mesh nodes.
#[derive(Debug, Clone)]
pub struct PathGraph {
    domain: JordanPolygon,
    exponent: f64,
    h: f64,
    nodes: Vec<Point2>,
    /// CSR adjacency: neighbors of node `i` are `targets[offsets[i]..offsets[i + 1]]`.
    offsets: Vec<usize>,
    targets: Vec<u32>,
    weights: Vec<f64>,
    warning: Option<String>,
}

impl PathGraph {
    pub fn domain(&self) -> &JordanPolygon {
        &self.domain
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn nodes(&self) -> &[Point2] {
        &self.nodes
    }

    pub fn num_edges(&self) -> usize {
        self.targets.len() / 2
    }

    /// Mesh size used as the snapping scale.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Set when the exponent lies outside `[−1, 1]`.
    pub fn warning(&self) -> Option<&str> {
        self.warning.as_deref()
    }

    /// Neighbors of node `i` with the edge weights.
    pub fn edges_of(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.targets[r.clone()].iter().zip(&self.weights[r]).map(|(&j, &w)| (j as usize, w))
    }

    /// Nearest graph node to `z`, lowest index on ties.
    pub fn nearest_node(&self, z: Point2) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, p) in self.nodes.iter().enumerate() {
            let d = p.dist(z);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    /// Shortest-path length between two graph nodes.
    pub fn node_distance(&self, a: usize, b: usize) -> Result<f64> {
        Ok(self.shortest_path(a, b)?.0)
    }

    /// Dijkstra between `a` and `b`, always searched from the lower index so
    /// that the length is exactly symmetric. Among equal tentative distances
    /// the heap settles the lower node index first, and an equal-length
    /// relaxation keeps the lower predecessor index.
    fn shortest_path(&self, a: usize, b: usize) -> Result<(f64, Vec<usize>)> {
        let (src, dst) = (a.min(b), a.max(b));
        let n = self.nodes.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred = vec![usize::MAX; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        heap.push(Entry(0.0, src));
        while let Some(Entry(d, u)) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            if u == dst {
                break;
            }
            for (v, w) in self.edges_of(u) {
                if done[v] {
                    continue;
                }
                let nd = d + w;
                if nd < dist[v] || (nd == dist[v] && u < pred[v]) {
                    dist[v] = nd;
                    pred[v] = u;
                    heap.push(Entry(nd, v));
                }
            }
        }
        if !done[dst] {
            return Err(Error::Disconnected(format!("no path between graph nodes {src} and {dst}")));
        }
        let mut path = vec![dst];
        let mut cur = dst;
        while cur != src {
            cur = pred[cur];
            path.push(cur);
        }
        if src == a {
            path.reverse();
        }
        Ok((dist[dst], path))
    }
}

/// Min-heap entry ordered by distance, then node index.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Graph on the interior nodes of `mesh` with mesh edges and second-ring
/// shortcuts.
pub fn build_graph(domain: &JordanPolygon, mesh: &TriMesh, exponent: f64) -> Result<PathGraph> {
    build_graph_with(domain, mesh, exponent, true)
}

pub fn build_graph_with(domain: &JordanPolygon, mesh: &TriMesh, exponent: f64, shortcuts: bool) -> Result<PathGraph> {
    if !exponent.is_finite() {
        return Err(Error::Precondition(format!("exponent {exponent} is not finite")));
    }
    let warning = (!(-1.0..=1.0).contains(&exponent))
        .then(|| format!("exponent {exponent} outside [-1, 1]: near-boundary edges dominate"));
    let mut index = vec![u32::MAX; mesh.num_nodes()];
    let mut nodes = Vec::new();
    for (i, &z) in mesh.nodes().iter().enumerate() {
        if !mesh.is_boundary(i) {
            index[i] = nodes.len() as u32;
            nodes.push(z);
        }
    }
    if nodes.is_empty() {
        return Err(Error::Disconnected("mesh has no interior nodes".into()));
    }
    let dist: Vec<f64> = nodes.iter().map(|&z| domain.dist_to_boundary(z)).collect();
    let wt: Vec<f64> = dist.iter().map(|d| d.powf(exponent)).collect();

    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); nodes.len()];
    for e in mesh.edges() {
        let (a, b) = (index[e[0]], index[e[1]]);
        if a != u32::MAX && b != u32::MAX {
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
    }
    if shortcuts {
        let direct: Vec<Vec<u32>> = adj.iter().map(|v| sorted(v.clone())).collect();
        for a in 0..nodes.len() {
            let mut ring2: Vec<u32> = direct[a]
                .iter()
                .flat_map(|&m| direct[m as usize].iter().copied())
                .filter(|&b| b as usize > a && direct[a].binary_search(&b).is_err())
                .collect();
            ring2.sort_unstable();
            ring2.dedup();
            for b in ring2 {
                let (p, q) = (nodes[a], nodes[b as usize]);
                // the disk about p of radius dist(p) lies in Ω
                if p.dist(q) < dist[a] || domain.segment_inside(p, q) {
                    adj[a].push(b);
                    adj[b as usize].push(a as u32);
                }
            }
        }
    }

    let mut offsets = Vec::with_capacity(nodes.len() + 1);
    let mut targets = Vec::new();
    let mut weights = Vec::new();
    offsets.push(0);
    for (a, nb) in adj.iter_mut().enumerate() {
        nb.sort_unstable();
        nb.dedup();
        for &b in nb.iter() {
            let w = nodes[a].dist(nodes[b as usize]) * 0.5 * (wt[a] + wt[b as usize]);
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Precondition(format!("edge weight {w} between nodes {a} and {b}")));
            }
            targets.push(b);
            weights.push(w);
        }
        offsets.push(targets.len());
    }
    let g = PathGraph { domain: domain.clone(), exponent, h: mesh.h(), nodes, offsets, targets, weights, warning };
    check_connected(&g)?;
    Ok(g)
}

fn sorted(mut v: Vec<u32>) -> Vec<u32> {
    v.sort_unstable();
    v.dedup();
    v
}

fn check_connected(g: &PathGraph) -> Result<()> {
    let n = g.nodes.len();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for (v, _) in g.edges_of(u) {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    if count < n {
        return Err(Error::Disconnected(format!("{count} of {n} interior nodes reachable")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    /// Query point, snapped graph path, query point.
    pub path: Polyline,
    /// Quadrature of the weight along `path`; the authoritative value.
    pub weighted_length: f64,
    /// Sum of graph edge weights between the snapped nodes.
    pub graph_length: f64,
    pub euclid_length: f64,
    pub exponent: f64,
    pub snap: [f64; 2],
}

/// One CSV row per query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRow {
    pub z1_x: f64,
    pub z1_y: f64,
    pub z2_x: f64,
    pub z2_y: f64,
    pub exponent: f64,
    pub weighted_length: f64,
    pub euclid_length: f64,
    pub graph_length: f64,
    pub snap1: f64,
    pub snap2: f64,
}

impl PathResult {
    pub fn row(&self) -> PathRow {
        let (a, b) = (self.path.first(), self.path.last());
        PathRow {
            z1_x: a.x,
            z1_y: a.y,
            z2_x: b.x,
            z2_y: b.y,
            exponent: self.exponent,
            weighted_length: self.weighted_length,
            euclid_length: self.euclid_length,
            graph_length: self.graph_length,
            snap1: self.snap[0],
            snap2: self.snap[1],
        }
    }
}

/// Weighted shortest path between interior points. The points are snapped
/// to their nearest graph nodes; snapping farther than `2h` is refused. The
/// graph path is tightened by straight chords where that lowers the
/// quadrature weighted length, which is the reported value.
pub fn subhyperbolic_distance(graph: &PathGraph, z1: Point2, z2: Point2) -> Result<PathResult> {
    let dom = &graph.domain;
    for z in [z1, z2] {
        if !dom.point_in_domain(z) {
            return Err(Error::Precondition(format!("query point {z} is not interior")));
        }
    }
    if z1 == z2 {
        return Ok(PathResult {
            path: Polyline::point(z1),
            weighted_length: 0.0,
            graph_length: 0.0,
            euclid_length: 0.0,
            exponent: graph.exponent,
            snap: [0.0; 2],
        });
    }
    let (a, sa) = graph.nearest_node(z1);
    let (b, sb) = graph.nearest_node(z2);
    for s in [sa, sb] {
        if s > 2.0 * graph.h {
            return Err(Error::Precondition(format!("snap distance {s:.3e} exceeds 2h = {:.3e}", 2.0 * graph.h)));
        }
    }
    let (glen, nodes) = graph.shortest_path(a, b)?;
    let mut pts = vec![z1];
    pts.extend(nodes.iter().map(|&i| graph.nodes[i]));
    pts.push(z2);
    let raw = Polyline::from_points_dedup(pts)?;
    let (path, weighted_length) = pull_taut(&raw, dom, graph.exponent)?;
    Ok(PathResult {
        euclid_length: path.length(),
        path,
        weighted_length,
        graph_length: glen,
        exponent: graph.exponent,
        snap: [sa, sb],
    })
}

/// Replaces runs of the path by straight chords that stay in Ω and do not
/// increase the weighted length. From each kept vertex the chord length is
/// doubled (2, 4, 8, … vertices ahead) while the chord wins; returns the
/// new path and its weighted length.
fn pull_taut(path: &Polyline, dom: &JordanPolygon, exponent: f64) -> Result<(Polyline, f64)> {
    let v = path.vertices();
    let mut prefix = vec![0.0; v.len()];
    for k in 1..v.len() {
        prefix[k] = prefix[k - 1] + weighted_length(&Polyline::new(vec![v[k - 1], v[k]])?, dom, exponent)?;
    }
    let last = v.len() - 1;
    let mut out = vec![v[0]];
    let mut total = 0.0;
    let mut i = 0;
    while i < last {
        let mut best = (i + 1, prefix[i + 1] - prefix[i]);
        let mut step = 2;
        loop {
            let j = (i + step).min(last);
            if j <= best.0 || !dom.segment_inside(v[i], v[j]) {
                break;
            }
            let chord = weighted_length(&Polyline::new(vec![v[i], v[j]])?, dom, exponent)?;
            if chord > prefix[j] - prefix[i] {
                break;
            }
            best = (j, chord);
            step *= 2;
        }
        out.push(v[best.0]);
        total += best.1;
        i = best.0;
    }
    Ok((Polyline::new(out)?, total))
}

/// Subhyperbolic distance on a graph built with exponent `−1`.
pub fn quasihyperbolic_distance(graph: &PathGraph, z1: Point2, z2: Point2) -> Result<PathResult> {
    if graph.exponent != -1.0 {
        return Err(Error::Precondition(format!("graph exponent {} is not -1", graph.exponent)));
    }
    subhyperbolic_distance(graph, z1, z2)
}

/// Convenience: mesh `domain` at size `h` and compute `d_p` with exponent `1 − p`.
pub fn d_p(domain: &JordanPolygon, p: f64, h: f64, z1: Point2, z2: Point2) -> Result<PathResult> {
    let mesh = triangulate(domain, h)?;
    let g = build_graph(domain, &mesh, 1.0 - p)?;
    subhyperbolic_distance(&g, z1, z2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Candidate {
    HyperbolicGeodesic,
    SubhyperbolicPath,
    Segment,
    Point,
}

#[derive(Debug, Clone)]
pub struct CandidateOutcome {
    pub kind: Candidate,
    pub curve: Option<Polyline>,
    /// `None` when the candidate was skipped, with the reason in `skipped`.
    pub capacity: Option<CapacityResult>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone)]
pub struct CapacityMetric {
    pub value: f64,
    pub curve: Polyline,
    pub kind: Candidate,
    pub converged: bool,
    pub candidates: Vec<CandidateOutcome>,
}

/// Inputs shared across many capacity-metric queries on one domain.
#[derive(Debug, Clone)]
pub struct MetricContext {
    pub domain: JordanPolygon,
    pub cfg: SolverConfig,
    pub h: f64,
    pub map: crate::confmap::RiemannMap,
    pub graph: PathGraph,
}

impl MetricContext {
    /// Map with the default base point and a `d_p` graph, both at size `h`.
    pub fn new(domain: &JordanPolygon, cfg: &SolverConfig, h: f64) -> Result<Self> {
        Self::new_with_exponent(domain, cfg, h, 1.0 - cfg.p)
    }

    /// As [`MetricContext::new`] with a graph weight exponent other than `1 − p`.
    pub fn new_with_exponent(domain: &JordanPolygon, cfg: &SolverConfig, h: f64, exponent: f64) -> Result<Self> {
        cfg.validate()?;
        let map = build_map(domain, default_base_point(domain), h)?;
        let graph = build_graph(domain, map.mesh(), exponent)?;
        Ok(MetricContext { domain: domain.clone(), cfg: cfg.clone(), h, map, graph })
    }
}

/// Upper bound for `d_Cap_p(z₁, z₂)`: the least `Cap_p(γ, ∂Ω)` over the
/// hyperbolic geodesic, the `d_p` graph geodesic and, when it stays in Ω,
/// the straight segment.
pub fn capacity_metric(domain: &JordanPolygon, z1: Point2, z2: Point2, cfg: &SolverConfig, h: f64) -> Result<CapacityMetric> {
    let ctx = MetricContext::new(domain, cfg, h)?;
    capacity_metric_in(&ctx, z1, z2, None)
}

/// As [`capacity_metric`] on a prepared context. A hyperbolic-geodesic
/// capacity already computed by the caller can be passed in `known`.
pub fn capacity_metric_in(
    ctx: &MetricContext,
    z1: Point2,
    z2: Point2,
    known: Option<(&Polyline, &CapacityResult)>,
) -> Result<CapacityMetric> {
    let dom = &ctx.domain;
    for z in [z1, z2] {
        if !dom.point_in_domain(z) {
            return Err(Error::Precondition(format!("point {z} is not interior")));
        }
    }
    let mut curves: Vec<(Candidate, Result<Polyline>)> = Vec::new();
    if z1 == z2 {
        curves.push((Candidate::Point, Ok(Polyline::point(z1))));
    } else {
        curves.push((Candidate::HyperbolicGeodesic, hyperbolic_geodesic(&ctx.map, z1, z2, GEODESIC_SAMPLES)));
        curves.push((Candidate::SubhyperbolicPath, subhyperbolic_distance(&ctx.graph, z1, z2).map(|r| r.path)));
        if dom.segment_inside(z1, z2) {
            curves.push((Candidate::Segment, Polyline::segment(z1, z2)));
        }
    }
    let mut outcomes = Vec::new();
    for (kind, curve) in curves {
        let curve = match curve {
            Ok(c) => c,
            Err(e @ (Error::Precondition(_) | Error::LookupFailure(_))) => {
                outcomes.push(CandidateOutcome { kind, curve: None, capacity: None, skipped: Some(e.to_string()) });
                continue;
            }
            Err(e) => return Err(e),
        };
        let cap = match known {
            Some((g, c)) if kind == Candidate::HyperbolicGeodesic && *g == curve => Ok(c.clone()),
            _ => curve_capacity(dom, &curve, &ctx.cfg, ctx.h),
        };
        match cap {
            Ok(c) => outcomes.push(CandidateOutcome { kind, curve: Some(curve), capacity: Some(c), skipped: None }),
            Err(e @ Error::Precondition(_)) => {
                outcomes.push(CandidateOutcome { kind, curve: Some(curve), capacity: None, skipped: Some(e.to_string()) })
            }
            Err(e) => return Err(e),
        }
    }
    let best = outcomes
        .iter()
        .filter_map(|o| o.capacity.as_ref().map(|c| (o, c)))
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value))
        .ok_or_else(|| Error::Precondition("no admissible candidate curve".into()))?;
    let (o, c) = best;
    Ok(CapacityMetric {
        value: c.value,
        curve: o.curve.clone().expect("evaluated candidate has a curve"),
        kind: o.kind,
        converged: c.converged,
        candidates: outcomes.clone(),
    })
}

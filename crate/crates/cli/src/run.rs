use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use capdual::analysis::{
    annuli_report, annulus_lower_bound_check, comparability_batch, curve_condition_check_with, duality_check_with, gehring_osgood_check, AnnulusEnergy, CurveConditionOptions,
};
use capdual::confmap::{
    boundary_geodesic_full, build_map, conformal_annulus, default_base_point, disk_distance, geodesic, Geodesic,
    RiemannMap,
};
use capdual::geometry::{BoundaryArc, DomainFile};
use capdual::metrics::{capacity_metric, d_p, quasihyperbolic_distance, subhyperbolic_distance, build_graph};
use capdual::report::{sha256_hex, to_csv, Report, ReportMeta};
use capdual::svg::Scene;
use capdual::variational::{capacity, conjugate_exponent, curve_capacity, richardson, CapacitySummary};
use capdual::{Error, JordanPolygon, Point2, Polyline, Result, SolverConfig};
use serde::Serialize;

use crate::args::{ArcPair, Cli, Command, MetricKind};

/// Result of a command that ran to completion.
pub struct Outcome {
    pub converged: bool,
    pub artifacts: Vec<String>,
    pub input_hashes: BTreeMap<String, String>,
}

struct Run<'a> {
    cli: &'a Cli,
    artifacts: Vec<String>,
    inputs: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct PointRow {
    x: f64,
    y: f64,
}

#[derive(Serialize)]
struct GeodesicRow {
    x: f64,
    y: f64,
    w_re: f64,
    w_im: f64,
}

#[derive(Serialize)]
struct CapRow {
    p: f64,
    h: f64,
    extrapolated: bool,
    value: f64,
    iterations: usize,
    converged: bool,
}

impl<'a> Run<'a> {
    fn out(&self) -> &Path {
        &self.cli.common.out
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.out().join(name);
        fs::write(&path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let text = to_csv(rows)?;
        self.write(name, &text)
    }

    fn report<T: Serialize>(&mut self, domain: &JordanPolygon, solver: Option<&SolverConfig>, body: T) -> Result<()> {
        let meta = ReportMeta::new(domain, self.cli.common.h, solver, Some(self.cli.common.seed), &self.cli);
        self.write("report.json", &(Report { meta, body }.to_json() + "\n"))
    }

    fn load_domain(&mut self) -> Result<(JordanPolygon, DomainFile)> {
        let path: &PathBuf = self
            .cli
            .common
            .domain
            .as_ref()
            .ok_or_else(|| Error::Precondition("--domain is required for this command".into()))?;
        let bytes = fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.inputs.insert(path.display().to_string(), sha256_hex(&bytes));
        let text = String::from_utf8(bytes).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let file = DomainFile::from_json(&text)?;
        Ok((file.polygon()?, file))
    }
}

fn check_common(cli: &Cli) -> Result<()> {
    let c = &cli.common;
    if !(c.p > 1.0 && c.p.is_finite()) {
        return Err(Error::Precondition(format!("--p must be > 1, got {}", c.p)));
    }
    if !(c.h > 0.0 && c.h.is_finite()) {
        return Err(Error::Precondition(format!("--h must be > 0, got {}", c.h)));
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    check_common(cli)?;
    if !matches!(cli.command, Command::Report) {
        fs::create_dir_all(&cli.common.out).map_err(|e| Error::Io(format!("{}: {e}", cli.common.out.display())))?;
    }
    let mut r = Run { cli, artifacts: Vec::new(), inputs: BTreeMap::new() };
    let converged = dispatch(&mut r)?;
    Ok(Outcome { converged, artifacts: r.artifacts, input_hashes: r.inputs })
}

fn dispatch(r: &mut Run) -> Result<bool> {
    let c = &r.cli.common;
    let (p, h, seed) = (c.p, c.h, c.seed);
    match &r.cli.command {
        Command::Cap { pair, e, f, richardson: extrapolate } => {
            let (dom, file) = r.load_domain()?;
            let (ea, fa) = match (e, f) {
                (Some(e), Some(f)) => (BoundaryArc::new(&dom, e[0], e[1])?, BoundaryArc::new(&dom, f[0], f[1])?),
                _ => {
                    let quad = file
                        .quadrilateral(&dom)?
                        .ok_or_else(|| Error::Precondition("domain file has no cuts; pass --e and --f".into()))?;
                    match pair {
                        ArcPair::P13 => (quad.arcs[0], quad.arcs[2]),
                        ArcPair::P24 => (quad.arcs[1], quad.arcs[3]),
                    }
                }
            };
            let cfg = r.cli.common.solver(p);
            let hs: Vec<f64> = if *extrapolate { vec![2.0 * h, h] } else { vec![h] };
            let results: Vec<CapacitySummary> =
                hs.iter().map(|&hh| capacity(&dom, &ea, &fa, &cfg, hh).map(|c| c.summary())).collect::<Result<_>>()?;
            let mut rows: Vec<CapRow> = results
                .iter()
                .map(|s| CapRow { p, h: s.h, extrapolated: false, value: s.value, iterations: s.iterations, converged: s.converged })
                .collect();
            let converged = results.iter().all(|s| s.converged);
            if *extrapolate {
                let v = richardson(results[0].value, results[1].value, 2.0);
                rows.push(CapRow { p, h: 0.0, extrapolated: true, value: v, iterations: 0, converged });
            }
            r.csv("cap.csv", &rows)?;
            #[derive(Serialize)]
            struct Body {
                e: BoundaryArc,
                f: BoundaryArc,
                value: f64,
                solves: Vec<CapacitySummary>,
            }
            let value = rows.last().expect("at least one row").value;
            r.report(&dom, Some(&cfg), Body { e: ea, f: fa, value, solves: results })?;
            Ok(converged)
        }
        Command::CurveCap { curve } => {
            let (dom, _) = r.load_domain()?;
            let g = Polyline::new(curve.0.clone())?;
            let cfg = r.cli.common.solver(p);
            let res = curve_capacity(&dom, &g, &cfg, h)?;
            let s = res.summary();
            r.csv(
                "curve_cap.csv",
                &[CapRow { p, h, extrapolated: false, value: s.value, iterations: s.iterations, converged: s.converged }],
            )?;
            let mut scene = Scene::new();
            scene.domain(&dom).curve(&g);
            r.write("curve.svg", &scene.render())?;
            r.report(&dom, Some(&cfg), &s)?;
            Ok(s.converged)
        }
        Command::Dual { single } => {
            let (dom, file) = r.load_domain()?;
            let quad = file
                .quadrilateral(&dom)?
                .ok_or_else(|| Error::Precondition("duality needs `cuts` in the domain file".into()))?;
            let cfg = r.cli.common.solver(p);
            let hs: &[f64] = if *single { &[h] } else { &[2.0 * h, h] };
            let rep = duality_check_with(&dom, &quad, &cfg, hs)?;
            r.csv("duality.csv", &rep.rows())?;
            let converged = rep.converged;
            r.report(&dom, Some(&cfg), &rep)?;
            Ok(converged)
        }
        Command::Map { base } => {
            let (dom, _) = r.load_domain()?;
            let z0 = base.unwrap_or_else(|| default_base_point(&dom));
            let map = build_map(&dom, z0, h)?;
            r.csv("correspondence.csv", &map.correspondence_table())?;
            let mut plane = Scene::new();
            plane.domain(&dom).point(z0);
            r.write("domain.svg", &plane.render())?;
            let per = dom.perimeter();
            let n = 512;
            let boundary: Vec<_> = (0..=n).map(|k| map.boundary_image(per * k as f64 / n as f64)).collect();
            let mut disk = Scene::new();
            disk.unit_circle().disk_curve(&boundary).point(Point2::ORIGIN);
            r.write("disk.svg", &disk.render())?;
            #[derive(Serialize)]
            struct Body {
                base_point: Point2,
                nodes: usize,
                folded: usize,
                branch_residual: f64,
                boundary_winding: f64,
            }
            r.report(
                &dom,
                None,
                Body {
                    base_point: z0,
                    nodes: map.mesh().num_nodes(),
                    folded: map.folded().iter().filter(|f| **f).count(),
                    branch_residual: map.branch_residual(),
                    boundary_winding: map.boundary_winding(),
                },
            )?;
            Ok(true)
        }
        Command::Geodesic { z1, z2, s1, s2, samples } => {
            let (dom, _) = r.load_domain()?;
            let map = build_map(&dom, default_base_point(&dom), h)?;
            let (g, distance) = match (z1, z2, s1, s2) {
                (Some(a), Some(b), _, _) => {
                    let g = geodesic(&map, *a, *b, *samples)?;
                    let d = disk_distance(g.disk[0], *g.disk.last().expect("samples"));
                    (g, Some(d))
                }
                (_, _, Some(a), Some(b)) => (boundary_geodesic_full(&map, *a, *b, *samples)?, None),
                _ => return Err(Error::Precondition("pass --z1/--z2 or --s1/--s2".into())),
            };
            write_geodesic(r, &dom, &g)?;
            #[derive(Serialize)]
            struct Body {
                hyperbolic_distance: Option<f64>,
                euclidean_length: f64,
                boundary_params: Option<[f64; 2]>,
            }
            r.report(
                &dom,
                None,
                Body { hyperbolic_distance: distance, euclidean_length: g.path.length(), boundary_params: g.boundary_params },
            )?;
            Ok(true)
        }
        Command::Metric { z1, z2, kind, exponent } => {
            let (dom, _) = r.load_domain()?;
            #[derive(Serialize)]
            struct Body {
                kind: MetricKind,
                value: f64,
                curve_length: f64,
                detail: serde_json::Value,
            }
            let (value, curve, detail, converged, solver) = match kind {
                MetricKind::Subhyperbolic | MetricKind::Quasihyperbolic => {
                    let res = match (kind, exponent) {
                        (MetricKind::Quasihyperbolic, _) => {
                            let mesh = capdual::mesh::triangulate(&dom, h)?;
                            quasihyperbolic_distance(&build_graph(&dom, &mesh, -1.0)?, *z1, *z2)?
                        }
                        (_, Some(e)) => {
                            let mesh = capdual::mesh::triangulate(&dom, h)?;
                            subhyperbolic_distance(&build_graph(&dom, &mesh, *e)?, *z1, *z2)?
                        }
                        _ => d_p(&dom, p, h, *z1, *z2)?,
                    };
                    r.csv("metric.csv", &[res.row()])?;
                    let detail = serde_json::to_value(res.row())?;
                    (res.weighted_length, res.path, detail, true, None)
                }
                MetricKind::Hyperbolic => {
                    let map = build_map(&dom, default_base_point(&dom), h)?;
                    let g = geodesic(&map, *z1, *z2, 64)?;
                    let d = disk_distance(g.disk[0], *g.disk.last().expect("samples"));
                    (d, g.path, serde_json::Value::Null, true, None)
                }
                MetricKind::Capacity => {
                    let cfg = r.cli.common.solver(p);
                    let m = capacity_metric(&dom, *z1, *z2, &cfg, h)?;
                    let cands: Vec<serde_json::Value> = m
                        .candidates
                        .iter()
                        .map(|c| {
                            serde_json::json!({
                                "kind": c.kind,
                                "capacity": c.capacity.as_ref().map(|r| r.value),
                                "converged": c.capacity.as_ref().map(|r| r.converged),
                                "skipped": c.skipped,
                            })
                        })
                        .collect();
                    let detail = serde_json::json!({ "best": m.kind, "candidates": cands });
                    (m.value, m.curve, detail, m.converged, Some(cfg))
                }
            };
            let pts: Vec<PointRow> = curve.vertices().iter().map(|z| PointRow { x: z.x, y: z.y }).collect();
            r.csv("path.csv", &pts)?;
            let mut scene = Scene::new();
            scene.domain(&dom).curve(&curve).point(*z1).point(*z2);
            r.write("path.svg", &scene.render())?;
            r.report(&dom, solver.as_ref(), Body { kind: *kind, value, curve_length: curve.length(), detail })?;
            Ok(converged)
        }
        Command::Annuli { s1, s2, k_max, energy } => {
            let (dom, _) = r.load_domain()?;
            let ends = [dom.point_at(*s1).0, dom.point_at(*s2).0];
            let opts = capdual::confmap::MapOptions::new(h).with_focus(ends);
            let map = capdual::confmap::build_map_with(&dom, default_base_point(&dom), &opts)?;
            let g = boundary_geodesic_full(&map, *s1, *s2, capdual::analysis::BOUNDARY_GEODESIC_SAMPLES)?;
            let rep = annuli_report(&map, &g, *k_max)?;
            r.csv("annuli.csv", &rep.records)?;
            let mut energies: Vec<AnnulusEnergy> = Vec::new();
            if *energy {
                for rec in &rep.records {
                    energies.push(annulus_lower_bound_check(&map, &g, rec.i, rec.k, p, h)?);
                }
                r.csv("annulus_energy.csv", &energies)?;
            }
            write_annuli_svg(r, &map, &g, *k_max)?;
            let converged = energies.iter().all(|e| e.converged);
            #[derive(Serialize)]
            struct Body {
                annuli: capdual::analysis::AnnuliReport,
                energies: Vec<AnnulusEnergy>,
            }
            let cfg = energy.then(|| r.cli.common.solver(p));
            r.report(&dom, cfg.as_ref(), Body { annuli: rep, energies })?;
            Ok(converged)
        }
        Command::CheckComparability { pairs } => {
            let (dom, _) = r.load_domain()?;
            let b = comparability_batch(&dom, p, h, *pairs, seed)?;
            r.csv("comparability.csv", &b.reports)?;
            let converged = b.converged;
            r.report(&dom, Some(&SolverConfig::new(p)), &b)?;
            Ok(converged)
        }
        Command::CheckCurve { q, pairs, literal_exponent, no_boundary_pairs } => {
            let (dom, _) = r.load_domain()?;
            let q = q.unwrap_or_else(|| conjugate_exponent(p));
            let opts = CurveConditionOptions { literal_exponent: *literal_exponent, boundary_pairs: !no_boundary_pairs };
            let rep = curve_condition_check_with(&dom, q, *pairs, seed, h, opts)?;
            r.csv("curve_condition.csv", &rep.pairs)?;
            r.report(&dom, None, &rep)?;
            Ok(true)
        }
        Command::CheckGo { pairs } => {
            let (dom, _) = r.load_domain()?;
            let rep = gehring_osgood_check(&dom, *pairs, seed, h)?;
            r.csv("gehring_osgood.csv", &rep.pairs)?;
            r.report(&dom, None, &rep)?;
            Ok(true)
        }
        Command::Report => {
            let text = summarize(r.out())?;
            print!("{text}");
            r.write("summary.txt", &text)?;
            Ok(true)
        }
    }
}

fn write_geodesic(r: &mut Run, dom: &JordanPolygon, g: &Geodesic) -> Result<()> {
    let rows: Vec<GeodesicRow> = g
        .path
        .vertices()
        .iter()
        .zip(&g.disk)
        .map(|(z, w)| GeodesicRow { x: z.x, y: z.y, w_re: w.re, w_im: w.im })
        .collect();
    r.csv("geodesic.csv", &rows)?;
    let mut plane = Scene::new();
    plane.domain(dom).curve(&g.path);
    r.write("geodesic.svg", &plane.render())?;
    let mut disk = Scene::new();
    disk.unit_circle().disk_curve(&g.disk);
    r.write("geodesic_disk.svg", &disk.render())
}

fn write_annuli_svg(r: &mut Run, map: &RiemannMap, g: &Geodesic, k_max: u32) -> Result<()> {
    let params = g.boundary_params.expect("boundary geodesic");
    let mut scene = Scene::new();
    scene.domain(map.domain());
    for s in params {
        for k in 1..=k_max {
            match conformal_annulus(map, s, k) {
                Ok(a) => {
                    scene.region(map.mesh(), &a.triangles);
                }
                Err(Error::UnresolvedScale(_)) => break,
                Err(e) => return Err(e),
            }
        }
    }
    scene.curve(&g.path);
    r.write("annuli.svg", &scene.render())
}

/// `key: value` lines for the scalar fields of `report.json` in `dir`.
fn summarize(dir: &Path) -> Result<String> {
    let path = dir.join("report.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    let mut out = String::new();
    for section in ["meta", "body"] {
        out.push_str(&format!("[{section}]\n"));
        if let Some(obj) = v.get(section).and_then(|s| s.as_object()) {
            for (k, val) in obj {
                match val {
                    serde_json::Value::Array(a) => out.push_str(&format!("{k}: [{} items]\n", a.len())),
                    serde_json::Value::Object(_) => out.push_str(&format!("{k}: {{…}}\n")),
                    other => out.push_str(&format!("{k}: {other}\n")),
                }
            }
        }
    }
    Ok(out)
}

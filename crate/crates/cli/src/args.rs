use std::path::PathBuf;

use capdual::variational::Method;
use capdual::{Point2, SolverConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "capdual", version, about = "p-capacities, conformal maps and weighted metrics on planar polygons")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct Common {
    /// Domain file (JSON with `vertices` and optional `cuts`).
    #[arg(long, global = true)]
    pub domain: Option<PathBuf>,
    /// Capacity exponent.
    #[arg(long, global = true, default_value_t = 1.5)]
    pub p: f64,
    /// Mesh size.
    #[arg(long, global = true, default_value_t = 0.04)]
    pub h: f64,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Step budget of the p-energy minimizer.
    #[arg(long, global = true)]
    pub max_iters: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub method: Option<MethodArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    Irls,
    Newton,
}

impl Common {
    pub fn solver(&self, p: f64) -> SolverConfig {
        let mut cfg = SolverConfig::new(p);
        if let Some(n) = self.max_iters {
            cfg.max_iters = n;
        }
        if let Some(m) = self.method {
            cfg.method = match m {
                MethodArg::Irls => Method::Irls,
                MethodArg::Newton => Method::Newton,
            };
        }
        cfg
    }
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "name")]
pub enum Command {
    /// Capacity between two boundary arcs.
    Cap {
        /// Opposite arc pair of the domain's quadrilateral: 13 or 24.
        #[arg(long, default_value = "13", conflicts_with_all = ["e", "f"])]
        pair: ArcPair,
        /// Plate arc as `s_start,s_end` in arc length.
        #[arg(long, allow_hyphen_values = true, value_parser = parse_pair, requires = "f")]
        e: Option<[f64; 2]>,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_pair, requires = "e")]
        f: Option<[f64; 2]>,
        /// Also solve at 2h and extrapolate.
        #[arg(long)]
        richardson: bool,
    },
    /// Capacity of a curve against the boundary.
    CurveCap {
        /// Polyline as `x,y;x,y;...`.
        #[arg(long, allow_hyphen_values = true, value_parser = parse_points)]
        curve: Points,
    },
    /// Duality product of the domain's quadrilateral.
    Dual {
        /// Use h only, without the 2h solve and extrapolation.
        #[arg(long)]
        single: bool,
    },
    /// Riemann map onto the unit disk.
    Map {
        #[arg(long, allow_hyphen_values = true, value_parser = parse_point)]
        base: Option<Point2>,
    },
    /// Hyperbolic geodesic between interior points or boundary parameters.
    Geodesic {
        #[arg(long, allow_hyphen_values = true, value_parser = parse_point, requires = "z2", conflicts_with_all = ["s1", "s2"])]
        z1: Option<Point2>,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_point, requires = "z1")]
        z2: Option<Point2>,
        #[arg(long, allow_hyphen_values = true, requires = "s2")]
        s1: Option<f64>,
        #[arg(long, allow_hyphen_values = true, requires = "s1")]
        s2: Option<f64>,
        #[arg(long, default_value_t = 64)]
        samples: usize,
    },
    /// Distance between two interior points.
    Metric {
        #[arg(long, allow_hyphen_values = true, value_parser = parse_point)]
        z1: Point2,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_point)]
        z2: Point2,
        #[arg(long, value_enum, default_value = "subhyperbolic")]
        kind: MetricKind,
        /// Weight exponent for the subhyperbolic path (default 1 − p).
        #[arg(long, allow_hyphen_values = true)]
        exponent: Option<f64>,
    },
    /// Conformal annuli about the endpoints of a boundary geodesic.
    Annuli {
        #[arg(long, allow_hyphen_values = true)]
        s1: f64,
        #[arg(long, allow_hyphen_values = true)]
        s2: f64,
        #[arg(long, default_value_t = 5)]
        k_max: u32,
        /// Also solve the annulus condensers.
        #[arg(long)]
        energy: bool,
    },
    /// Comparability of the four quantities on seeded pairs.
    CheckComparability {
        #[arg(long, default_value_t = 20)]
        pairs: usize,
    },
    /// Curve condition on seeded pairs and boundary midpoints.
    CheckCurve {
        /// Sobolev exponent (default p/(p−1)).
        #[arg(long)]
        q: Option<f64>,
        #[arg(long, default_value_t = 50)]
        pairs: usize,
        /// Use the integrand exponent 1/(q−1).
        #[arg(long)]
        literal_exponent: bool,
        #[arg(long)]
        no_boundary_pairs: bool,
    },
    /// Quasihyperbolic length of hyperbolic geodesics against the log bound.
    CheckGo {
        #[arg(long, default_value_t = 50)]
        pairs: usize,
    },
    /// Plain-text summary of the report in the output directory.
    Report,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Cap { .. } => "cap",
            Command::CurveCap { .. } => "curve-cap",
            Command::Dual { .. } => "dual",
            Command::Map { .. } => "map",
            Command::Geodesic { .. } => "geodesic",
            Command::Metric { .. } => "metric",
            Command::Annuli { .. } => "annuli",
            Command::CheckComparability { .. } => "check-comparability",
            Command::CheckCurve { .. } => "check-curve",
            Command::CheckGo { .. } => "check-go",
            Command::Report => "report",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ArcPair {
    #[serde(rename = "13")]
    P13,
    #[serde(rename = "24")]
    P24,
}

impl std::str::FromStr for ArcPair {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "13" => Ok(ArcPair::P13),
            "24" => Ok(ArcPair::P24),
            _ => Err(format!("arc pair must be 13 or 24, got {s}")),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Subhyperbolic,
    Quasihyperbolic,
    Hyperbolic,
    Capacity,
}

#[derive(Debug, Clone, Serialize)]
#[serde(transparent)]
pub struct Points(pub Vec<Point2>);

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("not a number: {s:?}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("not finite: {s:?}"))
    }
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    match s.split(',').collect::<Vec<_>>()[..] {
        [a, b] => Ok([parse_f64(a)?, parse_f64(b)?]),
        _ => Err(format!("expected `a,b`, got {s:?}")),
    }
}

fn parse_point(s: &str) -> Result<Point2, String> {
    parse_pair(s).map(|[x, y]| Point2::new(x, y))
}

fn parse_points(s: &str) -> Result<Points, String> {
    s.split(';').filter(|t| !t.trim().is_empty()).map(parse_point).collect::<Result<_, _>>().map(Points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn point_lists() {
        let p = parse_points("0,0; 1,0.5;").unwrap();
        assert_eq!(p.0, vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.5)]);
        assert!(parse_point("1").is_err());
        assert!(parse_point("1,nan").is_err());
    }
}

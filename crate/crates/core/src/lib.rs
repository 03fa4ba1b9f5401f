pub mod analysis;
pub mod confmap;
pub mod error;
pub mod geometry;
mod linsolve;
pub mod locate;
pub mod mesh;
pub mod metrics;
pub mod report;
pub mod svg;
pub mod variational;

pub use error::{Error, Result};
pub use geometry::{BoundaryArc, JordanPolygon, Point2, Polyline, Quadrilateral};
pub use mesh::{NodeSet, TriMesh};
pub use metrics::{PathGraph, PathResult};
pub use variational::{CapacityResult, Method, ScalarField, SolverConfig};
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

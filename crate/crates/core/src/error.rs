use thiserror::Error;

/// Errors produced anywhere in the toolkit.
///
/// Numerical non-convergence of the p-energy minimizer is not an error: it is
/// reported through `CapacityResult::converged`.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("invalid polyline: {0}")]
    InvalidPolyline(String),
    #[error("invalid cuts: {0}")]
    InvalidCuts(String),
    #[error("integral diverges: {0}")]
    DivergentIntegral(String),
    #[error("meshing failed: {message} (worst angle {worst_angle_deg:.3} deg)")]
    MeshFailure { message: String, worst_angle_deg: f64 },
    #[error("no mesh node falls in {0}")]
    EmptyTag(String),
    #[error("tagged node set is not edge-connected: {0}")]
    DisconnectedTag(String),
    #[error("dirichlet sets conflict: {0}")]
    DirichletConflict(String),
    #[error("singular linear system: {0}")]
    SingularSystem(String),
    #[error("harmonic conjugate is not single valued: {0}")]
    BranchFailure(String),
    #[error("inverse map lookup failed: {0}")]
    LookupFailure(String),
    #[error("conformal annulus not resolved by the mesh: {0}")]
    UnresolvedScale(String),
    #[error("path graph is disconnected: {0}")]
    Disconnected(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("io: {0}")]
    Io(String),
    #[error("parse: {0}")]
    Parse(String),
}

impl Error {
    /// Short machine-readable kind, used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidPolygon(_) => "InvalidPolygon",
            Error::InvalidPolyline(_) => "InvalidPolyline",
            Error::InvalidCuts(_) => "InvalidCuts",
            Error::DivergentIntegral(_) => "DivergentIntegral",
            Error::MeshFailure { .. } => "MeshFailure",
            Error::EmptyTag(_) => "EmptyTag",
            Error::DisconnectedTag(_) => "DisconnectedTag",
            Error::DirichletConflict(_) => "DirichletConflict",
            Error::SingularSystem(_) => "SingularSystem",
            Error::BranchFailure(_) => "BranchFailure",
            Error::LookupFailure(_) => "LookupFailure",
            Error::UnresolvedScale(_) => "UnresolvedScale",
            Error::Disconnected(_) => "Disconnected",
            Error::Precondition(_) => "Precondition",
            Error::Io(_) => "Io",
            Error::Parse(_) => "Parse",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

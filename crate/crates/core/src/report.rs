//! Report metadata, content hashes and CSV serialization.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::JordanPolygon;
use crate::variational::SolverConfig;

/// Provenance block embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub tool: String,
    pub version: String,
    pub domain_hash: String,
    pub h: f64,
    pub solver: Option<SolverConfig>,
    pub seed: Option<u64>,
    /// SHA-256 of the canonical JSON of all inputs.
    pub input_hash: String,
}

impl ReportMeta {
    pub fn new(domain: &JordanPolygon, h: f64, solver: Option<&SolverConfig>, seed: Option<u64>, inputs: &impl Serialize) -> Self {
        ReportMeta {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            domain_hash: domain.content_hash(),
            h,
            solver: solver.cloned(),
            seed,
            input_hash: hash_json(inputs),
        }
    }
}

/// A report body with its metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report<T> {
    pub meta: ReportMeta,
    pub body: T,
}

impl<T: Serialize> Report<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_json(value: &impl Serialize) -> String {
    sha256_hex(serde_json::to_string(value).expect("inputs serialize").as_bytes())
}

/// Serializes rows as CSV with a header line.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

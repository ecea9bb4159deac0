//! Field persistence: raw row-major little-endian f64 payload next to a JSON
//! sidecar carrying the grid metadata and the domain hash, so a field can
//! only be read back onto the grid it came from.

use crate::fields::ScalarField;
use crate::geometry::Domain;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const ARTIFACT_VERSION: &str = "1";

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("field file does not match the domain: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Field(#[from] crate::fields::FieldError),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldSidecar {
    pub artifact_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub domain_hash: String,
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub len: usize,
    pub dirichlet: bool,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

/// Writes `<path>` (raw f64 little-endian, row-major) and `<path>.json`.
pub fn write_field(path: &Path, u: &ScalarField) -> Result<(), IoError> {
    write_field_tagged(path, u, None)
}

/// `write_field` with a run-configuration hash stamped into the sidecar.
pub fn write_field_tagged(
    path: &Path,
    u: &ScalarField,
    config_hash: Option<&str>,
) -> Result<(), IoError> {
    let d = u.domain();
    let sidecar = FieldSidecar {
        artifact_version: ARTIFACT_VERSION.to_string(),
        config_hash: config_hash.map(str::to_string),
        domain_hash: format!("{:016x}", d.hash()),
        nx: d.nx,
        ny: d.ny,
        h: d.h,
        len: u.values().len(),
        dirichlet: u.is_dirichlet(),
    };
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for v in u.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    let json = serde_json::to_vec_pretty(&sidecar)?;
    std::fs::write(sidecar_path(path), json)?;
    Ok(())
}

/// Reads a field written by `write_field` back onto its domain, verifying
/// the sidecar against the given grid.
pub fn read_field(path: &Path, domain: &Arc<Domain>) -> Result<ScalarField, IoError> {
    let sidecar: FieldSidecar =
        serde_json::from_slice(&std::fs::read(sidecar_path(path))?)?;
    let want_hash = format!("{:016x}", domain.hash());
    if sidecar.domain_hash != want_hash {
        return Err(IoError::Mismatch(format!(
            "domain hash {} vs {}",
            sidecar.domain_hash, want_hash
        )));
    }
    if sidecar.nx != domain.nx || sidecar.ny != domain.ny {
        return Err(IoError::Mismatch(format!(
            "grid {}x{} vs {}x{}",
            sidecar.nx, sidecar.ny, domain.nx, domain.ny
        )));
    }
    if sidecar.len != domain.num_nodes() {
        return Err(IoError::Mismatch(format!(
            "length {} vs {}",
            sidecar.len,
            domain.num_nodes()
        )));
    }
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * sidecar.len {
        return Err(IoError::Mismatch(format!(
            "payload {} bytes, expected {}",
            bytes.len(),
            8 * sidecar.len
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(ScalarField::from_values(domain, sidecar.dirichlet, values)?)
}

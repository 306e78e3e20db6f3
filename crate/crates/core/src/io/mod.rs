//! On-disk formats: measurement datasets, reference states, checkpoints,
//! experiment configs and results tables.

mod checkpoint;
mod config;
mod dataset;
mod results;

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta, CHECKPOINT_FORMAT};
pub use config::{parse_grid, ExperimentConfig, FlatConfig};
pub use dataset::{
    load_dataset, load_reference, load_references, reference_path, save_dataset, save_reference, DATASET_FILE,
    META_FILE, REFERENCE_DIR,
};
pub use results::{classify_point, write_manifest, MetricsWriter, PointKind, ResultRow, ResultsTable};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn check_version(what: &str, format: &str, expected: &str, version: u32) -> Result<()> {
    if format != expected {
        return Err(Error::Data(format!("{what}: expected format {expected:?}, found {format:?}")));
    }
    if version != FORMAT_VERSION {
        return Err(Error::Data(format!(
            "{what}: unsupported format version {version} (this build reads {FORMAT_VERSION})"
        )));
    }
    Ok(())
}

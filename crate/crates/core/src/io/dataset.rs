use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{check_version, read_bytes, sha256_hex, write_bytes, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::exact_diag::{DatasetMeta, GroundStateVector, Measurement, MeasurementDataset};
use crate::lattice::{LatticeGeometry, LatticeKind};
use crate::spins::Spins;

pub const DATASET_FILE: &str = "measurements.jsonl";
pub const META_FILE: &str = "dataset.meta.json";
pub const REFERENCE_DIR: &str = "references";

const DATASET_FORMAT: &str = "hyperqst-dataset";
const REFERENCE_FORMAT: &str = "hyperqst-reference";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    g: f64,
    s: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetaFile {
    format: String,
    version: u32,
    meta: DatasetMeta,
    records_sha256: String,
}

fn records_text(dataset: &MeasurementDataset) -> String {
    let n = dataset.meta.num_sites;
    let mut out = String::with_capacity(dataset.records.len() * (n + 24));
    for r in &dataset.records {
        let line = Line {
            g: r.g,
            s: r.spins.to_bitstring(n),
        };
        out.push_str(&serde_json::to_string(&line).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// Writes `measurements.jsonl` and then the metadata sidecar; a dataset
/// without its sidecar is incomplete.
pub fn save_dataset(dir: &Path, dataset: &MeasurementDataset) -> Result<()> {
    dataset.validate()?;
    let text = records_text(dataset);
    write_bytes(&dir.join(DATASET_FILE), text.as_bytes())?;
    let meta = MetaFile {
        format: DATASET_FORMAT.into(),
        version: FORMAT_VERSION,
        meta: dataset.meta.clone(),
        records_sha256: sha256_hex(text.as_bytes()),
    };
    let mut json = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    json.push('\n');
    write_bytes(&dir.join(META_FILE), json.as_bytes())
}

pub fn load_dataset(dir: &Path) -> Result<MeasurementDataset> {
    let meta_path = dir.join(META_FILE);
    if !meta_path.exists() {
        return Err(Error::Data(format!(
            "{}: metadata sidecar missing (dataset incomplete or not a dataset directory)",
            meta_path.display()
        )));
    }
    let meta: MetaFile = serde_json::from_slice(&read_bytes(&meta_path)?).map_err(|e| Error::json(&meta_path, e))?;
    check_version(&meta_path.display().to_string(), &meta.format, DATASET_FORMAT, meta.version)?;
    let data_path = dir.join(DATASET_FILE);
    let bytes = read_bytes(&data_path)?;
    if sha256_hex(&bytes) != meta.records_sha256 {
        return Err(Error::Data(format!(
            "{}: content hash does not match its metadata sidecar",
            data_path.display()
        )));
    }
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::Data(format!("{}: {e}", data_path.display())))?;
    let n = meta.meta.num_sites;
    let mut records = Vec::with_capacity(meta.meta.supports.iter().map(|s| s.count).sum());
    for (k, line) in text.lines().enumerate() {
        let rec: Line = serde_json::from_str(line)
            .map_err(|e| Error::Data(format!("{}:{}: {e}", data_path.display(), k + 1)))?;
        if rec.s.len() != n {
            return Err(Error::Data(format!(
                "{}:{}: configuration has {} sites, expected {n}",
                data_path.display(),
                k + 1,
                rec.s.len()
            )));
        }
        let spins = Spins::parse_bitstring(&rec.s)?;
        records.push(Measurement { spins, g: rec.g });
    }
    let dataset = MeasurementDataset {
        meta: meta.meta,
        records,
    };
    dataset.validate()?;
    Ok(dataset)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReferenceFile {
    format: String,
    version: u32,
    kind: LatticeKind,
    side_length: usize,
    num_sites: usize,
    j_coupling: f64,
    g: f64,
    energy: f64,
    degenerate: bool,
    amplitudes: Vec<f64>,
}

/// `references/g_<g>.json` inside a dataset directory.
pub fn reference_path(dir: &Path, g: f64) -> PathBuf {
    let mut name = String::from("g_");
    write!(name, "{g}").unwrap();
    name.push_str(".json");
    dir.join(REFERENCE_DIR).join(name)
}

pub fn save_reference(path: &Path, psi: &GroundStateVector) -> Result<()> {
    let file = ReferenceFile {
        format: REFERENCE_FORMAT.into(),
        version: FORMAT_VERSION,
        kind: psi.geometry.kind(),
        side_length: psi.geometry.side_length(),
        num_sites: psi.num_sites(),
        j_coupling: psi.j_coupling,
        g: psi.g,
        energy: psi.energy,
        degenerate: psi.degenerate,
        amplitudes: psi.amplitudes.clone(),
    };
    let mut json = serde_json::to_string(&file).expect("reference serializes");
    json.push('\n');
    write_bytes(path, json.as_bytes())
}

pub fn load_reference(path: &Path) -> Result<GroundStateVector> {
    let file: ReferenceFile = serde_json::from_slice(&read_bytes(path)?).map_err(|e| Error::json(path, e))?;
    check_version(&path.display().to_string(), &file.format, REFERENCE_FORMAT, file.version)?;
    let geometry = LatticeGeometry::new(file.kind, file.side_length)?;
    if geometry.num_sites() != file.num_sites || file.amplitudes.len() != 1usize << file.num_sites {
        return Err(Error::Data(format!("{}: amplitude count does not match the lattice", path.display())));
    }
    Ok(GroundStateVector {
        amplitudes: file.amplitudes,
        geometry,
        g: file.g,
        j_coupling: file.j_coupling,
        energy: file.energy,
        degenerate: file.degenerate,
    })
}

/// Every reference state in `dir/references`, sorted by field.
pub fn load_references(dir: &Path) -> Result<Vec<(PathBuf, GroundStateVector)>> {
    let ref_dir = dir.join(REFERENCE_DIR);
    let entries = fs::read_dir(&ref_dir).map_err(|e| Error::io(&ref_dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(&ref_dir, e))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            let psi = load_reference(&path)?;
            out.push((path, psi));
        }
    }
    out.sort_by(|a, b| a.1.g.total_cmp(&b.1.g));
    Ok(out)
}

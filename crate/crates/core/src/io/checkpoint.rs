use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_version, read_bytes, sha256_hex, write_bytes, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::hyperrbm::{HyperRbm, ModelShape, ParamSet, SLOT_LAYOUT};
use crate::lattice::{LatticeGeometry, LatticeKind};

pub const CHECKPOINT_FORMAT: &str = "hyperqst-checkpoint";

/// What a checkpoint knows about the experiment that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub kind: LatticeKind,
    pub side_length: usize,
    pub j_coupling: f64,
    pub supports: Vec<f64>,
    /// Dataset directory the model was trained on, as given to `train`.
    pub data_dir: Option<String>,
    pub epochs_completed: usize,
}

impl CheckpointMeta {
    pub fn geometry(&self) -> Result<LatticeGeometry> {
        LatticeGeometry::new(self.kind, self.side_length)
    }
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: HyperRbm,
    pub meta: CheckpointMeta,
    /// SHA-256 of the file contents.
    pub sha256: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Blocks {
    weights: Vec<f64>,
    visible_base: Vec<f64>,
    hidden_base: Vec<f64>,
    hyper_w1: Vec<f64>,
    hyper_b1: Vec<f64>,
    hyper_w2: Vec<f64>,
    hyper_b2: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    format: String,
    version: u32,
    n_visible: usize,
    n_hidden: usize,
    hyper_width: usize,
    g_lo: f64,
    g_hi: f64,
    slot_layout: String,
    meta: CheckpointMeta,
    params: Blocks,
}

fn encode(model: &HyperRbm, meta: &CheckpointMeta) -> String {
    let shape = model.shape();
    let (g_lo, g_hi) = model.g_range();
    let p = &model.params;
    let file = CheckpointFile {
        format: CHECKPOINT_FORMAT.into(),
        version: FORMAT_VERSION,
        n_visible: shape.n_visible,
        n_hidden: shape.n_hidden,
        hyper_width: shape.hyper_width,
        g_lo,
        g_hi,
        slot_layout: SLOT_LAYOUT.into(),
        meta: meta.clone(),
        params: Blocks {
            weights: p.weights.clone(),
            visible_base: p.visible_base.clone(),
            hidden_base: p.hidden_base.clone(),
            hyper_w1: p.hyper_w1.clone(),
            hyper_b1: p.hyper_b1.clone(),
            hyper_w2: p.hyper_w2.clone(),
            hyper_b2: p.hyper_b2.clone(),
        },
    };
    let mut json = serde_json::to_string_pretty(&file).expect("checkpoint serializes");
    json.push('\n');
    json
}

/// Writes the checkpoint and returns its content hash.
pub fn save_checkpoint(path: &Path, model: &HyperRbm, meta: &CheckpointMeta) -> Result<String> {
    if meta.supports.is_empty() {
        return Err(Error::Config("checkpoint metadata needs at least one support".into()));
    }
    let json = encode(model, meta);
    write_bytes(path, json.as_bytes())?;
    Ok(sha256_hex(json.as_bytes()))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = read_bytes(path)?;
    let file: CheckpointFile = serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))?;
    let what = path.display().to_string();
    check_version(&what, &file.format, CHECKPOINT_FORMAT, file.version)?;
    if file.slot_layout != SLOT_LAYOUT {
        return Err(Error::Data(format!(
            "{what}: hypernetwork slot layout {:?} is not {SLOT_LAYOUT:?}",
            file.slot_layout
        )));
    }
    let shape = ModelShape {
        n_visible: file.n_visible,
        n_hidden: file.n_hidden,
        hyper_width: file.hyper_width,
    };
    let expected = ParamSet::zeros(shape);
    let b = file.params;
    let params = ParamSet {
        weights: b.weights,
        visible_base: b.visible_base,
        hidden_base: b.hidden_base,
        hyper_w1: b.hyper_w1,
        hyper_b1: b.hyper_b1,
        hyper_w2: b.hyper_w2,
        hyper_b2: b.hyper_b2,
    };
    if !params.same_shape(&expected) {
        return Err(Error::Data(format!("{what}: parameter block sizes do not match the declared shape")));
    }
    if let Some((block, i)) = params.first_non_finite() {
        return Err(Error::Data(format!("{what}: non-finite parameter {block}[{i}]")));
    }
    let geometry = file.meta.geometry()?;
    if geometry.num_sites() != shape.n_visible {
        return Err(Error::Data(format!(
            "{what}: lattice {} has {} sites but the model has {} visible units",
            geometry.label(),
            geometry.num_sites(),
            shape.n_visible
        )));
    }
    let model = HyperRbm::from_params(shape, file.g_lo, file.g_hi, params)?;
    Ok(Checkpoint {
        model,
        meta: file.meta,
        sha256: sha256_hex(&bytes),
    })
}

//! The three stages of an experiment: data generation from exact ground
//! states, training, and evaluation of a checkpoint on a field grid.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{chi_f_model, magnetizations, overlap_exact, renyi2_swap_many};
use crate::exact_diag::{
    chi_f_exact, contiguous, exact_observables, renyi2_exact, sample_measurements, solve, DatasetMeta,
    GroundStateVector, Measurement, MeasurementDataset, SupportCount, MAX_ED_SITES,
};
use crate::io::{
    classify_point, load_checkpoint, load_dataset, load_reference, load_references, reference_path, save_checkpoint,
    save_dataset, save_reference, write_manifest, Checkpoint, CheckpointMeta, ExperimentConfig, MetricsWriter,
    ResultRow, ResultsTable,
};
use crate::rng::StreamSeed;
use crate::training::{train, EpochMetrics};

/// Finite-difference step for exact fidelity susceptibility references.
pub const CHI_F_DELTA: f64 = 1e-3;

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const METRICS_FILE: &str = "metrics.csv";

/// Seed of the measurement stream at support `k`.
pub fn support_seed(seed: u64, k: usize) -> u64 {
    StreamSeed::new(seed).derive(0xda7a).derive(k as u64).scalar()
}

pub struct GeneratedData {
    pub dataset: MeasurementDataset,
    pub references: Vec<PathBuf>,
}

/// Exact ground state, reference file and measurement records per support,
/// then the dataset with its metadata sidecar last.
pub fn gen_data(cfg: &ExperimentConfig, dir: &Path) -> Result<GeneratedData> {
    let mut records = Vec::with_capacity(cfg.supports.len() * cfg.samples_per_support);
    let mut supports = Vec::with_capacity(cfg.supports.len());
    let mut references = Vec::with_capacity(cfg.supports.len());
    for (k, &g) in cfg.supports.iter().enumerate() {
        let psi = solve(&cfg.geometry, cfg.j_coupling, g)?;
        let path = reference_path(dir, g);
        save_reference(&path, &psi)?;
        references.push(path);
        let samples = sample_measurements(&psi, cfg.samples_per_support, support_seed(cfg.seed, k))?;
        records.extend(samples.into_iter().map(|spins| Measurement { spins, g }));
        supports.push(SupportCount {
            g,
            count: cfg.samples_per_support,
        });
    }
    let dataset = MeasurementDataset {
        meta: DatasetMeta {
            kind: cfg.geometry.kind(),
            side_length: cfg.geometry.side_length(),
            num_sites: cfg.geometry.num_sites(),
            j_coupling: cfg.j_coupling,
            seed: cfg.seed,
            supports,
        },
        records,
    };
    save_dataset(dir, &dataset)?;
    Ok(GeneratedData { dataset, references })
}

pub struct TrainedRun {
    pub checkpoint: PathBuf,
    pub sha256: String,
    pub metrics: Vec<EpochMetrics>,
}

fn check_dataset_matches(cfg: &ExperimentConfig, dataset: &MeasurementDataset) -> Result<()> {
    let m = &dataset.meta;
    if m.kind != cfg.geometry.kind() || m.side_length != cfg.geometry.side_length() {
        return Err(Error::Data(format!(
            "dataset lattice {} L={} does not match the configured {}",
            m.kind.name(),
            m.side_length,
            cfg.geometry.label()
        )));
    }
    if m.j_coupling != cfg.j_coupling {
        return Err(Error::Data(format!(
            "dataset coupling J={} does not match the configured J={}",
            m.j_coupling, cfg.j_coupling
        )));
    }
    Ok(())
}

/// Trains on the dataset in `data_dir`, writing the metrics log and the
/// checkpoint into `out_dir`. Reference states found next to the dataset
/// feed the per-epoch overlap columns.
pub fn train_run(cfg: &ExperimentConfig, data_dir: &Path, out_dir: &Path) -> Result<TrainedRun> {
    let dataset = load_dataset(data_dir)?;
    check_dataset_matches(cfg, &dataset)?;
    let references: Vec<GroundStateVector> = if data_dir.join(crate::io::REFERENCE_DIR).is_dir() {
        load_references(data_dir)?.into_iter().map(|(_, psi)| psi).collect()
    } else {
        Vec::new()
    };
    let mut meta = CheckpointMeta {
        kind: cfg.geometry.kind(),
        side_length: cfg.geometry.side_length(),
        j_coupling: cfg.j_coupling,
        supports: dataset.support_values(),
        data_dir: Some(data_dir.display().to_string()),
        epochs_completed: 0,
    };
    let mut writer = MetricsWriter::create(&out_dir.join(METRICS_FILE))?;
    let every = cfg.checkpoint_every;
    let outcome = train(cfg.model, &cfg.training, &dataset, &references, |m, model| {
        writer.append(m)?;
        if every > 0 && m.epoch % every == 0 && m.epoch < cfg.training.epochs {
            let snapshot = CheckpointMeta {
                epochs_completed: m.epoch,
                ..meta.clone()
            };
            save_checkpoint(&out_dir.join(format!("checkpoint_epoch{}.json", m.epoch)), model, &snapshot)?;
        }
        Ok(())
    })?;
    meta.epochs_completed = cfg.training.epochs;
    let checkpoint = out_dir.join(CHECKPOINT_FILE);
    let sha256 = save_checkpoint(&checkpoint, &outcome.model, &meta)?;
    Ok(TrainedRun {
        checkpoint,
        sha256,
        metrics: outcome.metrics,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    Observables,
    Overlap,
    ChiF,
    Renyi,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::Observables => "observables",
            Quantity::Overlap => "overlap",
            Quantity::ChiF => "chi-f",
            Quantity::Renyi => "renyi",
        }
    }
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "observables" => Ok(Quantity::Observables),
            "overlap" => Ok(Quantity::Overlap),
            "chi-f" => Ok(Quantity::ChiF),
            "renyi" => Ok(Quantity::Renyi),
            other => Err(Error::Config(format!(
                "unknown quantity {other:?}; expected observables, overlap, chi-f or renyi"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvalRequest {
    pub what: Quantity,
    pub grid: Vec<f64>,
    pub samples: usize,
    pub gibbs_k: usize,
    pub seed: u64,
    /// Subsystems for the entropy; defaults to every contiguous block `[0, ℓ)`.
    pub subsystems: Option<Vec<Vec<usize>>>,
    /// Directory with reference-state files. Without one, references are
    /// computed by exact diagonalization when the lattice is small enough.
    pub references: Option<PathBuf>,
    /// Skip the exact reference column.
    pub skip_reference: bool,
}

pub struct Evaluation {
    pub table: ResultsTable,
    pub references_used: Vec<PathBuf>,
}

struct ReferenceSource<'a> {
    ckpt: &'a Checkpoint,
    dir: Option<&'a Path>,
    used: Vec<PathBuf>,
}

impl ReferenceSource<'_> {
    fn ground_state(&mut self, g: f64) -> Result<GroundStateVector> {
        if let Some(dir) = self.dir {
            let path = reference_path(dir, g);
            if !path.exists() {
                return Err(Error::Data(format!("no reference state for g = {g} at {}", path.display())));
            }
            let psi = load_reference(&path)?;
            if psi.num_sites() != self.ckpt.model.n_visible() || psi.j_coupling != self.ckpt.meta.j_coupling {
                return Err(Error::Data(format!("{}: reference does not match the checkpoint lattice", path.display())));
            }
            self.used.push(path);
            return Ok(psi);
        }
        let geom = self.ckpt.meta.geometry()?;
        solve(&geom, self.ckpt.meta.j_coupling, g)
    }
}

fn subsystem_label(sites: &[usize]) -> String {
    sites.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";")
}

fn point_seed(seed: u64, g: f64) -> StreamSeed {
    StreamSeed::new(seed).derive(g.to_bits())
}

/// Evaluates one quantity of a checkpoint on a field grid.
pub fn evaluate(ckpt: &Checkpoint, req: &EvalRequest) -> Result<Evaluation> {
    if req.grid.is_empty() {
        return Err(Error::Config("evaluation grid is empty".into()));
    }
    let model = &ckpt.model;
    let n = model.n_visible();
    let supports = &ckpt.meta.supports;
    let exact_ok = n <= MAX_ED_SITES;
    let want_reference = !req.skip_reference && (exact_ok || req.references.is_some());
    if req.what == Quantity::Overlap && !exact_ok {
        return Err(Error::Capacity {
            what: "sites for exact overlap",
            limit: MAX_ED_SITES,
            got: n,
        });
    }
    let mut refs = ReferenceSource {
        ckpt,
        dir: req.references.as_deref(),
        used: Vec::new(),
    };
    let mut table = ResultsTable::new(ckpt.sha256.clone());
    let row = |quantity: &str, g: f64, subsystem: String, value: f64, std_error: f64, n_samples: usize, reference| ResultRow {
        quantity: quantity.into(),
        g,
        subsystem,
        value,
        std_error,
        n_samples,
        reference,
        seed: req.seed,
        point: classify_point(g, supports),
    };
    for &g in &req.grid {
        let seed = point_seed(req.seed, g);
        match req.what {
            Quantity::Observables => {
                let (mz, mx) = magnetizations(model, g, req.samples, req.gibbs_k, seed)?;
                let exact = if want_reference {
                    Some(exact_observables(&refs.ground_state(g)?))
                } else {
                    None
                };
                table.rows.push(row("mz_abs", g, String::new(), mz.value, mz.std_error, mz.n_samples, exact.map(|e| e.0)));
                table.rows.push(row("mx", g, String::new(), mx.value, mx.std_error, mx.n_samples, exact.map(|e| e.1)));
            }
            Quantity::Overlap => {
                let psi = refs.ground_state(g)?;
                let value = overlap_exact(model, g, &psi)?;
                table.rows.push(row("overlap", g, String::new(), value, 0.0, 1, None));
            }
            Quantity::ChiF => {
                let est = chi_f_model(model, g, req.samples, req.gibbs_k, seed)?;
                let reference = if want_reference && req.references.is_none() {
                    Some(chi_f_exact(&ckpt.meta.geometry()?, ckpt.meta.j_coupling, g, CHI_F_DELTA)?)
                } else {
                    None
                };
                table.rows.push(row("chi_f", g, String::new(), est.value, est.std_error, est.n_samples, reference));
            }
            Quantity::Renyi => {
                let subsystems = req
                    .subsystems
                    .clone()
                    .unwrap_or_else(|| (0..=n).map(contiguous).collect());
                let psi = if want_reference { Some(refs.ground_state(g)?) } else { None };
                let estimates = renyi2_swap_many(model, g, &subsystems, req.samples, req.gibbs_k, seed)?;
                for (sites, est) in subsystems.iter().zip(estimates) {
                    let reference = psi.as_ref().map(|p| renyi2_exact(p, sites));
                    table.rows.push(row("renyi2", g, subsystem_label(sites), est.value, est.std_error, est.n_samples, reference));
                }
            }
        }
    }
    refs.used.sort();
    refs.used.dedup();
    Ok(Evaluation {
        table,
        references_used: refs.used,
    })
}

#[derive(Serialize)]
pub struct EvalManifest<'a> {
    pub checkpoint: String,
    pub checkpoint_sha256: &'a str,
    pub quantity: Quantity,
    pub grid: &'a [f64],
    pub samples: usize,
    pub gibbs_k: usize,
    pub seed: u64,
    pub results: String,
    pub references: Vec<String>,
    pub references_computed: bool,
}

/// Loads a checkpoint, evaluates it and writes the results table plus its
/// manifest next to `out` (`out` with a `.manifest.json` extension).
pub fn eval_to_file(checkpoint: &Path, req: &EvalRequest, out: &Path) -> Result<Evaluation> {
    let ckpt = load_checkpoint(checkpoint)?;
    let evaluation = evaluate(&ckpt, req)?;
    evaluation.table.write(out)?;
    let manifest = EvalManifest {
        checkpoint: checkpoint.display().to_string(),
        checkpoint_sha256: &ckpt.sha256,
        quantity: req.what,
        grid: &req.grid,
        samples: req.samples,
        gibbs_k: req.gibbs_k,
        seed: req.seed,
        results: out.display().to_string(),
        references: evaluation.references_used.iter().map(|p| p.display().to_string()).collect(),
        references_computed: !req.skip_reference && req.references.is_none(),
    };
    write_manifest(&out.with_extension("manifest.json"), &manifest)?;
    Ok(evaluation)
}

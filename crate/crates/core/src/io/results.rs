use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{read_bytes, write_bytes};
use crate::error::{Error, Result};
use crate::training::EpochMetrics;

const SUPPORT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    Support,
    Novel,
    Extrapolated,
}

impl PointKind {
    pub fn name(self) -> &'static str {
        match self {
            PointKind::Support => "support",
            PointKind::Novel => "novel",
            PointKind::Extrapolated => "extrapolated",
        }
    }

    fn parse(text: &str) -> Result<Self> {
        match text {
            "support" => Ok(PointKind::Support),
            "novel" => Ok(PointKind::Novel),
            "extrapolated" => Ok(PointKind::Extrapolated),
            other => Err(Error::Data(format!("unknown point label {other:?}"))),
        }
    }
}

/// Labels `g` relative to the training supports: a support point, an
/// interpolated novel point, or one outside the support range.
pub fn classify_point(g: f64, supports: &[f64]) -> PointKind {
    if supports.iter().any(|s| (s - g).abs() <= SUPPORT_TOL) {
        return PointKind::Support;
    }
    let lo = supports.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = supports.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if g < lo - SUPPORT_TOL || g > hi + SUPPORT_TOL {
        PointKind::Extrapolated
    } else {
        PointKind::Novel
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub quantity: String,
    pub g: f64,
    /// Subsystem sites joined by `;`, empty when not applicable.
    pub subsystem: String,
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    /// Exact-diagonalization value at the same point, when computed.
    pub reference: Option<f64>,
    pub seed: u64,
    pub point: PointKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultsTable {
    pub checkpoint_sha256: String,
    pub rows: Vec<ResultRow>,
}

const HEADER: &str = "quantity,g,subsystem,value,std_error,n_samples,reference,seed,point,checkpoint";

impl ResultsTable {
    pub fn new(checkpoint_sha256: impl Into<String>) -> Self {
        ResultsTable {
            checkpoint_sha256: checkpoint_sha256.into(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(HEADER);
        out.push('\n');
        for r in &self.rows {
            let reference = r.reference.map(|x| x.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.quantity,
                r.g,
                r.subsystem,
                r.value,
                r.std_error,
                r.n_samples,
                reference,
                r.seed,
                r.point.name(),
                self.checkpoint_sha256
            )
            .unwrap();
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_bytes(path, self.to_csv().as_bytes())
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(HEADER) {
            return Err(Error::Data("results table header not recognized".into()));
        }
        let mut table = ResultsTable::new(String::new());
        for (k, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').collect();
            let bad = |what: &str| Error::Data(format!("results row {}: bad {what}", k + 1));
            if f.len() != 10 {
                return Err(bad("column count"));
            }
            let num = |i: usize, what: &str| f[i].parse::<f64>().map_err(|_| bad(what));
            if k == 0 {
                table.checkpoint_sha256 = f[9].to_string();
            } else if f[9] != table.checkpoint_sha256 {
                return Err(Error::Data("results table mixes rows from different checkpoints".into()));
            }
            table.rows.push(ResultRow {
                quantity: f[0].to_string(),
                g: num(1, "g")?,
                subsystem: f[2].to_string(),
                value: num(3, "value")?,
                std_error: num(4, "std_error")?,
                n_samples: f[5].parse().map_err(|_| bad("n_samples"))?,
                reference: if f[6].is_empty() { None } else { Some(num(6, "reference")?) },
                seed: f[7].parse().map_err(|_| bad("seed"))?,
                point: PointKind::parse(f[8])?,
            });
        }
        Ok(table)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = read_bytes(path)?;
        let text = String::from_utf8(bytes).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        Self::from_csv(&text)
    }

    /// Fails unless every row was produced by the checkpoint with `sha256`.
    pub fn ensure_checkpoint(&self, sha256: &str) -> Result<()> {
        if !self.rows.is_empty() && self.checkpoint_sha256 != sha256 {
            return Err(Error::Data(format!(
                "results were produced by checkpoint {}, not {sha256}",
                self.checkpoint_sha256
            )));
        }
        Ok(())
    }
}

pub fn write_manifest(path: &Path, manifest: &impl Serialize) -> Result<()> {
    let mut json = serde_json::to_string_pretty(manifest).map_err(|e| Error::json(path, e))?;
    json.push('\n');
    write_bytes(path, json.as_bytes())
}

/// Append-only per-epoch training log.
pub struct MetricsWriter {
    path: PathBuf,
    out: Option<BufWriter<File>>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        Ok(MetricsWriter {
            path: path.to_path_buf(),
            out: None,
        })
    }

    pub fn append(&mut self, m: &EpochMetrics) -> Result<()> {
        let path = self.path.clone();
        let io = |e| Error::io(&path, e);
        if self.out.is_none() {
            let file = File::create(&self.path).map_err(io)?;
            let mut w = BufWriter::new(file);
            let mut header = String::from("epoch,lr,mean_pos_free_energy,kl_exact");
            for (g, _) in &m.support_free_energy {
                write!(header, ",free_energy@g={g}").unwrap();
            }
            for (g, _) in &m.overlaps {
                write!(header, ",overlap@g={g}").unwrap();
            }
            writeln!(w, "{header}").map_err(io)?;
            self.out = Some(w);
        }
        let mut line = format!("{},{},{}", m.epoch, m.lr, m.mean_pos_free_energy);
        line.push(',');
        if let Some(kl) = m.kl_exact {
            write!(line, "{kl}").unwrap();
        }
        for (_, f) in &m.support_free_energy {
            write!(line, ",{f}").unwrap();
        }
        for (_, o) in &m.overlaps {
            write!(line, ",{o}").unwrap();
        }
        let w = self.out.as_mut().unwrap();
        writeln!(w, "{line}").map_err(io)?;
        w.flush().map_err(io)
    }
}

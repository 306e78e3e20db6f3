//! One-command reproduction recipes. Each suite chains data generation,
//! training and evaluation with fixed seeds and writes plot-ready CSVs plus
//! a manifest of every artifact.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact_diag::{chi_f_exact, solve};
use crate::estimators::overlap_exact;
use crate::io::{classify_point, load_checkpoint, parse_grid, sha256_hex, write_manifest, ExperimentConfig, ResultsTable};
use crate::lattice::{LatticeGeometry, LatticeKind};
use crate::pipeline::{eval_to_file, gen_data, train_run, EvalRequest, Quantity, CHI_F_DELTA};
use crate::training::{ModelConfig, TrainingConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    MagnetizationSweep,
    SampleEfficiency,
    ChiF3x3,
    RenyiChain,
}

impl Suite {
    pub const ALL: [Suite; 4] = [
        Suite::MagnetizationSweep,
        Suite::SampleEfficiency,
        Suite::ChiF3x3,
        Suite::RenyiChain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::MagnetizationSweep => "magnetization-sweep",
            Suite::SampleEfficiency => "sample-efficiency",
            Suite::ChiF3x3 => "chi-f-3x3",
            Suite::RenyiChain => "renyi-chain",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Suite::ALL.iter().map(|s| s.name()).collect();
                Error::Config(format!("unknown suite {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// `Full` runs the published protocol at desk scale; `Quick` shrinks every
/// count so a suite finishes in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Full,
    Quick,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Scale::Full),
            "quick" => Ok(Scale::Quick),
            other => Err(Error::Config(format!("unknown scale {other:?}; expected full or quick"))),
        }
    }
}

#[derive(Serialize)]
struct Artifact {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
pub struct SuiteManifest {
    suite: Suite,
    scale: Scale,
    artifacts: Vec<Artifact>,
}

struct Recorder {
    artifacts: Vec<PathBuf>,
}

impl Recorder {
    fn add(&mut self, path: PathBuf) {
        self.artifacts.push(path);
    }

    fn write_csv(&mut self, path: PathBuf, text: &str) -> Result<()> {
        crate::io::write_bytes(&path, text.as_bytes())?;
        self.add(path);
        Ok(())
    }
}

/// Uniform `count` supports on `[lo, hi]`.
fn supports(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    parse_grid(&format!("{lo}:{hi}:{count}")).expect("valid grid")
}

fn experiment(
    geometry: LatticeGeometry,
    supports: Vec<f64>,
    samples: usize,
    training: TrainingConfig,
    seed: u64,
    out: &Path,
) -> ExperimentConfig {
    ExperimentConfig {
        geometry,
        j_coupling: 1.0,
        eval_grid: supports.clone(),
        supports,
        samples_per_support: samples,
        model: ModelConfig::default(),
        training: TrainingConfig { seed, ..training },
        output_dir: out.to_path_buf(),
        seed,
        checkpoint_every: 0,
    }
}

fn shrink(cfg: &mut ExperimentConfig, scale: Scale) {
    if scale == Scale::Quick {
        cfg.samples_per_support = cfg.samples_per_support.min(300);
        cfg.training.epochs = 2;
        cfg.training.batch_size = 256;
        cfg.model = ModelConfig {
            n_hidden: 8,
            hyper_width: 8,
        };
    }
}

/// Generates data and trains in `dir/{data,train}`; returns the checkpoint.
fn prepare(cfg: &ExperimentConfig, dir: &Path, rec: &mut Recorder) -> Result<PathBuf> {
    let data = dir.join("data");
    let generated = gen_data(cfg, &data)?;
    rec.add(data.join(crate::io::DATASET_FILE));
    rec.add(data.join(crate::io::META_FILE));
    generated.references.into_iter().for_each(|p| rec.add(p));
    let train = dir.join("train");
    let run = train_run(cfg, &data, &train)?;
    rec.add(train.join(crate::pipeline::METRICS_FILE));
    rec.add(run.checkpoint.clone());
    Ok(run.checkpoint)
}

fn eval(ckpt: &Path, req: EvalRequest, out: PathBuf, rec: &mut Recorder) -> Result<ResultsTable> {
    let evaluation = eval_to_file(ckpt, &req, &out)?;
    rec.add(out.with_extension("manifest.json"));
    rec.add(out);
    Ok(evaluation.table)
}

fn request(what: Quantity, grid: Vec<f64>, samples: usize, gibbs_k: usize, seed: u64) -> EvalRequest {
    EvalRequest {
        what,
        grid,
        samples,
        gibbs_k,
        seed,
        subsystems: None,
        references: None,
        skip_reference: false,
    }
}

fn magnetization_sweep(out: &Path, scale: Scale, rec: &mut Recorder) -> Result<()> {
    let (l, grid, eval_samples) = match scale {
        Scale::Full => (4, parse_grid("1:7:21")?, 10_000),
        Scale::Quick => (3, parse_grid("1:7:5")?, 200),
    };
    let sets: [&[f64]; 3] = [&[1.0, 4.0, 7.0], &[1.0, 3.0, 5.0, 7.0], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]];
    for (k, set) in sets.iter().enumerate() {
        let dir = out.join(format!("supports{}", set.len()));
        let mut cfg = experiment(
            LatticeGeometry::new(LatticeKind::Square, l)?,
            set.to_vec(),
            20_000,
            TrainingConfig::magnetization(),
            100 + k as u64,
            &dir,
        );
        shrink(&mut cfg, scale);
        let ckpt = prepare(&cfg, &dir, rec)?;
        eval(&ckpt, request(Quantity::Observables, grid.clone(), eval_samples, 10, 7), dir.join("observables.csv"), rec)?;
        eval(&ckpt, request(Quantity::Overlap, grid.clone(), 1, 1, 7), dir.join("overlap.csv"), rec)?;
    }
    Ok(())
}

fn sample_efficiency(out: &Path, scale: Scale, rec: &mut Recorder) -> Result<()> {
    let (sizes, seeds, grid): (&[usize], u64, Vec<f64>) = match scale {
        Scale::Full => (&[2_000, 5_000, 20_000], 10, parse_grid("1:7:21")?),
        Scale::Quick => (&[100, 300], 2, parse_grid("1:7:5")?),
    };
    let geometry = LatticeGeometry::new(LatticeKind::Square, 3)?;
    let mut rows = String::from("ns,seed,g,overlap,point\n");
    let mut summary = String::from("ns,median_min_overlap,std_min_overlap,seeds\n");
    for &ns in sizes {
        let mut minima = Vec::new();
        for seed in 0..seeds {
            let dir = out.join(format!("ns{ns}")).join(format!("seed{seed}"));
            let mut cfg = experiment(
                geometry.clone(),
                supports(1.0, 7.0, 7),
                ns,
                TrainingConfig::sample_efficiency(),
                seed,
                &dir,
            );
            shrink(&mut cfg, scale);
            cfg.samples_per_support = ns;
            let ckpt_path = prepare(&cfg, &dir, rec)?;
            let ckpt = load_checkpoint(&ckpt_path)?;
            let mut min = f64::INFINITY;
            for &g in &grid {
                let psi = solve(&geometry, 1.0, g)?;
                let o = overlap_exact(&ckpt.model, g, &psi)?;
                min = min.min(o);
                writeln!(rows, "{ns},{seed},{g},{o},{}", classify_point(g, &cfg.supports).name()).unwrap();
            }
            minima.push(min);
        }
        let (median, std) = median_std(&minima);
        writeln!(summary, "{ns},{median},{std},{seeds}").unwrap();
    }
    rec.write_csv(out.join("sample_efficiency.csv"), &rows)?;
    rec.write_csv(out.join("summary.csv"), &summary)
}

/// Median and sample standard deviation.
pub fn median_std(values: &[f64]) -> (f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
    let mean = v.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    (median, std)
}

/// Nine supports on `[1, 4.5]`: eight uniform points plus one extra at the
/// low end of the range.
pub fn chi_f_supports() -> Vec<f64> {
    vec![1.0, 1.25, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5]
}

fn chi_f_3x3(out: &Path, scale: Scale, rec: &mut Recorder) -> Result<()> {
    let (grid, samples) = match scale {
        Scale::Full => (parse_grid("1:4.5:71")?, 100_000),
        Scale::Quick => (parse_grid("1:4.5:8")?, 500),
    };
    let geometry = LatticeGeometry::new(LatticeKind::Square, 3)?;
    let mut cfg = experiment(
        geometry.clone(),
        chi_f_supports(),
        20_000,
        TrainingConfig::fidelity_susceptibility(),
        17,
        out,
    );
    shrink(&mut cfg, scale);
    let ckpt = prepare(&cfg, out, rec)?;
    let req = EvalRequest {
        skip_reference: true,
        ..request(Quantity::ChiF, grid.clone(), samples, 20, 23)
    };
    let table = eval(&ckpt, req, out.join("chi_f_model.csv"), rec)?;
    let overlaps = eval(&ckpt, request(Quantity::Overlap, grid.clone(), 1, 1, 23), out.join("overlap.csv"), rec)?;
    let mut text = String::from("g,chi_f_model,std_error,chi_f_ed,overlap,point\n");
    for (row, o) in table.rows.iter().zip(&overlaps.rows) {
        let ed = chi_f_exact(&geometry, 1.0, row.g, CHI_F_DELTA)?;
        writeln!(text, "{},{},{},{ed},{},{}", row.g, row.value, row.std_error, o.value, row.point.name()).unwrap();
    }
    rec.write_csv(out.join("chi_f.csv"), &text)
}

fn renyi_chain(out: &Path, scale: Scale, rec: &mut Recorder) -> Result<()> {
    let sizes: &[(usize, usize)] = match scale {
        Scale::Full => &[(8, 100_000), (16, 20_000)],
        Scale::Quick => &[(8, 300)],
    };
    let grid = match scale {
        Scale::Full => parse_grid("0.5:1.5:21")?,
        Scale::Quick => parse_grid("0.5:1.5:3")?,
    };
    for &(l, pairs) in sizes {
        let dir = out.join(format!("chain{l}"));
        let mut cfg = experiment(
            LatticeGeometry::new(LatticeKind::Chain, l)?,
            supports(0.5, 1.5, 7),
            20_000,
            TrainingConfig::renyi_entropy(),
            31,
            &dir,
        );
        shrink(&mut cfg, scale);
        let ckpt = prepare(&cfg, &dir, rec)?;
        let subsystems = (0..=l.min(8)).map(crate::exact_diag::contiguous).collect();
        let req = EvalRequest {
            subsystems: Some(subsystems),
            ..request(Quantity::Renyi, grid.clone(), pairs, 20, 37)
        };
        eval(&ckpt, req, dir.join("renyi.csv"), rec)?;
    }
    Ok(())
}

/// Runs `suite` into `out` and writes `out/manifest.json`.
pub fn run_suite(suite: Suite, out: &Path, scale: Scale) -> Result<SuiteManifest> {
    let mut rec = Recorder { artifacts: Vec::new() };
    match suite {
        Suite::MagnetizationSweep => magnetization_sweep(out, scale, &mut rec)?,
        Suite::SampleEfficiency => sample_efficiency(out, scale, &mut rec)?,
        Suite::ChiF3x3 => chi_f_3x3(out, scale, &mut rec)?,
        Suite::RenyiChain => renyi_chain(out, scale, &mut rec)?,
    }
    let artifacts = rec
        .artifacts
        .iter()
        .map(|p| {
            let bytes = crate::io::read_bytes(p)?;
            Ok(Artifact {
                path: p.strip_prefix(out).unwrap_or(p).display().to_string(),
                sha256: sha256_hex(&bytes),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = SuiteManifest { suite, scale, artifacts };
    write_manifest(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

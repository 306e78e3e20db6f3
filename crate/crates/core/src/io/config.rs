use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::read_bytes;
use crate::error::{Error, Result};
use crate::lattice::{LatticeGeometry, LatticeKind};
use crate::training::{ModelConfig, TrainingConfig};

/// The on-disk key set. Every key except the lattice and supports has a
/// default; unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlatConfig {
    pub lattice: LatticeKind,
    pub side_length: usize,
    #[serde(default = "unit")]
    pub j_coupling: f64,
    pub supports: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples_per_support: usize,
    #[serde(default)]
    pub eval_grid: Vec<f64>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub checkpoint_every: usize,

    #[serde(default = "default_hidden")]
    pub n_hidden: usize,
    #[serde(default = "default_hidden")]
    pub hyper_width: usize,

    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default = "d_cd_k")]
    pub cd_k: usize,
    #[serde(default = "d_noise")]
    pub noise_fraction: f64,
    #[serde(default = "d_lr_start")]
    pub lr_start: f64,
    #[serde(default = "d_lr_end")]
    pub lr_end: f64,
    #[serde(default = "d_beta1")]
    pub adam_beta1: f64,
    #[serde(default = "d_beta2")]
    pub adam_beta2: f64,
    #[serde(default = "d_eps")]
    pub adam_eps: f64,
    #[serde(default = "d_std")]
    pub weight_init_std: f64,
}

fn unit() -> f64 {
    1.0
}
fn default_samples() -> usize {
    20_000
}
fn default_output() -> PathBuf {
    PathBuf::from("run")
}
fn default_hidden() -> usize {
    ModelConfig::default().n_hidden
}
fn d_epochs() -> usize {
    TrainingConfig::default().epochs
}
fn d_batch() -> usize {
    TrainingConfig::default().batch_size
}
fn d_cd_k() -> usize {
    TrainingConfig::default().cd_k
}
fn d_noise() -> f64 {
    TrainingConfig::default().noise_fraction
}
fn d_lr_start() -> f64 {
    TrainingConfig::default().lr_start
}
fn d_lr_end() -> f64 {
    TrainingConfig::default().lr_end
}
fn d_beta1() -> f64 {
    TrainingConfig::default().adam_beta1
}
fn d_beta2() -> f64 {
    TrainingConfig::default().adam_beta2
}
fn d_eps() -> f64 {
    TrainingConfig::default().adam_eps
}
fn d_std() -> f64 {
    TrainingConfig::default().weight_init_std
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub geometry: LatticeGeometry,
    pub j_coupling: f64,
    pub supports: Vec<f64>,
    pub samples_per_support: usize,
    pub model: ModelConfig,
    pub training: TrainingConfig,
    /// Evaluation fields; defaults to the supports.
    pub eval_grid: Vec<f64>,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Write an intermediate checkpoint every this many epochs (0: never).
    pub checkpoint_every: usize,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let flat: FlatConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_flat(flat)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = read_bytes(path)?;
        let text = String::from_utf8(bytes).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_flat(flat: FlatConfig) -> Result<Self> {
        let geometry = LatticeGeometry::new(flat.lattice, flat.side_length)?;
        if flat.supports.is_empty() {
            return Err(Error::Config("supports must list at least one field value".into()));
        }
        if flat.supports.windows(2).any(|w| !(w[0] < w[1])) || flat.supports.iter().any(|g| !g.is_finite()) {
            return Err(Error::Config("supports must be finite and strictly increasing".into()));
        }
        if flat.samples_per_support == 0 {
            return Err(Error::Config("samples_per_support must be at least 1".into()));
        }
        let training = TrainingConfig {
            epochs: flat.epochs,
            batch_size: flat.batch_size,
            cd_k: flat.cd_k,
            noise_fraction: flat.noise_fraction,
            lr_start: flat.lr_start,
            lr_end: flat.lr_end,
            adam_beta1: flat.adam_beta1,
            adam_beta2: flat.adam_beta2,
            adam_eps: flat.adam_eps,
            weight_init_std: flat.weight_init_std,
            seed: flat.seed,
        };
        training.validate()?;
        let model = ModelConfig {
            n_hidden: flat.n_hidden,
            hyper_width: flat.hyper_width,
        };
        if model.n_hidden == 0 || model.hyper_width == 0 {
            return Err(Error::Config("n_hidden and hyper_width must be positive".into()));
        }
        let eval_grid = if flat.eval_grid.is_empty() {
            flat.supports.clone()
        } else {
            flat.eval_grid
        };
        Ok(ExperimentConfig {
            geometry,
            j_coupling: flat.j_coupling,
            supports: flat.supports,
            samples_per_support: flat.samples_per_support,
            model,
            training,
            eval_grid,
            output_dir: flat.output_dir,
            seed: flat.seed,
            checkpoint_every: flat.checkpoint_every,
        })
    }

    pub fn to_flat(&self) -> FlatConfig {
        let t = &self.training;
        FlatConfig {
            lattice: self.geometry.kind(),
            side_length: self.geometry.side_length(),
            j_coupling: self.j_coupling,
            supports: self.supports.clone(),
            samples_per_support: self.samples_per_support,
            eval_grid: self.eval_grid.clone(),
            output_dir: self.output_dir.clone(),
            seed: self.seed,
            checkpoint_every: self.checkpoint_every,
            n_hidden: self.model.n_hidden,
            hyper_width: self.model.hyper_width,
            epochs: t.epochs,
            batch_size: t.batch_size,
            cd_k: t.cd_k,
            noise_fraction: t.noise_fraction,
            lr_start: t.lr_start,
            lr_end: t.lr_end,
            adam_beta1: t.adam_beta1,
            adam_beta2: t.adam_beta2,
            adam_eps: t.adam_eps,
            weight_init_std: t.weight_init_std,
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.to_flat()).expect("config serializes")
    }
}

fn snap(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// Parses a grid spec: a comma list `1.0,1.5,2` or an inclusive uniform
/// range `lo:hi:count`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |why: &str| Error::Config(format!("grid {spec:?}: {why}"));
    let spec = spec.trim();
    let grid: Vec<f64> = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(bad("range form is lo:hi:count"));
        }
        let lo: f64 = parts[0].parse().map_err(|_| bad("lower bound is not a number"))?;
        let hi: f64 = parts[1].parse().map_err(|_| bad("upper bound is not a number"))?;
        let count: usize = parts[2].parse().map_err(|_| bad("count is not a positive integer"))?;
        match count {
            0 => return Err(bad("count must be at least 1")),
            1 => vec![lo],
            _ => (0..count)
                .map(|k| snap(lo + (hi - lo) * k as f64 / (count - 1) as f64))
                .collect(),
        }
    } else {
        spec.split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad(&format!("{p:?} is not a number"))))
            .collect::<Result<_>>()?
    };
    if grid.is_empty() || grid.iter().any(|g| !g.is_finite()) {
        return Err(bad("needs at least one finite value"));
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "lattice = \"square\"\nside_length = 3\nsupports = [1.0, 2.0]\n";

    #[test]
    fn defaults_follow_training_presets() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.training, TrainingConfig::default());
        assert_eq!(cfg.eval_grid, vec![1.0, 2.0]);
        assert_eq!(cfg.geometry.num_sites(), 9);
    }

    #[test]
    fn unknown_key_rejected() {
        let err = ExperimentConfig::from_toml_str(&format!("{MINIMAL}momentum = 0.5\n")).unwrap_err();
        assert!(matches!(err, Error::Config(msg) if msg.contains("momentum")));
    }

    #[test]
    fn supports_must_increase() {
        let text = "lattice = \"chain\"\nside_length = 4\nsupports = [1.0, 1.0]\n";
        assert!(ExperimentConfig::from_toml_str(text).is_err());
        let text = "lattice = \"chain\"\nside_length = 4\nsupports = []\n";
        assert!(ExperimentConfig::from_toml_str(text).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        cfg.training.cd_k = 7;
        cfg.eval_grid = vec![1.0, 1.5, 2.0];
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn grid_forms() {
        assert_eq!(parse_grid("1,1.5, 2").unwrap(), vec![1.0, 1.5, 2.0]);
        let g = parse_grid("1:7:21").unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!((g[0], g[1], g[20]), (1.0, 1.3, 7.0));
        assert_eq!(parse_grid("0.5:1.5:21").unwrap()[3], 0.65);
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("a,b").is_err());
        assert!(parse_grid("1:2:0").is_err());
    }
}

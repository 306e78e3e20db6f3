//! Contrastive-divergence training of the conditional model over a pooled
//! multi-field dataset.

mod adam;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamHyper, AdamState};

use crate::error::{Error, Result};
use crate::estimators::overlap_exact;
use crate::exact_diag::{GroundStateVector, MeasurementDataset};
use crate::exec;
use crate::gibbs::{advance, init_chain, GibbsScratch};
use crate::hyperrbm::{
    sigmoid, BiasGrad, FreeEnergyScratch, HyperRbm, ModelShape, ParamGradient, ParamSet,
    MAX_ENUMERATION_SITES,
};
use crate::rng::StreamSeed;
use crate::spins::Spins;

/// Steepness of the inverse-sigmoid learning-rate schedule.
pub const SCHEDULE_STEEPNESS: f64 = 12.0;

/// Samples per parallel work unit inside a minibatch.
const CHUNK: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_hidden: usize,
    pub hyper_width: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n_hidden: 64,
            hyper_width: 64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub cd_k: usize,
    pub noise_fraction: f64,
    pub lr_start: f64,
    pub lr_end: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub weight_init_std: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self::fidelity_susceptibility()
    }
}

impl TrainingConfig {
    fn base(cd_k: usize, weight_init_std: f64) -> Self {
        TrainingConfig {
            epochs: 50,
            batch_size: 1024,
            cd_k,
            noise_fraction: 0.1,
            lr_start: 1e-2,
            lr_end: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            weight_init_std,
            seed: 0,
        }
    }

    pub fn magnetization() -> Self {
        Self::base(10, 0.01)
    }

    pub fn sample_efficiency() -> Self {
        Self::base(10, 0.05)
    }

    pub fn fidelity_susceptibility() -> Self {
        Self::base(20, 0.01)
    }

    pub fn renyi_entropy() -> Self {
        Self::base(20, 0.01)
    }

    pub fn adam(&self) -> AdamHyper {
        AdamHyper {
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.cd_k == 0 {
            return bad("cd_k must be at least 1".into());
        }
        if !(self.lr_end > 0.0 && self.lr_start >= self.lr_end) {
            return bad(format!(
                "learning rates must satisfy lr_start >= lr_end > 0, got {} and {}",
                self.lr_start, self.lr_end
            ));
        }
        if !(0.0..=1.0).contains(&self.noise_fraction) {
            return bad(format!("noise_fraction {} outside [0, 1]", self.noise_fraction));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || !(self.adam_eps > 0.0) {
            return bad("ADAM constants must satisfy 0 <= beta < 1 and eps > 0".into());
        }
        if !(self.weight_init_std >= 0.0) {
            return bad(format!("weight_init_std {} must be nonnegative", self.weight_init_std));
        }
        Ok(())
    }
}

/// `η(t) = η_end + (η_start − η_end) σ(a (1/2 − t/T))` with `a = 12`.
pub fn lr_schedule(t: usize, total: usize, lr_start: f64, lr_end: f64) -> f64 {
    if total == 0 {
        return lr_start;
    }
    let x = t as f64 / total as f64;
    lr_end + (lr_start - lr_end) * sigmoid(SCHEDULE_STEEPNESS * (0.5 - x))
}

/// Distinct field values of a batch, in order of first appearance, and each
/// sample's slot among them.
fn field_slots(batch: &[(Spins, f64)]) -> (Vec<f64>, Vec<usize>) {
    let mut fields: Vec<f64> = Vec::new();
    let slots = batch
        .iter()
        .map(|&(_, g)| match fields.iter().position(|&f| f.to_bits() == g.to_bits()) {
            Some(k) => k,
            None => {
                fields.push(g);
                fields.len() - 1
            }
        })
        .collect();
    (fields, slots)
}

struct ChunkResult {
    dweights: Vec<f64>,
    biases: Vec<BiasGrad>,
    positive_free: Vec<f64>,
    counts: Vec<usize>,
}

/// Gradient estimate plus the positive-phase free energies seen on the way.
pub struct BatchGradient {
    pub grad: ParamGradient,
    pub fields: Vec<f64>,
    pub positive_free_sum: Vec<f64>,
    pub counts: Vec<usize>,
}

/// CD-k estimate of `E_q[∇F_sym] − E_p[∇F_sym]` on one minibatch. Sample `i`
/// runs its negative chain on stream `i` of `seed`, at its own field.
pub fn cd_batch(model: &HyperRbm, batch: &[(Spins, f64)], k: usize, noise_fraction: f64, seed: StreamSeed) -> Result<BatchGradient> {
    if batch.is_empty() {
        return Err(Error::Data("contrastive divergence needs a nonempty batch".into()));
    }
    if k == 0 {
        return Err(Error::Config("cd_k must be at least 1".into()));
    }
    let shape = model.shape();
    let (n, m) = (shape.n_visible, shape.n_hidden);
    let (fields, slots) = field_slots(batch);
    let views: Vec<_> = fields.iter().map(|&g| model.conditioned(g)).collect();
    let scale = 1.0 / batch.len() as f64;
    let n_chunks = batch.len().div_ceil(CHUNK);

    let partials = exec::map_indexed(n_chunks, |c| {
        let mut out = ChunkResult {
            dweights: vec![0.0; n * m],
            biases: vec![BiasGrad::zeros(shape); fields.len()],
            positive_free: vec![0.0; fields.len()],
            counts: vec![0; fields.len()],
        };
        let mut free = FreeEnergyScratch::new(m);
        let mut gibbs = GibbsScratch::new(&views[0]);
        for idx in c * CHUNK..((c + 1) * CHUNK).min(batch.len()) {
            let (s, _) = batch[idx];
            let slot = slots[idx];
            let rbm = &views[slot];
            out.positive_free[slot] += rbm.sym_free_energy_with(s, &mut free);
            out.counts[slot] += 1;
            rbm.accumulate_sym_grad(s, scale, &mut out.biases[slot], &mut out.dweights, &mut free);

            let mut rng = seed.rng(idx as u64);
            let mut chain = init_chain(rbm, s, noise_fraction, &mut rng, &mut gibbs);
            advance(rbm, &mut chain, k, &mut rng, &mut gibbs);
            rbm.accumulate_sym_grad(chain.visible, -scale, &mut out.biases[slot], &mut out.dweights, &mut free);
        }
        out
    });

    let mut grad = ParamSet::zeros(shape);
    let mut biases = vec![BiasGrad::zeros(shape); fields.len()];
    let mut positive_free_sum = vec![0.0; fields.len()];
    let mut counts = vec![0; fields.len()];
    for part in &partials {
        for (a, b) in grad.weights.iter_mut().zip(&part.dweights) {
            *a += b;
        }
        for k in 0..fields.len() {
            biases[k].add(&part.biases[k]);
            positive_free_sum[k] += part.positive_free[k];
            counts[k] += part.counts[k];
        }
    }
    for (view, up) in views.iter().zip(&biases) {
        view.backprop_biases(up, &mut grad);
    }
    Ok(BatchGradient {
        grad,
        fields,
        positive_free_sum,
        counts,
    })
}

/// CD-k gradient of the KL divergence on one minibatch.
pub fn cd_gradient(model: &HyperRbm, batch: &[(Spins, f64)], k: usize, noise_fraction: f64, seed: StreamSeed) -> Result<ParamGradient> {
    Ok(cd_batch(model, batch, k, noise_fraction, seed)?.grad)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Learning rate of the epoch's last step.
    pub lr: f64,
    pub mean_pos_free_energy: f64,
    /// `(g, mean F_sym over that support's data)`.
    pub support_free_energy: Vec<(f64, f64)>,
    /// Mean over supports of `KL(q_data ‖ p_model)`, when enumerable.
    pub kl_exact: Option<f64>,
    /// `(g, overlap)` against each supplied reference state.
    pub overlaps: Vec<(f64, f64)>,
}

pub struct TrainingOutcome {
    pub model: HyperRbm,
    pub metrics: Vec<EpochMetrics>,
}

/// Empirical distribution of the records at one support.
fn empirical(dataset: &MeasurementDataset, g: f64) -> Vec<f64> {
    let n = dataset.meta.num_sites;
    let mut q = vec![0.0; 1 << n];
    let mut total = 0.0;
    for r in dataset.records.iter().filter(|r| r.g == g) {
        q[r.spins.index()] += 1.0;
        total += 1.0;
    }
    q.iter_mut().for_each(|x| *x /= total);
    q
}

/// `Σ q log(q/p)`.
pub fn kl_divergence(q: &[f64], p: &[f64]) -> f64 {
    q.iter()
        .zip(p)
        .filter(|(&qi, _)| qi > 0.0)
        .map(|(&qi, &pi)| qi * (qi / pi).ln())
        .sum()
}

/// Field normalization range for a support set; a single support gets a
/// unit-width window centred on it.
pub fn field_range(supports: &[f64]) -> (f64, f64) {
    let lo = supports.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = supports.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

/// Trains a fresh model on `dataset`; `observer` sees each epoch's metrics
/// and the model as soon as they are computed, and may abort training.
pub fn train(
    model_cfg: ModelConfig,
    cfg: &TrainingConfig,
    dataset: &MeasurementDataset,
    references: &[GroundStateVector],
    mut observer: impl FnMut(&EpochMetrics, &HyperRbm) -> Result<()>,
) -> Result<TrainingOutcome> {
    cfg.validate()?;
    if dataset.records.is_empty() {
        return Err(Error::Data("training dataset is empty".into()));
    }
    dataset.validate()?;
    let n = dataset.meta.num_sites;
    if let Some(r) = references.iter().find(|r| r.num_sites() != n) {
        return Err(Error::Data(format!(
            "reference state at g = {} has {} sites, dataset has {n}",
            r.g,
            r.num_sites()
        )));
    }
    let supports = dataset.support_values();
    let (g_lo, g_hi) = field_range(&supports);
    let shape = ModelShape {
        n_visible: n,
        n_hidden: model_cfg.n_hidden,
        hyper_width: model_cfg.hyper_width,
    };
    let root = StreamSeed::new(cfg.seed);
    let mut init_rng = root.derive(u64::MAX).rng(0);
    let mut model = HyperRbm::init_random(shape, g_lo, g_hi, cfg.weight_init_std, &mut init_rng)?;
    let mut adam = AdamState::new(&model.params);

    let records: Vec<(Spins, f64)> = dataset.records.iter().map(|r| (r.spins, r.g)).collect();
    let steps_per_epoch = records.len().div_ceil(cfg.batch_size);
    let total_steps = cfg.epochs * steps_per_epoch;
    let enumerable = n <= MAX_ENUMERATION_SITES;
    let targets: Vec<Vec<f64>> = if enumerable {
        supports.iter().map(|&g| empirical(dataset, g)).collect()
    } else {
        Vec::new()
    };

    let mut metrics = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..records.len()).collect();
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        let epoch_seed = root.derive(epoch as u64);
        order.shuffle(&mut epoch_seed.rng(u64::MAX));
        let mut free_sum = vec![0.0; supports.len()];
        let mut free_count = vec![0usize; supports.len()];
        let mut lr = cfg.lr_start;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<(Spins, f64)> = idx.iter().map(|&i| records[i]).collect();
            lr = lr_schedule(step, total_steps, cfg.lr_start, cfg.lr_end);
            let out = cd_batch(&model, &batch, cfg.cd_k, cfg.noise_fraction, epoch_seed.derive(b as u64))?;
            for (k, g) in out.fields.iter().enumerate() {
                if let Some(slot) = supports.iter().position(|s| s == g) {
                    free_sum[slot] += out.positive_free_sum[k];
                    free_count[slot] += out.counts[k];
                }
            }
            adam_step(&mut model.params, &out.grad, &mut adam, lr, cfg.adam())
                .map_err(|e| Error::Numerical(format!("epoch {epoch}, batch {b}: {e}")))?;
            step += 1;
        }
        if let Some((block, i)) = model.params.first_non_finite() {
            return Err(Error::Numerical(format!("epoch {epoch}: parameter {block}[{i}] became non-finite")));
        }

        let support_free_energy: Vec<(f64, f64)> = supports
            .iter()
            .zip(free_sum.iter().zip(&free_count))
            .map(|(&g, (&s, &c))| (g, s / c.max(1) as f64))
            .collect();
        let total_count: usize = free_count.iter().sum();
        let mean_pos_free_energy = free_sum.iter().sum::<f64>() / total_count.max(1) as f64;
        let kl_exact = if enumerable {
            let mut total = 0.0;
            for (g, q) in supports.iter().zip(&targets) {
                let p = model.enumerate_distribution(*g)?;
                total += kl_divergence(q, &p.probabilities);
            }
            Some(total / supports.len() as f64)
        } else {
            None
        };
        let overlaps = if enumerable {
            references
                .iter()
                .map(|r| overlap_exact(&model, r.g, r).map(|o| (r.g, o)))
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        let m = EpochMetrics {
            epoch: epoch + 1,
            lr,
            mean_pos_free_energy,
            support_free_energy,
            kl_exact,
            overlaps,
        };
        observer(&m, &model)?;
        metrics.push(m);
    }
    Ok(TrainingOutcome { model, metrics })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_midpoint_and_endpoints() {
        let (a, b) = (1e-2, 1e-4);
        assert!((lr_schedule(500, 1000, a, b) - (a + b) / 2.0).abs() < 1e-15);
        // σ(±6) evaluated by hand: 0.997527376..., 0.002472623...
        assert!((lr_schedule(0, 1000, a, b) - 9.975522e-3).abs() < 1e-8);
        assert!((lr_schedule(1000, 1000, a, b) - 1.244780e-4).abs() < 1e-9);
        assert!((lr_schedule(0, 1000, a, b) - a).abs() / a < 0.01);
        assert!((lr_schedule(1000, 1000, a, b) - b) / (a - b) < 0.01);
        assert_eq!(lr_schedule(3, 0, a, b), a);
    }

    #[test]
    fn schedule_is_monotone_and_flat_when_equal() {
        let mut prev = f64::INFINITY;
        for t in 0..=200 {
            let lr = lr_schedule(t, 200, 1e-2, 1e-4);
            assert!(lr <= prev);
            prev = lr;
            assert_eq!(lr_schedule(t, 200, 3e-3, 3e-3), 3e-3);
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = TrainingConfig::default();
        cfg.validate().unwrap();
        cfg.cd_k = 0;
        assert!(cfg.validate().is_err());
        cfg = TrainingConfig::default();
        cfg.lr_end = 1.0;
        assert!(cfg.validate().is_err());
        cfg = TrainingConfig::default();
        cfg.batch_size = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn table_presets() {
        assert_eq!(TrainingConfig::magnetization().cd_k, 10);
        assert_eq!(TrainingConfig::sample_efficiency().weight_init_std, 0.05);
        let f = TrainingConfig::fidelity_susceptibility();
        assert_eq!((f.epochs, f.batch_size, f.cd_k, f.noise_fraction), (50, 1024, 20, 0.1));
        assert_eq!((f.lr_start, f.lr_end, f.weight_init_std), (1e-2, 1e-4, 0.01));
    }

    #[test]
    fn empty_batch_rejected() {
        let model = HyperRbm::zeros(
            ModelShape {
                n_visible: 3,
                n_hidden: 2,
                hyper_width: 2,
            },
            0.0,
            1.0,
        )
        .unwrap();
        assert!(cd_gradient(&model, &[], 1, 0.0, StreamSeed::new(0)).is_err());
    }
}

//! Evaluation quantities of a trained model: local-estimator magnetizations,
//! exact overlap, fidelity susceptibility from the free-energy gradient
//! variance and the two-replica swap estimate of the second Rényi entropy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_diag::{observables_from_amplitudes, renyi2_from_amplitudes, GroundStateVector};
use crate::exec;
use crate::gibbs::sample_model;
use crate::hyperrbm::{ConditionedRbm, FreeEnergyScratch, HyperRbm};
use crate::rng::StreamSeed;
use crate::spins::{subsystem_mask, Spins};

/// Sites above which `renyi2_model_exact` refuses to enumerate.
pub const MAX_EXACT_RENYI_SITES: usize = 14;

/// Jackknife block count for the susceptibility error bar.
pub const JACKKNIFE_BLOCKS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithError {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl EstimateWithError {
    /// Sample mean with the standard error of the mean.
    pub fn from_samples(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(Error::Config("an estimate needs at least one sample".into()));
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Ok(EstimateWithError {
            value: mean,
            std_error,
            n_samples: n,
        })
    }

    pub fn exact(value: f64, n_samples: usize) -> Self {
        EstimateWithError {
            value,
            std_error: 0.0,
            n_samples: n_samples.max(1),
        }
    }
}

/// `Ψ(s ⊕ eᵢ)/Ψ(s) = exp(−(F_sym(s ⊕ eᵢ) − F_sym(s))/2)`.
pub fn local_estimator_x(rbm: &ConditionedRbm<'_>, s: Spins, site: usize) -> f64 {
    let mut scratch = FreeEnergyScratch::new(rbm.n_hidden());
    let f0 = rbm.sym_free_energy_with(s, &mut scratch);
    let f1 = rbm.sym_free_energy_with(s.flipped(site), &mut scratch);
    (-(f1 - f0) / 2.0).exp()
}

/// `(1/N) Σᵢ Ψ(s ⊕ eᵢ)/Ψ(s)`, the local estimator of the mean `σˣ`.
pub fn local_mean_x(rbm: &ConditionedRbm<'_>, s: Spins, scratch: &mut FreeEnergyScratch) -> f64 {
    let n = rbm.n_visible();
    let f0 = rbm.sym_free_energy_with(s, scratch);
    let total: f64 = (0..n)
        .map(|i| (-(rbm.sym_free_energy_with(s.flipped(i), scratch) - f0) / 2.0).exp())
        .sum();
    total / n as f64
}

fn require_samples(n: usize, min: usize, what: &str) -> Result<()> {
    if n < min {
        return Err(Error::Config(format!("{what} needs at least {min} samples, got {n}")));
    }
    Ok(())
}

/// `(⟨|m̂_z|⟩, ⟨σˣ⟩)` from `n_samples` independent `k`-step chains.
pub fn magnetizations(
    model: &HyperRbm,
    g: f64,
    n_samples: usize,
    k: usize,
    seed: StreamSeed,
) -> Result<(EstimateWithError, EstimateWithError)> {
    require_samples(n_samples, 1, "magnetization")?;
    let rbm = model.conditioned(g);
    let n = model.n_visible();
    let samples = sample_model(&rbm, n_samples, k, seed)?;
    let mz: Vec<f64> = samples.iter().map(|s| s.magnetization(n).abs()).collect();
    let mx = exec::map_slice(&samples, |&s| {
        let mut scratch = FreeEnergyScratch::new(model.n_hidden());
        local_mean_x(&rbm, s, &mut scratch)
    });
    Ok((EstimateWithError::from_samples(&mz)?, EstimateWithError::from_samples(&mx)?))
}

/// Exact `(⟨|m̂_z|⟩, ⟨σˣ⟩)` of the model state by enumeration.
pub fn magnetizations_exact(model: &HyperRbm, g: f64) -> Result<(f64, f64)> {
    let amps = model.enumerate_distribution(g)?.amplitudes();
    Ok(observables_from_amplitudes(&amps, model.n_visible()))
}

/// `Σ_s ψ_ED(s) √p(s | g)`.
pub fn overlap_exact(model: &HyperRbm, g: f64, psi: &GroundStateVector) -> Result<f64> {
    if psi.num_sites() != model.n_visible() {
        return Err(Error::Data(format!(
            "reference state has {} sites, model has {}",
            psi.num_sites(),
            model.n_visible()
        )));
    }
    let amps = model.enumerate_distribution(g)?.amplitudes();
    let overlap: f64 = amps.iter().zip(&psi.amplitudes).map(|(a, b)| a * b).sum();
    Ok(overlap.clamp(0.0, 1.0))
}

/// `¼ × unbiased variance` of sampled `∂_g F_sym` values, with a jackknife
/// error over at most [`JACKKNIFE_BLOCKS`] contiguous blocks.
pub fn chi_f_from_gradients(grads: &[f64]) -> Result<EstimateWithError> {
    let n = grads.len();
    require_samples(n, 2, "fidelity susceptibility")?;
    let mean = grads.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = grads.iter().map(|x| x - mean).collect();
    let s1: f64 = centered.iter().sum();
    let s2: f64 = centered.iter().map(|x| x * x).sum();
    let var = |s1: f64, s2: f64, m: usize| (s2 - s1 * s1 / m as f64) / (m - 1) as f64;
    let value = 0.25 * var(s1, s2, n);

    let blocks = JACKKNIFE_BLOCKS.min(n);
    let mut std_error = 0.0;
    if blocks >= 2 && n - n.div_ceil(blocks) >= 2 {
        let leave_out: Vec<f64> = (0..blocks)
            .map(|b| {
                let (lo, hi) = (b * n / blocks, (b + 1) * n / blocks);
                let part = &centered[lo..hi];
                let b1: f64 = part.iter().sum();
                let b2: f64 = part.iter().map(|x| x * x).sum();
                0.25 * var(s1 - b1, s2 - b2, n - part.len())
            })
            .collect();
        let avg = leave_out.iter().sum::<f64>() / blocks as f64;
        let ss: f64 = leave_out.iter().map(|v| (v - avg).powi(2)).sum();
        std_error = ((blocks - 1) as f64 / blocks as f64 * ss).sqrt();
    }
    Ok(EstimateWithError {
        value,
        std_error,
        n_samples: n,
    })
}

/// `χ_F(g) = ¼ Var_{s∼p}[∂_g F_sym(s | g)]` from `n_samples` chains.
pub fn chi_f_model(model: &HyperRbm, g: f64, n_samples: usize, k: usize, seed: StreamSeed) -> Result<EstimateWithError> {
    require_samples(n_samples, 2, "fidelity susceptibility")?;
    let rbm = model.conditioned(g);
    let samples = sample_model(&rbm, n_samples, k, seed)?;
    let grads = exec::map_slice(&samples, |&s| {
        let mut scratch = FreeEnergyScratch::new(model.n_hidden());
        rbm.sym_grad_g(s, &mut scratch)
    });
    chi_f_from_gradients(&grads)
}

/// Exact `¼ Var_p[∂_g F_sym]` over the enumerated distribution.
pub fn chi_f_model_exact(model: &HyperRbm, g: f64) -> Result<f64> {
    let dist = model.enumerate_distribution(g)?;
    let rbm = model.conditioned(g);
    let mut scratch = FreeEnergyScratch::new(model.n_hidden());
    let (mut m1, mut m2) = (0.0, 0.0);
    for (idx, p) in dist.probabilities.iter().enumerate() {
        let d = rbm.sym_grad_g(Spins::from_index(idx), &mut scratch);
        m1 += p * d;
        m2 += p * d * d;
    }
    Ok(0.25 * (m2 - m1 * m1))
}

fn validate_subsystem(n: usize, subsystem: &[usize]) -> Result<u64> {
    if let Some(&i) = subsystem.iter().find(|&&i| i >= n) {
        return Err(Error::Geometry(format!("subsystem site {i} outside [0, {n})")));
    }
    Ok(subsystem_mask(subsystem))
}

/// Swap ratio `exp(−½ ΔF_swap)` of one replica pair.
pub fn swap_ratio(rbm: &ConditionedRbm<'_>, s1: Spins, s2: Spins, mask: u64, scratch: &mut FreeEnergyScratch) -> f64 {
    let a = s2.splice(s1, mask);
    let b = s1.splice(s2, mask);
    let delta = rbm.sym_free_energy_with(a, scratch) + rbm.sym_free_energy_with(b, scratch)
        - rbm.sym_free_energy_with(s1, scratch)
        - rbm.sym_free_energy_with(s2, scratch);
    (-0.5 * delta).exp()
}

/// `S₂(A) = −ln⟨R_A⟩` from `n_pairs` replica pairs drawn from two independent
/// chain pools, with a delta-method error. A sampled mean above one is
/// clamped to one.
pub fn renyi2_swap(
    model: &HyperRbm,
    g: f64,
    subsystem: &[usize],
    n_pairs: usize,
    k: usize,
    seed: StreamSeed,
) -> Result<EstimateWithError> {
    Ok(renyi2_swap_many(model, g, &[subsystem.to_vec()], n_pairs, k, seed)?.remove(0))
}

/// [`renyi2_swap`] for several subsystems, reusing one pair of chain pools.
pub fn renyi2_swap_many(
    model: &HyperRbm,
    g: f64,
    subsystems: &[Vec<usize>],
    n_pairs: usize,
    k: usize,
    seed: StreamSeed,
) -> Result<Vec<EstimateWithError>> {
    require_samples(n_pairs, 1, "swap estimator")?;
    let n = model.n_visible();
    let masks = subsystems
        .iter()
        .map(|a| validate_subsystem(n, a))
        .collect::<Result<Vec<_>>>()?;
    let trivial = |mask: u64| mask == 0 || mask.count_ones() as usize == n;
    if masks.iter().all(|&m| trivial(m)) {
        return Ok(masks.iter().map(|_| EstimateWithError::exact(0.0, n_pairs)).collect());
    }
    let rbm = model.conditioned(g);
    let first = sample_model(&rbm, n_pairs, k, seed.derive(1))?;
    let second = sample_model(&rbm, n_pairs, k, seed.derive(2))?;
    let pairs: Vec<(Spins, Spins)> = first.into_iter().zip(second).collect();
    masks
        .iter()
        .map(|&mask| {
            if trivial(mask) {
                return Ok(EstimateWithError::exact(0.0, n_pairs));
            }
            let ratios = exec::map_slice(&pairs, |&(s1, s2)| {
                let mut scratch = FreeEnergyScratch::new(model.n_hidden());
                swap_ratio(&rbm, s1, s2, mask, &mut scratch)
            });
            let r = EstimateWithError::from_samples(&ratios)?;
            if !(r.value > 0.0) || !r.value.is_finite() {
                return Err(Error::Numerical(format!("swap ratio mean {} is not a positive number", r.value)));
            }
            Ok(EstimateWithError {
                value: -r.value.min(1.0).ln(),
                std_error: r.std_error / r.value,
                n_samples: n_pairs,
            })
        })
        .collect()
}

/// Exact `S₂(A)` of the normalized model state.
pub fn renyi2_model_exact(model: &HyperRbm, g: f64, subsystem: &[usize]) -> Result<f64> {
    let n = model.n_visible();
    if n > MAX_EXACT_RENYI_SITES {
        return Err(Error::Capacity {
            what: "sites for exact model entropy",
            limit: MAX_EXACT_RENYI_SITES,
            got: n,
        });
    }
    validate_subsystem(n, subsystem)?;
    let amps = model.enumerate_distribution(g)?.amplitudes();
    Ok(renyi2_from_amplitudes(&amps, n, subsystem))
}

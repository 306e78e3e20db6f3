//! Augmented Gibbs sampling for the symmetrized model.
//!
//! The mixture `p(s) ∝ Σ_h e^{−E(s,h)} + e^{−E(1−s,h)}` is the marginal of
//! `π(s, h, u) ∝ e^{−E(T_u s, h)}` where `T_1` is the global spin flip. One
//! step updates `h | s, u`, then `u | s, h`, then `s | h, u`, each from its
//! exact conditional, so the chain leaves `p` invariant.

use rand::Rng;

use crate::error::{Error, Result};
use crate::exec;
use crate::hyperrbm::{sigmoid, ConditionedRbm, FreeEnergyScratch};
use crate::rng::{StreamRng, StreamSeed};
use crate::spins::{site_mask, Spins};

/// One chain of the augmented sampler.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainState {
    /// Visible configuration `s`.
    pub visible: Spins,
    /// Last hidden sample.
    pub hidden: Vec<bool>,
    /// Symmetry sector `u` from the last step; the effective RBM input is
    /// `1 − s` when set.
    pub flipped: bool,
}

impl ChainState {
    fn effective_input(&self, n: usize) -> Spins {
        if self.flipped {
            self.visible.complement(n)
        } else {
            self.visible
        }
    }
}

/// Per-thread buffers for the sampler.
#[derive(Clone, Debug)]
pub struct GibbsScratch {
    hidden_input: Vec<f64>,
    visible_input: Vec<f64>,
    free: FreeEnergyScratch,
}

impl GibbsScratch {
    pub fn new(rbm: &ConditionedRbm<'_>) -> Self {
        GibbsScratch {
            hidden_input: vec![0.0; rbm.n_hidden()],
            visible_input: vec![0.0; rbm.n_visible()],
            free: FreeEnergyScratch::new(rbm.n_hidden()),
        }
    }
}

fn sample_hidden(rbm: &ConditionedRbm<'_>, state: &mut ChainState, rng: &mut StreamRng, scratch: &mut GibbsScratch) {
    let input = state.effective_input(rbm.n_visible());
    rbm.hidden_input(input, &mut scratch.hidden_input);
    state.hidden.resize(rbm.n_hidden(), false);
    for (h, &x) in state.hidden.iter_mut().zip(&scratch.hidden_input) {
        *h = rng.random::<f64>() < sigmoid(x);
    }
}

/// One three-stage update of `state` in place.
pub fn gibbs_step(rbm: &ConditionedRbm<'_>, state: &mut ChainState, rng: &mut StreamRng, scratch: &mut GibbsScratch) {
    let n = rbm.n_visible();

    // 1. h | s, u
    sample_hidden(rbm, state, rng, scratch);

    // 2. u | s, h with ΔE = E(1−s, h) − E(s, h) = Σᵢ (2sᵢ − 1) φᵢ, φ = b + Wh
    let phi = &mut scratch.visible_input;
    phi.copy_from_slice(rbm.visible_bias());
    for (j, &on) in state.hidden.iter().enumerate() {
        if on {
            for (p, w) in phi.iter_mut().zip(rbm.weight_col(j)) {
                *p += w;
            }
        }
    }
    let delta_e: f64 = phi
        .iter()
        .enumerate()
        .map(|(i, &p)| if state.visible.get(i) { p } else { -p })
        .sum();
    let flipped = rng.random::<f64>() < sigmoid(-delta_e);

    // 3. s | h, u: sample the prototype, then apply the symmetry transform
    let mut proto = 0u64;
    for (i, &p) in phi.iter().enumerate() {
        if rng.random::<f64>() < sigmoid(p) {
            proto |= 1 << i;
        }
    }
    let proto = Spins(proto);
    state.visible = if flipped { proto.complement(n) } else { proto };
    state.flipped = flipped;
}

/// `k` consecutive steps of one chain.
pub fn advance(rbm: &ConditionedRbm<'_>, state: &mut ChainState, k: usize, rng: &mut StreamRng, scratch: &mut GibbsScratch) {
    for _ in 0..k {
        gibbs_step(rbm, state, rng, scratch);
    }
}

/// Starts a chain at `data` (or, with probability `noise_fraction`, at a
/// uniform random configuration). The sector is drawn from `u | s` and the
/// hidden layer from one stage-1 pass.
pub fn init_chain(
    rbm: &ConditionedRbm<'_>,
    data: Spins,
    noise_fraction: f64,
    rng: &mut StreamRng,
    scratch: &mut GibbsScratch,
) -> ChainState {
    let n = rbm.n_visible();
    let visible = if noise_fraction > 0.0 && rng.random::<f64>() < noise_fraction {
        Spins(rng.random::<u64>() & site_mask(n))
    } else {
        data
    };
    let (f, f_flip) = rbm.branch_free_energies(visible, &mut scratch.free);
    let flipped = rng.random::<f64>() < sigmoid(f - f_flip);
    let mut state = ChainState {
        visible,
        hidden: vec![false; rbm.n_hidden()],
        flipped,
    };
    sample_hidden(rbm, &mut state, rng, scratch);
    state
}

fn check_fraction(noise_fraction: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&noise_fraction) {
        return Err(Error::Config(format!("noise fraction {noise_fraction} outside [0, 1]")));
    }
    Ok(())
}

/// One chain per data configuration; chain `i` uses stream `i` of `seed`.
pub fn init_chains(rbm: &ConditionedRbm<'_>, data: &[Spins], noise_fraction: f64, seed: StreamSeed) -> Result<Vec<ChainState>> {
    check_fraction(noise_fraction)?;
    Ok(exec::map_indexed(data.len(), |i| {
        let mut rng = seed.rng(i as u64);
        let mut scratch = GibbsScratch::new(rbm);
        init_chain(rbm, data[i], noise_fraction, &mut rng, &mut scratch)
    }))
}

/// Runs every chain `k` steps independently; chain `i` uses stream `i`.
pub fn run_chains(rbm: &ConditionedRbm<'_>, inits: Vec<ChainState>, k: usize, seed: StreamSeed) -> Result<Vec<ChainState>> {
    if k == 0 {
        return Err(Error::Config("Gibbs chains need at least one step".into()));
    }
    Ok(exec::map_slice(&inits.iter().enumerate().collect::<Vec<_>>(), |&(i, init)| {
        let mut rng = seed.rng(i as u64);
        let mut scratch = GibbsScratch::new(rbm);
        let mut state = init.clone();
        advance(rbm, &mut state, k, &mut rng, &mut scratch);
        state
    }))
}

/// `n` independent model samples, each the endpoint of a `k`-step chain
/// started from a uniform random configuration.
pub fn sample_model(rbm: &ConditionedRbm<'_>, n: usize, k: usize, seed: StreamSeed) -> Result<Vec<Spins>> {
    if k == 0 {
        return Err(Error::Config("Gibbs chains need at least one step".into()));
    }
    Ok(exec::map_indexed(n, |i| {
        let mut rng = seed.rng(i as u64);
        let mut scratch = GibbsScratch::new(rbm);
        let mut state = init_chain(rbm, Spins(0), 1.0, &mut rng, &mut scratch);
        advance(rbm, &mut state, k, &mut rng, &mut scratch);
        state.visible
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperrbm::{HyperRbm, ModelShape};

    fn shape(n: usize, m: usize) -> ModelShape {
        ModelShape {
            n_visible: n,
            n_hidden: m,
            hyper_width: 2,
        }
    }

    #[test]
    fn zero_steps_rejected() {
        let model = HyperRbm::zeros(shape(3, 2), 0.0, 1.0).unwrap();
        let rbm = model.conditioned(0.5);
        assert!(run_chains(&rbm, vec![], 0, StreamSeed::new(1)).is_err());
        assert!(sample_model(&rbm, 4, 0, StreamSeed::new(1)).is_err());
    }

    #[test]
    fn noise_free_init_keeps_data() {
        let model = HyperRbm::zeros(shape(5, 2), 0.0, 1.0).unwrap();
        let rbm = model.conditioned(0.5);
        let data: Vec<Spins> = (0..32).map(Spins).collect();
        let chains = init_chains(&rbm, &data, 0.0, StreamSeed::new(3)).unwrap();
        assert!(chains.iter().zip(&data).all(|(c, d)| c.visible == *d));
        assert!(init_chains(&rbm, &data, 1.5, StreamSeed::new(3)).is_err());
    }

    #[test]
    fn same_seed_same_chains() {
        let model = HyperRbm::zeros(shape(4, 3), 0.0, 1.0).unwrap();
        let rbm = model.conditioned(0.2);
        let data: Vec<Spins> = (0..16).map(Spins).collect();
        let init = init_chains(&rbm, &data, 0.5, StreamSeed::new(9)).unwrap();
        let a = run_chains(&rbm, init.clone(), 5, StreamSeed::new(10)).unwrap();
        let b = run_chains(&rbm, init, 5, StreamSeed::new(10)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn polarized_bias_splits_between_branches() {
        let mut model = HyperRbm::zeros(shape(4, 2), 0.0, 1.0).unwrap();
        model.params.visible_base.iter_mut().for_each(|b| *b = 10.0);
        let rbm = model.conditioned(0.5);
        let samples = sample_model(&rbm, 4000, 3, StreamSeed::new(4)).unwrap();
        let ones = samples.iter().filter(|s| s.0 == 0b1111).count();
        let zeros = samples.iter().filter(|s| s.0 == 0).count();
        assert!(ones + zeros > 3990);
        let frac = ones as f64 / 4000.0;
        assert!((frac - 0.5).abs() < 4.0 * (0.25f64 / 4000.0).sqrt(), "fraction {frac}");
    }
}

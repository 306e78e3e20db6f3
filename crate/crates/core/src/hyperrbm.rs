//! Hypernetwork-conditioned RBM.
//!
//! A one-hidden-layer tanh MLP maps the field `g` to FiLM coefficients that
//! scale and shift the visible and hidden biases of an RBM whose weight
//! matrix is shared across all fields:
//!
//! ```text
//! b(g) = (1 + γᵇ(g)) ⊙ b_base + βᵇ(g)
//! c(g) = (1 + γᶜ(g)) ⊙ c_base + βᶜ(g)
//! ```
//!
//! The model distribution is the spin-flip symmetrized mixture
//! `p(s) ∝ e^{−F(s)} + e^{−F(1−s)}`. Everything downstream works with the
//! symmetrized free energy `F_sym`; the plain RBM free energy is only a
//! building block.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::exec;
use crate::spins::Spins;

/// Output slot layout of the hypernetwork, in order.
pub const SLOT_LAYOUT: &str = "gamma_b[N]|beta_b[N]|gamma_c[M]|beta_c[M]";

/// Largest visible layer for which the distribution is enumerated.
pub const MAX_ENUMERATION_SITES: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelShape {
    pub n_visible: usize,
    pub n_hidden: usize,
    pub hyper_width: usize,
}

impl ModelShape {
    pub fn film_outputs(&self) -> usize {
        2 * self.n_visible + 2 * self.n_hidden
    }

    fn validate(&self) -> Result<()> {
        if self.n_visible == 0 || self.n_hidden == 0 || self.hyper_width == 0 {
            return Err(Error::Config(format!("model dimensions must be positive: {self:?}")));
        }
        if self.n_visible > Spins::MAX_SITES {
            return Err(Error::Capacity {
                what: "visible units",
                limit: Spins::MAX_SITES,
                got: self.n_visible,
            });
        }
        Ok(())
    }
}

/// Every trainable block. Matrices are row-major: `weights[i·M + j]` is
/// `Wᵢⱼ`, `hyper_w2[r·H + k]` maps hidden unit `k` to output slot `r`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet {
    pub weights: Vec<f64>,
    pub visible_base: Vec<f64>,
    pub hidden_base: Vec<f64>,
    pub hyper_w1: Vec<f64>,
    pub hyper_b1: Vec<f64>,
    pub hyper_w2: Vec<f64>,
    pub hyper_b2: Vec<f64>,
}

/// Gradient of a scalar with respect to every entry of a [`ParamSet`].
pub type ParamGradient = ParamSet;

pub const BLOCK_NAMES: [&str; 7] = [
    "weights",
    "visible_base",
    "hidden_base",
    "hyper_w1",
    "hyper_b1",
    "hyper_w2",
    "hyper_b2",
];

impl ParamSet {
    pub fn zeros(shape: ModelShape) -> Self {
        let (n, m, h) = (shape.n_visible, shape.n_hidden, shape.hyper_width);
        let out = shape.film_outputs();
        ParamSet {
            weights: vec![0.0; n * m],
            visible_base: vec![0.0; n],
            hidden_base: vec![0.0; m],
            hyper_w1: vec![0.0; h],
            hyper_b1: vec![0.0; h],
            hyper_w2: vec![0.0; out * h],
            hyper_b2: vec![0.0; out],
        }
    }

    pub fn zeros_like(&self) -> Self {
        let z = |v: &Vec<f64>| vec![0.0; v.len()];
        ParamSet {
            weights: z(&self.weights),
            visible_base: z(&self.visible_base),
            hidden_base: z(&self.hidden_base),
            hyper_w1: z(&self.hyper_w1),
            hyper_b1: z(&self.hyper_b1),
            hyper_w2: z(&self.hyper_w2),
            hyper_b2: z(&self.hyper_b2),
        }
    }

    pub fn blocks(&self) -> [&[f64]; 7] {
        [
            &self.weights,
            &self.visible_base,
            &self.hidden_base,
            &self.hyper_w1,
            &self.hyper_b1,
            &self.hyper_w2,
            &self.hyper_b2,
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut [f64]; 7] {
        [
            &mut self.weights,
            &mut self.visible_base,
            &mut self.hidden_base,
            &mut self.hyper_w1,
            &mut self.hyper_b1,
            &mut self.hyper_w2,
            &mut self.hyper_b2,
        ]
    }

    pub fn len(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn same_shape(&self, other: &ParamSet) -> bool {
        self.blocks()
            .iter()
            .zip(other.blocks().iter())
            .all(|(a, b)| a.len() == b.len())
    }

    /// `self += scale · other`.
    pub fn add_scaled(&mut self, other: &ParamSet, scale: f64) {
        for (dst, src) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for block in self.blocks_mut() {
            block.iter_mut().for_each(|x| *x *= factor);
        }
    }

    /// First non-finite entry as `(block name, index)`.
    pub fn first_non_finite(&self) -> Option<(&'static str, usize)> {
        for (name, block) in BLOCK_NAMES.iter().zip(self.blocks()) {
            if let Some(i) = block.iter().position(|x| !x.is_finite()) {
                return Some((name, i));
            }
        }
        None
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.blocks().concat()
    }

    /// Reads entries back from [`ParamSet::to_flat`] order.
    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for block in self.blocks_mut() {
            let len = block.len();
            block.copy_from_slice(&flat[offset..offset + len]);
            offset += len;
        }
    }
}

/// FiLM scale/shift vectors for one field value.
#[derive(Clone, Debug, PartialEq)]
pub struct FilmCoefficients {
    pub gamma_b: Vec<f64>,
    pub beta_b: Vec<f64>,
    pub gamma_c: Vec<f64>,
    pub beta_c: Vec<f64>,
}

#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `−ln(e^{−a} + e^{−b})` without overflow.
#[inline]
pub fn neg_log_add_exp(a: f64, b: f64) -> f64 {
    a.min(b) - (-(a - b).abs()).exp().ln_1p()
}

#[derive(Clone, Debug, PartialEq)]
pub struct HyperRbm {
    shape: ModelShape,
    g_lo: f64,
    g_hi: f64,
    pub params: ParamSet,
}

impl HyperRbm {
    /// All-zero model: uniform distribution at every field.
    pub fn zeros(shape: ModelShape, g_lo: f64, g_hi: f64) -> Result<Self> {
        Self::from_params(shape, g_lo, g_hi, ParamSet::zeros(shape))
    }

    pub fn from_params(shape: ModelShape, g_lo: f64, g_hi: f64, params: ParamSet) -> Result<Self> {
        shape.validate()?;
        if !(g_hi > g_lo) || !g_lo.is_finite() || !g_hi.is_finite() {
            return Err(Error::Config(format!(
                "field normalization range must satisfy g_lo < g_hi, got [{g_lo}, {g_hi}]"
            )));
        }
        if !params.same_shape(&ParamSet::zeros(shape)) {
            return Err(Error::Config("parameter blocks do not match the model shape".into()));
        }
        Ok(HyperRbm {
            shape,
            g_lo,
            g_hi,
            params,
        })
    }

    /// Standard initialization: `W ~ N(0, weight_std²)`, zero base biases,
    /// first hypernetwork layer `~ N(0, 0.1²)`, zero output layer (so the
    /// modulation starts as the identity).
    pub fn init_random<R: Rng + ?Sized>(
        shape: ModelShape,
        g_lo: f64,
        g_hi: f64,
        weight_std: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut model = Self::zeros(shape, g_lo, g_hi)?;
        let w = Normal::new(0.0, weight_std)
            .map_err(|e| Error::Config(format!("weight init std {weight_std}: {e}")))?;
        let hyper = Normal::new(0.0, 0.1).expect("valid std");
        model.params.weights.iter_mut().for_each(|x| *x = w.sample(rng));
        model.params.hyper_w1.iter_mut().for_each(|x| *x = hyper.sample(rng));
        model.params.hyper_b1.iter_mut().for_each(|x| *x = hyper.sample(rng));
        Ok(model)
    }

    pub fn shape(&self) -> ModelShape {
        self.shape
    }

    pub fn n_visible(&self) -> usize {
        self.shape.n_visible
    }

    pub fn n_hidden(&self) -> usize {
        self.shape.n_hidden
    }

    pub fn g_range(&self) -> (f64, f64) {
        (self.g_lo, self.g_hi)
    }

    #[inline]
    fn normalize_field(&self, g: f64) -> f64 {
        (g - self.g_lo) / (self.g_hi - self.g_lo)
    }

    fn hidden_layer(&self, g: f64) -> Vec<f64> {
        let x = self.normalize_field(g);
        self.params
            .hyper_w1
            .iter()
            .zip(&self.params.hyper_b1)
            .map(|(w, b)| (w * x + b).tanh())
            .collect()
    }

    fn output_layer(&self, hidden: &[f64]) -> Vec<f64> {
        let h = self.shape.hyper_width;
        self.params
            .hyper_w2
            .chunks_exact(h)
            .zip(&self.params.hyper_b2)
            .map(|(row, b)| b + row.iter().zip(hidden).map(|(w, a)| w * a).sum::<f64>())
            .collect()
    }

    fn split_slots(&self, out: &[f64]) -> FilmCoefficients {
        let (n, m) = (self.shape.n_visible, self.shape.n_hidden);
        FilmCoefficients {
            gamma_b: out[..n].to_vec(),
            beta_b: out[n..2 * n].to_vec(),
            gamma_c: out[2 * n..2 * n + m].to_vec(),
            beta_c: out[2 * n + m..].to_vec(),
        }
    }

    pub fn hypernet_forward(&self, g: f64) -> FilmCoefficients {
        let hidden = self.hidden_layer(g);
        self.split_slots(&self.output_layer(&hidden))
    }

    /// `(b(g), c(g))`.
    pub fn film_biases(&self, g: f64) -> (Vec<f64>, Vec<f64>) {
        let film = self.hypernet_forward(g);
        modulate(&film, &self.params.visible_base, &self.params.hidden_base)
    }

    /// Evaluates everything that depends on `g` alone once, for repeated
    /// per-configuration work at that field.
    pub fn conditioned(&self, g: f64) -> ConditionedRbm<'_> {
        ConditionedRbm::new(self, g)
    }

    pub fn free_energy(&self, s: Spins, g: f64) -> f64 {
        self.conditioned(g).free_energy(s)
    }

    pub fn symmetrized_free_energy(&self, s: Spins, g: f64) -> f64 {
        self.conditioned(g).sym_free_energy(s)
    }

    /// `∇_θ F_sym(s | g)` for every parameter block.
    pub fn grad_params(&self, s: Spins, g: f64) -> ParamGradient {
        let rbm = self.conditioned(g);
        let mut acc = BiasGrad::zeros(self.shape);
        let mut grad = ParamSet::zeros(self.shape);
        let mut scratch = FreeEnergyScratch::new(self.shape.n_hidden);
        rbm.accumulate_sym_grad(s, 1.0, &mut acc, &mut grad.weights, &mut scratch);
        rbm.backprop_biases(&acc, &mut grad);
        grad
    }

    /// `∂F_sym(s | g)/∂g`.
    pub fn grad_g(&self, s: Spins, g: f64) -> f64 {
        let rbm = self.conditioned(g);
        let mut scratch = FreeEnergyScratch::new(self.shape.n_hidden);
        rbm.sym_grad_g(s, &mut scratch)
    }

    /// Exact `p_sym(· | g)` over all `2^N` configurations.
    pub fn enumerate_distribution(&self, g: f64) -> Result<ModelDistribution> {
        let n = self.shape.n_visible;
        if n > MAX_ENUMERATION_SITES {
            return Err(Error::Capacity {
                what: "enumerated visible units",
                limit: MAX_ENUMERATION_SITES,
                got: n,
            });
        }
        let rbm = self.conditioned(g);
        let dim = 1usize << n;
        let mut free = vec![0.0; dim];
        exec::fill_chunks(&mut free, 2048, |offset, out| {
            let mut scratch = FreeEnergyScratch::new(self.shape.n_hidden);
            for (k, f) in out.iter_mut().enumerate() {
                *f = rbm.sym_free_energy_with(Spins::from_index(offset + k), &mut scratch);
            }
        });
        Ok(ModelDistribution::from_free_energies(&free))
    }
}

fn modulate(film: &FilmCoefficients, b_base: &[f64], c_base: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let b = b_base
        .iter()
        .zip(&film.gamma_b)
        .zip(&film.beta_b)
        .map(|((x, gm), bt)| (1.0 + gm) * x + bt)
        .collect();
    let c = c_base
        .iter()
        .zip(&film.gamma_c)
        .zip(&film.beta_c)
        .map(|((x, gm), bt)| (1.0 + gm) * x + bt)
        .collect();
    (b, c)
}

/// Normalized model distribution over all basis states.
#[derive(Clone, Debug)]
pub struct ModelDistribution {
    pub probabilities: Vec<f64>,
    pub log_z: f64,
}

impl ModelDistribution {
    /// `p(s) = e^{−F(s)}/Z` via a log-sum-exp reduction.
    pub fn from_free_energies(free: &[f64]) -> Self {
        let fmin = free.iter().copied().fold(f64::INFINITY, f64::min);
        let sum: f64 = free.iter().map(|f| (fmin - f).exp()).sum();
        let log_z = -fmin + sum.ln();
        let probabilities = free.iter().map(|f| (-f - log_z).exp()).collect();
        ModelDistribution { probabilities, log_z }
    }

    /// Normalized nonnegative amplitudes `√p(s)`.
    pub fn amplitudes(&self) -> Vec<f64> {
        self.probabilities.iter().map(|p| p.sqrt()).collect()
    }
}

/// Upstream gradient with respect to the field-dependent biases.
#[derive(Clone, Debug)]
pub struct BiasGrad {
    pub visible: Vec<f64>,
    pub hidden: Vec<f64>,
}

impl BiasGrad {
    pub fn zeros(shape: ModelShape) -> Self {
        BiasGrad {
            visible: vec![0.0; shape.n_visible],
            hidden: vec![0.0; shape.n_hidden],
        }
    }

    pub fn add(&mut self, other: &BiasGrad) {
        for (a, b) in self.visible.iter_mut().zip(&other.visible) {
            *a += b;
        }
        for (a, b) in self.hidden.iter_mut().zip(&other.hidden) {
            *a += b;
        }
    }
}

/// Hidden-layer buffers reused across free-energy evaluations.
#[derive(Clone, Debug)]
pub struct FreeEnergyScratch {
    theta: Vec<f64>,
    theta_flip: Vec<f64>,
}

impl FreeEnergyScratch {
    pub fn new(n_hidden: usize) -> Self {
        FreeEnergyScratch {
            theta: vec![0.0; n_hidden],
            theta_flip: vec![0.0; n_hidden],
        }
    }
}

/// An RBM with its biases fixed at one field value.
#[derive(Clone, Debug)]
pub struct ConditionedRbm<'a> {
    model: &'a HyperRbm,
    g: f64,
    visible_bias: Vec<f64>,
    hidden_bias: Vec<f64>,
    visible_bias_sum: f64,
    weight_colsum: Vec<f64>,
    weights_t: Vec<f64>,
    hyper_hidden: Vec<f64>,
    film: FilmCoefficients,
    dvisible_dg: Vec<f64>,
    dhidden_dg: Vec<f64>,
}

impl<'a> ConditionedRbm<'a> {
    fn new(model: &'a HyperRbm, g: f64) -> Self {
        let ModelShape {
            n_visible: n,
            n_hidden: m,
            hyper_width: width,
        } = model.shape;
        let p = &model.params;
        let hyper_hidden = model.hidden_layer(g);
        let film = model.split_slots(&model.output_layer(&hyper_hidden));
        let (visible_bias, hidden_bias) = modulate(&film, &p.visible_base, &p.hidden_base);

        let mut weight_colsum = vec![0.0; m];
        let mut weights_t = vec![0.0; m * n];
        for i in 0..n {
            for j in 0..m {
                let w = p.weights[i * m + j];
                weight_colsum[j] += w;
                weights_t[j * n + i] = w;
            }
        }

        // d(output slot)/dg through tanh and the input normalization
        let inv_range = 1.0 / (model.g_hi - model.g_lo);
        let dhidden: Vec<f64> = hyper_hidden
            .iter()
            .zip(&p.hyper_w1)
            .map(|(a, w)| (1.0 - a * a) * w * inv_range)
            .collect();
        let dout: Vec<f64> = p
            .hyper_w2
            .chunks_exact(width)
            .map(|row| row.iter().zip(&dhidden).map(|(w, d)| w * d).sum())
            .collect();
        let dvisible_dg = (0..n)
            .map(|i| p.visible_base[i] * dout[i] + dout[n + i])
            .collect();
        let dhidden_dg = (0..m)
            .map(|j| p.hidden_base[j] * dout[2 * n + j] + dout[2 * n + m + j])
            .collect();

        ConditionedRbm {
            model,
            g,
            visible_bias_sum: visible_bias.iter().sum(),
            visible_bias,
            hidden_bias,
            weight_colsum,
            weights_t,
            hyper_hidden,
            film,
            dvisible_dg,
            dhidden_dg,
        }
    }

    pub fn model(&self) -> &HyperRbm {
        self.model
    }

    pub fn field(&self) -> f64 {
        self.g
    }

    pub fn n_visible(&self) -> usize {
        self.model.shape.n_visible
    }

    pub fn n_hidden(&self) -> usize {
        self.model.shape.n_hidden
    }

    pub fn visible_bias(&self) -> &[f64] {
        &self.visible_bias
    }

    pub fn hidden_bias(&self) -> &[f64] {
        &self.hidden_bias
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.model.params.weights[i * self.n_hidden() + j]
    }

    /// Row `i` of `W` (length `M`).
    #[inline]
    pub fn weight_row(&self, i: usize) -> &[f64] {
        let m = self.n_hidden();
        &self.model.params.weights[i * m..(i + 1) * m]
    }

    /// Column `j` of `W` (length `N`).
    #[inline]
    pub fn weight_col(&self, j: usize) -> &[f64] {
        let n = self.n_visible();
        &self.weights_t[j * n..(j + 1) * n]
    }

    /// `out = c(g) + Wᵀs`.
    #[inline]
    pub fn hidden_input(&self, s: Spins, out: &mut [f64]) {
        out.copy_from_slice(&self.hidden_bias);
        for i in s.ones() {
            for (o, w) in out.iter_mut().zip(self.weight_row(i)) {
                *o += w;
            }
        }
    }

    #[inline]
    fn visible_term(&self, s: Spins) -> f64 {
        s.ones().map(|i| self.visible_bias[i]).sum()
    }

    /// Plain RBM free energy `F(s)`.
    pub fn free_energy(&self, s: Spins) -> f64 {
        let mut theta = vec![0.0; self.n_hidden()];
        self.hidden_input(s, &mut theta);
        -self.visible_term(s) - theta.iter().map(|&x| softplus(x)).sum::<f64>()
    }

    /// `(F(s), F(1−s))` from a single pass over `W`, leaving the two
    /// hidden inputs in `scratch`. The pass always starts from the member of
    /// `{s, 1−s}` with the last site clear, so both members of a pair get
    /// bit-identical results.
    #[inline]
    pub fn branch_free_energies(&self, s: Spins, scratch: &mut FreeEnergyScratch) -> (f64, f64) {
        let n = self.n_visible();
        if s.get(n - 1) {
            let (f, ff) = self.canonical_branches(s.complement(n), scratch);
            std::mem::swap(&mut scratch.theta, &mut scratch.theta_flip);
            return (ff, f);
        }
        self.canonical_branches(s, scratch)
    }

    #[inline]
    fn canonical_branches(&self, s: Spins, scratch: &mut FreeEnergyScratch) -> (f64, f64) {
        self.hidden_input(s, &mut scratch.theta);
        let bs = self.visible_term(s);
        let mut sp = 0.0;
        let mut sp_flip = 0.0;
        // (1 − s)ᵀW = Σ_W − sᵀW
        for j in 0..self.n_hidden() {
            let t = scratch.theta[j];
            let tf = 2.0 * self.hidden_bias[j] + self.weight_colsum[j] - t;
            scratch.theta_flip[j] = tf;
            sp += softplus(t);
            sp_flip += softplus(tf);
        }
        (-bs - sp, -(self.visible_bias_sum - bs) - sp_flip)
    }

    pub fn sym_free_energy(&self, s: Spins) -> f64 {
        let mut scratch = FreeEnergyScratch::new(self.n_hidden());
        self.sym_free_energy_with(s, &mut scratch)
    }

    #[inline]
    pub fn sym_free_energy_with(&self, s: Spins, scratch: &mut FreeEnergyScratch) -> f64 {
        let (f, ff) = self.branch_free_energies(s, scratch);
        neg_log_add_exp(f, ff)
    }

    /// Adds `scale · ∇F_sym(s)` to the bias accumulator and to the weight
    /// gradient `dweights` (row-major `N × M`).
    pub fn accumulate_sym_grad(
        &self,
        s: Spins,
        scale: f64,
        acc: &mut BiasGrad,
        dweights: &mut [f64],
        scratch: &mut FreeEnergyScratch,
    ) {
        let (n, m) = (self.n_visible(), self.n_hidden());
        let (f, ff) = self.branch_free_energies(s, scratch);
        let w = sigmoid(ff - f);
        let wf = 1.0 - w;
        for j in 0..m {
            scratch.theta[j] = sigmoid(scratch.theta[j]);
            scratch.theta_flip[j] = sigmoid(scratch.theta_flip[j]);
        }
        for i in 0..n {
            let row = &mut dweights[i * m..(i + 1) * m];
            if s.get(i) {
                acc.visible[i] -= scale * w;
                let a = -scale * w;
                for (d, sg) in row.iter_mut().zip(&scratch.theta) {
                    *d += a * sg;
                }
            } else {
                acc.visible[i] -= scale * wf;
                let a = -scale * wf;
                for (d, sg) in row.iter_mut().zip(&scratch.theta_flip) {
                    *d += a * sg;
                }
            }
        }
        for j in 0..m {
            acc.hidden[j] -= scale * (w * scratch.theta[j] + wf * scratch.theta_flip[j]);
        }
    }

    /// `∂F_sym(s)/∂g`.
    pub fn sym_grad_g(&self, s: Spins, scratch: &mut FreeEnergyScratch) -> f64 {
        let (f, ff) = self.branch_free_energies(s, scratch);
        let w = sigmoid(ff - f);
        let wf = 1.0 - w;
        let mut total = 0.0;
        for i in 0..self.n_visible() {
            let occ = if s.get(i) { w } else { wf };
            total -= occ * self.dvisible_dg[i];
        }
        for j in 0..self.n_hidden() {
            let act = w * sigmoid(scratch.theta[j]) + wf * sigmoid(scratch.theta_flip[j]);
            total -= act * self.dhidden_dg[j];
        }
        total
    }

    /// Pushes an upstream bias gradient through the FiLM affine map and the
    /// hypernetwork, adding into `grad` (whose `weights` block is untouched).
    pub fn backprop_biases(&self, up: &BiasGrad, grad: &mut ParamGradient) {
        let ModelShape {
            n_visible: n,
            n_hidden: m,
            hyper_width: width,
        } = self.model.shape;
        let p = &self.model.params;
        let mut dout = vec![0.0; 2 * n + 2 * m];
        for i in 0..n {
            let u = up.visible[i];
            grad.visible_base[i] += u * (1.0 + self.film.gamma_b[i]);
            dout[i] = u * p.visible_base[i];
            dout[n + i] = u;
        }
        for j in 0..m {
            let u = up.hidden[j];
            grad.hidden_base[j] += u * (1.0 + self.film.gamma_c[j]);
            dout[2 * n + j] = u * p.hidden_base[j];
            dout[2 * n + m + j] = u;
        }
        let mut dhidden = vec![0.0; width];
        for (r, &d) in dout.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            grad.hyper_b2[r] += d;
            let row = &p.hyper_w2[r * width..(r + 1) * width];
            let grow = &mut grad.hyper_w2[r * width..(r + 1) * width];
            for k in 0..width {
                grow[k] += d * self.hyper_hidden[k];
                dhidden[k] += d * row[k];
            }
        }
        let x = self.model.normalize_field(self.g);
        for k in 0..width {
            let a = self.hyper_hidden[k];
            let pre = dhidden[k] * (1.0 - a * a);
            grad.hyper_w1[k] += pre * x;
            grad.hyper_b1[k] += pre;
        }
    }
}

#![allow(dead_code)]

use hyperqst::hyperrbm::{HyperRbm, ModelShape};
use hyperqst::rng::StreamSeed;
use hyperqst::spins::Spins;
use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, Normal};

pub fn shape(n: usize, m: usize, h: usize) -> ModelShape {
    ModelShape {
        n_visible: n,
        n_hidden: m,
        hyper_width: h,
    }
}

/// Every parameter drawn from `N(0, scale²)`, field range `[0.5, 2]`.
pub fn random_model(n: usize, m: usize, h: usize, seed: u64, scale: f64) -> HyperRbm {
    let mut rng = StreamSeed::new(seed).derive(0x7e57).rng(0);
    let mut model = HyperRbm::zeros(shape(n, m, h), 0.5, 2.0).unwrap();
    let d = Normal::new(0.0, scale).unwrap();
    for block in model.params.blocks_mut() {
        block.iter_mut().for_each(|x| *x = d.sample(&mut rng));
    }
    model
}

/// `E(s, h) = −bᵀs − cᵀh − sᵀWh` at field `g`, straight from the biases.
pub fn joint_energy(model: &HyperRbm, g: f64, s: usize, h: usize) -> f64 {
    let (b, c) = model.film_biases(g);
    let (n, m) = (model.n_visible(), model.n_hidden());
    let mut e = 0.0;
    for i in 0..n {
        let si = ((s >> i) & 1) as f64;
        e -= b[i] * si;
        for j in 0..m {
            let hj = ((h >> j) & 1) as f64;
            e -= si * model.params.weights[i * m + j] * hj;
        }
    }
    for j in 0..m {
        e -= c[j] * ((h >> j) & 1) as f64;
    }
    e
}

/// `−ln Σ_h e^{−E(s,h)}` by brute-force hidden enumeration.
pub fn free_energy_by_hidden_sum(model: &HyperRbm, g: f64, s: usize) -> f64 {
    let m = model.n_hidden();
    let z: f64 = (0..1usize << m).map(|h| (-joint_energy(model, g, s, h)).exp()).sum();
    -z.ln()
}

/// Dense TFIM Hamiltonian built from an explicit bond list.
pub fn dense_tfim(n: usize, bonds: &[(usize, usize)], j: f64, g: f64) -> DMatrix<f64> {
    let dim = 1usize << n;
    let mut h = DMatrix::zeros(dim, dim);
    for s in 0..dim {
        let z = |i: usize| if (s >> i) & 1 == 1 { -1.0 } else { 1.0 };
        h[(s, s)] = -j * bonds.iter().map(|&(a, b)| z(a) * z(b)).sum::<f64>();
        for i in 0..n {
            h[(s ^ (1 << i), s)] -= g;
        }
    }
    h
}

pub fn chain_bonds(l: usize) -> Vec<(usize, usize)> {
    (0..l).map(|i| (i, (i + 1) % l)).collect()
}

pub fn square_bonds(l: usize) -> Vec<(usize, usize)> {
    let mut bonds = Vec::new();
    for r in 0..l {
        for c in 0..l {
            let i = r * l + c;
            bonds.push((i, r * l + (c + 1) % l));
            bonds.push((i, ((r + 1) % l) * l + c));
        }
    }
    bonds
}

/// Sorted eigenvalues and the matching eigenvectors (as columns).
pub fn dense_spectrum(h: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn spins_iter(n: usize) -> impl Iterator<Item = Spins> {
    (0..1usize << n).map(Spins::from_index)
}

/// Total-variation distance between two distributions.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

mod common;

use common::{random_model, tv_distance};
use hyperqst::gibbs::{advance, init_chain, GibbsScratch};
use hyperqst::hyperrbm::{sigmoid, HyperRbm};
use hyperqst::rng::StreamSeed;
use hyperqst::spins::Spins;
use hyperqst::training::cd_gradient;

#[test]
fn long_chain_matches_enumerated_distribution() {
    let model = random_model(3, 2, 3, 21, 1.2);
    let g = 1.2;
    let exact = model.enumerate_distribution(g).unwrap().probabilities;
    let rbm = model.conditioned(g);
    let mut rng = StreamSeed::new(5).rng(0);
    let mut scratch = GibbsScratch::new(&rbm);
    let mut chain = init_chain(&rbm, Spins(0), 0.0, &mut rng, &mut scratch);
    advance(&rbm, &mut chain, 100, &mut rng, &mut scratch);
    let steps = 1_000_000;
    let mut counts = vec![0.0; 8];
    for _ in 0..steps {
        advance(&rbm, &mut chain, 1, &mut rng, &mut scratch);
        counts[chain.visible.index()] += 1.0;
    }
    counts.iter_mut().for_each(|c| *c /= steps as f64);
    let tv = tv_distance(&counts, &exact);
    assert!(tv < 0.02, "TV {tv}");
}

/// `P(s_k = · | s_0 = data)` for the augmented chain, by enumerating every
/// intermediate hidden configuration and sector bit.
fn k_step_distribution(model: &HyperRbm, g: f64, data: usize, k: usize, noise: f64) -> Vec<f64> {
    let rbm = model.conditioned(g);
    let (n, m) = (model.n_visible(), model.n_hidden());
    let dim = 1usize << n;
    let full = dim - 1;
    let (b, c) = model.film_biases(g);
    let w = |i: usize, j: usize| model.params.weights[i * m + j];
    let bern = |p: f64, on: bool| if on { p } else { 1.0 - p };

    // joint over (s, u)
    let mut state = vec![0.0; 2 * dim];
    for s0 in 0..dim {
        let p_s = (1.0 - noise) * (s0 == data) as u8 as f64 + noise / dim as f64;
        if p_s == 0.0 {
            continue;
        }
        let f = rbm.free_energy(Spins::from_index(s0));
        let ff = rbm.free_energy(Spins::from_index(s0 ^ full));
        let pu = sigmoid(f - ff);
        state[2 * s0] += p_s * (1.0 - pu);
        state[2 * s0 + 1] += p_s * pu;
    }
    for _ in 0..k {
        let mut next = vec![0.0; 2 * dim];
        for s in 0..dim {
            for u in 0..2 {
                let p0 = state[2 * s + u];
                if p0 == 0.0 {
                    continue;
                }
                let eff = if u == 1 { s ^ full } else { s };
                for h in 0..1usize << m {
                    let mut ph = 1.0;
                    for j in 0..m {
                        let x = c[j] + (0..n).filter(|&i| (eff >> i) & 1 == 1).map(|i| w(i, j)).sum::<f64>();
                        ph *= bern(sigmoid(x), (h >> j) & 1 == 1);
                    }
                    let phi: Vec<f64> = (0..n)
                        .map(|i| b[i] + (0..m).filter(|&j| (h >> j) & 1 == 1).map(|j| w(i, j)).sum::<f64>())
                        .collect();
                    let de: f64 = (0..n).map(|i| if (s >> i) & 1 == 1 { phi[i] } else { -phi[i] }).sum();
                    let pu1 = sigmoid(-de);
                    for u2 in 0..2 {
                        let pu = bern(pu1, u2 == 1);
                        for proto in 0..dim {
                            let pp: f64 = (0..n).map(|i| bern(sigmoid(phi[i]), (proto >> i) & 1 == 1)).product();
                            let s2 = if u2 == 1 { proto ^ full } else { proto };
                            next[2 * s2 + u2] += p0 * ph * pu * pp;
                        }
                    }
                }
            }
        }
        state = next;
    }
    (0..dim).map(|s| state[2 * s] + state[2 * s + 1]).collect()
}

#[test]
fn k_step_chain_has_stationary_fixed_point() {
    let model = random_model(3, 2, 3, 4, 1.0);
    let exact = model.enumerate_distribution(0.9).unwrap().probabilities;
    // one step applied to the stationary joint keeps the marginal
    let mut mixed = vec![0.0; 8];
    for (s, p) in exact.iter().enumerate() {
        let row = k_step_distribution(&model, 0.9, s, 1, 0.0);
        for (t, q) in row.iter().enumerate() {
            mixed[t] += p * q;
        }
    }
    assert!(tv_distance(&mixed, &exact) < 1e-12);
}

#[test]
fn cd_gradient_is_unbiased_for_the_k_step_chain() {
    let model = random_model(3, 2, 3, 8, 0.9);
    let k = 2;
    let noise = 0.1;
    let batch: Vec<(Spins, f64)> = vec![(Spins(0b001), 0.7), (Spins(0b110), 0.7), (Spins(0b011), 1.6), (Spins(0b000), 1.6)];

    let dim_p = model.params.len();
    let mut exact = vec![0.0; dim_p];
    for &(s, g) in &batch {
        let pos = model.grad_params(s, g).to_flat();
        let dist = k_step_distribution(&model, g, s.index(), k, noise);
        for (x, p) in exact.iter_mut().zip(&pos) {
            *x += p / batch.len() as f64;
        }
        for (t, q) in dist.iter().enumerate() {
            let neg = model.grad_params(Spins::from_index(t), g).to_flat();
            for (x, v) in exact.iter_mut().zip(&neg) {
                *x -= q * v / batch.len() as f64;
            }
        }
    }

    let directions: Vec<Vec<f64>> = (0..3)
        .map(|d| {
            let r = random_model(3, 2, 3, 500 + d, 1.0).params.to_flat();
            let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            r.into_iter().map(|x| x / norm).collect()
        })
        .collect();
    let draws = 10_000;
    let mut sums = vec![0.0; directions.len()];
    let mut sq = vec![0.0; directions.len()];
    for t in 0..draws {
        let grad = cd_gradient(&model, &batch, k, noise, StreamSeed::new(77).derive(t)).unwrap().to_flat();
        for (d, dir) in directions.iter().enumerate() {
            let proj: f64 = grad.iter().zip(dir).map(|(a, b)| a * b).sum();
            sums[d] += proj;
            sq[d] += proj * proj;
        }
    }
    for (d, dir) in directions.iter().enumerate() {
        let mean = sums[d] / draws as f64;
        let var = sq[d] / draws as f64 - mean * mean;
        let sigma = (var / draws as f64).sqrt();
        let target: f64 = exact.iter().zip(dir).map(|(a, b)| a * b).sum();
        assert!((mean - target).abs() < 3.0 * sigma, "direction {d}: {mean} vs {target} (σ {sigma})");
    }
}

#[test]
fn sampler_is_deterministic_across_runs() {
    let model = random_model(6, 4, 3, 2, 0.7);
    let rbm = model.conditioned(1.0);
    let a = hyperqst::gibbs::sample_model(&rbm, 300, 5, StreamSeed::new(3)).unwrap();
    let b = hyperqst::gibbs::sample_model(&rbm, 300, 5, StreamSeed::new(3)).unwrap();
    assert_eq!(a, b);
    let c = hyperqst::gibbs::sample_model(&rbm, 300, 5, StreamSeed::new(4)).unwrap();
    assert_ne!(a, c);
}

mod common;

use common::{chain_bonds, dense_spectrum, dense_tfim, square_bonds};
use hyperqst::exact_diag::{
    chi_f_exact, exact_observables, purity, renyi2_exact, solve, TfimHamiltonian,
};
use hyperqst::lattice::{build_chain, build_square, LatticeGeometry, LatticeKind};
use nalgebra::DMatrix;

fn geometries() -> Vec<(LatticeGeometry, Vec<(usize, usize)>)> {
    let mut out: Vec<_> = (3..=10).map(|l| (build_chain(l).unwrap(), chain_bonds(l))).collect();
    out.push((build_square(3).unwrap(), square_bonds(3)));
    out
}

#[test]
fn lanczos_matches_dense_eigensolver() {
    for (geom, bonds) in geometries() {
        for &g in &[0.3, 1.0, 2.2, 4.5] {
            let psi = solve(&geom, 1.0, g).unwrap();
            let (values, vectors) = dense_spectrum(dense_tfim(geom.num_sites(), &bonds, 1.0, g));
            assert!(
                (psi.energy - values[0]).abs() < 1e-9,
                "{} g={g}: {} vs {}",
                geom.label(),
                psi.energy,
                values[0]
            );
            let overlap: f64 = psi.amplitudes.iter().enumerate().map(|(k, a)| a * vectors[(k, 0)]).sum();
            assert!((overlap.abs() - 1.0).abs() < 1e-8, "{} g={g}: overlap {overlap}", geom.label());
        }
    }
}

#[test]
fn matrix_free_operator_matches_dense_matrix() {
    let geom = build_square(3).unwrap();
    let h = TfimHamiltonian::new(&geom, 0.7, 1.3).unwrap();
    let dense = dense_tfim(9, &square_bonds(3), 0.7, 1.3);
    let x: Vec<f64> = (0..512).map(|k| ((k * 7919) % 113) as f64 / 113.0 - 0.5).collect();
    let mut y = vec![0.0; 512];
    h.apply(&x, &mut y);
    let expect = &dense * DMatrix::from_column_slice(512, 1, &x);
    for k in 0..512 {
        assert!((y[k] - expect[k]).abs() < 1e-12);
    }
}

#[test]
fn periodic_chain_matches_free_fermion_energy() {
    // even-parity sector, antiperiodic fermion momenta k = (2n+1)π/L
    for l in [4usize, 6, 8, 10, 12] {
        for &g in &[0.5, 1.0, 1.7] {
            let exact: f64 = -(0..l)
                .map(|n| {
                    let k = std::f64::consts::PI * (2 * n + 1) as f64 / l as f64;
                    (1.0 + g * g - 2.0 * g * k.cos()).sqrt()
                })
                .sum::<f64>();
            let psi = solve(&build_chain(l).unwrap(), 1.0, g).unwrap();
            assert!((psi.energy - exact).abs() < 1e-9, "L={l} g={g}: {} vs {exact}", psi.energy);
        }
    }
}

#[test]
fn ground_state_is_nonnegative_and_normalized() {
    for (geom, _) in geometries() {
        let psi = solve(&geom, 1.0, 1.1).unwrap();
        assert!(psi.amplitudes.iter().all(|&a| a >= 0.0));
        let norm: f64 = psi.amplitudes.iter().map(|a| a * a).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }
}

/// `Σ_{n>0} |⟨n|∂_g H|0⟩|² / (E_n − E_0)²` with `∂_g H = −Σ σˣ`.
fn chi_f_perturbative(n: usize, bonds: &[(usize, usize)], g: f64) -> f64 {
    let (values, vectors) = dense_spectrum(dense_tfim(n, bonds, 1.0, g));
    let dim = 1usize << n;
    let mut dh = DMatrix::zeros(dim, dim);
    for s in 0..dim {
        for i in 0..n {
            dh[(s ^ (1 << i), s)] -= 1.0;
        }
    }
    let ground = vectors.column(0);
    let v = &dh * ground;
    (1..dim)
        .map(|k| {
            let m = vectors.column(k).dot(&v);
            m * m / (values[k] - values[0]).powi(2)
        })
        .sum()
}

#[test]
fn fidelity_susceptibility_matches_perturbation_theory() {
    for (geom, bonds) in [(build_chain(8).unwrap(), chain_bonds(8)), (build_square(3).unwrap(), square_bonds(3))] {
        for &g in &[0.8, 1.0, 2.2, 3.5] {
            let fd = chi_f_exact(&geom, 1.0, g, 1e-3).unwrap();
            let pt = chi_f_perturbative(geom.num_sites(), &bonds, g);
            assert!((fd - pt).abs() < 1e-5 * pt.max(1e-3), "{} g={g}: {fd} vs {pt}", geom.label());
        }
    }
}

#[test]
fn square_3x3_susceptibility_peaks_near_published_critical_field() {
    let geom = LatticeGeometry::new(LatticeKind::Square, 3).unwrap();
    let grid: Vec<f64> = (0..=70).map(|k| 1.0 + 0.05 * k as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&g| chi_f_exact(&geom, 1.0, g, 1e-3).unwrap()).collect();
    let best = (0..grid.len()).max_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    assert!((grid[best] - 2.22).abs() <= 0.05, "ED argmax at {}", grid[best]);
}

/// `Tr ρ_A²` from an explicitly formed reduced density matrix.
fn purity_dense(amps: &[f64], n: usize, a: &[usize]) -> f64 {
    let b: Vec<usize> = (0..n).filter(|i| !a.contains(i)).collect();
    let pack = |s: usize, sites: &[usize]| sites.iter().enumerate().fold(0, |acc, (k, &i)| acc | (((s >> i) & 1) << k));
    let (da, db) = (1usize << a.len(), 1usize << b.len());
    let mut m = DMatrix::zeros(da, db);
    for (s, &x) in amps.iter().enumerate() {
        m[(pack(s, a), pack(s, &b))] = x;
    }
    let rho = &m * m.transpose();
    (&rho * &rho).trace()
}

#[test]
fn purity_matches_dense_reduced_density_matrix() {
    let geom = build_chain(8).unwrap();
    let psi = solve(&geom, 1.0, 0.9).unwrap();
    for a in [vec![0], vec![0, 1, 2], vec![1, 4, 6], vec![0, 1, 2, 3, 4, 5]] {
        let p = purity(&psi.amplitudes, 8, &a);
        assert!((p - purity_dense(&psi.amplitudes, 8, &a)).abs() < 1e-12);
    }
    assert_eq!(renyi2_exact(&psi, &[]), 0.0);
    let sa = renyi2_exact(&psi, &[0, 1, 2]);
    let sb = renyi2_exact(&psi, &[3, 4, 5, 6, 7]);
    assert!((sa - sb).abs() < 1e-10);
}

#[test]
fn magnetization_limits() {
    let geom = build_square(3).unwrap();
    let (mz, mx) = exact_observables(&solve(&geom, 1.0, 0.05).unwrap());
    assert!(mz > 0.99 && mx < 0.05);
    let (mz, mx) = exact_observables(&solve(&geom, 1.0, 1e4).unwrap());
    assert!(mx > 0.999_999);
    // uniform state: E|2 Bin(9, 1/2)/9 − 1|
    let binom = [1.0, 9.0, 36.0, 84.0, 126.0, 126.0, 84.0, 36.0, 9.0, 1.0];
    let expect: f64 = binom.iter().enumerate().map(|(k, c)| c * ((9.0 - 2.0 * k as f64) / 9.0).abs()).sum::<f64>() / 512.0;
    assert!((mz - expect).abs() < 1e-3);
}

#[test]
fn capacity_limit_enforced() {
    let geom = build_chain(21).unwrap();
    assert!(matches!(solve(&geom, 1.0, 1.0), Err(hyperqst::Error::Capacity { .. })));
}

//! Exact-diagonalization reference for the transverse-field Ising model.
//!
//! Ground states are computed by Lanczos iteration on a matrix-free
//! Hamiltonian and serve as the ground truth for every model diagnostic:
//! measurement sampling, magnetizations, second Rényi entropy and fidelity
//! susceptibility.

mod hamiltonian;
pub mod lanczos;

use rand::distr::{weighted::WeightedIndex, Distribution};
use serde::{Deserialize, Serialize};

pub use hamiltonian::{TfimHamiltonian, MAX_ED_SITES};
pub use lanczos::{lowest_eigenpair, Eigenpair, LanczosOptions};

use crate::error::{Error, Result};
use crate::lattice::{LatticeGeometry, LatticeKind};
use crate::rng::StreamSeed;
use crate::spins::{subsystem_mask, Spins};

/// Normalized, nonnegative ground-state amplitudes indexed by basis state.
#[derive(Clone, Debug)]
pub struct GroundStateVector {
    pub amplitudes: Vec<f64>,
    pub geometry: LatticeGeometry,
    pub g: f64,
    pub j_coupling: f64,
    pub energy: f64,
    /// Set for `g = 0`, where the ground space is exactly degenerate.
    pub degenerate: bool,
}

impl GroundStateVector {
    pub fn num_sites(&self) -> usize {
        self.geometry.num_sites()
    }

    /// Measurement distribution `q(s) = ψ(s)²`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a * a).collect()
    }
}

/// One projective measurement in the computational basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Measurement {
    pub spins: Spins,
    pub g: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportCount {
    pub g: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub kind: LatticeKind,
    pub side_length: usize,
    pub num_sites: usize,
    pub j_coupling: f64,
    pub seed: u64,
    pub supports: Vec<SupportCount>,
}

/// Measurement records pooled over all support points.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementDataset {
    pub meta: DatasetMeta,
    pub records: Vec<Measurement>,
}

impl MeasurementDataset {
    pub fn support_values(&self) -> Vec<f64> {
        self.meta.supports.iter().map(|s| s.g).collect()
    }

    pub fn geometry(&self) -> Result<LatticeGeometry> {
        LatticeGeometry::new(self.meta.kind, self.meta.side_length)
    }

    /// Checks the dataset invariants: every record sits on a declared
    /// support and fits in `num_sites` bits, and the per-support counts add up.
    pub fn validate(&self) -> Result<()> {
        let n = self.meta.num_sites;
        if n == 0 || n > Spins::MAX_SITES {
            return Err(Error::Data(format!("dataset declares {n} sites")));
        }
        let mut counts = vec![0usize; self.meta.supports.len()];
        for (k, r) in self.records.iter().enumerate() {
            let slot = self
                .meta
                .supports
                .iter()
                .position(|s| s.g == r.g)
                .ok_or_else(|| Error::Data(format!("record {k}: g = {} is not a support point", r.g)))?;
            counts[slot] += 1;
            if n < 64 && r.spins.0 >> n != 0 {
                return Err(Error::Data(format!("record {k}: configuration exceeds {n} sites")));
            }
        }
        for (s, c) in self.meta.supports.iter().zip(&counts) {
            if s.count != *c {
                return Err(Error::Data(format!(
                    "support g = {} declares {} records but has {}",
                    s.g, s.count, c
                )));
            }
        }
        Ok(())
    }
}

pub fn build_hamiltonian(geom: &LatticeGeometry, j: f64, g: f64) -> Result<TfimHamiltonian> {
    TfimHamiltonian::new(geom, j, g)
}

/// Ground state of `h`, sign-fixed to be nonnegative.
pub fn ground_state(h: &TfimHamiltonian, geom: &LatticeGeometry) -> Result<GroundStateVector> {
    ground_state_with(h, geom, LanczosOptions::default())
}

pub fn ground_state_with(
    h: &TfimHamiltonian,
    geom: &LatticeGeometry,
    opts: LanczosOptions,
) -> Result<GroundStateVector> {
    if geom.num_sites() != h.num_sites() {
        return Err(Error::Data("Hamiltonian and geometry disagree on site count".into()));
    }
    let dim = h.dim();
    // The uniform vector shares every lattice and spin-flip symmetry of the
    // ground state, so the Krylov space stays in the symmetric sector.
    let start = vec![1.0 / (dim as f64).sqrt(); dim];
    let pair = lowest_eigenpair(|x, y| h.apply(x, y), &start, opts)?;
    let mut amplitudes = pair.vector;
    let pivot = amplitudes
        .iter()
        .copied()
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(0.0);
    if pivot < 0.0 {
        amplitudes.iter_mut().for_each(|a| *a = -*a);
    }
    if let Some((k, &a)) = amplitudes.iter().enumerate().find(|(_, &a)| a < -1e-10) {
        return Err(Error::Numerical(format!(
            "ground state has negative amplitude {a:.3e} at basis state {k} (residual {:.3e})",
            pair.residual
        )));
    }
    amplitudes.iter_mut().for_each(|a| *a = a.max(0.0));
    let norm = amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt();
    amplitudes.iter_mut().for_each(|a| *a /= norm);
    Ok(GroundStateVector {
        amplitudes,
        geometry: geom.clone(),
        g: h.field(),
        j_coupling: h.coupling(),
        energy: pair.value,
        degenerate: h.field() == 0.0,
    })
}

/// Convenience wrapper: Hamiltonian plus ground state.
pub fn solve(geom: &LatticeGeometry, j: f64, g: f64) -> Result<GroundStateVector> {
    let h = build_hamiltonian(geom, j, g)?;
    ground_state(&h, geom)
}

/// `n` i.i.d. computational-basis measurements with `P(s) = ψ(s)²`.
pub fn sample_measurements(psi: &GroundStateVector, n: usize, seed: u64) -> Result<Vec<Spins>> {
    let weights = psi.probabilities();
    let dist = WeightedIndex::new(&weights)
        .map_err(|e| Error::Numerical(format!("invalid measurement distribution: {e}")))?;
    let mut rng = StreamSeed::new(seed).rng(0);
    Ok((0..n).map(|_| Spins::from_index(dist.sample(&mut rng))).collect())
}

/// `(⟨|m̂_z|⟩, ⟨σˣ⟩)` of a normalized state.
pub fn exact_observables(psi: &GroundStateVector) -> (f64, f64) {
    observables_from_amplitudes(&psi.amplitudes, psi.num_sites())
}

/// Longitudinal `Σ ψ(s)² |m(s)|` and transverse `(1/N) Σᵢ ⟨ψ|σˣᵢ|ψ⟩`
/// magnetizations of a normalized real vector.
pub fn observables_from_amplitudes(amps: &[f64], n: usize) -> (f64, f64) {
    let mut mz = 0.0;
    let mut mx = 0.0;
    for (s, &a) in amps.iter().enumerate() {
        mz += a * a * Spins::from_index(s).magnetization(n).abs();
        let mut flips = 0.0;
        for i in 0..n {
            flips += amps[s ^ (1 << i)];
        }
        mx += a * flips;
    }
    (mz, mx / n as f64)
}

/// Purity `Tr ρ_A²` of the normalized real state `amps` on `n` sites.
pub fn purity(amps: &[f64], n: usize, subsystem: &[usize]) -> f64 {
    let a_mask = subsystem_mask(subsystem);
    let na = a_mask.count_ones() as usize;
    if na == 0 || na == n {
        return amps.iter().map(|a| a * a).sum::<f64>().powi(2);
    }
    let nb = n - na;
    let (da, db) = (1usize << na, 1usize << nb);
    // M[a][b] with a, b the packed bits of A and of its complement
    let mut m = vec![0.0; da * db];
    for (s, &amp) in amps.iter().enumerate() {
        let (mut a, mut b, mut ka, mut kb) = (0usize, 0usize, 0, 0);
        for i in 0..n {
            let bit = (s >> i) & 1;
            if (a_mask >> i) & 1 == 1 {
                a |= bit << ka;
                ka += 1;
            } else {
                b |= bit << kb;
                kb += 1;
            }
        }
        m[a * db + b] = amp;
    }
    // Tr((MMᵀ)²) = ‖MMᵀ‖²_F; build the Gram matrix on the smaller side.
    let (rows, cols, row_major) = if da <= db { (da, db, true) } else { (db, da, false) };
    let at = |r: usize, c: usize| if row_major { m[r * db + c] } else { m[c * db + r] };
    let mut total = 0.0;
    for r1 in 0..rows {
        for r2 in r1..rows {
            let mut g = 0.0;
            for c in 0..cols {
                g += at(r1, c) * at(r2, c);
            }
            total += if r1 == r2 { g * g } else { 2.0 * g * g };
        }
    }
    total
}

/// Second Rényi entropy `−ln Tr ρ_A²`.
pub fn renyi2_exact(psi: &GroundStateVector, subsystem: &[usize]) -> f64 {
    renyi2_from_amplitudes(&psi.amplitudes, psi.num_sites(), subsystem)
}

pub fn renyi2_from_amplitudes(amps: &[f64], n: usize, subsystem: &[usize]) -> f64 {
    let mask = subsystem_mask(subsystem);
    let na = mask.count_ones() as usize;
    if na == 0 || na == n {
        return 0.0;
    }
    -purity(amps, n, subsystem).ln()
}

/// Fidelity susceptibility `⟨∂ψ|∂ψ⟩ − ⟨ψ|∂ψ⟩²` with a central-difference
/// tangent of step `delta`.
pub fn chi_f_exact(geom: &LatticeGeometry, j: f64, g: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Config(format!("finite-difference step must be positive, got {delta}")));
    }
    let center = solve(geom, j, g)?;
    let plus = solve(geom, j, g + delta)?;
    let minus = solve(geom, j, g - delta)?;
    Ok(chi_f_from_states(&center.amplitudes, &plus.amplitudes, &minus.amplitudes, delta))
}

pub(crate) fn chi_f_from_states(center: &[f64], plus: &[f64], minus: &[f64], delta: f64) -> f64 {
    let mut tt = 0.0;
    let mut pt = 0.0;
    for ((c, p), m) in center.iter().zip(plus).zip(minus) {
        let t = (p - m) / (2.0 * delta);
        tt += t * t;
        pt += c * t;
    }
    tt - pt * pt
}

/// `[0, 1, …, len−1]`, the contiguous subsystem used for entropy cuts.
pub fn contiguous(len: usize) -> Vec<usize> {
    (0..len).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_chain, build_square};

    #[test]
    fn diagonal_counts_bond_alignment() {
        let geom = build_chain(3).unwrap();
        let h = build_hamiltonian(&geom, 1.0, 0.0).unwrap();
        assert_eq!(h.diagonal()[0b000], -3.0);
        assert_eq!(h.diagonal()[0b111], -3.0);
        // one spin down on a triangle: one aligned bond, two anti-aligned
        assert_eq!(h.diagonal()[0b001], 1.0);
        assert!(h.is_diagonal());
        assert_eq!(h.row(0).len(), 1);
    }

    #[test]
    fn rows_have_at_most_n_plus_one_entries() {
        let geom = build_square(3).unwrap();
        let h = build_hamiltonian(&geom, 1.0, 0.7).unwrap();
        for k in [0, 17, 511] {
            let row = h.row(k);
            assert_eq!(row.len(), 10);
            assert!(row[1..].iter().all(|&(c, v)| v == -0.7 && (c ^ k).count_ones() == 1));
        }
    }

    #[test]
    fn capacity_guard() {
        let geom = build_chain(21).unwrap();
        assert!(matches!(
            build_hamiltonian(&geom, 1.0, 1.0),
            Err(Error::Capacity { limit: 20, got: 21, .. })
        ));
    }

    #[test]
    fn large_field_gives_uniform_state() {
        let geom = build_chain(3).unwrap();
        let psi = solve(&geom, 1.0, 50.0).unwrap();
        let u = 1.0 / 8f64.sqrt();
        assert!(psi.amplitudes.iter().all(|a| (a - u).abs() < 1e-2));
        let (mz, mx) = exact_observables(&psi);
        assert!(mx > 0.999);
        assert!(mz < 0.6);
    }

    #[test]
    fn zero_field_is_two_branch_cat() {
        let geom = build_chain(3).unwrap();
        let psi = solve(&geom, 1.0, 0.0).unwrap();
        assert!(psi.degenerate);
        for (k, &a) in psi.amplitudes.iter().enumerate() {
            if k != 0 && k != 7 {
                assert!(a.abs() < 1e-12, "amplitude {a} at {k}");
            }
        }
        let (mz, _) = exact_observables(&psi);
        assert!((mz - 1.0).abs() < 1e-12);
        let s2 = renyi2_exact(&psi, &[0]);
        assert!((s2 - std::f64::consts::LN_2).abs() < 1e-10);
    }

    #[test]
    fn basis_state_sampling_is_deterministic() {
        let geom = build_chain(3).unwrap();
        let mut amplitudes = vec![0.0; 8];
        amplitudes[5] = 1.0;
        let psi = GroundStateVector {
            amplitudes,
            geometry: geom,
            g: 1.0,
            j_coupling: 1.0,
            energy: 0.0,
            degenerate: false,
        };
        let s = sample_measurements(&psi, 100, 3).unwrap();
        assert!(s.iter().all(|x| x.index() == 5));
    }

    #[test]
    fn renyi_of_trivial_cuts_is_zero() {
        let geom = build_chain(6).unwrap();
        let psi = solve(&geom, 1.0, 1.0).unwrap();
        assert_eq!(renyi2_exact(&psi, &[]), 0.0);
        assert_eq!(renyi2_exact(&psi, &contiguous(6)), 0.0);
    }

    #[test]
    fn zero_delta_rejected() {
        let geom = build_chain(3).unwrap();
        assert!(chi_f_exact(&geom, 1.0, 1.0, 0.0).is_err());
    }
}

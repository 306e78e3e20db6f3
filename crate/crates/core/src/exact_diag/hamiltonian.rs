use crate::error::{Error, Result};
use crate::exec;
use crate::lattice::LatticeGeometry;

/// Largest system the dense-vector oracle accepts.
pub const MAX_ED_SITES: usize = 20;

/// Matrix-free `H = −J Σ σᶻᵢσᶻⱼ − g Σ σˣᵢ` in the computational basis.
///
/// The diagonal is stored explicitly; every off-diagonal entry equals `−g`
/// and connects basis states at Hamming distance one, so each row holds at
/// most `N + 1` nonzeros.
#[derive(Clone, Debug)]
pub struct TfimHamiltonian {
    num_sites: usize,
    coupling: f64,
    field: f64,
    diagonal: Vec<f64>,
}

impl TfimHamiltonian {
    pub fn new(geom: &LatticeGeometry, coupling: f64, field: f64) -> Result<Self> {
        let n = geom.num_sites();
        if n > MAX_ED_SITES {
            return Err(Error::Capacity {
                what: "exact diagonalization sites",
                limit: MAX_ED_SITES,
                got: n,
            });
        }
        let bonds = geom.bonds().to_vec();
        let dim = 1usize << n;
        let mut diagonal = vec![0.0; dim];
        exec::fill_chunks(&mut diagonal, 4096, |offset, out| {
            for (k, d) in out.iter_mut().enumerate() {
                let s = offset + k;
                let anti = bonds
                    .iter()
                    .filter(|&&(i, j)| ((s >> i) ^ (s >> j)) & 1 == 1)
                    .count() as f64;
                let aligned = bonds.len() as f64 - anti;
                *d = -coupling * (aligned - anti);
            }
        });
        Ok(TfimHamiltonian {
            num_sites: n,
            coupling,
            field,
            diagonal,
        })
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn field(&self) -> f64 {
        self.field
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn is_diagonal(&self) -> bool {
        self.field == 0.0
    }

    /// Nonzero entries `(column, value)` of row `row`, diagonal first.
    pub fn row(&self, row: usize) -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity(self.num_sites + 1);
        out.push((row, self.diagonal[row]));
        if self.field != 0.0 {
            for i in 0..self.num_sites {
                out.push((row ^ (1 << i), -self.field));
            }
        }
        out
    }

    /// `y = H x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim());
        debug_assert_eq!(y.len(), self.dim());
        let n = self.num_sites;
        let g = self.field;
        let diag = &self.diagonal;
        exec::fill_chunks(y, 4096, |offset, out| {
            for (k, yk) in out.iter_mut().enumerate() {
                let s = offset + k;
                let mut flip_sum = 0.0;
                for i in 0..n {
                    flip_sum += x[s ^ (1 << i)];
                }
                *yk = diag[s] * x[s] - g * flip_sum;
            }
        });
    }
}

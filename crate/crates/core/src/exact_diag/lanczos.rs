//! Lanczos iteration with full reorthogonalization for the lowest
//! eigenpair of a real symmetric operator.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions {
    pub max_iter: usize,
    /// Convergence threshold on the Ritz residual `βₖ |yₖ|`.
    pub tol: f64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            max_iter: 500,
            tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
    /// `‖Hx − λx‖₂` of the returned normalized vector.
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Lowest eigenpair of `apply` (an operator on vectors of length
/// `start.len()`), seeded with `start`.
pub fn lowest_eigenpair<F>(apply: F, start: &[f64], opts: LanczosOptions) -> Result<Eigenpair>
where
    F: Fn(&[f64], &mut [f64]),
{
    let dim = start.len();
    let norm0 = dot(start, start).sqrt();
    if dim == 0 || norm0 == 0.0 || !norm0.is_finite() {
        return Err(Error::Numerical("Lanczos start vector is zero".into()));
    }
    let max_iter = opts.max_iter.min(dim).max(1);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_iter);
    basis.push(start.iter().map(|x| x / norm0).collect());
    let mut alphas: Vec<f64> = Vec::with_capacity(max_iter);
    let mut betas: Vec<f64> = Vec::with_capacity(max_iter);
    let mut w = vec![0.0; dim];
    let mut last_residual = f64::INFINITY;

    for k in 0..max_iter {
        apply(&basis[k], &mut w);
        let alpha = dot(&w, &basis[k]);
        axpy(-alpha, &basis[k], &mut w);
        if k > 0 {
            axpy(-betas[k - 1], &basis[k - 1], &mut w);
        }
        // two classical Gram-Schmidt passes against the whole basis
        for _ in 0..2 {
            for v in &basis {
                let c = dot(&w, v);
                axpy(-c, v, &mut w);
            }
        }
        alphas.push(alpha);
        let beta = dot(&w, &w).sqrt();

        let (theta, last) = lowest_with_last_component(&alphas, &betas)?;
        last_residual = (beta * last).abs();
        let breakdown = beta <= 1e-13 * (alpha.abs() + betas.last().copied().unwrap_or(0.0)).max(1.0);
        if last_residual < opts.tol || breakdown || k + 1 == dim {
            let vector = ritz_vector(&basis, &alphas, &betas, theta)?;
            return finish(&apply, vector, k + 1);
        }
        betas.push(beta);
        basis.push(w.iter().map(|x| x / beta).collect());
    }
    Err(Error::Numerical(format!(
        "Lanczos did not converge in {max_iter} iterations (residual {last_residual:.3e})"
    )))
}

/// Normalizes the Ritz vector and reports its Rayleigh quotient and residual
/// against the full operator.
fn finish<F>(apply: &F, mut vector: Vec<f64>, iterations: usize) -> Result<Eigenpair>
where
    F: Fn(&[f64], &mut [f64]),
{
    let norm = dot(&vector, &vector).sqrt();
    vector.iter_mut().for_each(|x| *x /= norm);
    let mut hx = vec![0.0; vector.len()];
    apply(&vector, &mut hx);
    let value = dot(&vector, &hx);
    axpy(-value, &vector, &mut hx);
    let residual = dot(&hx, &hx).sqrt();
    if !value.is_finite() {
        return Err(Error::Numerical("Lanczos produced a non-finite eigenvalue".into()));
    }
    Ok(Eigenpair {
        value,
        vector,
        iterations,
        residual,
    })
}

fn ritz_vector(basis: &[Vec<f64>], alphas: &[f64], betas: &[f64], theta: f64) -> Result<Vec<f64>> {
    let k = alphas.len();
    let mut d = alphas.to_vec();
    let mut e = vec![0.0; k];
    e[..k - 1].copy_from_slice(&betas[..k - 1]);
    let mut z: Vec<Vec<f64>> = (0..k)
        .map(|r| (0..k).map(|c| if r == c { 1.0 } else { 0.0 }).collect())
        .collect();
    tridiagonal_ql(&mut d, &mut e, &mut z)?;
    let col = argmin_near(&d, theta);
    let mut out = vec![0.0; basis[0].len()];
    for (r, v) in basis.iter().take(k).enumerate() {
        axpy(z[r][col], v, &mut out);
    }
    Ok(out)
}

fn argmin_near(values: &[f64], target: f64) -> usize {
    values
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Lowest eigenvalue of the Lanczos tridiagonal and the last component of
/// its unit eigenvector.
fn lowest_with_last_component(alphas: &[f64], betas: &[f64]) -> Result<(f64, f64)> {
    let k = alphas.len();
    let mut d = alphas.to_vec();
    let mut e = vec![0.0; k];
    e[..k - 1].copy_from_slice(&betas[..k - 1]);
    let mut last_row = vec![vec![0.0; k]];
    last_row[0][k - 1] = 1.0;
    tridiagonal_ql(&mut d, &mut e, &mut last_row)?;
    let (i, &theta) = d
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty tridiagonal");
    Ok((theta, last_row[0][i]))
}

/// Implicit QL on a symmetric tridiagonal matrix with diagonal `d` and
/// couplings `e[i] = T[i][i+1]` (`e[n−1]` ignored). On return `d` holds the
/// eigenvalues; each row of `z` is multiplied by the eigenvector matrix, so
/// passing identity rows yields the corresponding eigenvector components.
pub fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], z: &mut [Vec<f64>]) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Numerical("tridiagonal QL failed to converge".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for row in z.iter_mut() {
                    let f = row[i + 1];
                    row[i + 1] = s * row[i] + c * f;
                    row[i] = c * row[i] - s * f;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ql_matches_known_spectrum() {
        // T = tridiag(-1, 2, -1) of size n has eigenvalues 2 - 2cos(kπ/(n+1)).
        let n = 12;
        let mut d = vec![2.0; n];
        let mut e = vec![-1.0; n];
        let mut z: Vec<Vec<f64>> = (0..n)
            .map(|r| (0..n).map(|c| (r == c) as u8 as f64).collect())
            .collect();
        tridiagonal_ql(&mut d, &mut e, &mut z).unwrap();
        let mut got = d.clone();
        got.sort_by(f64::total_cmp);
        for (k, v) in got.iter().enumerate() {
            let want = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v - want).abs() < 1e-12, "{v} vs {want}");
        }
        // columns of z are orthonormal eigenvectors
        for a in 0..n {
            for b in 0..n {
                let ip: f64 = (0..n).map(|r| z[r][a] * z[r][b]).sum();
                assert!((ip - (a == b) as u8 as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lanczos_on_diagonal_operator() {
        let diag: Vec<f64> = (0..50).map(|i| (i as f64 - 10.0).powi(2)).collect();
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..x.len() {
                y[i] = diag[i] * x[i];
            }
        };
        let start = vec![1.0; 50];
        let pair = lowest_eigenpair(apply, &start, LanczosOptions::default()).unwrap();
        assert!(pair.value.abs() < 1e-10);
        assert!((pair.vector[10].abs() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn zero_start_rejected() {
        let r = lowest_eigenpair(|x, y| y.copy_from_slice(x), &[0.0; 4], LanczosOptions::default());
        assert!(matches!(r, Err(Error::Numerical(_))));
    }
}

//! Ground state of a sparse Hermitian matrix by Lanczos iteration with full
//! reorthogonalization.
//!
//! Every new Krylov vector is orthogonalized twice (classical Gram-Schmidt)
//! against the whole stored basis, so the tridiagonal projection stays
//! faithful and no ghost eigenvalues appear. Convergence is declared on the
//! true residual `|H x - θ x|`, recomputed from the assembled Ritz vector.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::random::{gaussian_vector, normalize, RngSeed};
use super::sparse::SparseHermitian;
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const MAX_ITER_CAP: usize = 5000;

/// `5 * dim`, capped at [`MAX_ITER_CAP`].
pub fn default_max_iter(dim: usize) -> usize {
    (5 * dim).clamp(1, MAX_ITER_CAP)
}

/// Lowest eigenpair returned by [`lanczos_ground`].
#[derive(Debug, Clone)]
pub struct GroundPair {
    pub eigenvalue: f64,
    pub eigenvector: Vec<Complex64>,
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn axpy(alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

fn lowest_ritz(alphas: &[f64], betas: &[f64]) -> (f64, Vec<f64>) {
    let k = alphas.len();
    let t = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            alphas[i]
        } else if i + 1 == j {
            betas[i]
        } else if j + 1 == i {
            betas[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let (imin, theta) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("tridiagonal matrix is non-empty");
    (
        theta,
        eig.eigenvectors.column(imin).iter().copied().collect(),
    )
}

fn residual_norm(h: &SparseHermitian, x: &[Complex64], theta: f64) -> f64 {
    let hx = h.matvec(x);
    hx.iter()
        .zip(x)
        .map(|(a, b)| (a - b * theta).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Smallest eigenvalue and eigenvector of `h`.
///
/// Succeeds once `|H v - λ v|_2 <= tol * max(1, |λ|)`.
pub fn lanczos_ground(
    h: &SparseHermitian,
    tol: f64,
    max_iter: usize,
    seed: RngSeed,
) -> Result<GroundPair> {
    let dim = h.dim();
    if dim == 0 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: 0,
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if dim == 1 {
        let v = h.as_matrix().get(0, 0).re;
        return Ok(GroundPair {
            eigenvalue: v,
            eigenvector: vec![Complex64::new(1.0, 0.0)],
            iterations: 1,
            residual: 0.0,
        });
    }

    let mut rng = seed.rng();
    let mut v = gaussian_vector(&mut rng, dim);
    normalize(&mut v);

    let mut basis: Vec<Vec<Complex64>> = vec![v];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![Complex64::new(0.0, 0.0); dim];
    let max_iter = max_iter.max(1);

    for iter in 1..=max_iter {
        let j = basis.len() - 1;
        h.matvec_into(&basis[j], &mut w);
        let alpha = dot(&basis[j], &w).re;
        alphas.push(alpha);

        for _pass in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                axpy(-c, q, &mut w);
            }
        }
        let beta = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();

        let krylov_full = basis.len() == dim;
        let check = iter <= 64 || iter % 4 == 0 || krylov_full || iter == max_iter;
        let scale = alphas.iter().fold(beta, |a, x| a.max(x.abs()));
        let breakdown = beta <= 1e-13 * scale.max(1.0);

        if check || breakdown {
            let (theta, y) = lowest_ritz(&alphas, &betas);
            let estimate = beta * y.last().unwrap().abs();
            let target = tol * theta.abs().max(1.0);
            if estimate <= target || breakdown || krylov_full {
                let mut x = vec![Complex64::new(0.0, 0.0); dim];
                for (q, &c) in basis.iter().zip(&y) {
                    axpy(Complex64::new(c, 0.0), q, &mut x);
                }
                normalize(&mut x);
                let residual = residual_norm(h, &x, theta);
                if residual <= target {
                    return Ok(GroundPair {
                        eigenvalue: theta,
                        eigenvector: x,
                        iterations: iter,
                        residual,
                    });
                }
                if breakdown || krylov_full {
                    return Err(Error::NoConvergence(iter));
                }
            }
        }

        betas.push(beta);
        let next: Vec<Complex64> = w.iter().map(|z| z / beta).collect();
        basis.push(next);
    }
    Err(Error::NoConvergence(max_iter))
}

/// [`lanczos_ground`] with the default tolerance and iteration budget.
pub fn lanczos_ground_default(h: &SparseHermitian, seed: RngSeed) -> Result<GroundPair> {
    lanczos_ground(h, DEFAULT_TOL, default_max_iter(h.dim()), seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::dense::dense_eigenvalues;
    use crate::numerics::random::random_hermitian;
    use crate::numerics::sparse::SparseMatrix;

    #[test]
    fn diagonal_one_site_hamiltonian() {
        // J = 0, mu = 0.5, U = 1, n_max = 3
        let (mu, u) = (0.5, 1.0);
        let diag: Vec<f64> = (0..4)
            .map(|n| -mu * n as f64 + 0.5 * u * (n * (n as i32 - 1).max(0)) as f64)
            .collect();
        assert_eq!(diag, vec![0.0, -0.5, 0.0, 1.5]);
        let h = SparseHermitian::from_diagonal(&diag);
        let g = lanczos_ground_default(&h, RngSeed(1)).unwrap();
        assert!((g.eigenvalue + 0.5).abs() < 1e-12);
        assert!((g.eigenvector[1].norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn one_by_one_zero() {
        let h = SparseHermitian::from_diagonal(&[0.0]);
        let g = lanczos_ground_default(&h, RngSeed(1)).unwrap();
        assert_eq!(g.eigenvalue, 0.0);
    }

    #[test]
    fn agrees_with_dense_on_random_matrices() {
        for (dim, seed) in [(2usize, 1u64), (7, 2), (40, 3), (128, 4)] {
            let d = random_hermitian(dim, RngSeed(seed));
            let exact = dense_eigenvalues(&d).unwrap()[0];
            let h = SparseHermitian::new(SparseMatrix::from_dense(d.matrix()).unwrap()).unwrap();
            let g = lanczos_ground_default(&h, RngSeed(seed + 100)).unwrap();
            assert!(
                (g.eigenvalue - exact).abs() <= 1e-8 * (1.0 + exact.abs()),
                "dim {dim}"
            );
            assert!(g.residual <= 1e-10 * g.eigenvalue.abs().max(1.0));
        }
    }

    #[test]
    fn rejects_bad_tolerance() {
        let h = SparseHermitian::from_diagonal(&[1.0, 2.0]);
        assert!(lanczos_ground(&h, 0.0, 10, RngSeed(0)).is_err());
    }

    #[test]
    fn reports_no_convergence_when_budget_is_too_small() {
        let d = random_hermitian(60, RngSeed(9));
        let h = SparseHermitian::new(SparseMatrix::from_dense(d.matrix()).unwrap()).unwrap();
        assert_eq!(
            lanczos_ground(&h, 1e-12, 3, RngSeed(0)).unwrap_err(),
            Error::NoConvergence(3)
        );
    }
}

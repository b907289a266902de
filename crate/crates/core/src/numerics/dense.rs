use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest dimension accepted by [`dense_eigs`].
pub const DENSE_EIGS_MAX_DIM: usize = 4096;

/// Dense complex Hermitian matrix (column-major storage).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseHermitian(DMatrix<Complex64>);

impl DenseHermitian {
    pub const HERMITIAN_TOL: f64 = 1e-12;

    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let defect = hermiticity_defect(&m);
        if defect > Self::HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "matrix is not Hermitian (defect {defect:e})"
            )));
        }
        Ok(Self(m))
    }

    /// Replace `m` by `(m + m†)/2`, removing round-off asymmetry.
    pub fn symmetrized(m: DMatrix<Complex64>) -> Result<Self> {
        let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        Self::new(h)
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(diag[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.0
    }
}

/// Largest `|A_ij - conj(A_ji)|`.
pub fn hermiticity_defect(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigen-decomposition with ascending eigenvalues; column `i` of `vectors`
/// belongs to `values[i]`.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
}

impl Eigen {
    pub fn ground_vector(&self) -> Vec<Complex64> {
        self.vectors.column(0).iter().copied().collect()
    }
}

/// Full eigen-decomposition of a dense Hermitian matrix.
pub fn dense_eigs(h: &DenseHermitian) -> Result<Eigen> {
    let n = h.dim();
    if n > DENSE_EIGS_MAX_DIM {
        return Err(Error::DimensionGuard {
            dim: n as u128,
            limit: DENSE_EIGS_MAX_DIM as u128,
        });
    }
    let eig = SymmetricEigen::new(h.0.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Eigen { values, vectors })
}

/// Eigenvalues only, ascending.
pub fn dense_eigenvalues(h: &DenseHermitian) -> Result<Vec<f64>> {
    let n = h.dim();
    if n > DENSE_EIGS_MAX_DIM {
        return Err(Error::DimensionGuard {
            dim: n as u128,
            limit: DENSE_EIGS_MAX_DIM as u128,
        });
    }
    let mut values: Vec<f64> =
        h.0.clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Schatten-1 norm of a Hermitian matrix: sum of absolute eigenvalues.
pub fn trace_norm(h: &DenseHermitian) -> Result<f64> {
    Ok(dense_eigenvalues(h)?.iter().map(|l| l.abs()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::random::{random_hermitian, RngSeed};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn pauli_x_spectrum() {
        let h = DenseHermitian::new(DMatrix::from_row_slice(
            2,
            2,
            &[c(0.0), c(1.0), c(1.0), c(0.0)],
        ))
        .unwrap();
        let e = dense_eigs(&h).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn diagonal_is_sorted_with_unit_vectors() {
        let h = DenseHermitian::from_real_diagonal(&[3.0, 1.0, 2.0]);
        let e = dense_eigs(&h).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
        for (col, row) in [(0, 1), (1, 2), (2, 0)] {
            assert!((e.vectors[(row, col)].norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn random_reconstruction_and_orthonormality() {
        let h = random_hermitian(8, RngSeed(11));
        let e = dense_eigs(&h).unwrap();
        let lambda = DMatrix::from_fn(8, 8, |i, j| if i == j { c(e.values[i]) } else { c(0.0) });
        let rec = &e.vectors * lambda * e.vectors.adjoint();
        assert!((rec - h.matrix()).norm() <= 1e-9);
        let gram = e.vectors.adjoint() * &e.vectors;
        assert!((gram - DMatrix::identity(8, 8)).norm() <= 1e-10);
        let max_abs = e.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for i in 0..8 {
            let v = e.vectors.column(i);
            let r = (h.matrix() * v - v * c(e.values[i])).norm();
            assert!(r <= 1e-10 * 8.0 * max_abs);
        }
    }

    #[test]
    fn non_hermitian_input_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(2.0), c(0.0)]);
        assert!(DenseHermitian::new(m).is_err());
    }

    #[test]
    fn trace_norm_of_indefinite_diagonal() {
        let h = DenseHermitian::from_real_diagonal(&[-0.5, 0.25, 1.0]);
        assert!((trace_norm(&h).unwrap() - 1.75).abs() < 1e-14);
    }
}

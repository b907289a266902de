//! Compressed sparse row storage for complex matrices.
//!
//! Hermitian matrices are stored in full (both triangles); the
//! [`SparseHermitian`] wrapper only adds the checked invariant.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Rows above this size are processed in parallel during matvec.
const PAR_MATVEC_MIN_DIM: usize = 1 << 14;

/// General complex CSR matrix (square).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<Complex64>,
}

impl SparseMatrix {
    /// Assemble from (row, col, value) triplets. Duplicates are summed and
    /// entries that cancel to exactly zero are dropped.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, Complex64)>) -> Result<Self> {
        for &(i, j, _) in &triplets {
            if i >= dim || j >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: i.max(j) + 1,
                });
            }
        }
        triplets.sort_unstable_by_key(|&(i, j, _)| (i, j));

        let mut merged: Vec<(usize, usize, Complex64)> = Vec::with_capacity(triplets.len());
        for (i, j, v) in triplets {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        merged.retain(|&(_, _, v)| v != Complex64::new(0.0, 0.0));

        let mut row_offsets = vec![0usize; dim + 1];
        let mut col_indices = Vec::with_capacity(merged.len());
        let mut values = Vec::with_capacity(merged.len());
        for (i, j, v) in merged {
            row_offsets[i + 1] += 1;
            col_indices.push(j);
            values.push(v);
        }
        for r in 0..dim {
            row_offsets[r + 1] += row_offsets[r];
        }
        Ok(Self {
            dim,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            row_offsets: vec![0; dim + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(&vec![1.0; dim])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let triplets = diag
            .iter()
            .enumerate()
            .map(|(i, &d)| (i, i, Complex64::new(d, 0.0)))
            .collect();
        Self::from_triplets(diag.len(), triplets).expect("diagonal indices are in range")
    }

    pub fn from_dense(m: &DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let mut triplets = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != Complex64::new(0.0, 0.0) {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), triplets)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Stored entries of row `i` as (column, value) pairs.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        match self.col_indices[range.clone()].binary_search(&j) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    fn row_dot(&self, i: usize, x: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in self.row_offsets[i]..self.row_offsets[i + 1] {
            acc += self.values[k] * x[self.col_indices[k]];
        }
        acc
    }

    /// `y = A x`. Each row is reduced sequentially, so the result does not
    /// depend on how rows are distributed over threads.
    pub fn matvec_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.dim, "matvec input length");
        assert_eq!(y.len(), self.dim, "matvec output length");
        if self.dim >= PAR_MATVEC_MIN_DIM {
            y.par_iter_mut()
                .enumerate()
                .for_each(|(i, yi)| *yi = self.row_dot(i, x));
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = self.row_dot(i, x);
            }
        }
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.dim];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn adjoint(&self) -> Self {
        let triplets = (0..self.dim)
            .flat_map(|i| self.row(i).map(move |(j, v)| (j, i, v.conj())))
            .collect();
        Self::from_triplets(self.dim, triplets).expect("adjoint keeps indices in range")
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// Sum of scaled matrices of equal dimension.
    pub fn linear_combination(terms: &[(Complex64, &SparseMatrix)]) -> Result<Self> {
        let dim = terms.first().map(|(_, m)| m.dim).unwrap_or(0);
        let mut triplets = Vec::new();
        for (c, m) in terms {
            if m.dim != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: m.dim,
                });
            }
            for i in 0..m.dim {
                triplets.extend(m.row(i).map(|(j, v)| (i, j, *c * v)));
            }
        }
        Self::from_triplets(dim, triplets)
    }

    /// Kronecker product `self ⊗ other`, `self` acting on the slower index.
    pub fn kron(&self, other: &SparseMatrix) -> Self {
        let dim = self.dim * other.dim;
        let mut triplets = Vec::with_capacity(self.nnz() * other.nnz());
        for i in 0..self.dim {
            for (j, a) in self.row(i) {
                for k in 0..other.dim {
                    for (l, b) in other.row(k) {
                        triplets.push((i * other.dim + k, j * other.dim + l, a * b));
                    }
                }
            }
        }
        Self::from_triplets(dim, triplets).expect("kron indices are in range")
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Largest `|A_ij - conj(A_ji)|` over stored entries.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn row_offsets_valid(&self) -> bool {
        self.row_offsets.len() == self.dim + 1
            && self.row_offsets.windows(2).all(|w| w[0] <= w[1])
            && *self.row_offsets.last().unwrap() == self.values.len()
    }
}

/// Hermitian CSR matrix. Both triangles are stored explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHermitian(SparseMatrix);

impl SparseHermitian {
    /// Absolute tolerance on `|A_ij - conj(A_ji)|` accepted by [`SparseHermitian::new`].
    pub const HERMITIAN_TOL: f64 = 1e-12;

    pub fn new(m: SparseMatrix) -> Result<Self> {
        let scale = m.values.iter().fold(1.0f64, |acc, v| acc.max(v.norm()));
        let defect = m.hermiticity_defect();
        if defect > Self::HERMITIAN_TOL * scale || !m.row_offsets_valid() {
            return Err(Error::InvalidState(format!(
                "matrix is not Hermitian (defect {defect:e})"
            )));
        }
        Ok(Self(m))
    }

    /// Wrap a matrix that is Hermitian by construction; checked in debug builds.
    pub fn new_unchecked(m: SparseMatrix) -> Self {
        debug_assert!(m.row_offsets_valid());
        debug_assert!(
            m.hermiticity_defect() <= 1e-10 * m.values.iter().fold(1.0f64, |a, v| a.max(v.norm()))
        );
        Self(m)
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self(SparseMatrix::from_diagonal(diag))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn as_matrix(&self) -> &SparseMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> SparseMatrix {
        self.0
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.0.matvec(x)
    }

    pub fn matvec_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        self.0.matvec_into(x, y)
    }

    /// `<x, H x>`, real for Hermitian `H`.
    pub fn expectation(&self, x: &[Complex64]) -> f64 {
        let hx = self.0.matvec(x);
        x.iter().zip(&hx).map(|(a, b)| (a.conj() * b).re).sum()
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        self.0.to_dense()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0.get(i, i).re).collect()
    }

    /// Real linear combination of Hermitian matrices.
    pub fn linear_combination(terms: &[(f64, &SparseHermitian)]) -> Result<Self> {
        let terms: Vec<_> = terms
            .iter()
            .map(|(c, m)| (Complex64::new(*c, 0.0), &m.0))
            .collect();
        Ok(Self(SparseMatrix::linear_combination(&terms)?))
    }
}

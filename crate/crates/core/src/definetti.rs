//! Finite-dimensional de Finetti constructions for states with one
//! distinguished factor `H_0 = C^{core_dim}` and `N` bosonic slots
//! `C^{m+1}`.
//!
//! States are dense density matrices in the full product basis; the index of
//! `|c> ⊗ |x_1 … x_N>` is `c · d^N + Σ_i x_i d^{N-i}` with `d = m + 1`, so slot
//! 1 is the most significant shell digit. The `(1, k)` reduced density matrix
//! keeps the core and slots `1..k`.
//!
//! Haar integrals are evaluated exactly through the moments
//!
//! ```text
//! ∫ u_I ū_J dh(u) = δ_{type(I) = type(J)} · Π_ℓ n_ℓ! · m! / (K + m)!
//! ```
//!
//! where `I, J` are index strings of length `K` and `type(I) = (n_0, …, n_m)`
//! counts occurrences of each level.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::HashMap;

use crate::coreshell::binomial;
use crate::error::{Error, Result};
use crate::numerics::dense::{hermiticity_defect, DENSE_EIGS_MAX_DIM};
use crate::numerics::random::{gaussian_vector, haar_point, normalize};
use crate::numerics::{dense_eigenvalues, trace_norm, DenseHermitian, RngSeed, SparseMatrix};

/// Largest `(m+1)^N` accepted by [`symmetrizer`].
pub const SYMMETRIZER_MAX_DIM: usize = 1 << 16;
/// Largest number of slots accepted by [`symmetrizer`].
pub const SYMMETRIZER_MAX_SLOTS: usize = 8;
/// Largest number of stored entries of the symmetrizer.
pub const SYMMETRIZER_MAX_NNZ: usize = 20_000_000;
/// Largest `dim² · samples` for a Monte-Carlo average.
pub const MONTE_CARLO_BUDGET: f64 = 2e10;
/// Fixed number of independent Monte-Carlo partitions.
const MC_PARTITIONS: u64 = 16;

pub const TRACE_TOL: f64 = 1e-12;
pub const POSITIVITY_TOL: f64 = 1e-10;
pub const SYMMETRY_TOL: f64 = 1e-10;
pub const UNIT_TOL: f64 = 1e-12;
/// Slack added to every theoretical bound.
pub const BOUND_SLACK: f64 = 1e-9;

fn c64(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn ipow(d: usize, n: usize) -> Result<usize> {
    d.checked_pow(n as u32)
        .ok_or_else(|| Error::DimensionGuard {
            dim: u128::MAX,
            limit: usize::MAX as u128,
        })
}

/// Base-`d` digits of `index`, most significant first.
fn digits(mut index: usize, d: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for slot in (0..len).rev() {
        out[slot] = index % d;
        index /= d;
    }
    out
}

fn from_digits(digits: &[usize], d: usize) -> usize {
    digits.iter().fold(0, |acc, &x| acc * d + x)
}

/// Occupation counts of the levels `0..d` in an index string.
fn index_type(index: usize, d: usize, len: usize) -> Vec<usize> {
    let mut t = vec![0; d];
    for x in digits(index, d, len) {
        t[x] += 1;
    }
    t
}

/// `∫ u_I ū_J dh` over the unit sphere of `C^{m+1}` when `type(I) = type(J) = n`.
pub fn haar_moment(n: &[usize], m: usize) -> f64 {
    let k: usize = n.iter().sum();
    let num: f64 = n
        .iter()
        .map(|&c| (1..=c).map(|i| i as f64).product::<f64>())
        .product();
    let den: f64 = (1..=k).map(|i| (m + i) as f64).product();
    num / den
}

/// Exact `C(N + m, m)`.
pub fn sym_dim(m: usize, n: usize) -> u128 {
    binomial((n + m) as u64, m as u64).expect("small binomial")
}

/// The projector `Π_N` onto the symmetric subspace of `(C^{m+1})^{⊗N}`.
#[derive(Debug, Clone)]
pub struct Symmetrizer {
    pub m: usize,
    pub n: usize,
    pub matrix: SparseMatrix,
}

impl Symmetrizer {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// `C(N + m, m)`.
    pub fn rank(&self) -> u128 {
        sym_dim(self.m, self.n)
    }

    /// `|Π² - Π|_F`.
    pub fn idempotency_defect(&self) -> f64 {
        let dense = self.matrix.to_dense();
        (&dense * &dense - &dense).norm()
    }
}

/// Build `Π_N` from `Π_N = (1/N) Σ_{j=1..N} T_{jN} (Π_{N-1} ⊗ 1)`, where
/// `T_{jN}` swaps slots `j` and `N` (`T_{NN} = 1`).
pub fn symmetrizer(m: usize, n: usize) -> Result<Symmetrizer> {
    let d = m + 1;
    if n == 0 {
        return Err(Error::InvalidSize("symmetrizer needs N >= 1".into()));
    }
    let dim = d
        .checked_pow(n as u32)
        .filter(|&x| x <= SYMMETRIZER_MAX_DIM);
    if n > SYMMETRIZER_MAX_SLOTS || dim.is_none() {
        return Err(Error::DimensionGuard {
            dim: (d as u128).saturating_pow(n as u32),
            limit: SYMMETRIZER_MAX_DIM as u128,
        });
    }
    let mut pi = SparseMatrix::identity(d);
    let id = SparseMatrix::identity(d);
    for slots in 2..=n {
        let b = pi.kron(&id);
        let full = b.dim();
        let mut triplets = Vec::with_capacity(b.nnz() * slots);
        let w = c64(1.0 / slots as f64);
        for row in 0..full {
            let digs = digits(row, d, slots);
            for j in 0..slots {
                let mut swapped = digs.clone();
                swapped.swap(j, slots - 1);
                let target = from_digits(&swapped, d);
                for (col, v) in b.row(row) {
                    triplets.push((target, col, v * w));
                }
            }
            if triplets.len() > SYMMETRIZER_MAX_NNZ * 2 {
                return Err(Error::DimensionGuard {
                    dim: triplets.len() as u128,
                    limit: SYMMETRIZER_MAX_NNZ as u128,
                });
            }
        }
        pi = SparseMatrix::from_triplets(full, triplets)?;
        if pi.nnz() > SYMMETRIZER_MAX_NNZ {
            return Err(Error::DimensionGuard {
                dim: pi.nnz() as u128,
                limit: SYMMETRIZER_MAX_NNZ as u128,
            });
        }
    }
    Ok(Symmetrizer { m, n, matrix: pi })
}

/// Density matrix on `C^{core_dim} ⊗ (C^{m+1})^{⊗N}`, symmetric in the shell.
#[derive(Debug, Clone, PartialEq)]
pub struct BosonicState {
    core_dim: usize,
    m: usize,
    n: usize,
    rho: DMatrix<Complex64>,
}

fn check_shape(core_dim: usize, m: usize, n: usize) -> Result<usize> {
    if core_dim == 0 {
        return Err(Error::InvalidSize("core dimension must be positive".into()));
    }
    let dim = ipow(m + 1, n)?
        .checked_mul(core_dim)
        .filter(|&x| x <= DENSE_EIGS_MAX_DIM);
    dim.ok_or(Error::DimensionGuard {
        dim: (core_dim as u128).saturating_mul(((m + 1) as u128).saturating_pow(n as u32)),
        limit: DENSE_EIGS_MAX_DIM as u128,
    })
}

/// Apply the permutation of shell slots `perm` (new slot `i` holds old slot
/// `perm[i]`) to a basis index.
fn permute_index(index: usize, shell: usize, d: usize, perm: &[usize]) -> usize {
    let (c, x) = (index / shell, index % shell);
    let digs = digits(x, d, perm.len());
    let moved: Vec<usize> = perm.iter().map(|&p| digs[p]).collect();
    c * shell + from_digits(&moved, d)
}

impl BosonicState {
    /// Validate Hermiticity, trace, positivity and shell symmetry.
    pub fn new(core_dim: usize, m: usize, n: usize, rho: DMatrix<Complex64>) -> Result<Self> {
        let dim = check_shape(core_dim, m, n)?;
        if rho.nrows() != dim || rho.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: rho.nrows(),
            });
        }
        let state = Self {
            core_dim,
            m,
            n,
            rho,
        };
        state.validate()?;
        Ok(state)
    }

    fn unchecked(core_dim: usize, m: usize, n: usize, rho: DMatrix<Complex64>) -> Self {
        Self {
            core_dim,
            m,
            n,
            rho,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_structure()?;
        let min = self.min_eigenvalue()?;
        if min < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(())
    }

    /// For mixtures of rank-one projectors, positive by construction.
    fn from_projector_mixture(
        core_dim: usize,
        m: usize,
        n: usize,
        rho: DMatrix<Complex64>,
    ) -> Result<Self> {
        let state = Self::unchecked(core_dim, m, n, rho);
        state.validate_structure()?;
        Ok(state)
    }

    /// Hermiticity, unit trace and shell symmetry.
    fn validate_structure(&self) -> Result<()> {
        let herm = hermiticity_defect(&self.rho);
        if herm > 1e-12 * self.rho.iter().map(|z| z.norm()).fold(1.0, f64::max) {
            return Err(Error::InvalidState(format!(
                "not Hermitian (defect {herm:.3e})"
            )));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let asym = self.symmetry_defect();
        if asym > SYMMETRY_TOL {
            return Err(Error::InvalidState(format!(
                "not shell symmetric (defect {asym:.3e})"
            )));
        }
        Ok(())
    }

    pub fn core_dim(&self) -> usize {
        self.core_dim
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of shell slots `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn local_dim(&self) -> usize {
        self.m + 1
    }

    pub fn shell_dim(&self) -> usize {
        self.local_dim().pow(self.n as u32)
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn rho(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(dense_eigenvalues(&DenseHermitian::symmetrized(self.rho.clone())?)?[0])
    }

    /// Largest `|U ρ U† - ρ|_F` over adjacent slot transpositions `U`.
    pub fn symmetry_defect(&self) -> f64 {
        let (d, shell) = (self.local_dim(), self.shell_dim());
        (0..self.n.saturating_sub(1))
            .map(|i| {
                let mut perm: Vec<usize> = (0..self.n).collect();
                perm.swap(i, i + 1);
                let map: Vec<usize> = (0..self.dim())
                    .map(|x| permute_index(x, shell, d, &perm))
                    .collect();
                let moved =
                    DMatrix::from_fn(self.dim(), self.dim(), |r, c| self.rho[(map[r], map[c])]);
                (moved - &self.rho).norm()
            })
            .fold(0.0, f64::max)
    }

    /// `|ψ><ψ|` for a normalized `ψ` that must already be shell symmetric.
    pub fn pure(core_dim: usize, m: usize, n: usize, psi: &[Complex64]) -> Result<Self> {
        let dim = check_shape(core_dim, m, n)?;
        if psi.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: psi.len(),
            });
        }
        let v = DMatrix::from_column_slice(dim, 1, psi);
        Self::from_projector_mixture(core_dim, m, n, &v * v.adjoint())
    }

    /// `ζ_0 ⊗ p_v^{⊗N}`.
    pub fn product(zeta0: &DMatrix<Complex64>, v: &[Complex64], n: usize) -> Result<Self> {
        let m = v
            .len()
            .checked_sub(1)
            .ok_or(Error::InvalidSize("empty vector".into()))?;
        check_unit(v)?;
        let mut w = DMatrix::from_element(1, 1, c64(1.0));
        let col = DMatrix::from_column_slice(v.len(), 1, v);
        for _ in 0..n {
            w = w.kronecker(&col);
        }
        Self::new(zeta0.nrows(), m, n, zeta0.kronecker(&(&w * w.adjoint())))
    }

    /// `(1 ⊗ Π_N) / (core_dim · C(N + m, m))`.
    pub fn maximally_mixed(core_dim: usize, m: usize, n: usize) -> Result<Self> {
        check_shape(core_dim, m, n)?;
        let pi = symmetrizer(m, n)?.matrix.to_dense();
        let id = DMatrix::<Complex64>::identity(core_dim, core_dim);
        let scale = 1.0 / (core_dim as f64 * sym_dim(m, n) as f64);
        Self::new(core_dim, m, n, id.kronecker(&pi) * c64(scale))
    }

    /// Random pure state: a Gaussian vector projected by `1 ⊗ Π_N`.
    pub fn random_pure(core_dim: usize, m: usize, n: usize, seed: RngSeed) -> Result<Self> {
        let dim = check_shape(core_dim, m, n)?;
        let pi = symmetrizer(m, n)?;
        let mut rng = seed.rng();
        let raw = gaussian_vector(&mut rng, dim);
        let mut psi = project_shell(&pi, &raw, core_dim);
        normalize(&mut psi);
        Self::pure(core_dim, m, n, &psi)
    }

    /// Random mixture of `rank` random pure states.
    pub fn random_mixed(
        core_dim: usize,
        m: usize,
        n: usize,
        rank: usize,
        seed: RngSeed,
    ) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidParameter(
                "mixture rank must be positive".into(),
            ));
        }
        let dim = check_shape(core_dim, m, n)?;
        let pi = symmetrizer(m, n)?;
        let mut rng = seed.rng();
        let weights: Vec<f64> = (0..rank)
            .map(|_| rand::Rng::random_range(&mut rng, 0.05..1.0))
            .collect();
        let total: f64 = weights.iter().sum();
        let mut rho = DMatrix::<Complex64>::zeros(dim, dim);
        for w in weights {
            let mut psi = project_shell(&pi, &gaussian_vector(&mut rng, dim), core_dim);
            normalize(&mut psi);
            let v = DMatrix::from_column_slice(dim, 1, &psi);
            rho += &v * v.adjoint() * c64(w / total);
        }
        let rho = (&rho + rho.adjoint()) * c64(0.5);
        Self::from_projector_mixture(core_dim, m, n, rho)
    }
}

/// `(1 ⊗ Π) ψ`.
fn project_shell(pi: &Symmetrizer, psi: &[Complex64], core_dim: usize) -> Vec<Complex64> {
    let shell = pi.dim();
    (0..core_dim)
        .flat_map(|c| pi.matrix.matvec(&psi[c * shell..(c + 1) * shell]))
        .collect()
}

fn check_unit(u: &[Complex64]) -> Result<()> {
    let norm = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::NotUnit(norm));
    }
    Ok(())
}

/// `u^{⊗n}` as a vector of length `(m+1)^n`.
pub fn tensor_power(u: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![c64(1.0)];
    for _ in 0..n {
        out = out
            .iter()
            .flat_map(|a| u.iter().map(move |b| a * b))
            .collect();
    }
    out
}

/// `Σ_s <e_s| ρ |e_s>` over the trailing factor of dimension `traced`.
pub fn partial_trace_tail(rho: &DMatrix<Complex64>, traced: usize) -> DMatrix<Complex64> {
    let kept = rho.nrows() / traced;
    DMatrix::from_fn(kept, kept, |i, j| {
        (0..traced)
            .map(|s| rho[(i * traced + s, j * traced + s)])
            .sum()
    })
}

/// `Tr_tail[(1 ⊗ T) ρ]` for an operator `T` on the trailing factor.
fn partial_trace_tail_with(rho: &DMatrix<Complex64>, t: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let traced = t.nrows();
    let kept = rho.nrows() / traced;
    let entries: Vec<(usize, usize, Complex64)> = (0..traced)
        .flat_map(|a| (0..traced).map(move |b| (a, b)))
        .filter_map(|(a, b)| {
            let v = t[(b, a)];
            (v != c64(0.0)).then_some((a, b, v))
        })
        .collect();
    DMatrix::from_fn(kept, kept, |i, j| {
        entries
            .iter()
            .map(|&(a, b, v)| v * rho[(i * traced + a, j * traced + b)])
            .sum()
    })
}

/// `(1 ⊗ <w|) ρ (1 ⊗ |w>)` for a vector `w` on the trailing factor.
pub fn contract_tail(rho: &DMatrix<Complex64>, w: &[Complex64]) -> DMatrix<Complex64> {
    let traced = w.len();
    let kept = rho.nrows() / traced;
    let mut v = DMatrix::<Complex64>::zeros(rho.nrows(), kept);
    for i in 0..kept {
        for (s, ws) in w.iter().enumerate() {
            v[(i * traced + s, i)] = *ws;
        }
    }
    v.adjoint() * rho * v
}

/// `γ^{(1,k)}`: trace out shell slots `k+1..N`.
pub fn reduced_dm(state: &BosonicState, k: usize) -> Result<BosonicState> {
    if k > state.n {
        return Err(Error::BadK { k, n: state.n });
    }
    let traced = state.local_dim().pow((state.n - k) as u32);
    Ok(BosonicState::unchecked(
        state.core_dim,
        state.m,
        k,
        partial_trace_tail(&state.rho, traced),
    ))
}

/// `C(N + m, m) (1 ⊗ <u^{⊗N}|) γ (1 ⊗ |u^{⊗N}>)`.
pub fn zeta_density(state: &BosonicState, u: &[Complex64]) -> Result<DMatrix<Complex64>> {
    if u.len() != state.local_dim() {
        return Err(Error::DimensionMismatch {
            expected: state.local_dim(),
            got: u.len(),
        });
    }
    check_unit(u)?;
    let w = tensor_power(u, state.n);
    Ok(contract_tail(&state.rho, &w) * c64(sym_dim(state.m, state.n) as f64))
}

/// `γ_k(u) = (1 ⊗ 1^{⊗k} ⊗ p_u^{⊗(N-k)} γ)^{(1,k)}`.
pub fn gamma_k(state: &BosonicState, u: &[Complex64], k: usize) -> Result<DMatrix<Complex64>> {
    if k > state.n {
        return Err(Error::BadK { k, n: state.n });
    }
    check_unit(u)?;
    Ok(contract_tail(&state.rho, &tensor_power(u, state.n - k)))
}

/// `|(1 ⊗ p_u^{⊗k}) γ_k(u) (1 ⊗ p_u^{⊗k}) - γ_0(u) ⊗ p_u^{⊗k}|_F`.
pub fn factorization_defect(state: &BosonicState, u: &[Complex64], k: usize) -> Result<f64> {
    let gk = gamma_k(state, u, k)?;
    let g0 = gamma_k(state, u, 0)?;
    let w = DMatrix::from_column_slice(state.local_dim().pow(k as u32), 1, &tensor_power(u, k));
    let pk = &w * w.adjoint();
    let proj = DMatrix::<Complex64>::identity(state.core_dim, state.core_dim).kronecker(&pk);
    let lhs = &proj * gk * &proj;
    Ok((lhs - g0.kronecker(&pk)).norm())
}

/// How the Haar integral in [`eta_construction`] is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Quadrature {
    Exact,
    MonteCarlo { samples: usize, seed: RngSeed },
}

/// Whether the exact moment expansion is within budget.
pub fn exact_feasible(m: usize, n: usize) -> bool {
    (m == 1 && n <= 6) || (m == 2 && n <= 4) || (m == 0 && n <= 8)
}

/// `η = C(N + m, m) ∫ (1 ⊗ p_u^{⊗N} γ)^{(1,0)} ⊗ p_u^{⊗N} dh(u)`.
pub fn eta_construction(state: &BosonicState, quadrature: Quadrature) -> Result<BosonicState> {
    let rho = match quadrature {
        Quadrature::Exact => eta_exact(state)?,
        Quadrature::MonteCarlo { samples, seed } => eta_monte_carlo(state, samples, seed)?,
    };
    Ok(BosonicState::unchecked(
        state.core_dim,
        state.m,
        state.n,
        rho,
    ))
}

/// Entry `[(c, a), (c', b)]` is
/// `C Σ_{s,t} γ[(c, s), (c', t)] ∫ u_t ū_s u_a ū_b dh`, nonzero only when
/// `type(t) - type(s) = type(b) - type(a)`.
fn eta_exact(state: &BosonicState) -> Result<DMatrix<Complex64>> {
    let (m, n, d) = (state.m, state.n, state.local_dim());
    if !exact_feasible(m, n) {
        return Err(Error::QuadratureBudget { m, n });
    }
    let shell = state.shell_dim();
    let types: Vec<Vec<usize>> = (0..shell).map(|x| index_type(x, d, n)).collect();
    let diff = |a: &[usize], b: &[usize]| -> Vec<i64> {
        a.iter()
            .zip(b)
            .map(|(x, y)| *x as i64 - *y as i64)
            .collect()
    };

    // (s, t) pairs grouped by type(t) - type(s)
    let mut by_diff: HashMap<Vec<i64>, Vec<(usize, usize)>> = HashMap::new();
    for s in 0..shell {
        for t in 0..shell {
            by_diff
                .entry(diff(&types[t], &types[s]))
                .or_default()
                .push((s, t));
        }
    }
    let prefactor = sym_dim(m, n) as f64;
    let core = state.core_dim;
    let dim = state.dim();
    let rows: Vec<Vec<Complex64>> = (0..shell * shell)
        .into_par_iter()
        .map(|ab| {
            let (a, b) = (ab / shell, ab % shell);
            let mut block = vec![c64(0.0); core * core];
            if let Some(pairs) = by_diff.get(&diff(&types[b], &types[a])) {
                for &(s, t) in pairs {
                    let total: Vec<usize> =
                        types[t].iter().zip(&types[a]).map(|(x, y)| x + y).collect();
                    let w = haar_moment(&total, m) * prefactor;
                    for c in 0..core {
                        for c2 in 0..core {
                            block[c * core + c2] += state.rho[(c * shell + s, c2 * shell + t)] * w;
                        }
                    }
                }
            }
            block
        })
        .collect();
    let mut eta = DMatrix::<Complex64>::zeros(dim, dim);
    for (ab, block) in rows.iter().enumerate() {
        let (a, b) = (ab / shell, ab % shell);
        for c in 0..core {
            for c2 in 0..core {
                eta[(c * shell + a, c2 * shell + b)] = block[c * core + c2];
            }
        }
    }
    Ok(eta)
}

fn check_mc_budget(dim: usize, samples: usize, m: usize, n: usize) -> Result<()> {
    if samples == 0 {
        return Err(Error::InvalidParameter(
            "Monte-Carlo needs at least one sample".into(),
        ));
    }
    if (dim * dim) as f64 * samples as f64 > MONTE_CARLO_BUDGET {
        return Err(Error::QuadratureBudget { m, n });
    }
    Ok(())
}

/// Sum `f(u)` over `samples` Haar points split into fixed partitions with
/// their own streams, reduced in partition order.
fn haar_sum<F>(m: usize, samples: usize, seed: RngSeed, dim: usize, f: F) -> DMatrix<Complex64>
where
    F: Fn(&[Complex64], &mut DMatrix<Complex64>) + Sync,
{
    let parts: Vec<DMatrix<Complex64>> = (0..MC_PARTITIONS)
        .into_par_iter()
        .map(|p| {
            let count = samples / MC_PARTITIONS as usize
                + usize::from((p as usize) < samples % MC_PARTITIONS as usize);
            let mut rng = seed.stream(p);
            let mut acc = DMatrix::<Complex64>::zeros(dim, dim);
            for _ in 0..count {
                f(&haar_point(&mut rng, m), &mut acc);
            }
            acc
        })
        .collect();
    parts
        .into_iter()
        .fold(DMatrix::zeros(dim, dim), |acc, p| acc + p)
}

fn eta_monte_carlo(
    state: &BosonicState,
    samples: usize,
    seed: RngSeed,
) -> Result<DMatrix<Complex64>> {
    check_mc_budget(state.dim(), samples, state.m, state.n)?;
    let prefactor = sym_dim(state.m, state.n) as f64;
    let sum = haar_sum(state.m, samples, seed, state.dim(), |u, acc| {
        let w = tensor_power(u, state.n);
        let zeta = contract_tail(&state.rho, &w);
        let col = DMatrix::from_column_slice(w.len(), 1, &w);
        *acc += zeta.kronecker(&(&col * col.adjoint()));
    });
    Ok(sum * c64(prefactor / samples as f64))
}

/// Schatten-1 norm of a Hermitian matrix.
pub fn schatten1(m: &DMatrix<Complex64>) -> Result<f64> {
    trace_norm(&DenseHermitian::symmetrized(m.clone())?)
}

/// `(|γ^{(1,k)} - η^{(1,k)}|_1, 4mk/(N+1))`.
pub fn definetti_distance(
    state: &BosonicState,
    eta: &BosonicState,
    k: usize,
) -> Result<(f64, f64)> {
    let g = reduced_dm(state, k)?;
    let e = reduced_dm(eta, k)?;
    let distance = schatten1(&(g.rho - e.rho))?;
    let bound = 4.0 * (state.m * k) as f64 / (state.n + 1) as f64;
    Ok((distance, bound))
}

/// Exact `η`, then [`definetti_distance`].
pub fn definetti_bound_check(state: &BosonicState, k: usize) -> Result<(f64, f64)> {
    if k == 0 {
        return Ok((0.0, 0.0));
    }
    if k > state.n {
        return Err(Error::BadK { k, n: state.n });
    }
    let eta = eta_construction(state, Quadrature::Exact)?;
    definetti_distance(state, &eta, k)
}

/// `1 - C(N-k+m, m)/C(N+m, m) <= mk/(N+1)`, decided in integer arithmetic.
pub fn binomial_ratio_holds(n: u64, m: u64, k: u64) -> bool {
    let full = binomial(n + m, m).expect("small binomial");
    let rest = binomial(n - k + m, m).expect("small binomial");
    (n as u128 + 1) * (full - rest) <= (m * k) as u128 * full
}

/// `(|C(N+m,m) · MC average of p_u^{⊗N} - Π_N|_F, |C(N+m,m) · exact moment matrix - Π_N|_F)`.
///
/// `samples = 0` skips the Monte-Carlo estimate and reports `NaN` for it.
pub fn schur_check(m: usize, n: usize, samples: usize, seed: RngSeed) -> Result<(f64, f64)> {
    let pi = symmetrizer(m, n)?;
    let exact = schur_exact_error(&pi);
    let mc = if samples == 0 {
        f64::NAN
    } else {
        schur_mc_error(&pi, samples, seed)?
    };
    Ok((mc, exact))
}

/// Frobenius distance between `Π_N` and `C(N+m,m) [∫ u_I ū_J dh]_{IJ}`.
fn schur_exact_error(pi: &Symmetrizer) -> f64 {
    let (m, n, d) = (pi.m, pi.n, pi.m + 1);
    let prefactor = sym_dim(m, n) as f64;
    let types: Vec<Vec<usize>> = (0..pi.dim()).map(|x| index_type(x, d, n)).collect();
    let mut buckets: HashMap<&[usize], Vec<usize>> = HashMap::new();
    for (x, t) in types.iter().enumerate() {
        buckets.entry(t.as_slice()).or_default().push(x);
    }
    let mut err_sq = 0.0;
    for row in 0..pi.dim() {
        let o = prefactor * haar_moment(&types[row], m);
        for &col in &buckets[types[row].as_slice()] {
            err_sq += (pi.matrix.get(row, col) - o).norm_sqr();
        }
        for (col, v) in pi.matrix.row(row) {
            if types[row] != types[col] {
                err_sq += v.norm_sqr();
            }
        }
    }
    err_sq.sqrt()
}

fn schur_mc_error(pi: &Symmetrizer, samples: usize, seed: RngSeed) -> Result<f64> {
    let dim = pi.dim();
    check_mc_budget(dim, samples, pi.m, pi.n)?;
    let sum = haar_sum(pi.m, samples, seed, dim, |u, acc| {
        let w = tensor_power(u, pi.n);
        for i in 0..dim {
            for j in 0..dim {
                acc[(i, j)] += w[i] * w[j].conj();
            }
        }
    });
    let avg = sum * c64(sym_dim(pi.m, pi.n) as f64 / samples as f64);
    Ok((avg - pi.matrix.to_dense()).norm())
}

/// Standard deviation of the Monte-Carlo Schur estimate:
/// `sqrt((C² - C) / samples)` with `C = C(N+m, m)`.
pub fn schur_mc_sigma(m: usize, n: usize, samples: usize) -> f64 {
    let c = sym_dim(m, n) as f64;
    ((c * c - c) / samples as f64).sqrt()
}

/// Atom of the localization measure at `λ = n / N`.
#[derive(Debug, Clone)]
pub struct LocalizationAtom {
    pub n: usize,
    pub lambda: f64,
    pub weight: DMatrix<Complex64>,
}

#[derive(Debug, Clone)]
pub struct LocalizationMeasure {
    pub n: usize,
    pub k: usize,
    pub atoms: Vec<LocalizationAtom>,
}

impl LocalizationMeasure {
    pub fn total_trace(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight.trace().re).sum()
    }

    /// `Σ_n (n/N)^k · atom_n`, or `None` when there are no atoms.
    pub fn moment(&self) -> Option<DMatrix<Complex64>> {
        let mut it = self
            .atoms
            .iter()
            .map(|a| &a.weight * c64(a.lambda.powi(self.k as i32)));
        let first = it.next()?;
        Some(it.fold(first, |acc, x| acc + x))
    }
}

fn check_projector(p: &DMatrix<Complex64>, d: usize) -> Result<()> {
    if p.nrows() != d || p.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: p.nrows(),
        });
    }
    let defect = (p * p - p).norm().max((p - p.adjoint()).norm());
    if defect > 1e-10 {
        return Err(Error::NotProjector(defect));
    }
    Ok(())
}

/// `(1 ⊗ A_1 ⊗ … ⊗ A_N) ρ (…)†` with the one-slot operators `ops`.
///
/// Applied one slot at a time on columns, never forming the Kronecker product.
fn conjugate_by_slots(
    rho: &DMatrix<Complex64>,
    _core_dim: usize,
    ops: &[&DMatrix<Complex64>],
) -> DMatrix<Complex64> {
    let Some(d) = ops.first().map(|a| a.nrows()) else {
        return rho.clone();
    };
    let n = ops.len();
    let apply_right = |m: DMatrix<Complex64>| {
        ops.iter().enumerate().fold(m, |acc, (slot, a)| {
            right_slot(&acc, d.pow((n - 1 - slot) as u32), d, a)
        })
    };
    // A ρ A† = ((ρ A†)† A†)†
    apply_right(apply_right(rho.clone()).adjoint()).adjoint()
}

/// `m · (1 ⊗ … ⊗ A† ⊗ … ⊗ 1)` with `A†` on the slot whose digit has `stride`.
fn right_slot(
    m: &DMatrix<Complex64>,
    stride: usize,
    d: usize,
    a: &DMatrix<Complex64>,
) -> DMatrix<Complex64> {
    let mut out = DMatrix::<Complex64>::zeros(m.nrows(), m.ncols());
    for c0 in (0..m.ncols()).filter(|c| (c / stride) % d == 0) {
        for ai in 0..d {
            let mut dst = out.column_mut(c0 + ai * stride);
            for bi in 0..d {
                let coef = a[(ai, bi)].conj();
                if coef != c64(0.0) {
                    dst.axpy(coef, &m.column(c0 + bi * stride), c64(1.0));
                }
            }
        }
    }
    out
}

/// Atoms `C(N, n) (1 ⊗ P^{⊗n} ⊗ Q^{⊗(N-n)} γ (same))^{(1,k)}` for
/// `n = k..N`, with `P` on the first `n` slots; vanishing atoms are dropped.
pub fn localization_measure(
    state: &BosonicState,
    p: &DMatrix<Complex64>,
    k: usize,
) -> Result<LocalizationMeasure> {
    let d = state.local_dim();
    check_projector(p, d)?;
    if k > state.n {
        return Err(Error::BadK { k, n: state.n });
    }
    let q = DMatrix::<Complex64>::identity(d, d) - p;
    let big_n = state.n;
    let head: Vec<&DMatrix<Complex64>> = vec![p; k];
    let mut atoms = Vec::new();
    for n in k..=big_n {
        // projectors in the traced slots collapse to one factor inside the trace
        let tail = (k..big_n).fold(DMatrix::<Complex64>::identity(1, 1), |acc, slot| {
            acc.kronecker(if slot < n { p } else { &q })
        });
        let reduced = partial_trace_tail_with(&state.rho, &tail);
        let weight = conjugate_by_slots(&reduced, state.core_dim, &head)
            * c64(binomial(big_n as u64, n as u64).unwrap() as f64);
        if weight.iter().any(|z| *z != c64(0.0)) {
            atoms.push(LocalizationAtom {
                n,
                lambda: n as f64 / big_n as f64,
                weight,
            });
        }
    }
    Ok(LocalizationMeasure { n: big_n, k, atoms })
}

/// `(|(1 ⊗ P^{⊗k}) γ^{(1,k)} (1 ⊗ P^{⊗k}) - Σ_n (n/N)^k atom_n|_1, k(k-1)/N)`.
pub fn localization_bound_check(
    state: &BosonicState,
    p: &DMatrix<Complex64>,
    k: usize,
) -> Result<(f64, f64)> {
    if k == 0 {
        check_projector(p, state.local_dim())?;
        return Ok((0.0, 0.0));
    }
    let measure = localization_measure(state, p, k)?;
    let g = reduced_dm(state, k)?;
    let ops: Vec<&DMatrix<Complex64>> = vec![p; k];
    let projected = conjugate_by_slots(&g.rho, state.core_dim, &ops);
    let diff = match measure.moment() {
        Some(mom) => projected - mom,
        None => projected,
    };
    Ok((schatten1(&diff)?, (k * (k - 1)) as f64 / state.n as f64))
}

/// Random rank-`rank` orthogonal projector on `C^{m+1}`.
pub fn random_projector(m: usize, rank: usize, seed: RngSeed) -> Result<DMatrix<Complex64>> {
    let d = m + 1;
    if rank > d {
        return Err(Error::InvalidParameter(format!(
            "rank {rank} exceeds dimension {d}"
        )));
    }
    let mut rng = seed.rng();
    let g = DMatrix::from_column_slice(d, d, &gaussian_vector(&mut rng, d * d));
    let q = g.qr().q();
    let cols = q.columns(0, rank);
    Ok(&cols * cols.adjoint())
}

/// One line of a verification report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub params: serde_json::Value,
    pub distance: f64,
    pub bound: f64,
    pub pass: bool,
}

impl CheckRecord {
    pub fn new(name: &str, params: serde_json::Value, distance: f64, bound: f64) -> Self {
        let pass = distance <= bound + BOUND_SLACK;
        Self {
            name: name.to_string(),
            params,
            distance,
            bound,
            pass,
        }
    }
}

/// Settings of [`verification_suite`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSettings {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub core_dim: usize,
    /// Number of random states per check.
    pub states: usize,
    /// Monte-Carlo samples for the Schur check (0 skips it).
    pub samples: usize,
    pub seed: RngSeed,
}

/// `i`-th test state: even indices pure, odd ones rank-3 mixtures.
pub fn suite_state(
    core_dim: usize,
    m: usize,
    n: usize,
    seed: RngSeed,
    i: usize,
) -> Result<BosonicState> {
    let s = seed.derive(i as u64);
    if i % 2 == 0 {
        BosonicState::random_pure(core_dim, m, n, s)
    } else {
        BosonicState::random_mixed(core_dim, m, n, 3, s)
    }
}

/// Schur formula, de Finetti bound, factorization identity, trace of `η`,
/// localization bound and the binomial-ratio inequality for one `(m, N, k)`.
pub fn verification_suite(s: &SuiteSettings) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    let base = json!({"m": s.m, "N": s.n});

    let (mc, exact) = schur_check(s.m, s.n, s.samples, s.seed)?;
    out.push(CheckRecord::new("schur_exact", base.clone(), exact, 1e-12));
    if s.samples > 0 {
        let sigma = schur_mc_sigma(s.m, s.n, s.samples);
        out.push(CheckRecord::new(
            "schur_monte_carlo",
            json!({"m": s.m, "N": s.n, "samples": s.samples}),
            mc,
            3.0 * sigma,
        ));
    }

    let holds = binomial_ratio_holds(s.n as u64, s.m as u64, s.k as u64);
    out.push(CheckRecord::new(
        "binomial_ratio",
        json!({"m": s.m, "N": s.n, "k": s.k}),
        if holds { 0.0 } else { 1.0 },
        0.0,
    ));

    let exact_ok = exact_feasible(s.m, s.n);
    let mut worst_df: Option<(f64, f64)> = None;
    let mut worst_trace = 0.0f64;
    let mut worst_fact = 0.0f64;
    let mut worst_loc: Option<(f64, f64)> = None;
    let mut rng = s.seed.derive(u64::MAX).rng();
    for i in 0..s.states {
        let state = suite_state(s.core_dim, s.m, s.n, s.seed, i)?;
        if exact_ok {
            let eta = eta_construction(&state, Quadrature::Exact)?;
            worst_trace = worst_trace.max((eta.trace() - 1.0).abs());
            let (dist, bound) = definetti_distance(&state, &eta, s.k)?;
            worst_df = Some(worst_df.map_or((dist, bound), |(d, b)| (d.max(dist), b)));
        }
        let u = haar_point(&mut rng, s.m);
        for kk in 0..=s.n.min(s.k.max(1)) {
            worst_fact = worst_fact.max(factorization_defect(&state, &u, kk)?);
        }
        let p = random_projector(s.m, 1, s.seed.derive(1000 + i as u64))?;
        let (dist, bound) = localization_bound_check(&state, &p, s.k)?;
        worst_loc = Some(worst_loc.map_or((dist, bound), |(d, b)| (d.max(dist), b)));
    }
    let with_k = json!({"m": s.m, "N": s.n, "k": s.k, "core_dim": s.core_dim, "states": s.states});
    if let Some((d, b)) = worst_df {
        out.push(CheckRecord::new("definetti_bound", with_k.clone(), d, b));
        out.push(CheckRecord::new(
            "eta_trace",
            with_k.clone(),
            worst_trace,
            1e-10,
        ));
    }
    out.push(CheckRecord::new(
        "factorization_identity",
        with_k.clone(),
        worst_fact,
        1e-10,
    ));
    if let Some((d, b)) = worst_loc {
        out.push(CheckRecord::new("localization_bound", with_k, d, b));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn slotwise_conjugation_matches_kronecker() {
        let state = BosonicState::random_mixed(2, 2, 3, 2, RngSeed(17)).unwrap();
        let a = crate::numerics::random::random_hermitian(3, RngSeed(1)).into_matrix();
        let b = random_projector(2, 1, RngSeed(2)).unwrap();
        let c = DMatrix::from_fn(3, 3, |i, j| {
            Complex64::new(i as f64 - j as f64, (i * j) as f64)
        });
        let ops = [&a, &b, &c];
        let mut full = DMatrix::<Complex64>::identity(2, 2);
        for op in ops {
            full = full.kronecker(op);
        }
        let expected = &full * state.rho() * full.adjoint();
        let got = conjugate_by_slots(state.rho(), 2, &ops);
        assert!((got - expected).norm() < 1e-12);
    }

    fn unit(v: &[f64]) -> Vec<Complex64> {
        let mut w: Vec<Complex64> = v.iter().map(|&x| c64(x)).collect();
        normalize(&mut w);
        w
    }

    /// `(1/N!) Σ_σ U_σ` by enumerating permutations.
    fn permutation_average(m: usize, n: usize) -> DMatrix<Complex64> {
        let d = m + 1;
        let dim = d.pow(n as u32);
        let mut perms = vec![(0..n).collect::<Vec<_>>()];
        for len in 1..n {
            let mut next = Vec::new();
            for p in &perms {
                for j in 0..=len {
                    let mut q = p.clone();
                    q.swap(j, len);
                    next.push(q);
                }
            }
            perms = next;
        }
        let mut out = DMatrix::<Complex64>::zeros(dim, dim);
        for p in &perms {
            for x in 0..dim {
                out[(permute_index(x, dim, d, p), x)] += c64(1.0);
            }
        }
        out / c64(perms.len() as f64)
    }

    #[test]
    fn symmetrizer_examples() {
        let one = symmetrizer(2, 1).unwrap();
        assert_eq!(one.matrix.to_dense(), DMatrix::identity(3, 3));

        let two = symmetrizer(1, 2).unwrap().matrix.to_dense();
        let singlet = DMatrix::from_column_slice(4, 1, &[c64(0.0), c64(1.0), c64(-1.0), c64(0.0)]);
        assert!((&two * &singlet).norm() < 1e-15);
        assert!((two.trace().re - 3.0).abs() < 1e-15);

        let s = symmetrizer(2, 3).unwrap();
        let eig = dense_eigenvalues(&DenseHermitian::new(s.matrix.to_dense()).unwrap()).unwrap();
        assert_eq!(eig.iter().filter(|&&x| x > 0.5).count() as u128, s.rank());
        assert_eq!(s.rank(), 10);
        assert!(s.idempotency_defect() < 1e-10);
    }

    #[test]
    fn symmetrizer_matches_permutation_sum() {
        for (m, n) in [(1, 3), (2, 3), (1, 5), (3, 2)] {
            let built = symmetrizer(m, n).unwrap().matrix.to_dense();
            assert!(
                (built - permutation_average(m, n)).norm() < 1e-12,
                "m = {m}, N = {n}"
            );
        }
    }

    #[test]
    fn symmetrizer_guard() {
        assert!(matches!(
            symmetrizer(1, 9),
            Err(Error::DimensionGuard { .. })
        ));
        assert!(matches!(
            symmetrizer(4, 7),
            Err(Error::DimensionGuard { .. })
        ));
    }

    #[test]
    fn haar_moment_values() {
        // ∫ |u_0|² dh = 1/(m+1)
        assert!((haar_moment(&[1, 0], 1) - 0.5).abs() < 1e-15);
        // ∫ |u_0|⁴ dh on C² = 2/6
        assert!((haar_moment(&[2, 0], 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((haar_moment(&[1, 1, 0], 2) - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn schur_formula_exact() {
        for (m, n) in [(1, 1), (1, 2), (1, 4), (2, 2), (2, 3)] {
            let (_, exact) = schur_check(m, n, 0, RngSeed(0)).unwrap();
            assert!(exact <= 1e-12, "m = {m}, N = {n}: {exact}");
        }
    }

    #[test]
    fn schur_formula_monte_carlo() {
        let (mc, _) = schur_check(1, 1, 20_000, RngSeed(3)).unwrap();
        assert!(mc <= 3.0 * schur_mc_sigma(1, 1, 20_000));
        assert!((schur_mc_sigma(1, 4, 100_000) - (20.0f64 / 1e5).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn state_validation() {
        let s = BosonicState::random_pure(2, 1, 3, RngSeed(1)).unwrap();
        assert!(s.symmetry_defect() < 1e-12);
        // a non-symmetric product |0><0| ⊗ |01><01|
        let mut rho = DMatrix::<Complex64>::zeros(8, 8);
        rho[(1, 1)] = c64(1.0);
        assert!(matches!(
            BosonicState::new(2, 1, 2, rho),
            Err(Error::InvalidState(_))
        ));
        let mut rho = DMatrix::<Complex64>::zeros(4, 4);
        rho[(0, 0)] = c64(0.5);
        assert!(BosonicState::new(1, 1, 2, rho).is_err());
    }

    #[test]
    fn reduced_density_matrices() {
        let s = BosonicState::random_mixed(2, 1, 4, 2, RngSeed(5)).unwrap();
        assert_eq!(reduced_dm(&s, 4).unwrap(), s);
        for k in 0..4 {
            let r = reduced_dm(&s, k).unwrap();
            assert!((r.trace() - 1.0).abs() < 1e-12);
            assert!(r.min_eigenvalue().unwrap() >= -1e-12);
            assert!(r.symmetry_defect() < 1e-10);
            let rr = reduced_dm(&reduced_dm(&s, k + 1).unwrap(), k).unwrap();
            assert!((rr.rho() - r.rho()).norm() < 1e-12);
        }
        assert!(matches!(reduced_dm(&s, 5), Err(Error::BadK { k: 5, n: 4 })));

        let zeta0 = DMatrix::from_row_slice(2, 2, &[c64(0.7), c64(0.1), c64(0.1), c64(0.3)]);
        let v = unit(&[0.6, 0.8]);
        let prod = BosonicState::product(&zeta0, &v, 3).unwrap();
        assert!((reduced_dm(&prod, 0).unwrap().rho() - &zeta0).norm() < 1e-14);
    }

    #[test]
    fn zeta_on_products() {
        let zeta0 = DMatrix::from_row_slice(2, 2, &[c64(0.6), c64(0.2), c64(0.2), c64(0.4)]);
        let v = unit(&[1.0, 2.0]);
        let s = BosonicState::product(&zeta0, &v, 3).unwrap();
        let z = zeta_density(&s, &v).unwrap();
        assert!((z - &zeta0 * c64(4.0)).norm() < 1e-13);
        let perp = vec![-v[1].conj(), v[0].conj()];
        assert!(zeta_density(&s, &perp).unwrap().norm() < 1e-14);
        assert!(matches!(
            zeta_density(&s, &[c64(1.0), c64(1.0)]),
            Err(Error::NotUnit(_))
        ));
    }

    #[test]
    fn zeta_is_normalized_on_average() {
        let s = BosonicState::random_mixed(2, 1, 3, 2, RngSeed(8)).unwrap();
        let mut rng = RngSeed(9).rng();
        let samples = 10_000;
        let traces: Vec<f64> = (0..samples)
            .map(|_| {
                zeta_density(&s, &haar_point(&mut rng, 1))
                    .unwrap()
                    .trace()
                    .re
            })
            .collect();
        let mean = traces.iter().sum::<f64>() / samples as f64;
        let var = traces.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
        assert!((mean - 1.0).abs() <= 3.0 * (var / samples as f64).sqrt());
    }

    #[test]
    fn eta_examples() {
        let s = BosonicState::maximally_mixed(2, 1, 2).unwrap();
        let eta = eta_construction(&s, Quadrature::Exact).unwrap();
        assert!((eta.trace() - 1.0).abs() < 1e-12);

        let s = BosonicState::random_mixed(2, 1, 3, 2, RngSeed(11)).unwrap();
        let eta = eta_construction(&s, Quadrature::Exact).unwrap();
        assert!(eta.min_eigenvalue().unwrap() >= -1e-10);
        assert!(eta.symmetry_defect() < 1e-10);
        assert!(
            (reduced_dm(&eta, 0).unwrap().rho() - reduced_dm(&s, 0).unwrap().rho()).norm() < 1e-12
        );

        let mc = eta_construction(
            &s,
            Quadrature::MonteCarlo {
                samples: 100_000,
                seed: RngSeed(12),
            },
        )
        .unwrap();
        assert!((mc.rho() - eta.rho()).norm() <= 0.05);

        assert!(matches!(
            eta_construction(
                &BosonicState::random_pure(1, 2, 5, RngSeed(0)).unwrap(),
                Quadrature::Exact
            ),
            Err(Error::QuadratureBudget { m: 2, n: 5 })
        ));
    }

    #[test]
    fn eta_of_a_product_state() {
        let zeta0 = DMatrix::from_row_slice(2, 2, &[c64(0.5), c64(0.0), c64(0.0), c64(0.5)]);
        let s = BosonicState::product(&zeta0, &unit(&[1.0, 0.0]), 2).unwrap();
        let eta = eta_construction(&s, Quadrature::Exact).unwrap();
        // η[(0,00),(0,00)] = C(3,1) · ζ_00 · ∫ |u_0|^8 dh
        let expected00 = 3.0 * haar_moment(&[4, 0], 1) * 0.5;
        assert!((eta.rho()[(0, 0)].re - expected00).abs() < 1e-14);
    }

    #[test]
    fn definetti_bound_holds() {
        for n in [2, 4, 6] {
            let s = BosonicState::random_pure(2, 1, n, RngSeed(n as u64)).unwrap();
            let (dist, bound) = definetti_bound_check(&s, 1).unwrap();
            assert!(dist <= bound + 1e-9);
            assert!((bound - 4.0 / (n + 1) as f64).abs() < 1e-15);
        }
        let s = BosonicState::random_pure(2, 1, 3, RngSeed(0)).unwrap();
        assert_eq!(definetti_bound_check(&s, 0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn factorization_identity() {
        let mut rng = RngSeed(21).rng();
        for (m, n, seed) in [(1, 4, 1), (2, 3, 2), (1, 6, 3)] {
            let s = BosonicState::random_mixed(2, m, n, 3, RngSeed(seed)).unwrap();
            let u = haar_point(&mut rng, m);
            for k in 0..=n {
                assert!(factorization_defect(&s, &u, k).unwrap() <= 1e-10);
            }
        }
    }

    #[test]
    fn trace_norm_agrees_with_singular_values() {
        let s = BosonicState::random_mixed(2, 1, 3, 2, RngSeed(4)).unwrap();
        let eta = eta_construction(&s, Quadrature::Exact).unwrap();
        let diff = reduced_dm(&s, 2).unwrap().rho() - reduced_dm(&eta, 2).unwrap().rho();
        let svd: f64 = diff.clone().singular_values().iter().sum();
        assert!((schatten1(&diff).unwrap() - svd).abs() < 1e-10);
    }

    #[test]
    fn localization_examples() {
        let s = BosonicState::random_mixed(2, 1, 4, 2, RngSeed(6)).unwrap();
        let id = DMatrix::<Complex64>::identity(2, 2);
        let zero = DMatrix::<Complex64>::zeros(2, 2);

        let all = localization_measure(&s, &id, 2).unwrap();
        assert_eq!(all.atoms.len(), 1);
        assert_eq!(all.atoms[0].lambda, 1.0);
        assert!((&all.atoms[0].weight - reduced_dm(&s, 2).unwrap().rho()).norm() < 1e-12);

        let none = localization_measure(&s, &zero, 0).unwrap();
        assert_eq!(none.atoms.len(), 1);
        assert_eq!(none.atoms[0].lambda, 0.0);
        assert!(localization_measure(&s, &zero, 1).unwrap().atoms.is_empty());

        let p = random_projector(1, 1, RngSeed(1)).unwrap();
        let measure = localization_measure(&s, &p, 0).unwrap();
        assert!(measure.total_trace() <= 1.0 + 1e-12);
        for a in &measure.atoms {
            let e =
                dense_eigenvalues(&DenseHermitian::symmetrized(a.weight.clone()).unwrap()).unwrap();
            assert!(e[0] >= -1e-12);
        }

        let (d1, b1) = localization_bound_check(&s, &p, 1).unwrap();
        assert_eq!(b1, 0.0);
        assert!(d1 <= 1e-10);
        assert_eq!(localization_bound_check(&s, &p, 0).unwrap(), (0.0, 0.0));

        let bad = DMatrix::from_element(2, 2, c64(1.0));
        assert!(matches!(
            localization_measure(&s, &bad, 1),
            Err(Error::NotProjector(_))
        ));
    }

    #[test]
    fn fixed_slot_assignment_matches_other_assignments() {
        // by shell symmetry, P on slots {2, 3} and Q on {1, 4} gives the
        // same localized weight as P on {1, 2} after relabelling
        let s = BosonicState::random_pure(1, 1, 4, RngSeed(13)).unwrap();
        let p = random_projector(1, 1, RngSeed(14)).unwrap();
        let q = DMatrix::<Complex64>::identity(2, 2) - &p;
        let first = conjugate_by_slots(s.rho(), 1, &[&p, &p, &q, &q]);
        let spread = conjugate_by_slots(s.rho(), 1, &[&q, &p, &p, &q]);
        assert!((first.trace() - spread.trace()).norm() < 1e-12);
    }

    #[test]
    fn localization_bound_holds_at_k2() {
        let p = random_projector(1, 1, RngSeed(3)).unwrap();
        for i in 0..4 {
            let s = suite_state(2, 1, 6, RngSeed(100), i).unwrap();
            let (d, b) = localization_bound_check(&s, &p, 2).unwrap();
            assert!((b - 1.0 / 3.0).abs() < 1e-15);
            assert!(d <= b + 1e-9);
        }
    }

    #[test]
    fn suite_report() {
        let s = SuiteSettings {
            m: 1,
            n: 3,
            k: 1,
            core_dim: 2,
            states: 2,
            samples: 1000,
            seed: RngSeed(7),
        };
        let report = verification_suite(&s).unwrap();
        assert!(report.iter().all(|r| r.pass), "{report:?}");
        let names: Vec<&str> = report.iter().map(|r| r.name.as_str()).collect();
        assert!(names.contains(&"definetti_bound") && names.contains(&"localization_bound"));
    }

    proptest! {
        #[test]
        fn binomial_ratio_inequality(n in 1u64..=64, m in 0u64..=8, k_frac in 0.0f64..=1.0) {
            let k = (k_frac * n as f64).floor() as u64;
            prop_assert!(binomial_ratio_holds(n, m, k));
        }
    }
}

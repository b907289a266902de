//! One core site coupled to `z` shell sites, restricted to states that are
//! symmetric under permutations of the shell.
//!
//! ```text
//! H_{1,z} = Σ_{i=1..z} [ -J (a_0† a_i + a_i† a_0) + (J - μ)(N_0 + N_i)
//!                        + (U/2)(N_0(N_0 - 1) + N_i(N_i - 1)) ]
//! H_{1,z} / z = -J (a_0† a_s + a_s† a_0) + (J - μ - U/2) M_1 + (U/2) M_2
//! ```
//!
//! with `A_s = (1/z) Σ_i A_i` and `M_β = N_0^β + (N^β)_s` (`0^0 = 1`).
//!
//! A symmetric shell state is labelled by occupations `k = (k_0, …, k_{n_max})`,
//! `k_j` being the number of shell sites in Fock level `|j>`, so the shell
//! dimension is `C(z + n_max, n_max)` instead of `(n_max + 1)^z`.
//!
//! `H_{1,z}` conserves the total particle number `n_0 + Σ_j j k_j`. The ground
//! energy is found sector by sector; a sector is skipped when a rigorous
//! lower bound on its spectrum already exceeds the best energy found.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::lattice::{BHParams, OneSiteOperator, SiteOps};
use crate::meanfield::{fmt17, minimize_scan_default};
use crate::numerics::lanczos::{default_max_iter, DEFAULT_TOL};
use crate::numerics::random::{gaussian_vector, normalize};
use crate::numerics::{
    dense_eigenvalues, dense_eigs, lanczos_ground, DenseHermitian, RngSeed, SparseHermitian,
    SparseMatrix,
};

/// Largest basis [`build_h1z`] will assemble.
pub const CORE_SHELL_MAX_DIM: u128 = 10_000_000;
/// Matrices up to this size are diagonalized densely in the inequality checks.
pub const SPECTRAL_CHECK_MAX_DIM: usize = 1000;
/// Sectors up to this size are diagonalized densely.
const SECTOR_DENSE_MAX_DIM: usize = 256;

fn c64(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `C(n, k)` table for `n <= n_top`.
#[derive(Debug, Clone)]
struct Binomials {
    table: Vec<Vec<u128>>,
}

impl Binomials {
    fn new(n_top: usize) -> Self {
        let mut table = vec![vec![0u128; n_top + 1]; n_top + 1];
        for n in 0..=n_top {
            table[n][0] = 1;
            for k in 1..=n {
                table[n][k] = table[n - 1][k - 1] + if k < n { table[n - 1][k] } else { 0 };
            }
        }
        Self { table }
    }

    fn get(&self, n: usize, k: usize) -> u128 {
        if k > n {
            0
        } else {
            self.table[n][k]
        }
    }
}

/// `C(n, k)` in exact arithmetic; `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i + 1) as u128;
    }
    Some(acc)
}

/// Number of shell configurations, `C(z + n_max, n_max)`.
pub fn shell_dim(z: usize, n_max: usize) -> u128 {
    binomial((z + n_max) as u64, n_max as u64).unwrap_or(u128::MAX)
}

/// Occupation-number basis of the symmetric shell, in descending
/// lexicographic order of `(k_0, k_1, …)`.
#[derive(Debug, Clone)]
pub struct ShellBasis {
    z: usize,
    n_max: usize,
    occupations: Vec<u16>,
    binom: Binomials,
}

impl ShellBasis {
    pub fn new(z: usize, n_max: usize) -> Result<Self> {
        if z == 0 || n_max == 0 {
            return Err(Error::InvalidSize(format!(
                "need z >= 1 and n_max >= 1, got z = {z}, n_max = {n_max}"
            )));
        }
        if z > u16::MAX as usize {
            return Err(Error::InvalidSize(format!("shell size {z} is too large")));
        }
        let dim = shell_dim(z, n_max);
        if dim > CORE_SHELL_MAX_DIM {
            return Err(Error::DimensionGuard {
                dim,
                limit: CORE_SHELL_MAX_DIM,
            });
        }
        let levels = n_max + 1;
        let mut occupations = Vec::with_capacity(dim as usize * levels);
        let mut k = vec![0u16; levels];
        enumerate_descending(&mut k, 0, z, None, &mut |k| {
            occupations.extend_from_slice(k)
        });
        Ok(Self {
            z,
            n_max,
            occupations,
            binom: Binomials::new(z + n_max),
        })
    }

    pub fn z(&self) -> usize {
        self.z
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn levels(&self) -> usize {
        self.n_max + 1
    }

    pub fn len(&self) -> usize {
        self.occupations.len() / self.levels()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn state(&self, index: usize) -> &[u16] {
        let l = self.levels();
        &self.occupations[index * l..(index + 1) * l]
    }

    pub fn states(&self) -> impl Iterator<Item = &[u16]> {
        self.occupations.chunks_exact(self.levels())
    }

    /// Position of `k`, or `None` if `k` is not a valid shell configuration.
    pub fn index_of(&self, k: &[u16]) -> Option<usize> {
        if k.len() != self.levels() || k.iter().map(|&x| x as usize).sum::<usize>() != self.z {
            return None;
        }
        Some(shell_rank(k, self.z, &self.binom) as usize)
    }
}

/// Rank of `k` in descending lexicographic order among vectors of the same
/// length summing to `total`.
fn shell_rank(k: &[u16], total: usize, binom: &Binomials) -> u128 {
    let levels = k.len();
    let mut remaining = total;
    let mut rank = 0u128;
    for (j, &kj) in k.iter().enumerate() {
        let kj = kj as usize;
        let tail = levels - j;
        // configurations with a larger entry at position j come first
        if tail > 1 && remaining > kj {
            rank += binom.get(remaining - kj - 1 + tail - 1, tail - 1);
        }
        remaining -= kj;
    }
    rank
}

/// Call `f` on every `k` with `Σ k = remaining` (from position `pos`) in
/// descending lexicographic order; `weight`, when given, also fixes
/// `Σ j k_j` over the remaining positions.
fn enumerate_descending(
    k: &mut [u16],
    pos: usize,
    remaining: usize,
    weight: Option<usize>,
    f: &mut dyn FnMut(&[u16]),
) {
    let levels = k.len();
    if pos + 1 == levels {
        if let Some(w) = weight {
            if w != pos * remaining {
                return;
            }
        }
        k[pos] = remaining as u16;
        f(k);
        return;
    }
    for c in (0..=remaining).rev() {
        let next_weight = match weight {
            Some(w) => {
                let used = pos * c;
                if used > w {
                    continue;
                }
                let w_rest = w - used;
                let r = remaining - c;
                // the remaining r particles sit in levels pos+1..levels-1
                if w_rest < (pos + 1) * r || w_rest > (levels - 1) * r {
                    continue;
                }
                Some(w_rest)
            }
            None => None,
        };
        k[pos] = c as u16;
        enumerate_descending(k, pos + 1, remaining - c, next_weight, f);
    }
    k[pos] = 0;
}

/// Core ⊗ symmetric shell; index `core · |shell| + shell_index`.
#[derive(Debug, Clone)]
pub struct CoreShellBasis {
    pub shell: ShellBasis,
}

impl CoreShellBasis {
    pub fn new(z: usize, n_max: usize) -> Result<Self> {
        let dim = (n_max as u128 + 1).saturating_mul(shell_dim(z, n_max));
        if dim > CORE_SHELL_MAX_DIM {
            return Err(Error::DimensionGuard {
                dim,
                limit: CORE_SHELL_MAX_DIM,
            });
        }
        Ok(Self {
            shell: ShellBasis::new(z, n_max)?,
        })
    }

    pub fn core_dim(&self) -> usize {
        self.shell.n_max() + 1
    }

    pub fn dim(&self) -> usize {
        self.core_dim() * self.shell.len()
    }

    pub fn index(&self, core: usize, shell_index: usize) -> usize {
        core * self.shell.len() + shell_index
    }

    /// `(core occupation, shell configuration)` of a basis index.
    pub fn decode(&self, index: usize) -> (usize, &[u16]) {
        (
            index / self.shell.len(),
            self.shell.state(index % self.shell.len()),
        )
    }
}

/// Matrix of `(1/z) Σ_i A_i` on the symmetric shell.
///
/// For `l != j`, `<k - e_j + e_l| Σ_i A_i |k> = A_{lj} √(k_j (k_l + 1))`;
/// the diagonal is `Σ_j A_{jj} k_j`.
pub fn lift_one_body(a: &OneSiteOperator, basis: &ShellBasis) -> Result<SparseMatrix> {
    let levels = basis.levels();
    if a.nrows() != levels || a.ncols() != levels {
        return Err(Error::DimensionMismatch {
            expected: levels,
            got: a.nrows(),
        });
    }
    let inv_z = 1.0 / basis.z() as f64;
    let mut triplets = Vec::new();
    let mut target = vec![0u16; levels];
    for (col, k) in basis.states().enumerate() {
        let diag: Complex64 = (0..levels).map(|j| a[(j, j)] * k[j] as f64).sum();
        triplets.push((col, col, diag * inv_z));
        for j in (0..levels).filter(|&j| k[j] > 0) {
            for l in (0..levels).filter(|&l| l != j && a[(l, j)] != c64(0.0)) {
                target.copy_from_slice(k);
                target[j] -= 1;
                target[l] += 1;
                let amp = (k[j] as f64 * (k[l] as f64 + 1.0)).sqrt() * inv_z;
                let row = basis
                    .index_of(&target)
                    .expect("moved configuration stays in the basis");
                triplets.push((row, col, a[(l, j)] * amp));
            }
        }
    }
    SparseMatrix::from_triplets(basis.len(), triplets)
}

/// [`lift_one_body`] for a Hermitian `A`.
pub fn lift_hermitian(a: &OneSiteOperator, basis: &ShellBasis) -> Result<SparseHermitian> {
    SparseHermitian::new(lift_one_body(a, basis)?)
}

/// Diagonal of `H_{1,z}` at core occupation `n0` and shell `k`.
fn h1z_diagonal(n0: usize, k: &[u16], z: usize, p: &BHParams) -> f64 {
    let n0 = n0 as f64;
    let (s1, s2) = k.iter().enumerate().fold((0.0, 0.0), |(s1, s2), (j, &kj)| {
        let (jf, kf) = (j as f64, kj as f64);
        (s1 + jf * kf, s2 + jf * jf * kf)
    });
    let zf = z as f64;
    (p.j - p.mu - 0.5 * p.u) * (zf * n0 + s1) + 0.5 * p.u * (zf * n0 * n0 + s2)
}

/// Hopping `-J (a_0† Σ_i a_i)` out of `(n0, k)`: calls `f(k', amplitude)`
/// for the target `(n0 + 1, k')`.
fn h1z_hops(n0: usize, k: &[u16], p: &BHParams, f: &mut dyn FnMut(&[u16], f64)) {
    if n0 + 1 >= k.len() || p.j == 0.0 {
        return;
    }
    let mut target = k.to_vec();
    for j in (1..k.len()).filter(|&j| k[j] > 0) {
        target.copy_from_slice(k);
        target[j] -= 1;
        target[j - 1] += 1;
        let amp = -p.j
            * ((n0 + 1) as f64).sqrt()
            * (j as f64).sqrt()
            * (k[j] as f64 * (k[j - 1] as f64 + 1.0)).sqrt();
        f(&target, amp);
    }
}

fn check_params(z: usize, p: &BHParams) -> Result<()> {
    p.validate()?;
    if z == 0 {
        return Err(Error::InvalidSize("z must be at least 1".into()));
    }
    Ok(())
}

/// Matrix of `H_{1,z}` on the full [`CoreShellBasis`].
pub fn build_h1z(z: usize, p: &BHParams) -> Result<SparseHermitian> {
    check_params(z, p)?;
    let basis = CoreShellBasis::new(z, p.n_max)?;
    Ok(build_h1z_on(&basis, p))
}

fn build_h1z_on(basis: &CoreShellBasis, p: &BHParams) -> SparseHermitian {
    let z = basis.shell.z();
    let mut triplets = Vec::with_capacity(basis.dim() * (2 * p.n_max + 1));
    for col in 0..basis.dim() {
        let (n0, k) = basis.decode(col);
        triplets.push((col, col, c64(h1z_diagonal(n0, k, z, p))));
        h1z_hops(n0, k, p, &mut |t, amp| {
            let row = basis.index(
                n0 + 1,
                basis.shell.index_of(t).expect("valid shell configuration"),
            );
            triplets.push((row, col, c64(amp)));
            triplets.push((col, row, c64(amp)));
        });
    }
    let m = SparseMatrix::from_triplets(basis.dim(), triplets).expect("indices are in range");
    SparseHermitian::new_unchecked(m)
}

/// States of `H_{1,z}` with a fixed total particle number.
#[derive(Debug, Clone)]
pub struct NumberSector {
    pub z: usize,
    pub n_max: usize,
    pub particles: usize,
    /// `(core occupation, shell configuration)`, core ascending then shell
    /// in descending lexicographic order.
    pub states: Vec<(usize, Vec<u16>)>,
}

impl NumberSector {
    pub fn new(z: usize, n_max: usize, particles: usize) -> Self {
        let mut states = Vec::new();
        let mut k = vec![0u16; n_max + 1];
        for n0 in 0..=n_max.min(particles) {
            let s = particles - n0;
            if s > z * n_max {
                continue;
            }
            enumerate_descending(&mut k, 0, z, Some(s), &mut |k| {
                states.push((n0, k.to_vec()))
            });
        }
        Self {
            z,
            n_max,
            particles,
            states,
        }
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    /// `H_{1,z}` restricted to the sector.
    pub fn hamiltonian(&self, p: &BHParams) -> SparseHermitian {
        let index: HashMap<(usize, &[u16]), usize> = self
            .states
            .iter()
            .enumerate()
            .map(|(i, (n0, k))| ((*n0, k.as_slice()), i))
            .collect();
        let mut triplets = Vec::with_capacity(self.dim() * (2 * self.n_max + 1));
        for (col, (n0, k)) in self.states.iter().enumerate() {
            triplets.push((col, col, c64(h1z_diagonal(*n0, k, self.z, p))));
            h1z_hops(*n0, k, p, &mut |t, amp| {
                let row = index[&(*n0 + 1, t)];
                triplets.push((row, col, c64(amp)));
                triplets.push((col, row, c64(amp)));
            });
        }
        let m = SparseMatrix::from_triplets(self.dim(), triplets).expect("indices are in range");
        SparseHermitian::new_unchecked(m)
    }
}

/// Lower bound on the spectrum of `H_{1,z}` in the sector with `particles`
/// bosons, or `None` if the sector is empty.
///
/// From `|a_0† a_s + a_s† a_0| <= M_1`,
/// `H/z >= (J - |J| - μ - U/2) M_1 + (U/2) M_2`, which is diagonal; its
/// minimum spreads the shell particles as evenly as possible.
pub fn sector_lower_bound(z: usize, p: &BHParams, particles: usize) -> Option<f64> {
    let c = p.j - p.j.abs() - p.mu - 0.5 * p.u;
    let zf = z as f64;
    (0..=p.n_max.min(particles))
        .filter(|&n0| particles - n0 <= z * p.n_max)
        .map(|n0| {
            let s = particles - n0;
            let (q, r) = (s / z, s % z);
            let qmin = ((z - r) * q * q + r * (q + 1) * (q + 1)) as f64;
            let n0 = n0 as f64;
            zf * c * (n0 + s as f64 / zf) + 0.5 * p.u * (zf * n0 * n0 + qmin)
        })
        .min_by(f64::total_cmp)
}

/// Ground state of `H_{1,z}`.
#[derive(Debug, Clone)]
pub struct CoreShellGround {
    pub z: usize,
    /// `λ_min(H_{1,z})`.
    pub eigenvalue: f64,
    /// Particle number of the ground-state sector.
    pub particles: usize,
    /// Number of sectors diagonalized before the bound closed.
    pub sectors_solved: usize,
}

impl CoreShellGround {
    pub fn energy_per_2z(&self) -> f64 {
        self.eigenvalue / (2.0 * self.z as f64)
    }
}

fn sector_ground(sector: &NumberSector, p: &BHParams, seed: RngSeed) -> Result<f64> {
    let h = sector.hamiltonian(p);
    if h.dim() <= SECTOR_DENSE_MAX_DIM {
        let d = DenseHermitian::symmetrized(h.to_dense())?;
        Ok(dense_eigenvalues(&d)?[0])
    } else {
        Ok(lanczos_ground(&h, DEFAULT_TOL, default_max_iter(h.dim()), seed)?.eigenvalue)
    }
}

/// Lowest eigenvalue of `H_{1,z}` by branch and bound over particle-number
/// sectors.
pub fn core_shell_ground(z: usize, p: &BHParams, seed: RngSeed) -> Result<CoreShellGround> {
    check_params(z, p)?;
    let n_top = p.n_max * (z + 1);
    let mut bounds: Vec<(f64, usize)> = (0..=n_top)
        .filter_map(|n| sector_lower_bound(z, p, n).map(|lb| (lb, n)))
        .collect();
    bounds.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut best: Option<(f64, usize)> = None;
    let mut solved = 0;
    for (lb, n) in bounds {
        if let Some((e, _)) = best {
            if lb > e {
                break;
            }
        }
        let sector = NumberSector::new(z, p.n_max, n);
        let guard = sector.dim() as u128;
        if guard > CORE_SHELL_MAX_DIM {
            return Err(Error::DimensionGuard {
                dim: guard,
                limit: CORE_SHELL_MAX_DIM,
            });
        }
        let e = sector_ground(&sector, p, seed.derive(n as u64))?;
        solved += 1;
        if best.is_none_or(|(b, _)| e < b) {
            best = Some((e, n));
        }
    }
    let (eigenvalue, particles) = best.expect("the vacuum sector is always present");
    Ok(CoreShellGround {
        z,
        eigenvalue,
        particles,
        sectors_solved: solved,
    })
}

/// `λ_min(H_{1,z}) / (2z)`.
pub fn core_shell_energy(z: usize, p: &BHParams) -> Result<f64> {
    Ok(core_shell_ground(z, p, RngSeed::default())?.energy_per_2z())
}

/// Diagonal of `M_β = N_0^β + (N^β)_s` on the basis, with `0^0 = 1`.
pub fn moment_diagonal(beta: f64, basis: &CoreShellBasis) -> Result<Vec<f64>> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "moment exponent must be >= 0, got {beta}"
        )));
    }
    let z = basis.shell.z() as f64;
    let pow: Vec<f64> = (0..basis.core_dim())
        .map(|n| (n as f64).powf(beta))
        .collect();
    let shell: Vec<f64> = basis
        .shell
        .states()
        .map(|k| {
            k.iter()
                .zip(&pow)
                .map(|(&kj, pj)| kj as f64 * pj)
                .sum::<f64>()
                / z
        })
        .collect();
    Ok((0..basis.dim())
        .map(|i| pow[i / shell.len()] + shell[i % shell.len()])
        .collect())
}

/// `<ψ, M_β ψ>` for a normalized `ψ`.
pub fn moment_expectation(beta: f64, basis: &CoreShellBasis, psi: &[Complex64]) -> Result<f64> {
    if psi.len() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: psi.len(),
        });
    }
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(norm));
    }
    let diag = moment_diagonal(beta, basis)?;
    Ok(psi.iter().zip(&diag).map(|(z, d)| z.norm_sqr() * d).sum())
}

/// `max (M_{β1} - 2^{1 - β1/β2} M_{β2}^{β1/β2})` over the basis.
pub fn check_holder(beta1: f64, beta2: f64, basis: &CoreShellBasis) -> Result<f64> {
    if !(0.0 <= beta1 && beta1 <= beta2 && beta2 > 0.0 && beta2.is_finite()) {
        return Err(Error::BadExponents(beta1, beta2));
    }
    let r = beta1 / beta2;
    let lhs = moment_diagonal(beta1, basis)?;
    let m2 = moment_diagonal(beta2, basis)?;
    let factor = 2f64.powf(1.0 - r);
    Ok(lhs
        .iter()
        .zip(&m2)
        .map(|(l, m)| l - factor * m.powf(r))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// `a_0† a_s + a_s† a_0` on the full basis.
pub fn core_shell_hopping(basis: &CoreShellBasis) -> Result<SparseHermitian> {
    let ops = SiteOps::new(basis.shell.n_max());
    let a_s = lift_one_body(&ops.a, &basis.shell)?;
    let a0_dag = SparseMatrix::from_dense(&ops.a_dag)?;
    let t = a0_dag.kron(&a_s);
    let x = SparseMatrix::linear_combination(&[(c64(1.0), &t), (c64(1.0), &t.adjoint())])?;
    SparseHermitian::new(x)
}

fn random_states(dim: usize, trials: usize, seed: RngSeed) -> Vec<Vec<Complex64>> {
    let mut rng = seed.rng();
    (0..trials)
        .map(|_| {
            let mut v = gaussian_vector(&mut rng, dim);
            normalize(&mut v);
            v
        })
        .collect()
}

/// Worst violation of `0 <= op`: `-λ_min(op)` densely when small, otherwise
/// the largest `-<ψ, op ψ>` over random states and the Lanczos ground state.
fn worst_negativity(op: &SparseHermitian, trials: usize, seed: RngSeed) -> Result<f64> {
    if op.dim() <= SPECTRAL_CHECK_MAX_DIM {
        let d = DenseHermitian::symmetrized(op.to_dense())?;
        return Ok(-dense_eigenvalues(&d)?[0]);
    }
    let mut worst = f64::NEG_INFINITY;
    for psi in random_states(op.dim(), trials, seed) {
        worst = worst.max(-op.expectation(&psi));
    }
    let g = lanczos_ground(op, DEFAULT_TOL, default_max_iter(op.dim()), seed.derive(1))?;
    Ok(worst.max(-g.eigenvalue))
}

/// Worst violation of `-M_1 <= a_0† a_s + a_s† a_0 <= M_1`.
pub fn check_laplacian_cs(z: usize, n_max: usize, trials: usize, seed: RngSeed) -> Result<f64> {
    let basis = CoreShellBasis::new(z, n_max)?;
    let x = core_shell_hopping(&basis)?;
    let m1 = SparseHermitian::from_diagonal(&moment_diagonal(1.0, &basis)?);
    let upper = SparseHermitian::linear_combination(&[(1.0, &m1), (-1.0, &x)])?;
    let lower = SparseHermitian::linear_combination(&[(1.0, &m1), (1.0, &x)])?;
    Ok(
        worst_negativity(&upper, trials, seed)?.max(worst_negativity(
            &lower,
            trials,
            seed.derive(2),
        )?),
    )
}

/// Which form of the `M_2` estimate applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum M2Branch {
    /// `2J₋ + μ + U/2 <= 0`: `M_2 <= (2/U) H/z`.
    Linear,
    /// Otherwise: `M_2 <= (4/U) H/z + 2((4J₋ + 2μ)/U + 1)²`.
    Shifted,
}

/// Coefficients `(branch, slope, offset)` of `M_2 <= slope · H/z + offset`.
pub fn m2_bound_coefficients(p: &BHParams) -> Result<(M2Branch, f64, f64)> {
    if !(p.u > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "the M_2 estimate needs U > 0, got {}",
            p.u
        )));
    }
    let j_minus = (-p.j).max(0.0);
    if 2.0 * j_minus + p.mu + 0.5 * p.u <= 0.0 {
        Ok((M2Branch::Linear, 2.0 / p.u, 0.0))
    } else {
        let t = (4.0 * j_minus + 2.0 * p.mu) / p.u + 1.0;
        Ok((M2Branch::Shifted, 4.0 / p.u, 2.0 * t * t))
    }
}

/// Worst signed violation of the `M_2` energy estimate, over random states,
/// the ground state of `H_{1,z}`, and (for small bases) the full spectrum of
/// the difference.
pub fn check_m2_bound(z: usize, p: &BHParams, trials: usize, seed: RngSeed) -> Result<f64> {
    check_params(z, p)?;
    let (_, slope, offset) = m2_bound_coefficients(p)?;
    let basis = CoreShellBasis::new(z, p.n_max)?;
    let h = build_h1z_on(&basis, p);
    let m2 = SparseHermitian::from_diagonal(&moment_diagonal(2.0, &basis)?);
    let zf = z as f64;
    // rhs - lhs = slope · H/z + offset - M_2
    let gap_op = SparseHermitian::linear_combination(&[(slope / zf, &h), (-1.0, &m2)])?;
    let violation = |psi: &[Complex64]| -(gap_op.expectation(psi) + offset);

    let mut worst = f64::NEG_INFINITY;
    for psi in random_states(basis.dim(), trials, seed) {
        worst = worst.max(violation(&psi));
    }
    let ground = lanczos_ground(&h, DEFAULT_TOL, default_max_iter(h.dim()), seed.derive(1))?;
    worst = worst.max(violation(&ground.eigenvector));
    if basis.dim() <= SPECTRAL_CHECK_MAX_DIM {
        let d = DenseHermitian::symmetrized(gap_op.to_dense())?;
        worst = worst.max(-(dense_eigenvalues(&d)?[0] + offset));
    }
    Ok(worst)
}

/// One row of the convergence table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub z: usize,
    pub energy_per_2z: f64,
    pub e_mf: f64,
    pub gap: f64,
}

pub const CONVERGENCE_CSV_HEADER: &str = "z,energy_per_2z,e_mf,gap";

/// `E_mf - λ_min(H_{1,z})/(2z)` for each `z`, rows in input order.
pub fn convergence_table(zs: &[usize], p: &BHParams, seed: RngSeed) -> Result<Vec<ConvergenceRow>> {
    let e_mf = minimize_scan_default(p)?.energy;
    zs.par_iter()
        .map(|&z| {
            let e = core_shell_ground(z, p, seed)?.energy_per_2z();
            Ok(ConvergenceRow {
                z,
                energy_per_2z: e,
                e_mf,
                gap: e_mf - e,
            })
        })
        .collect()
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = format!("{CONVERGENCE_CSV_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.z,
            fmt17(r.energy_per_2z),
            fmt17(r.e_mf),
            fmt17(r.gap)
        ));
    }
    out
}

/// Ground state of `H_{1,z}` on the full basis, for small `z`.
pub fn core_shell_ground_vector(z: usize, p: &BHParams) -> Result<(f64, Vec<Complex64>)> {
    let h = build_h1z(z, p)?;
    if h.dim() <= SPECTRAL_CHECK_MAX_DIM {
        let e = dense_eigs(&DenseHermitian::symmetrized(h.to_dense())?)?;
        Ok((e.values[0], e.ground_vector()))
    } else {
        let g = lanczos_ground(
            &h,
            DEFAULT_TOL,
            default_max_iter(h.dim()),
            RngSeed::default(),
        )?;
        Ok((g.eigenvalue, g.eigenvector))
    }
}

/// Dense `(n_max+1)^{z+1}` matrix of `H_{1,z}` on the unsymmetrized product
/// space, site 0 the core and slowest index.
pub fn full_product_h1z(z: usize, p: &BHParams) -> Result<DMatrix<Complex64>> {
    check_params(z, p)?;
    let d = p.local_dim();
    let sites = z + 1;
    let dim = (d as u128).pow(sites as u32);
    if dim > crate::numerics::dense::DENSE_EIGS_MAX_DIM as u128 {
        return Err(Error::DimensionGuard {
            dim,
            limit: crate::numerics::dense::DENSE_EIGS_MAX_DIM as u128,
        });
    }
    let dim = dim as usize;
    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    let mut occ = vec![0usize; sites];
    for col in 0..dim {
        let mut rest = col;
        for s in (0..sites).rev() {
            occ[s] = rest % d;
            rest /= d;
        }
        let stride = |s: usize| d.pow((sites - 1 - s) as u32);
        let n0 = occ[0] as f64;
        let mut diag = 0.0;
        for i in 1..sites {
            let ni = occ[i] as f64;
            diag += (p.j - p.mu) * (n0 + ni) + 0.5 * p.u * (n0 * (n0 - 1.0) + ni * (ni - 1.0));
            // a_0† a_i
            if occ[i] > 0 && occ[0] + 1 < d {
                let row = col + stride(0) - stride(i);
                let amp = -p.j * ((occ[0] + 1) as f64).sqrt() * ni.sqrt();
                h[(row, col)] += c64(amp);
                h[(col, row)] += c64(amp);
            }
        }
        h[(col, col)] += c64(diag);
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::random::RngSeed;

    fn params(j: f64, mu: f64, u: f64, n_max: usize) -> BHParams {
        BHParams::new(j, mu, u, n_max).unwrap()
    }

    /// Isometry from the symmetric shell into `(C^{n_max+1})^{⊗z}`.
    fn symmetric_embedding(basis: &ShellBasis) -> DMatrix<Complex64> {
        let (z, d) = (basis.z(), basis.levels());
        let full = d.pow(z as u32);
        let mut v = DMatrix::<Complex64>::zeros(full, basis.len());
        for idx in 0..full {
            let mut k = vec![0u16; d];
            let mut rest = idx;
            for _ in 0..z {
                k[rest % d] += 1;
                rest /= d;
            }
            v[(idx, basis.index_of(&k).unwrap())] = c64(1.0);
        }
        for mut col in v.column_iter_mut() {
            let n = col.norm();
            col /= c64(n);
        }
        v
    }

    fn kron_site(op: &DMatrix<Complex64>, site: usize, sites: usize) -> DMatrix<Complex64> {
        let d = op.nrows();
        let mut out = DMatrix::<Complex64>::identity(1, 1);
        for s in 0..sites {
            let f = if s == site {
                op.clone()
            } else {
                DMatrix::identity(d, d)
            };
            out = out.kronecker(&f);
        }
        out
    }

    #[test]
    fn basis_sizes_and_ordering() {
        for (z, n_max) in [(1, 1), (2, 2), (4, 3), (5, 6), (8, 2)] {
            let b = ShellBasis::new(z, n_max).unwrap();
            assert_eq!(
                b.len() as u128,
                binomial((z + n_max) as u64, n_max as u64).unwrap()
            );
            for (i, k) in b.states().enumerate() {
                assert_eq!(b.index_of(k), Some(i));
                assert_eq!(k.iter().map(|&x| x as usize).sum::<usize>(), z);
            }
            for i in 1..b.len() {
                assert!(b.state(i - 1) > b.state(i));
            }
        }
        let b = ShellBasis::new(2, 1).unwrap();
        let states: Vec<&[u16]> = b.states().collect();
        assert_eq!(states, vec![&[2u16, 0][..], &[1, 1], &[0, 2]]);
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(38, 6), Some(2_760_681));
        assert_eq!(binomial(5, 0), Some(1));
        assert_eq!(binomial(3, 5), Some(0));
    }

    #[test]
    fn lifting_identity_and_number() {
        let b = ShellBasis::new(3, 2).unwrap();
        let ops = SiteOps::new(2);
        let id = lift_one_body(&DMatrix::identity(3, 3), &b)
            .unwrap()
            .to_dense();
        assert!((id - DMatrix::<Complex64>::identity(b.len(), b.len())).norm() < 1e-14);
        let n = lift_one_body(&ops.number, &b).unwrap();
        for (i, k) in b.states().enumerate() {
            let expected = (k[1] as f64 + 2.0 * k[2] as f64) / 3.0;
            assert!((n.get(i, i).re - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn lifting_matches_tensor_oracle() {
        for (z, n_max) in [(2, 1), (2, 2), (3, 2)] {
            let b = ShellBasis::new(z, n_max).unwrap();
            let ops = SiteOps::new(n_max);
            let v = symmetric_embedding(&b);
            let mut sum = DMatrix::<Complex64>::zeros(v.nrows(), v.nrows());
            for i in 0..z {
                sum += kron_site(&ops.a, i, z);
            }
            let oracle = v.adjoint() * sum * v / c64(z as f64);
            let lifted = lift_one_body(&ops.a, &b).unwrap().to_dense();
            assert!(
                (lifted - oracle).norm() <= 1e-12,
                "z = {z}, n_max = {n_max}"
            );
        }
    }

    #[test]
    fn single_shell_site_is_the_two_site_problem() {
        for n_max in [1, 2, 3] {
            let p = params(0.3, 0.6, 1.1, n_max);
            let h = build_h1z(1, &p).unwrap().to_dense();
            // with z = 1 the shell configuration e_n is the Fock state |n>
            let full = full_product_h1z(1, &p).unwrap();
            assert!((h - full).norm() <= 1e-12);
        }
    }

    #[test]
    fn decoupled_sites() {
        let p = params(0.0, 0.5, 1.0, 4);
        let h = build_h1z(3, &p).unwrap();
        assert!((0..h.dim()).all(|i| h.as_matrix().row(i).all(|(c, _)| c == i)));
        for z in [1, 2, 5, 16] {
            assert!((core_shell_energy(z, &p).unwrap() + 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_sector_contains_the_ground_state() {
        for (z, n_max, j) in [
            (1, 2, 0.2),
            (2, 2, 0.1),
            (3, 2, 0.3),
            (2, 3, 0.05),
            (3, 1, 0.7),
        ] {
            let p = params(j, 0.5, 1.0, n_max);
            let full =
                dense_eigenvalues(&DenseHermitian::new(full_product_h1z(z, &p).unwrap()).unwrap())
                    .unwrap()[0];
            let sym = dense_eigenvalues(
                &DenseHermitian::new(build_h1z(z, &p).unwrap().to_dense()).unwrap(),
            )
            .unwrap()[0];
            let bnb = core_shell_ground(z, &p, RngSeed(3)).unwrap().eigenvalue;
            assert!((full - sym).abs() <= 1e-9, "z = {z}: {full} vs {sym}");
            assert!((bnb - sym).abs() <= 1e-9, "z = {z}: {bnb} vs {sym}");
        }
    }

    #[test]
    fn sectors_partition_the_basis() {
        let (z, n_max) = (4, 3);
        let total: usize = (0..=n_max * (z + 1))
            .map(|n| NumberSector::new(z, n_max, n).dim())
            .sum();
        assert_eq!(total, CoreShellBasis::new(z, n_max).unwrap().dim());
    }

    #[test]
    fn sector_bound_is_below_the_sector_spectrum() {
        let p = params(0.4, 0.7, 1.0, 3);
        let z = 4;
        for n in 0..=p.n_max * (z + 1) {
            let sector = NumberSector::new(z, p.n_max, n);
            let lb = sector_lower_bound(z, &p, n).unwrap();
            let d = DenseHermitian::symmetrized(sector.hamiltonian(&p).to_dense()).unwrap();
            assert!(
                lb <= dense_eigenvalues(&d).unwrap()[0] + 1e-12,
                "sector {n}"
            );
        }
    }

    #[test]
    fn below_mean_field() {
        let p = params(0.05, 0.5, 1.0, 4);
        let e_mf = minimize_scan_default(&p).unwrap().energy;
        for z in [1, 2, 4, 8] {
            let e = core_shell_energy(z, &p).unwrap();
            assert!(e <= e_mf + 1e-10);
            assert!(e <= 0.0);
        }
    }

    #[test]
    fn moments() {
        let basis = CoreShellBasis::new(3, 2).unwrap();
        let mut psi = vec![c64(0.0); basis.dim()];
        let vac = basis.index(0, basis.shell.index_of(&[3, 0, 0]).unwrap());
        psi[vac] = c64(1.0);
        assert_eq!(moment_expectation(1.0, &basis, &psi).unwrap(), 0.0);
        assert_eq!(moment_expectation(0.0, &basis, &psi).unwrap(), 2.0);
        psi[vac] = c64(0.0);
        psi[basis.index(2, basis.shell.index_of(&[0, 3, 0]).unwrap())] = c64(1.0);
        assert!((moment_expectation(2.0, &basis, &psi).unwrap() - 5.0).abs() < 1e-15);
        psi[0] = c64(1.0);
        assert!(matches!(
            moment_expectation(1.0, &basis, &psi),
            Err(Error::NotNormalized(_))
        ));
    }

    #[test]
    fn holder_inequality() {
        let basis = CoreShellBasis::new(4, 3).unwrap();
        assert_eq!(check_holder(2.0, 2.0, &basis).unwrap(), 0.0);
        assert!(check_holder(1.0, 2.0, &basis).unwrap() <= 1e-12);
        assert!(check_holder(0.5, 3.0, &basis).unwrap() <= 1e-12);
        assert!(matches!(
            check_holder(2.0, 1.0, &basis),
            Err(Error::BadExponents(..))
        ));
        // core |1>, every shell site in |1>: M_1 = 2, M_2 = 2
        assert!((2.0 - 2f64.powf(0.5) * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cauchy_schwarz_sandwich() {
        assert!(check_laplacian_cs(1, 1, 0, RngSeed(0)).unwrap() <= 1e-10);
        assert!(check_laplacian_cs(4, 3, 20, RngSeed(1)).unwrap() <= 1e-10);
    }

    #[test]
    fn m2_estimate_branches() {
        let p = params(0.0, -1.0, 1.0, 3);
        assert_eq!(m2_bound_coefficients(&p).unwrap().0, M2Branch::Linear);
        assert!(check_m2_bound(2, &p, 20, RngSeed(2)).unwrap() <= 1e-8);

        let p = params(0.1, 0.5, 1.0, 3);
        let (branch, slope, offset) = m2_bound_coefficients(&p).unwrap();
        assert_eq!((branch, slope, offset), (M2Branch::Shifted, 4.0, 8.0));
        assert!(check_m2_bound(2, &p, 20, RngSeed(2)).unwrap() <= 1e-8);
    }

    #[test]
    fn convergence_csv_layout() {
        let p = params(0.05, 0.5, 1.0, 3);
        let rows = convergence_table(&[2, 4], &p, RngSeed(0)).unwrap();
        let csv = convergence_csv(&rows);
        assert!(csv.starts_with("z,energy_per_2z,e_mf,gap\n2,"));
        assert!(rows.iter().all(|r| r.gap > 0.0));
    }
}

//! Gutzwiller mean-field functional, its minimization, and the
//! Mott-insulator / superfluid phase diagram.
//!
//! For a normalized one-site state `φ` with order parameter `α = <φ, a φ>`
//! the energy per site of the product state `φ^{⊗|V|}` is
//!
//! ```text
//! E(φ) = -J |α|² + (J - μ) <N> + (U/2) <N (N - 1)>.
//! ```
//!
//! # Minimization by a one-dimensional scan
//!
//! Rotating `φ -> e^{iθN} φ` multiplies `α` by `e^{-iθ}` and leaves `<N>`,
//! `<N(N-1)>` unchanged, so the phase of `α` can be fixed to `α >= 0`. For
//! real `s >= 0` let
//!
//! ```text
//! g(s) = λ_min( -J s (a† + a) + (J - μ) N + (U/2) N (N - 1) ) + J s².
//! ```
//!
//! Since `<φ, -Js(a† + a) φ> + J s² = -2 J s Re α + J s²` and, for `J >= 0`,
//! `min_s (-2 J s Re α + J s²) = -J (Re α)²`, we get
//! `min_s g(s) = min_φ E(φ)`. The scan evaluates `g` on a grid over
//! `[0, s_max]`, refines the best cell by golden-section search and takes the
//! ground vector at the optimum as the minimizer.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{product_state_energy_per_site, BHParams, Graph, SiteOps};
use crate::numerics::{dense_eigenvalues, dense_eigs, DenseHermitian};

/// Normalization tolerance of [`MfState`].
pub const NORM_TOL: f64 = 1e-12;
/// Default Mott threshold on `|α|`.
pub const DEFAULT_ALPHA_THRESHOLD: f64 = 1e-6;
/// Default number of cells in the coarse `s` grid.
pub const DEFAULT_SCAN_GRID: usize = 48;
/// Default golden-section resolution in `s`.
pub const DEFAULT_REFINE_TOL: f64 = 1e-9;
/// Energies closer than this are treated as degenerate; the `α = 0` branch wins.
pub const TIE_TOL: f64 = 1e-12;

/// One-site trial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfState {
    phi: Vec<Complex64>,
    params: BHParams,
}

impl MfState {
    /// Wrap a state that is already normalized.
    pub fn new(phi: Vec<Complex64>, params: BHParams) -> Result<Self> {
        params.validate()?;
        if phi.len() != params.local_dim() {
            return Err(Error::DimensionMismatch {
                expected: params.local_dim(),
                got: phi.len(),
            });
        }
        let norm = phi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { phi, params })
    }

    /// Normalize `phi` and wrap it.
    pub fn normalized(mut phi: Vec<Complex64>, params: BHParams) -> Result<Self> {
        let norm = phi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NotNormalized(norm));
        }
        phi.iter_mut().for_each(|z| *z /= norm);
        Self::new(phi, params)
    }

    /// Fock state `|n>`.
    pub fn number_state(n: usize, params: BHParams) -> Result<Self> {
        let mut phi = vec![Complex64::new(0.0, 0.0); params.local_dim()];
        *phi.get_mut(n).ok_or(Error::DimensionMismatch {
            expected: params.local_dim(),
            got: n + 1,
        })? = Complex64::new(1.0, 0.0);
        Self::new(phi, params)
    }

    pub fn phi(&self) -> &[Complex64] {
        &self.phi
    }

    pub fn params(&self) -> &BHParams {
        &self.params
    }

    /// `α = <φ, a φ>`.
    pub fn alpha(&self) -> Complex64 {
        order_parameter(&self.phi)
    }

    /// `<φ, N φ>`.
    pub fn mean_n(&self) -> f64 {
        self.phi
            .iter()
            .enumerate()
            .map(|(n, z)| n as f64 * z.norm_sqr())
            .sum()
    }

    /// `<φ, N (N - 1) φ>`.
    pub fn mean_pairs(&self) -> f64 {
        self.phi
            .iter()
            .enumerate()
            .map(|(n, z)| (n * n.saturating_sub(1)) as f64 * z.norm_sqr())
            .sum()
    }

    /// Apply the gauge rotation `e^{iθN}`.
    pub fn gauge_rotated(&self, theta: f64) -> Self {
        let phi = self
            .phi
            .iter()
            .enumerate()
            .map(|(n, z)| z * Complex64::from_polar(1.0, theta * n as f64))
            .collect();
        Self {
            phi,
            params: self.params,
        }
    }
}

/// `<φ, a φ>` with `a|n> = √n |n-1>`.
pub fn order_parameter(phi: &[Complex64]) -> Complex64 {
    (1..phi.len())
        .map(|n| phi[n - 1].conj() * phi[n] * (n as f64).sqrt())
        .sum()
}

/// Mean-field energy `-J|α|² + (J-μ)<N> + (U/2)<N(N-1)>` of a normalized state.
pub fn mf_energy(state: &MfState) -> f64 {
    let p = state.params;
    -p.j * state.alpha().norm_sqr() + (p.j - p.mu) * state.mean_n() + 0.5 * p.u * state.mean_pairs()
}

/// Matrix of `-J(α a† + ᾱ a - |α|²) + (J - μ) N + (U/2) N (N - 1)`.
pub fn mf_operator(alpha: Complex64, p: &BHParams) -> DenseHermitian {
    let d = p.local_dim();
    let mut m = DMatrix::<Complex64>::zeros(d, d);
    for n in 0..d {
        let nf = n as f64;
        m[(n, n)] = Complex64::new(
            p.j * alpha.norm_sqr() + (p.j - p.mu) * nf + 0.5 * p.u * nf * (nf - 1.0),
            0.0,
        );
        if n + 1 < d {
            let amp = ((n + 1) as f64).sqrt();
            // <n+1| a† |n> = √(n+1), <n| a |n+1> = √(n+1)
            m[(n + 1, n)] = -p.j * alpha * amp;
            m[(n, n + 1)] = -p.j * alpha.conj() * amp;
        }
    }
    DenseHermitian::new(m).expect("mean-field operator is Hermitian by construction")
}

/// Which minimizer produced a [`MeanFieldSolution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MfMethod {
    Scan1d,
    Scf,
}

/// Minimizer of the mean-field functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldSolution {
    pub state: MfState,
    pub alpha: Complex64,
    pub energy: f64,
    pub method: MfMethod,
    /// Function evaluations (scan) or fixed-point steps (SCF).
    pub iterations: usize,
    /// Scan: `|s* - |α||`. SCF: last `|Δα|`.
    pub residual: f64,
}

impl MeanFieldSolution {
    fn from_state(state: MfState, method: MfMethod, iterations: usize, residual: f64) -> Self {
        let alpha = state.alpha();
        let energy = mf_energy(&state);
        Self {
            state,
            alpha,
            energy,
            method,
            iterations,
            residual,
        }
    }

    pub fn mean_n(&self) -> f64 {
        self.state.mean_n()
    }

    pub fn is_mott(&self, alpha_threshold: f64) -> bool {
        self.alpha.norm() < alpha_threshold
    }
}

fn ground_state_of(alpha: Complex64, p: &BHParams) -> Result<Vec<Complex64>> {
    Ok(dense_eigs(&mf_operator(alpha, p))?.ground_vector())
}

/// `g(s)`, the lowest eigenvalue of the mean-field operator at real `α = s`.
fn scan_objective(s: f64, p: &BHParams) -> Result<f64> {
    Ok(dense_eigenvalues(&mf_operator(Complex64::new(s, 0.0), p))?[0])
}

/// Default scan window `√n_max`, from `|<a>| <= √<N> <= √n_max`.
pub fn default_s_max(p: &BHParams) -> f64 {
    (p.n_max as f64).sqrt()
}

/// Minimize the mean-field functional by the gauge-fixed scan over `s`.
pub fn minimize_scan(
    p: &BHParams,
    s_max: f64,
    grid: usize,
    refine_tol: f64,
) -> Result<MeanFieldSolution> {
    p.validate()?;
    if p.j < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "scan requires J >= 0, got {}",
            p.j
        )));
    }
    if !(p.u > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "scan requires U > 0, got {}",
            p.u
        )));
    }
    if !(s_max > 0.0) || grid < 2 || !(refine_tol > 0.0) {
        return Err(Error::InvalidParameter(
            "need s_max > 0, grid >= 2, refine_tol > 0".into(),
        ));
    }

    let mut evals = 0usize;
    let mut g = |s: f64| -> Result<f64> {
        evals += 1;
        scan_objective(s, p)
    };

    let g0 = g(0.0)?;
    let (mut best_s, mut best_g) = (0.0, g0);
    if p.j > 0.0 {
        let h = s_max / grid as f64;
        let mut best_k = 0usize;
        for k in 1..=grid {
            let v = g(k as f64 * h)?;
            if v < best_g {
                best_g = v;
                best_k = k;
            }
        }
        if best_k == grid {
            return Err(Error::SMaxTooSmall(s_max));
        }
        if best_k > 0 {
            // golden-section search on the bracketing cells
            let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
            let (mut a, mut b) = ((best_k - 1) as f64 * h, (best_k + 1) as f64 * h);
            let mut c = b - inv_phi * (b - a);
            let mut d = a + inv_phi * (b - a);
            let (mut gc, mut gd) = (g(c)?, g(d)?);
            while b - a > refine_tol {
                if gc < gd {
                    b = d;
                    d = c;
                    gd = gc;
                    c = b - inv_phi * (b - a);
                    gc = g(c)?;
                } else {
                    a = c;
                    c = d;
                    gc = gd;
                    d = a + inv_phi * (b - a);
                    gd = g(d)?;
                }
            }
            for (s, v) in [(c, gc), (d, gd)] {
                if v < best_g {
                    best_g = v;
                    best_s = s;
                }
            }
            if best_g == g0 {
                best_s = 0.0;
            }
        }
        if g0 <= best_g + TIE_TOL {
            best_s = 0.0;
        }
    }

    let phi = ground_state_of(Complex64::new(best_s, 0.0), p)?;
    let state = MfState::normalized(phi, *p)?;
    let residual = (best_s - state.alpha().norm()).abs();
    Ok(MeanFieldSolution::from_state(
        state,
        MfMethod::Scan1d,
        evals,
        residual,
    ))
}

/// [`minimize_scan`] with the default window, grid and resolution.
pub fn minimize_scan_default(p: &BHParams) -> Result<MeanFieldSolution> {
    minimize_scan(p, default_s_max(p), DEFAULT_SCAN_GRID, DEFAULT_REFINE_TOL)
}

/// Damped self-consistent iteration `α <- (1-d) α + d <φ_gs(α), a φ_gs(α)>`.
///
/// May converge to the metastable `α = 0` branch; [`minimize_scan`] is the
/// reference minimizer.
pub fn minimize_scf(
    p: &BHParams,
    alpha0: Complex64,
    damping: f64,
    tol: f64,
    max_iter: usize,
) -> Result<MeanFieldSolution> {
    p.validate()?;
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "damping must lie in (0, 1], got {damping}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let mut alpha = alpha0;
    for iter in 1..=max_iter.max(1) {
        let phi = ground_state_of(alpha, p)?;
        let target = order_parameter(&phi);
        let next = alpha * (1.0 - damping) + target * damping;
        let step = (next - alpha).norm();
        alpha = next;
        if step < tol {
            let phi = ground_state_of(alpha, p)?;
            let state = MfState::normalized(phi, *p)?;
            return Ok(MeanFieldSolution::from_state(
                state,
                MfMethod::Scf,
                iter,
                step,
            ));
        }
    }
    Err(Error::NoConvergence(max_iter))
}

/// Energy change of the scan minimum when `n_max` grows by two.
pub fn truncation_shift(p: &BHParams) -> Result<f64> {
    let base = minimize_scan_default(p)?.energy;
    let bigger = p.with_n_max(p.n_max + 2);
    let ext = minimize_scan_default(&bigger)?.energy;
    Ok((ext - base).abs())
}

/// Lattice energy per site of `φ^{⊗|V|}` next to the mean-field energy of `φ`;
/// the two coincide on every regular graph.
pub fn product_state_energy_identity(g: &Graph, state: &MfState) -> Result<(f64, f64)> {
    let lhs = product_state_energy_per_site(g, state.params(), state.phi())?;
    Ok((lhs, mf_energy(state)))
}

/// Mean-field observables over a `(J/U, μ/U)` grid, `U = 1`.
///
/// Matrices are indexed `[mu_index][j_index]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub j_grid: Vec<f64>,
    pub mu_grid: Vec<f64>,
    pub n_max: usize,
    pub alpha_threshold: f64,
    pub energy: Vec<Vec<f64>>,
    pub alpha_abs: Vec<Vec<f64>>,
    pub mean_n: Vec<Vec<f64>>,
}

pub const PHASE_CSV_HEADER: &str = "j_over_u,mu_over_u,energy,alpha_abs,mean_n";

impl PhaseDiagram {
    pub fn is_mott(&self, mu_index: usize, j_index: usize) -> bool {
        self.alpha_abs[mu_index][j_index] < self.alpha_threshold
    }

    pub fn mott_count(&self) -> usize {
        (0..self.mu_grid.len())
            .map(|m| {
                (0..self.j_grid.len())
                    .filter(|&j| self.is_mott(m, j))
                    .count()
            })
            .sum()
    }

    /// CSV body (header plus one row per grid point, μ outer, J inner),
    /// 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.j_grid.len() * self.mu_grid.len() * 120);
        out.push_str(PHASE_CSV_HEADER);
        out.push('\n');
        for (mi, mu) in self.mu_grid.iter().enumerate() {
            for (ji, j) in self.j_grid.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    fmt17(*j),
                    fmt17(*mu),
                    fmt17(self.energy[mi][ji]),
                    fmt17(self.alpha_abs[mi][ji]),
                    fmt17(self.mean_n[mi][ji])
                ));
            }
        }
        out
    }
}

/// Scientific notation with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Minimize the functional at every grid point (in units of `U`).
pub fn phase_scan(
    j_over_u: &[f64],
    mu_over_u: &[f64],
    n_max: usize,
    alpha_threshold: f64,
) -> Result<PhaseDiagram> {
    if j_over_u.is_empty() || mu_over_u.is_empty() {
        return Err(Error::InvalidParameter(
            "phase grid must be non-empty".into(),
        ));
    }
    let points: Vec<(usize, usize)> = (0..mu_over_u.len())
        .flat_map(|m| (0..j_over_u.len()).map(move |j| (m, j)))
        .collect();
    let results: Vec<Result<(f64, f64, f64)>> = points
        .par_iter()
        .map(|&(mi, ji)| {
            let p = BHParams::new(j_over_u[ji], mu_over_u[mi], 1.0, n_max)?;
            let sol = minimize_scan_default(&p)?;
            Ok((sol.energy, sol.alpha.norm(), sol.mean_n()))
        })
        .collect();

    let (nm, nj) = (mu_over_u.len(), j_over_u.len());
    let mut energy = vec![vec![0.0; nj]; nm];
    let mut alpha_abs = vec![vec![0.0; nj]; nm];
    let mut mean_n = vec![vec![0.0; nj]; nm];
    for (&(mi, ji), r) in points.iter().zip(results) {
        let (e, a, n) = r?;
        energy[mi][ji] = e;
        alpha_abs[mi][ji] = a;
        mean_n[mi][ji] = n;
    }
    Ok(PhaseDiagram {
        j_grid: j_over_u.to_vec(),
        mu_grid: mu_over_u.to_vec(),
        n_max,
        alpha_threshold,
        energy,
        alpha_abs,
        mean_n,
    })
}

/// `n` equally spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Bisect in `J` (units of `U`) at fixed `μ/U` for the edge of the Mott
/// region, to width `resolution`. `j_lo` must be Mott and `j_hi` superfluid.
pub fn mott_boundary(
    mu_over_u: f64,
    n_max: usize,
    j_lo: f64,
    j_hi: f64,
    alpha_threshold: f64,
    resolution: f64,
) -> Result<f64> {
    let is_mott = |j: f64| -> Result<bool> {
        let p = BHParams::new(j, mu_over_u, 1.0, n_max)?;
        Ok(minimize_scan_default(&p)?.is_mott(alpha_threshold))
    };
    let (mut lo, mut hi) = (j_lo, j_hi);
    if !is_mott(lo)? || is_mott(hi)? {
        return Err(Error::InvalidParameter(format!(
            "bracket [{j_lo}, {j_hi}] does not straddle the Mott boundary at mu/U = {mu_over_u}"
        )));
    }
    while hi - lo > resolution {
        let mid = 0.5 * (lo + hi);
        if is_mott(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Matrices of the one-site operators for the given cutoff.
pub fn site_ops(p: &BHParams) -> SiteOps {
    SiteOps::new(p.n_max)
}

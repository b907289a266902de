//! Regular graphs and the Bose-Hubbard Hamiltonian on them.
//!
//! The lattice Hamiltonian is
//!
//! ```text
//! H = -(J/z) Σ_{{x,y}∈E} (a†_x a_y + a†_y a_x) + (J - μ) Σ_x N_x + (U/2) Σ_x N_x (N_x - 1)
//! ```
//!
//! on the product of truncated one-site Fock spaces `span{|0>, …, |n_max>}`.
//! Product basis states are ordered lexicographically with site 0 slowest.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::lanczos::lanczos_ground_default;
use crate::numerics::{RngSeed, SparseHermitian, SparseMatrix};

/// Dense operator on the truncated one-site Fock space.
pub type OneSiteOperator = DMatrix<Complex64>;

/// Largest product-space dimension accepted by [`build_hamiltonian`].
pub const LATTICE_MAX_DIM: u128 = 1 << 24;

/// Bose-Hubbard couplings and Fock cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BHParams {
    /// Hopping amplitude.
    pub j: f64,
    /// Chemical potential.
    pub mu: f64,
    /// On-site interaction.
    pub u: f64,
    /// Maximal occupation per site.
    pub n_max: usize,
}

impl BHParams {
    pub fn new(j: f64, mu: f64, u: f64, n_max: usize) -> Result<Self> {
        let p = Self { j, mu, u, n_max };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_max < 1 {
            return Err(Error::InvalidParameter("n_max must be at least 1".into()));
        }
        for (name, v) in [("J", self.j), ("mu", self.mu), ("U", self.u)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn with_n_max(self, n_max: usize) -> Self {
        Self { n_max, ..self }
    }

    pub fn with_j(self, j: f64) -> Self {
        Self { j, ..self }
    }

    pub fn local_dim(&self) -> usize {
        self.n_max + 1
    }
}

/// Matrices of `a`, `a†`, `N`, `N²` on the truncated one-site space.
#[derive(Debug, Clone)]
pub struct SiteOps {
    pub a: OneSiteOperator,
    pub a_dag: OneSiteOperator,
    pub number: OneSiteOperator,
    pub number_sq: OneSiteOperator,
}

impl SiteOps {
    pub fn new(n_max: usize) -> Self {
        let d = n_max + 1;
        let zero = Complex64::new(0.0, 0.0);
        let a = DMatrix::from_fn(d, d, |i, j| {
            if j == i + 1 {
                Complex64::new((j as f64).sqrt(), 0.0)
            } else {
                zero
            }
        });
        let a_dag = a.adjoint();
        let number = DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                Complex64::new(i as f64, 0.0)
            } else {
                zero
            }
        });
        let number_sq = &number * &number;
        Self {
            a,
            a_dag,
            number,
            number_sq,
        }
    }
}

/// Simple undirected graph in which every vertex has the same degree `z`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    pub n_vertices: usize,
    #[serde(rename = "z")]
    pub coordination: usize,
    pub edges: Vec<[usize; 2]>,
}

impl Graph {
    /// Build from an edge list and check regularity, simplicity and
    /// `|E| = z |V| / 2`.
    pub fn from_edges(n_vertices: usize, edges: Vec<[usize; 2]>) -> Result<Self> {
        let z = if n_vertices == 0 {
            0
        } else {
            2 * edges.len() / n_vertices
        };
        let g = Self {
            n_vertices,
            coordination: z,
            edges,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_vertices == 0 {
            return Err(Error::InvalidSize("graph has no vertices".into()));
        }
        let mut seen = BTreeSet::new();
        let mut degree = vec![0usize; self.n_vertices];
        for &[x, y] in &self.edges {
            if x >= self.n_vertices || y >= self.n_vertices {
                return Err(Error::InvalidSize(format!("edge ({x}, {y}) out of range")));
            }
            if x == y {
                return Err(Error::InvalidSize(format!("self-loop at vertex {x}")));
            }
            if !seen.insert((x.min(y), x.max(y))) {
                return Err(Error::InvalidSize(format!("duplicate edge ({x}, {y})")));
            }
            degree[x] += 1;
            degree[y] += 1;
        }
        if let Some((v, &d)) = degree
            .iter()
            .enumerate()
            .find(|(_, &d)| d != self.coordination)
        {
            return Err(Error::InvalidSize(format!(
                "vertex {v} has degree {d}, expected {}",
                self.coordination
            )));
        }
        if 2 * self.edges.len() != self.coordination * self.n_vertices {
            return Err(Error::InvalidSize(
                "edge count differs from z |V| / 2".into(),
            ));
        }
        Ok(())
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut degree = vec![0usize; self.n_vertices];
        for &[x, y] in &self.edges {
            degree[x] += 1;
            degree[y] += 1;
        }
        degree
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let g: Graph = serde_json::from_str(s)
            .map_err(|e| Error::InvalidParameter(format!("graph JSON: {e}")))?;
        g.validate()?;
        Ok(g)
    }
}

fn torus_index(coords: &[usize], l: usize) -> usize {
    coords.iter().fold(0, |acc, &c| acc * l + c)
}

fn torus_coords(mut index: usize, d: usize, l: usize) -> Vec<usize> {
    let mut c = vec![0; d];
    for k in (0..d).rev() {
        c[k] = index % l;
        index /= l;
    }
    c
}

/// Build the graph on `(Z/LZ)^d` connecting `x` to `x + v` for every offset
/// in `offsets` (the offset set must be symmetric under `v -> -v`).
fn periodic_graph(d: usize, l: usize, offsets: &[Vec<i64>]) -> Result<Graph> {
    let n = l
        .checked_pow(d as u32)
        .ok_or_else(|| Error::InvalidSize(format!("L^d overflows for L = {l}, d = {d}")))?;
    let mut edges = BTreeSet::new();
    for x in 0..n {
        let cx = torus_coords(x, d, l);
        for v in offsets {
            let cy: Vec<usize> = cx
                .iter()
                .zip(v)
                .map(|(&c, &dv)| (c as i64 + dv).rem_euclid(l as i64) as usize)
                .collect();
            let y = torus_index(&cy, l);
            edges.insert((x.min(y), x.max(y)));
        }
    }
    Graph::from_edges(n, edges.into_iter().map(|(x, y)| [x, y]).collect())
}

/// `d`-dimensional periodic square lattice with side `L` and nearest-neighbour
/// edges, `z = 2d`.
pub fn make_torus(d: usize, l: usize) -> Result<Graph> {
    if d == 0 {
        return Err(Error::InvalidSize("dimension d must be at least 1".into()));
    }
    if l < 3 {
        return Err(Error::InvalidSize(format!(
            "torus side L = {l} < 3 creates duplicate edges"
        )));
    }
    let offsets: Vec<Vec<i64>> = (0..d)
        .flat_map(|k| {
            [1i64, -1].into_iter().map(move |s| {
                let mut v = vec![0i64; d];
                v[k] = s;
                v
            })
        })
        .collect();
    periodic_graph(d, l, &offsets)
}

/// Non-zero vectors of `Z^3` with Euclidean norm at most `r`.
pub fn ball_offsets(r: f64) -> Vec<Vec<i64>> {
    let reach = r.floor() as i64;
    let r2 = r * r * (1.0 + 1e-12);
    let mut out = Vec::new();
    for x in -reach..=reach {
        for y in -reach..=reach {
            for z in -reach..=reach {
                let n2 = (x * x + y * y + z * z) as f64;
                if n2 > 0.0 && n2 <= r2 {
                    out.push(vec![x, y, z]);
                }
            }
        }
    }
    out
}

/// Periodic cubic lattice `(Z/LZ)^3` where every pair of sites at
/// minimum-image Euclidean distance at most `r` is connected.
///
/// Requires `L >= 2r + 1` so that the ball around each site wraps without
/// overlapping itself.
pub fn make_ball_graph(l: usize, r: f64) -> Result<Graph> {
    if !(r >= 1.0) || !r.is_finite() {
        return Err(Error::InvalidSize(format!(
            "radius r = {r} must be at least 1"
        )));
    }
    if (l as f64) < 2.0 * r + 1.0 {
        return Err(Error::InvalidSize(format!(
            "L = {l} < 2r + 1 = {}",
            2.0 * r + 1.0
        )));
    }
    periodic_graph(3, l, &ball_offsets(r))
}

/// Dimension `(n_max + 1)^n_vertices` of the product Fock space, guarded.
pub fn product_dim(n_vertices: usize, n_max: usize) -> Result<usize> {
    let mut dim: u128 = 1;
    for _ in 0..n_vertices {
        dim = dim.saturating_mul(n_max as u128 + 1);
        if dim > LATTICE_MAX_DIM {
            let exact = (n_max as u128 + 1)
                .checked_pow(n_vertices as u32)
                .unwrap_or(u128::MAX);
            return Err(Error::DimensionGuard {
                dim: exact,
                limit: LATTICE_MAX_DIM,
            });
        }
    }
    Ok(dim as usize)
}

/// Occupation numbers of product basis state `index` (site 0 slowest).
pub fn decode_occupations(mut index: usize, n_sites: usize, local_dim: usize) -> Vec<usize> {
    let mut occ = vec![0; n_sites];
    for s in (0..n_sites).rev() {
        occ[s] = index % local_dim;
        index /= local_dim;
    }
    occ
}

/// Matrix of the Bose-Hubbard Hamiltonian in the lexicographic product basis.
pub fn build_hamiltonian(g: &Graph, p: &BHParams) -> Result<SparseHermitian> {
    p.validate()?;
    g.validate()?;
    let n = g.n_vertices;
    let d = p.local_dim();
    let dim = product_dim(n, p.n_max)?;
    let z = g.coordination as f64;
    let hop = -p.j / z;

    let mut stride = vec![1usize; n];
    for s in (0..n.saturating_sub(1)).rev() {
        stride[s] = stride[s + 1] * d;
    }

    let mut triplets = Vec::with_capacity(dim * (1 + 2 * g.edges.len()));
    for idx in 0..dim {
        let occ = decode_occupations(idx, n, d);
        let diag: f64 = occ
            .iter()
            .map(|&k| {
                let k = k as f64;
                (p.j - p.mu) * k + 0.5 * p.u * k * (k - 1.0)
            })
            .sum();
        if diag != 0.0 {
            triplets.push((idx, idx, Complex64::new(diag, 0.0)));
        }
        if hop == 0.0 {
            continue;
        }
        for &[x, y] in &g.edges {
            for (to, from) in [(x, y), (y, x)] {
                // a†_to a_from
                let (nt, nf) = (occ[to], occ[from]);
                if nf == 0 || nt == p.n_max {
                    continue;
                }
                let amp = hop * (((nt + 1) * nf) as f64).sqrt();
                let target = idx + stride[to] - stride[from];
                triplets.push((target, idx, Complex64::new(amp, 0.0)));
            }
        }
    }
    Ok(SparseHermitian::new_unchecked(SparseMatrix::from_triplets(
        dim, triplets,
    )?))
}

/// Ground state of the lattice Hamiltonian.
#[derive(Debug, Clone)]
pub struct LatticeGround {
    pub energy: f64,
    pub energy_per_site: f64,
    pub vector: Vec<Complex64>,
    pub iterations: usize,
}

pub fn lattice_ground(g: &Graph, p: &BHParams, seed: RngSeed) -> Result<LatticeGround> {
    let h = build_hamiltonian(g, p)?;
    let gp = lanczos_ground_default(&h, seed)?;
    Ok(LatticeGround {
        energy: gp.eigenvalue,
        energy_per_site: gp.eigenvalue / g.n_vertices as f64,
        vector: gp.eigenvector,
        iterations: gp.iterations,
    })
}

/// `λ_min(H) / |V|`.
pub fn ground_energy_per_site(g: &Graph, p: &BHParams) -> Result<f64> {
    Ok(lattice_ground(g, p, RngSeed::default())?.energy_per_site)
}

/// The product vector `φ ⊗ φ ⊗ … ⊗ φ` on `n_sites` sites.
pub fn product_vector(phi: &[Complex64], n_sites: usize) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(1.0, 0.0)];
    for _ in 0..n_sites {
        v = v
            .iter()
            .flat_map(|a| phi.iter().map(move |b| a * b))
            .collect();
    }
    v
}

/// `<φ^{⊗|V|}, H φ^{⊗|V|}> / |V|`, evaluated on the full lattice Hamiltonian.
pub fn product_state_energy_per_site(g: &Graph, p: &BHParams, phi: &[Complex64]) -> Result<f64> {
    if phi.len() != p.local_dim() {
        return Err(Error::DimensionMismatch {
            expected: p.local_dim(),
            got: phi.len(),
        });
    }
    let h = build_hamiltonian(g, p)?;
    let psi = product_vector(phi, g.n_vertices);
    Ok(h.expectation(&psi) / g.n_vertices as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kron_site(op: &OneSiteOperator, site: usize, n: usize) -> DMatrix<Complex64> {
        let d = op.nrows();
        let mut m = DMatrix::<Complex64>::identity(1, 1);
        for s in 0..n {
            let factor = if s == site {
                op.clone()
            } else {
                DMatrix::identity(d, d)
            };
            m = m.kronecker(&factor);
        }
        m
    }

    /// Dense sum of Kronecker-lifted one- and two-site operators.
    fn dense_oracle(g: &Graph, p: &BHParams) -> DMatrix<Complex64> {
        let ops = SiteOps::new(p.n_max);
        let n = g.n_vertices;
        let dim = p.local_dim().pow(n as u32);
        let mut h = DMatrix::<Complex64>::zeros(dim, dim);
        let z = g.coordination as f64;
        for &[x, y] in &g.edges {
            let t = kron_site(&ops.a_dag, x, n) * kron_site(&ops.a, y, n);
            h -= (&t + t.adjoint()) * Complex64::new(p.j / z, 0.0);
        }
        let onsite = &ops.number * Complex64::new(p.j - p.mu, 0.0)
            + (&ops.number_sq - &ops.number) * Complex64::new(0.5 * p.u, 0.0);
        for x in 0..n {
            h += kron_site(&onsite, x, n);
        }
        h
    }

    #[test]
    fn site_operators() {
        let ops = SiteOps::new(3);
        assert!((&ops.a_dag * &ops.a - &ops.number).norm() < 1e-15);
        assert!((ops.a[(0, 1)].re - 1.0).abs() < 1e-15);
        assert!((ops.a[(2, 3)].re - 3f64.sqrt()).abs() < 1e-15);
        // truncation: a†|n_max> = 0
        assert!(ops.a_dag.column(3).norm() == 0.0);
    }

    #[test]
    fn torus_counts() {
        for (d, l, v, e, z) in [(1, 4, 4, 4, 2), (2, 3, 9, 18, 4), (3, 3, 27, 81, 6)] {
            let g = make_torus(d, l).unwrap();
            assert_eq!((g.n_vertices, g.edges.len(), g.coordination), (v, e, z));
            assert_eq!(2 * g.edges.len(), g.coordination * g.n_vertices);
        }
        assert!(matches!(make_torus(2, 2), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn ball_graph_coordination() {
        // brute-force count of lattice vectors with 0 < |v|^2 <= r^2
        let count = |r2: i64| {
            let mut c = 0;
            for x in -3i64..=3 {
                for y in -3i64..=3 {
                    for z in -3i64..=3 {
                        let n = x * x + y * y + z * z;
                        if n > 0 && n <= r2 {
                            c += 1;
                        }
                    }
                }
            }
            c
        };
        assert_eq!(count(2), 18);
        assert_eq!(count(3), 26);
        assert_eq!(make_ball_graph(5, 1.0).unwrap().coordination, 6);
        assert_eq!(
            make_ball_graph(7, 2f64.sqrt()).unwrap().coordination,
            count(2)
        );
        assert_eq!(
            make_ball_graph(7, 3f64.sqrt()).unwrap().coordination,
            count(3)
        );
        assert!(make_ball_graph(3, 2f64.sqrt()).is_err());
    }

    #[test]
    fn graph_json_round_trip() {
        let g = make_torus(2, 3).unwrap();
        let s = g.to_json();
        assert!(s.starts_with("{\"n_vertices\":9,\"z\":4,\"edges\":[["));
        assert_eq!(Graph::from_json(&s).unwrap(), g);
    }

    #[test]
    fn irregular_graph_is_rejected() {
        assert!(Graph::from_edges(3, vec![[0, 1], [1, 2]]).is_err());
        assert!(Graph::from_edges(2, vec![[0, 1], [1, 0]]).is_err());
        assert!(Graph::from_edges(2, vec![[0, 0], [1, 1]]).is_err());
    }

    #[test]
    fn zero_hopping_is_diagonal_chemical_potential() {
        let g = make_torus(1, 4).unwrap();
        let p = BHParams::new(0.0, 0.7, 1.0, 1).unwrap();
        let h = build_hamiltonian(&g, &p).unwrap();
        for idx in 0..h.dim() {
            let occ: usize = decode_occupations(idx, 4, 2).iter().sum();
            assert!((h.as_matrix().get(idx, idx).re + 0.7 * occ as f64).abs() < 1e-14);
            assert_eq!(h.as_matrix().row(idx).count(), if occ == 0 { 0 } else { 1 });
        }
    }

    #[test]
    fn vacuum_energy_and_ground_energy_sign() {
        let g = make_torus(1, 4).unwrap();
        let p = BHParams::new(1.0, 0.5, 1.0, 2).unwrap();
        let h = build_hamiltonian(&g, &p).unwrap();
        assert_eq!(h.as_matrix().get(0, 0).re, 0.0);
        assert!(ground_energy_per_site(&g, &p).unwrap() <= 0.0);
    }

    #[test]
    fn matches_dense_kronecker_oracle() {
        for (g, p) in [
            (
                make_torus(1, 4).unwrap(),
                BHParams::new(0.8, 0.3, 1.2, 2).unwrap(),
            ),
            (
                make_torus(2, 3).unwrap(),
                BHParams::new(0.4, 0.5, 1.0, 1).unwrap(),
            ),
            (
                make_torus(1, 3).unwrap(),
                BHParams::new(1.0, -0.2, 0.7, 4).unwrap(),
            ),
        ] {
            let h = build_hamiltonian(&g, &p).unwrap().to_dense();
            let oracle = dense_oracle(&g, &p);
            assert!((h - oracle).norm() <= 1e-10);
        }
    }

    #[test]
    fn decoupled_sites_fill_to_one() {
        // J = 0, 0 < mu < U: each site minimizes -mu n + U n(n-1)/2 at n = 1.
        let best = (0..10i64)
            .map(|n| -0.5 * n as f64 + 0.5 * (n * (n - 1)) as f64)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(best, -0.5);
        for g in [make_torus(1, 4).unwrap(), make_torus(2, 3).unwrap()] {
            let p = BHParams::new(0.0, 0.5, 1.0, 2).unwrap();
            assert!((ground_energy_per_site(&g, &p).unwrap() - best).abs() < 1e-10);
            let p = BHParams::new(0.0, -0.3, 1.0, 2).unwrap();
            assert!(ground_energy_per_site(&g, &p).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_guard() {
        let g = make_torus(3, 3).unwrap();
        let p = BHParams::new(1.0, 0.5, 1.0, 2).unwrap();
        assert!(matches!(
            build_hamiltonian(&g, &p),
            Err(Error::DimensionGuard { .. })
        ));
    }
}

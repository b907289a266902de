//! Seeded random sources: Gaussian vectors, Haar-distributed points on the
//! complex unit sphere, random Hermitian matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dense::DenseHermitian;
use crate::error::{Error, Result};

/// Seed of a reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Independent stream number `index` derived from this seed. Used to
    /// split Monte-Carlo budgets into fixed partitions.
    pub fn stream(self, index: u64) -> ChaCha8Rng {
        let mut rng = self.rng();
        rng.set_stream(index.wrapping_add(1));
        rng
    }

    /// A different seed derived deterministically from this one.
    pub fn derive(self, salt: u64) -> RngSeed {
        // splitmix64 finalizer
        let mut x = self.0 ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RngSeed(x ^ (x >> 31))
    }
}

impl Default for RngSeed {
    fn default() -> Self {
        RngSeed(42)
    }
}

pub fn complex_gaussian<R: rand::Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im)
}

pub fn gaussian_vector<R: rand::Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<Complex64> {
    (0..dim).map(|_| complex_gaussian(rng)).collect()
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalize(v: &mut [Complex64]) -> f64 {
    let n = norm(v);
    v.iter_mut().for_each(|z| *z /= n);
    n
}

/// Haar-distributed unit vector in `C^{m+1}` drawn from `rng`.
pub fn haar_point<R: rand::Rng + ?Sized>(rng: &mut R, m: usize) -> Vec<Complex64> {
    loop {
        let mut u = gaussian_vector(rng, m + 1);
        if norm(&u) > 1e-300 {
            normalize(&mut u);
            return u;
        }
    }
}

/// `count` i.i.d. Haar-distributed unit vectors in `C^{m+1}`.
pub fn haar_sphere_sample(m: usize, seed: RngSeed, count: usize) -> Result<Vec<Vec<Complex64>>> {
    if count == 0 {
        return Err(Error::InvalidParameter("count must be at least 1".into()));
    }
    let mut rng = seed.rng();
    Ok((0..count).map(|_| haar_point(&mut rng, m)).collect())
}

/// Random Hermitian matrix with i.i.d. complex Gaussian entries (GUE-like).
pub fn random_hermitian(dim: usize, seed: RngSeed) -> DenseHermitian {
    let mut rng = seed.rng();
    let g = DMatrix::from_fn(dim, dim, |_, _| complex_gaussian(&mut rng));
    DenseHermitian::symmetrized(g).expect("symmetrized matrix is Hermitian")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_samples_have_unit_modulus() {
        let s = haar_sphere_sample(0, RngSeed(3), 100).unwrap();
        for u in s {
            assert_eq!(u.len(), 1);
            assert!((u[0].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = haar_sphere_sample(2, RngSeed(99), 50).unwrap();
        let b = haar_sphere_sample(2, RngSeed(99), 50).unwrap();
        assert_eq!(a, b);
        let c = haar_sphere_sample(2, RngSeed(100), 50).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_count_is_rejected() {
        assert!(haar_sphere_sample(1, RngSeed(1), 0).is_err());
    }

    #[test]
    fn first_moment_is_maximally_mixed() {
        // Average of |u><u| over the sphere in C^2 is I/2.
        let count = 100_000;
        let samples = haar_sphere_sample(1, RngSeed(2024), count).unwrap();
        let mut avg = DMatrix::<Complex64>::zeros(2, 2);
        for u in &samples {
            for i in 0..2 {
                for j in 0..2 {
                    avg[(i, j)] += u[i] * u[j].conj();
                }
            }
        }
        avg /= Complex64::new(count as f64, 0.0);
        let target = DMatrix::<Complex64>::identity(2, 2) * Complex64::new(0.5, 0.0);
        let err = (avg - target).norm();
        // E|p_u - I/2|_F^2 = 1/2, so sigma of the mean is sqrt(1/(2 count)).
        let sigma = (0.5 / count as f64).sqrt();
        assert!(err < 0.02, "first moment error {err}");
        assert!(
            err < 3.0 * sigma,
            "first moment error {err} above 3 sigma {sigma}"
        );
        for u in &samples {
            assert!((norm(u) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn streams_are_distinct() {
        use rand::Rng;
        let a: u64 = RngSeed(5).stream(0).random();
        let b: u64 = RngSeed(5).stream(1).random();
        assert_ne!(a, b);
    }
}

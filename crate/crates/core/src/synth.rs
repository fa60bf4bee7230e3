//! Seeded generators for test inputs: orthogonal matrices, SPD matrices with a
//! prescribed spectrum and feature blocks whose covariance is known exactly.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
use crate::spectral::{FeatureMatrix, SymPsdMatrix};

/// The crate-wide deterministic generator.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vec<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// Orthonormalizes the columns of `m` in place (modified Gram-Schmidt, two
/// passes). Returns false if a column collapses.
fn orthonormalize_columns(m: &mut Matrix) -> bool {
    let (rows, cols) = (m.rows(), m.cols());
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cols);
    for j in 0..cols {
        let mut v = m.column(j);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &v);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = dot(&v, &v).sqrt();
        if n < 1e-10 * (rows as f64).sqrt() {
            return false;
        }
        v.iter_mut().for_each(|x| *x /= n);
        basis.push(v);
    }
    for (j, b) in basis.iter().enumerate() {
        m.set_column(j, b);
    }
    true
}

/// Random `d x d` orthogonal matrix.
pub fn random_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Matrix {
    loop {
        let mut g = gaussian_matrix(d, d, rng);
        if orthonormalize_columns(&mut g) {
            return g;
        }
    }
}

/// `λ_i = cond^{-(i-1)/(d-1)}`: largest eigenvalue 1, smallest `1/cond`.
pub fn geometric_spectrum(d: usize, cond: f64) -> Vec<f64> {
    if d == 1 {
        return alloc::vec![1.0];
    }
    (0..d).map(|i| cond.powf(-(i as f64) / (d - 1) as f64)).collect()
}

/// `U diag(λ) U^T` for a random orthogonal `U`.
pub fn spd_with_spectrum<R: Rng + ?Sized>(eigenvalues: &[f64], rng: &mut R) -> SymPsdMatrix {
    let u = random_orthogonal(eigenvalues.len(), rng);
    let mut scaled = u.clone();
    for j in 0..eigenvalues.len() {
        for i in 0..eigenvalues.len() {
            scaled[(i, j)] *= eigenvalues[j];
        }
    }
    SymPsdMatrix::new(scaled.matmul_t(&u)).expect("finite by construction")
}

/// A `d x N` feature block whose covariance is `U diag(λ) U^T` exactly (up to
/// roundoff) for a random orthogonal `U`. Needs `N >= d + 1`.
pub fn features_with_spectrum<R: Rng + ?Sized>(eigenvalues: &[f64], n: usize, rng: &mut R) -> Result<FeatureMatrix> {
    let d = eigenvalues.len();
    if n < d + 1 {
        return Err(Error::invalid(alloc::format!("need at least d + 1 = {} samples, got {n}", d + 1)));
    }
    let u = random_orthogonal(d, rng);
    // Columns of z: the constant direction first, then d random directions
    // orthogonalized against it, so every row of the result has zero mean.
    let z = loop {
        let mut z = gaussian_matrix(n, d + 1, rng);
        z.set_column(0, &alloc::vec![1.0; n]);
        if orthonormalize_columns(&mut z) {
            break z;
        }
    };
    let scale = (n as f64).sqrt();
    let mut x = Matrix::zeros(d, n);
    for i in 0..d {
        for k in 0..d {
            let c = scale * u[(i, k)] * eigenvalues[k].max(0.0).sqrt();
            if c == 0.0 {
                continue;
            }
            for s in 0..n {
                x[(i, s)] += c * z[(s, k + 1)];
            }
        }
    }
    FeatureMatrix::new(x)
}

/// Gaussian `d x N` feature block.
pub fn random_features<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> Result<FeatureMatrix> {
    FeatureMatrix::new(gaussian_matrix(d, n, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{covariance, eigh};

    #[test]
    fn orthogonal_is_orthogonal() {
        let mut rng = seeded_rng(3);
        let q = random_orthogonal(6, &mut rng);
        assert!(q.t_matmul(&q).max_abs_diff(&Matrix::identity(6)) < 1e-13);
    }

    #[test]
    fn features_have_requested_covariance() {
        let mut rng = seeded_rng(11);
        let spec = geometric_spectrum(5, 1e4);
        let x = features_with_spectrum(&spec, 12, &mut rng).unwrap();
        let e = eigh(&covariance(&x)).unwrap();
        for (a, b) in e.eigenvalues().iter().zip(&spec) {
            assert!((a - b).abs() < 1e-13, "{a} vs {b}");
        }
    }

    #[test]
    fn same_seed_same_draws() {
        let a = gaussian_matrix(3, 4, &mut seeded_rng(9));
        let b = gaussian_matrix(3, 4, &mut seeded_rng(9));
        assert_eq!(a, b);
    }
}

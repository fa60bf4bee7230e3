//! Minimum-norm least squares through a one-sided Jacobi SVD.

use alloc::vec;
use alloc::vec::Vec;


#[allow(unused_imports)]
use num_traits::Float;

use crate::matrix::{dot, Matrix};

const MAX_SWEEPS: usize = 80;

/// Returns the `x` of smallest norm minimizing `|A x - b|`. Singular values
/// below `max(m, n) * eps * σ_max` are treated as zero.
pub(crate) fn min_norm_solve(a: &Matrix, b: &[f64]) -> Vec<f64> {
    let (m, n) = (a.rows(), a.cols());
    assert_eq!(b.len(), m);
    // Columns of `w` are rotated until mutually orthogonal: A V = W = U Σ.
    let mut w: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut v = Matrix::identity(n);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&w[p], &w[p]);
                let beta = dot(&w[q], &w[q]);
                let gamma = dot(&w[p], &w[q]);
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..m {
                    let (wp, wq) = (w[p][k], w[q][k]);
                    w[p][k] = c * wp - s * wq;
                    w[q][k] = s * wp + c * wq;
                }
                for k in 0..n {
                    let (vp, vq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vp - s * vq;
                    v[(k, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let sigma: Vec<f64> = w.iter().map(|c| dot(c, c).sqrt()).collect();
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    let cutoff = (m.max(n) as f64) * f64::EPSILON * smax;
    let mut x = vec![0.0; n];
    for j in 0..n {
        if sigma[j] <= cutoff || sigma[j] == 0.0 {
            continue;
        }
        // Coefficient along the j-th right singular vector: u_j . b / σ_j.
        let coef = dot(&w[j], b) / (sigma[j] * sigma[j]);
        for k in 0..n {
            x[k] += coef * v[(k, j)];
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_nonsingular() {
        let a = Matrix::from_rows(&[[2.0, 1.0], [1.0, 3.0]]);
        let x = min_norm_solve(&a, &[3.0, 5.0]);
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn rank_one_gives_minimum_norm() {
        // All-ones 3x3: every solution of x1 + x2 + x3 = -1 fits; the
        // minimum-norm one spreads it evenly.
        let a = Matrix::filled(3, 3, 1.0);
        let x = min_norm_solve(&a, &[-1.0, -1.0, -1.0]);
        for xi in x {
            assert!((xi + 1.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn overdetermined_least_squares() {
        // Fit y = c to (1, 2, 3): c = 2.
        let a = Matrix::from_rows(&[[1.0], [1.0], [1.0]]);
        let x = min_norm_solve(&a, &[1.0, 2.0, 3.0]);
        assert!((x[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn zero_matrix() {
        assert_eq!(min_norm_solve(&Matrix::zeros(2, 2), &[1.0, 1.0]), vec![0.0, 0.0]);
    }
}

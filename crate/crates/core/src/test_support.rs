//! Finite-difference helpers shared by unit tests.

use crate::matrix::Matrix;

/// Central differences of `f` at symmetric `p` along symmetric directions:
/// entry `(i, j)` is the derivative along `E_ij + E_ji` off the diagonal and
/// along `E_ii` on it.
pub fn fd_sym_grad(p: &Matrix, mut f: impl FnMut(&Matrix) -> f64) -> Matrix {
    let d = p.rows();
    let mut out = Matrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let h = 1e-6 * (1.0 + p[(i, j)].abs());
            let mut plus = p.clone();
            let mut minus = p.clone();
            plus[(i, j)] += h;
            minus[(i, j)] -= h;
            if i != j {
                plus[(j, i)] += h;
                minus[(j, i)] -= h;
            }
            let v = (f(&plus) - f(&minus)) / (2.0 * h);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Analytic counterpart of [`fd_sym_grad`]: `G_ij + G_ji` off the diagonal,
/// `G_ii` on it.
pub fn sym_fold(g: &Matrix) -> Matrix {
    let d = g.rows();
    Matrix::from_fn(d, d, |i, j| if i == j { g[(i, i)] } else { g[(i, j)] + g[(j, i)] })
}

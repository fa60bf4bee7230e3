//! Coupled Newton-Schulz iteration for the matrix square root and its
//! reverse-mode gradient.

use alloc::format;
use alloc::vec::Vec;


#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::spectral::{FeatureMatrix, SymPsdMatrix};

pub const DEFAULT_ITERATIONS: usize = 5;

const DIVERGENCE_LIMIT: f64 = 1e6;

/// Every iterate of a forward run, kept for the backward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonSchulzTrace {
    iterations: usize,
    y_seq: Vec<Matrix>,
    z_seq: Vec<Matrix>,
    trace_p: f64,
}

impl NewtonSchulzTrace {
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// `Y_0 ... Y_N`; `Y_0 = P / tr(P)`.
    pub fn y_seq(&self) -> &[Matrix] {
        &self.y_seq
    }

    /// `Z_0 ... Z_N`; `Z_0 = I`.
    pub fn z_seq(&self) -> &[Matrix] {
        &self.z_seq
    }

    pub fn trace_p(&self) -> f64 {
        self.trace_p
    }

    pub fn dim(&self) -> usize {
        self.y_seq[0].rows()
    }

    fn t_factor(&self, k: usize) -> Matrix {
        half_three_minus(&self.z_seq[k].matmul(&self.y_seq[k]))
    }
}

/// `(3I - M) / 2`
fn half_three_minus(m: &Matrix) -> Matrix {
    m.scale(-0.5).add_scaled_identity(1.5)
}

/// Approximate `P^{1/2}` by `iterations` coupled Newton-Schulz steps on
/// `A = P / tr(P)`, then rescale by `sqrt(tr(P))`.
pub fn ns_forward(p: &SymPsdMatrix, iterations: usize) -> Result<(SymPsdMatrix, NewtonSchulzTrace)> {
    if iterations == 0 {
        return Err(Error::invalid("Newton-Schulz needs at least one iteration"));
    }
    let tr = p.trace();
    if !(tr > 0.0) {
        return Err(Error::domain(format!("trace of P must be positive, got {tr:e}")));
    }
    let d = p.dim();
    let a = p.as_matrix().scale(1.0 / tr);
    let mut y_seq = Vec::with_capacity(iterations + 1);
    let mut z_seq = Vec::with_capacity(iterations + 1);
    y_seq.push(a);
    z_seq.push(Matrix::identity(d));
    for k in 1..=iterations {
        let (y, z) = (&y_seq[k - 1], &z_seq[k - 1]);
        let t = half_three_minus(&z.matmul(y));
        let y_next = y.matmul(&t);
        let z_next = t.matmul(z);
        let size = y_next.max_abs();
        if !(size <= DIVERGENCE_LIMIT) {
            return Err(Error::numerical(format!(
                "Newton-Schulz diverged at iteration {k}: max |Y_k| = {size:e}"
            )));
        }
        y_seq.push(y_next);
        z_seq.push(z_next);
    }
    let q = SymPsdMatrix::new(y_seq[iterations].scale(tr.sqrt()))?;
    Ok((q, NewtonSchulzTrace { iterations, y_seq, z_seq, trace_p: tr }))
}

/// `∂l/∂P` from `∂l/∂Q` by reverse mode through every iteration plus the
/// trace normalization and compensation.
pub fn ns_backward(trace: &NewtonSchulzTrace, grad_q: &Matrix) -> Result<Matrix> {
    let d = trace.dim();
    grad_q.check_shape(d, d, "grad_q")?;
    let tr = trace.trace_p;
    let sqrt_tr = tr.sqrt();
    let n = trace.iterations;

    let mut g_y = grad_q.scale(sqrt_tr);
    let mut g_z = Matrix::zeros(d, d);
    for k in (1..=n).rev() {
        let y_prev = &trace.y_seq[k - 1];
        let z_prev = &trace.z_seq[k - 1];
        let t = trace.t_factor(k - 1);
        // Y_k = Y_{k-1} T, Z_k = T Z_{k-1}, T = (3I - Z_{k-1} Y_{k-1}) / 2
        let g_t = y_prev.t_matmul(&g_y).add(&g_z.matmul_t(z_prev));
        let g_y_prev = g_y.matmul_t(&t).sub(&z_prev.t_matmul(&g_t).scale(0.5));
        let g_z_prev = t.t_matmul(&g_z).sub(&g_t.matmul_t(y_prev).scale(0.5));
        g_y = g_y_prev;
        g_z = g_z_prev;
    }
    let g_a = g_y;
    let p = trace.y_seq[0].scale(tr);
    let y_n = &trace.y_seq[n];
    let diag = -g_a.frobenius_dot(&p) / (tr * tr) + grad_q.frobenius_dot(y_n) / (2.0 * sqrt_tr);
    Ok(g_a.scale(1.0 / tr).add_scaled_identity(diag))
}

/// `∂l/∂X = (G + G^T) X Ī` for `G = ∂l/∂P`. Shared by every backward scheme.
pub fn ns_gradient_of_x(grad_p: &Matrix, x: &FeatureMatrix) -> Result<Matrix> {
    let d = x.dim();
    grad_p.check_shape(d, d, "grad_p")?;
    let sym = grad_p.add(&grad_p.transpose());
    Ok(sym.matmul(&x.centered_scaled()))
}

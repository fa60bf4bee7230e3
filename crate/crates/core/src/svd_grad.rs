//! Backward schemes for the eigendecomposition-based square root.
//!
//! All of them share `∂l/∂P = U (K^T ∘ (U^T ∂l/∂U) + diag(∂l/∂Λ)) U^T` and
//! differ only in how the kernel `K_ij ≈ 1/(λ_i - λ_j)` is formed. Power
//! iteration is the exception: it differentiates through the iteration itself.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::matrix::{dot, norm2, Matrix};
use crate::pade::{eval_rational, geometric_pade, PadeApproximant};
use crate::spectral::{EigenDecomposition, Precision, SymPsdMatrix};
use crate::synth::{gaussian_matrix, seeded_rng};

pub const DEFAULT_TRUNC_THRESHOLD: f64 = 1e10;
pub const DEFAULT_DEGREE: usize = 100;
pub const DEFAULT_NS_BACKWARD_ITERATIONS: usize = 10;
pub const DEFAULT_PI_ITERATIONS: usize = 19;
pub const DEFAULT_BETA_SAMPLES: usize = 64;
pub const DEFAULT_BETA_SCALE: f64 = 1e-3;

/// Default Top-N for dimension `d`: the 200-of-256 ratio, at least 1.
pub fn default_top_n(d: usize) -> usize {
    (((d as f64) * 200.0 / 256.0).round() as usize).clamp(1, d.max(1))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BackwardScheme {
    Ordinary,
    TopN(usize),
    Trunc(f64),
    PowerIteration(usize),
    Taylor(usize),
    Pade(usize),
    NewtonSchulzBackward(usize),
}

impl BackwardScheme {
    /// Scheme by command-line name with default parameters for dimension `d`.
    pub fn from_name(name: &str, d: usize) -> Result<Self> {
        Ok(match name {
            "ordinary" | "svd" => Self::Ordinary,
            "topn" => Self::TopN(default_top_n(d)),
            "trunc" => Self::Trunc(DEFAULT_TRUNC_THRESHOLD),
            "pi" | "power-iteration" => Self::PowerIteration(DEFAULT_PI_ITERATIONS),
            "taylor" => Self::Taylor(DEFAULT_DEGREE),
            "pade" => Self::Pade(DEFAULT_DEGREE),
            "newton" | "ns" | "ns-backward" => Self::NewtonSchulzBackward(DEFAULT_NS_BACKWARD_ITERATIONS),
            other => return Err(Error::invalid(format!("unknown backward scheme `{other}`"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Ordinary => "ordinary",
            Self::TopN(_) => "topn",
            Self::Trunc(_) => "trunc",
            Self::PowerIteration(_) => "power-iteration",
            Self::Taylor(_) => "taylor",
            Self::Pade(_) => "pade",
            Self::NewtonSchulzBackward(_) => "ns-backward",
        }
    }

    /// Table label, e.g. `SVD-Taylor`.
    pub fn label(&self) -> &'static str {
        match self {
            Self::Ordinary => "SVD",
            Self::TopN(_) => "SVD-TopN",
            Self::Trunc(_) => "SVD-Trunc",
            Self::PowerIteration(_) => "SVD-PI",
            Self::Taylor(_) => "SVD-Taylor",
            Self::Pade(_) => "SVD-Pade",
            Self::NewtonSchulzBackward(_) => "SVD-Newton",
        }
    }

    /// Name plus parameter, e.g. `taylor(100)`.
    pub fn describe(&self) -> String {
        match self {
            Self::Ordinary => String::from("ordinary"),
            Self::TopN(n) => format!("topn({n})"),
            Self::Trunc(t) => format!("trunc({t:e})"),
            Self::PowerIteration(k) => format!("power-iteration({k})"),
            Self::Taylor(k) => format!("taylor({k})"),
            Self::Pade(k) => format!("pade({k})"),
            Self::NewtonSchulzBackward(k) => format!("ns-backward({k})"),
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        match *self {
            Self::TopN(n) if n == 0 || n > d => Err(Error::invalid(format!("top-N needs 1 <= n <= {d}, got {n}"))),
            Self::Trunc(t) if !(t > 0.0) => Err(Error::invalid(format!("truncation threshold must be positive, got {t}"))),
            Self::Taylor(0) | Self::Pade(0) => Err(Error::invalid("approximation degree must be at least 1")),
            Self::PowerIteration(0) | Self::NewtonSchulzBackward(0) => {
                Err(Error::invalid("iteration count must be at least 1"))
            }
            _ => Ok(()),
        }
    }
}

/// Antisymmetric kernel with zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct KMatrix(Matrix);

impl KMatrix {
    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// Off-diagonal entries that are not finite, as `(i, j, value)`.
    pub fn nonfinite_entries(&self) -> Vec<(usize, usize, f64)> {
        let d = self.0.rows();
        let mut out = Vec::new();
        for i in 0..d {
            for j in 0..d {
                let v = self.0[(i, j)];
                if !v.is_finite() {
                    out.push((i, j, v));
                }
            }
        }
        out
    }
}

fn sqrt_eigenvalues(e: &EigenDecomposition) -> Result<Vec<f64>> {
    e.eigenvalues()
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            if l > 0.0 {
                Ok(l.sqrt())
            } else {
                Err(Error::domain(format!("eigenvalue {i} = {l:e} is not positive; clamp before differentiating")))
            }
        })
        .collect()
}

/// `∂l/∂U = (G + G^T) U F` with `F = diag(λ^{1/2})`, and
/// `∂l/∂λ_i = λ_i^{-1/2} (U^T G U)_ii / 2`, for `G = ∂l/∂Q`.
pub fn grad_eigvec_eigval(grad_q: &Matrix, e: &EigenDecomposition) -> Result<(Matrix, Vec<f64>)> {
    let d = e.dim();
    grad_q.check_shape(d, d, "grad_q")?;
    let roots = sqrt_eigenvalues(e)?;
    let u = e.eigenvectors();
    let mut g_u = grad_q.add(&grad_q.transpose()).matmul(u);
    for j in 0..d {
        for i in 0..d {
            g_u[(i, j)] *= roots[j];
        }
    }
    let inner = u.t_matmul(&grad_q.matmul(u));
    let g_l = (0..d).map(|i| 0.5 * inner[(i, i)] / roots[i]).collect();
    Ok((g_u, g_l))
}

/// A scheme with any per-scheme precomputation done once (the Padé
/// coefficients), for repeated kernel construction.
#[derive(Clone, Debug)]
pub struct PreparedScheme {
    scheme: BackwardScheme,
    pade: Option<PadeApproximant>,
}

impl PreparedScheme {
    pub fn new(scheme: BackwardScheme) -> Result<Self> {
        let pade = match scheme {
            BackwardScheme::Pade(k) => Some(geometric_pade(k)?),
            _ => None,
        };
        Ok(Self { scheme, pade })
    }

    pub fn scheme(&self) -> BackwardScheme {
        self.scheme
    }

    pub fn k_matrix(&self, e: &EigenDecomposition) -> Result<KMatrix> {
        self.scheme.validate(e.dim())?;
        let lam = e.eigenvalues();
        let d = lam.len();
        let upper = |i: usize, j: usize| -> Result<f64> {
            let (li, lj) = (lam[i], lam[j]);
            Ok(match self.scheme {
                BackwardScheme::Ordinary => 1.0 / (li - lj),
                BackwardScheme::TopN(n) => {
                    let li = if i < n { li } else { 0.0 };
                    let lj = if j < n { lj } else { 0.0 };
                    if li == 0.0 && lj == 0.0 {
                        0.0
                    } else {
                        1.0 / (li - lj)
                    }
                }
                BackwardScheme::Trunc(t) => (1.0 / (li - lj)).clamp(-t, t),
                BackwardScheme::Taylor(k) => {
                    let r = lj / li;
                    (0..=k).fold(0.0, |acc, _| acc * r + 1.0) / li
                }
                BackwardScheme::Pade(_) => {
                    let r = lj / li;
                    let pa = self.pade.as_ref().expect("prepared");
                    match eval_rational(pa, r) {
                        Ok(v) => v / li,
                        Err(_) => {
                            return Err(Error::numerical(format!(
                                "Padé denominator vanishes at ratio {r} (lambda_{i} = {li:e}, lambda_{j} = {lj:e})"
                            )))
                        }
                    }
                }
                BackwardScheme::PowerIteration(_) | BackwardScheme::NewtonSchulzBackward(_) => {
                    return Err(Error::invalid(format!("{} has no K matrix", self.scheme.name())))
                }
            })
        };
        let mut k = Matrix::zeros(d, d);
        for i in 0..d {
            for j in i + 1..d {
                let v = upper(i, j)?;
                k[(i, j)] = v;
                k[(j, i)] = -v;
            }
        }
        Ok(KMatrix(k))
    }

    pub fn grad_covariance(&self, grad_q: &Matrix, e: &EigenDecomposition) -> Result<Matrix> {
        let k = self.k_matrix(e)?;
        let (g_u, g_l) = grad_eigvec_eigval(grad_q, e)?;
        Ok(grad_covariance_from_parts(e, &k, &g_u, &g_l))
    }
}

/// Kernel `K` of the given scheme over the (clamped) spectrum of `e`.
pub fn k_matrix(e: &EigenDecomposition, scheme: BackwardScheme) -> Result<KMatrix> {
    PreparedScheme::new(scheme)?.k_matrix(e)
}

/// `U (K^T ∘ (U^T ∂l/∂U) + diag(∂l/∂Λ)) U^T`. Not symmetrized; only the
/// symmetric part is meaningful and `∂l/∂X` takes care of it.
pub fn grad_covariance_from_parts(e: &EigenDecomposition, k: &KMatrix, g_u: &Matrix, g_l: &[f64]) -> Matrix {
    let u = e.eigenvectors();
    let mut inner = u.t_matmul(g_u).zip_with(&k.0.transpose(), |a, b| if a == 0.0 { 0.0 } else { a * b });
    for (i, &g) in g_l.iter().enumerate() {
        inner[(i, i)] += g;
    }
    u.matmul(&inner).matmul_t(u)
}

/// `∂l/∂P` from `∂l/∂Q` under one of the kernel schemes.
pub fn grad_covariance(grad_q: &Matrix, e: &EigenDecomposition, scheme: BackwardScheme) -> Result<Matrix> {
    PreparedScheme::new(scheme)?.grad_covariance(grad_q, e)
}

/// Iterates of `u ← P u / |P u|`, kept for differentiation.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerIterationTrace {
    p: Matrix,
    us: Vec<Vec<f64>>,
    norms: Vec<f64>,
}

impl PowerIterationTrace {
    /// `u^(0) ... u^(K)`; `u^(0)` is the starting vector as given.
    pub fn steps(&self) -> &[Vec<f64>] {
        &self.us
    }

    /// `|P u^(k-1)|` for `k = 1 ... K`.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn estimate(&self) -> &[f64] {
        self.us.last().expect("at least one step")
    }

    /// `|u - sign(u . x) x|` against a reference unit vector `x`.
    pub fn alignment_error(&self, reference: &[f64]) -> f64 {
        alignment_error(self.estimate(), reference)
    }
}

pub fn alignment_error(u: &[f64], reference: &[f64]) -> f64 {
    let s = if dot(u, reference) < 0.0 { -1.0 } else { 1.0 };
    let diff: Vec<f64> = u.iter().zip(reference).map(|(a, b)| a - s * b).collect();
    norm2(&diff)
}

pub fn power_iteration(p: &SymPsdMatrix, k_iters: usize, v0: &[f64]) -> Result<PowerIterationTrace> {
    let d = p.dim();
    if v0.len() != d {
        return Err(Error::invalid(format!("start vector has length {}, expected {d}", v0.len())));
    }
    if !(norm2(v0) > 0.0) {
        return Err(Error::invalid("start vector must be nonzero"));
    }
    let m = p.as_matrix();
    let mut us = Vec::with_capacity(k_iters + 1);
    let mut norms = Vec::with_capacity(k_iters);
    us.push(v0.to_vec());
    for k in 1..=k_iters {
        let w = m.matvec(&us[k - 1]);
        let n = norm2(&w);
        if !(n > 0.0) {
            return Err(Error::Degenerate(format!("P u vanishes at power-iteration step {k}")));
        }
        us.push(w.iter().map(|x| x / n).collect());
        norms.push(n);
    }
    Ok(PowerIterationTrace { p: m.clone(), us, norms })
}

/// `∂l/∂P` through the power iteration by reverse mode:
/// `∂l/∂P = Σ_k (I - u^(k) u^(k)T) g_k u^(k-1)T / |P u^(k-1)|` with `g_K` the
/// given cotangent and `g_{k-1} = P (I - u^(k) u^(k)T) g_k / |P u^(k-1)|`.
pub fn pi_gradient(trace: &PowerIterationTrace, grad_u: &[f64]) -> Result<Matrix> {
    let d = trace.p.rows();
    if grad_u.len() != d {
        return Err(Error::invalid(format!("grad_u has length {}, expected {d}", grad_u.len())));
    }
    let mut g_p = Matrix::zeros(d, d);
    let mut g = grad_u.to_vec();
    for k in (1..trace.us.len()).rev() {
        let n = trace.norms[k - 1];
        if !(n > 0.0) {
            return Err(Error::Degenerate(format!("zero norm at power-iteration step {k}")));
        }
        let u = &trace.us[k];
        let c = dot(u, &g);
        let g_w: Vec<f64> = g.iter().zip(u).map(|(gi, ui)| (gi - c * ui) / n).collect();
        let prev = &trace.us[k - 1];
        for i in 0..d {
            for j in 0..d {
                g_p[(i, j)] += g_w[i] * prev[j];
            }
        }
        g = trace.p.t_matmul(&Matrix::from_vec(d, 1, g_w).expect("shape")).into_vec();
    }
    Ok(g_p)
}

/// Worst-case `|K_ij|` of a scheme.
#[derive(Clone, Debug, PartialEq)]
pub struct GradBound {
    pub scheme: BackwardScheme,
    pub analytic_form: &'static str,
    /// `None` when the scheme has no analytic bound (Newton-Schulz backward).
    pub max_value: Option<f64>,
    pub trigger: &'static str,
}

impl GradBound {
    /// Whether the bound is representable in single precision.
    pub fn single_safe(&self) -> bool {
        match self.max_value {
            Some(v) => v < f32::MAX as f64,
            None => true,
        }
    }
}

pub fn gradient_upper_bound(scheme: BackwardScheme, prec: Precision) -> Result<GradBound> {
    let eps = prec.eps();
    let (analytic_form, max_value, trigger) = match scheme {
        BackwardScheme::Ordinary => ("1/(lambda_i-lambda_j)", Some(f64::INFINITY), "lambda_i = lambda_j"),
        BackwardScheme::TopN(_) => ("1/lambda_N", Some(1.0 / eps), "lambda_N <= eps"),
        BackwardScheme::Trunc(t) => ("T", Some(t), "|1/(lambda_i-lambda_j)| >= T"),
        BackwardScheme::Taylor(k) => ("(K+1)/lambda_i", Some((k as f64 + 1.0) / eps), "lambda_i = lambda_j <= eps"),
        BackwardScheme::PowerIteration(k) => ("K/lambda_1", Some(k as f64 / eps), "lambda_1 = lambda_2 <= eps"),
        BackwardScheme::Pade(k) => {
            let pa = geometric_pade(k)?;
            (
                "(1/lambda_i)*sum(p_m)/(1+sum(q_n))",
                Some(pa.value_at_one().abs() / eps),
                "lambda_i = lambda_j <= eps",
            )
        }
        BackwardScheme::NewtonSchulzBackward(_) => ("n/a", None, "none"),
    };
    Ok(GradBound { scheme, analytic_form, max_value, trigger })
}

/// Empirical Lipschitz constant of a gradient map: the largest
/// `|g(X) - g(X + δ)|_F / |δ|_F` over `samples` Gaussian perturbations scaled
/// to `perturb_scale * |X|_F`.
pub fn beta_smoothness(
    mut layer_fn: impl FnMut(&Matrix) -> Result<Matrix>,
    x: &Matrix,
    samples: usize,
    perturb_scale: f64,
    seed: u64,
    scheme_name: &str,
) -> Result<f64> {
    if samples < 2 {
        return Err(Error::invalid("beta-smoothness needs at least two samples"));
    }
    let check = |g: &Matrix| -> Result<()> {
        if g.is_finite() {
            Ok(())
        } else {
            Err(Error::numerical(format!("{scheme_name}: non-finite gradient while estimating smoothness")))
        }
    };
    let g0 = layer_fn(x)?;
    check(&g0)?;
    let norm_x = x.frobenius_norm();
    let target = if norm_x > 0.0 { perturb_scale * norm_x } else { perturb_scale };
    let mut rng = seeded_rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let delta = random_direction(x.rows(), x.cols(), target, &mut rng);
        let g1 = layer_fn(&x.add(&delta))?;
        check(&g1)?;
        worst = worst.max(g1.sub(&g0).frobenius_norm() / delta.frobenius_norm());
    }
    Ok(worst)
}

fn random_direction<R: Rng + ?Sized>(rows: usize, cols: usize, norm: f64, rng: &mut R) -> Matrix {
    loop {
        let g = gaussian_matrix(rows, cols, rng);
        let n = g.frobenius_norm();
        if n > 0.0 {
            return g.scale(norm / n);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{clamp_eigenvalues, eigh, matrix_power};
    use crate::synth::{seeded_rng, spd_with_spectrum};
    use crate::test_support::{fd_sym_grad, sym_fold};

    fn diag_e(l: &[f64]) -> EigenDecomposition {
        EigenDecomposition::diagonal(l).unwrap()
    }

    fn sqrt_sum(m: &Matrix) -> f64 {
        let e = eigh(&SymPsdMatrix::new(m.clone()).unwrap()).unwrap();
        matrix_power(&e, 0.5).unwrap().as_matrix().as_slice().iter().sum()
    }

    #[test]
    fn eigval_gradient_of_trace() {
        let (g_u, g_l) = grad_eigvec_eigval(&Matrix::identity(2), &diag_e(&[4.0, 1.0])).unwrap();
        assert_eq!(g_l, alloc::vec![0.25, 0.5]);
        assert_eq!(g_u, Matrix::from_diag(&[4.0, 2.0]));
        let (z, zl) = grad_eigvec_eigval(&Matrix::zeros(2, 2), &diag_e(&[4.0, 1.0])).unwrap();
        assert_eq!(z, Matrix::zeros(2, 2));
        assert_eq!(zl, alloc::vec![0.0, 0.0]);
        assert!(matches!(grad_eigvec_eigval(&Matrix::zeros(2, 2), &diag_e(&[1.0, 0.0])), Err(Error::Domain(_))));
    }

    #[test]
    fn ordinary_kernel() {
        let k = k_matrix(&diag_e(&[3.0, 1.0]), BackwardScheme::Ordinary).unwrap();
        assert_eq!(k.as_matrix(), &Matrix::from_rows(&[[0.0, 0.5], [-0.5, 0.0]]));
        let tie = k_matrix(&diag_e(&[1.0, 1.0]), BackwardScheme::Ordinary).unwrap();
        assert_eq!(tie.nonfinite_entries().len(), 2);
    }

    #[test]
    fn taylor_kernel_attains_bound_on_tie() {
        let k = k_matrix(&diag_e(&[1.0, 1.0]), BackwardScheme::Taylor(100)).unwrap();
        assert_eq!(k.as_matrix()[(0, 1)], 101.0);
        assert_eq!(k.as_matrix()[(1, 0)], -101.0);
    }

    #[test]
    fn pade_kernel_near_pole() {
        let k = k_matrix(&diag_e(&[1.0, 0.999]), BackwardScheme::Pade(100)).unwrap();
        let exact = 1.0 / (1.0 - 0.999);
        assert!((k.as_matrix()[(0, 1)] - exact).abs() / exact < 1e-6);
    }

    #[test]
    fn pade_kernel_on_tie_stays_within_bound() {
        // The approximant carries the pole of 1/(1 - x) up to roundoff, so the
        // tie value is large but finite and covered by the reported bound.
        let eps = Precision::Double.eps();
        let k = k_matrix(&diag_e(&[1.0, eps, eps]), BackwardScheme::Pade(100)).unwrap();
        let bound = gradient_upper_bound(BackwardScheme::Pade(100), Precision::Double).unwrap().max_value.unwrap();
        assert!(k.as_matrix()[(1, 2)].is_finite());
        assert!(k.as_matrix()[(1, 2)].abs() <= bound * (1.0 + 1e-12));
        assert!(bound < f32::MAX as f64);
    }

    #[test]
    fn topn_and_trunc_kernels() {
        let e = diag_e(&[4.0, 2.0, 1.0, 1.0]);
        let k = k_matrix(&e, BackwardScheme::TopN(2)).unwrap();
        assert_eq!(k.as_matrix()[(0, 1)], 0.5);
        assert_eq!(k.as_matrix()[(1, 3)], 0.5);
        assert_eq!(k.as_matrix()[(2, 3)], 0.0);
        let t = k_matrix(&e, BackwardScheme::Trunc(10.0)).unwrap();
        assert_eq!(t.as_matrix()[(2, 3)], 10.0);
        assert_eq!(t.as_matrix()[(3, 2)], -10.0);
        assert!(k_matrix(&e, BackwardScheme::TopN(5)).is_err());
    }

    #[test]
    fn kernels_are_antisymmetric() {
        let e = diag_e(&[5.0, 2.0, 1.5, 0.3]);
        for s in [
            BackwardScheme::Ordinary,
            BackwardScheme::TopN(3),
            BackwardScheme::Trunc(1e3),
            BackwardScheme::Taylor(20),
            BackwardScheme::Pade(20),
        ] {
            let k = k_matrix(&e, s).unwrap().into_matrix();
            for i in 0..4 {
                assert_eq!(k[(i, i)], 0.0);
                for j in 0..4 {
                    assert_eq!(k[(i, j)], -k[(j, i)], "{s:?}");
                }
            }
        }
    }

    #[test]
    fn ordinary_matches_finite_differences() {
        let mut rng = seeded_rng(21);
        let p = spd_with_spectrum(&[3.0, 1.0], &mut rng);
        let e = eigh(&p).unwrap();
        let g = grad_covariance(&Matrix::filled(2, 2, 1.0), &e, BackwardScheme::Ordinary).unwrap();
        let fd = fd_sym_grad(p.as_matrix(), sqrt_sum);
        let rel = sym_fold(&g).max_abs_diff(&fd) / fd.max_abs();
        assert!(rel < 1e-5, "{rel}");
    }

    #[test]
    fn taylor_and_pade_agree_when_separated() {
        let mut rng = seeded_rng(2);
        let p = spd_with_spectrum(&[2.0, 0.9, 0.3], &mut rng);
        let e = clamp_eigenvalues(&eigh(&p).unwrap(), Precision::Double);
        let gq = Matrix::from_rows(&[[1.0, 0.2, -0.3], [0.4, 0.5, 0.1], [0.0, 0.7, -1.0]]);
        let t = grad_covariance(&gq, &e, BackwardScheme::Taylor(100)).unwrap();
        let pd = grad_covariance(&gq, &e, BackwardScheme::Pade(100)).unwrap();
        assert!(t.max_abs_diff(&pd) / t.max_abs() < 1e-6);
    }

    #[test]
    fn power_iteration_examples() {
        let p = SymPsdMatrix::from_diag(&[4.0, 1.0]).unwrap();
        let r = core::f64::consts::FRAC_1_SQRT_2;
        let tr = power_iteration(&p, 30, &[r, r]).unwrap();
        assert!(tr.alignment_error(&[1.0, 0.0]) < 1e-6);
        let id = power_iteration(&SymPsdMatrix::identity(2), 7, &[3.0, 4.0]).unwrap();
        assert_eq!(id.estimate(), &[0.6, 0.8]);
        assert!(matches!(
            power_iteration(&SymPsdMatrix::from_diag(&[1.0, 0.0]).unwrap(), 3, &[0.0, 1.0]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn pi_gradient_projector_annihilates_parallel() {
        let p = SymPsdMatrix::from_diag(&[4.0, 1.0, 0.5]).unwrap();
        let tr = power_iteration(&p, 40, &[1.0, 0.3, 0.2]).unwrap();
        let u = tr.estimate().to_vec();
        let g = pi_gradient(&tr, &u).unwrap();
        assert!(g.max_abs() < 1e-12);
        assert_eq!(pi_gradient(&tr, &[0.0; 3]).unwrap(), Matrix::zeros(3, 3));
    }

    #[test]
    fn pi_gradient_matches_finite_differences() {
        let p = SymPsdMatrix::new(Matrix::from_rows(&[[3.0, 0.5, 0.1], [0.5, 1.0, 0.2], [0.1, 0.2, 0.5]])).unwrap();
        let v0 = [0.3, 0.8, -0.4];
        let gu = [0.7, -0.2, 0.4];
        let tr = power_iteration(&p, 6, &v0).unwrap();
        let g = pi_gradient(&tr, &gu).unwrap();
        // Full (non-symmetric) finite differences: PI does not need symmetric P.
        for i in 0..3 {
            for j in 0..3 {
                let f = |h: f64| {
                    let mut m = p.as_matrix().clone();
                    m[(i, j)] += h;
                    let mut u = v0.to_vec();
                    for _ in 0..6 {
                        let w = m.matvec(&u);
                        let n = norm2(&w);
                        u = w.iter().map(|x| x / n).collect();
                    }
                    dot(&u, &gu)
                };
                let fd = (f(1e-6) - f(-1e-6)) / 2e-6;
                assert!((fd - g[(i, j)]).abs() < 1e-7, "({i},{j}): {fd} vs {}", g[(i, j)]);
            }
        }
    }

    #[test]
    fn bounds_table_values() {
        let b = gradient_upper_bound(BackwardScheme::Taylor(100), Precision::Double).unwrap();
        assert!((b.max_value.unwrap() / 4.55e17 - 1.0).abs() < 0.01);
        let b = gradient_upper_bound(BackwardScheme::Trunc(1e10), Precision::Double).unwrap();
        assert_eq!(b.max_value, Some(1e10));
        let b = gradient_upper_bound(BackwardScheme::TopN(3), Precision::Double).unwrap();
        assert!((b.max_value.unwrap() / 4.50e15 - 1.0).abs() < 0.01);
        let b = gradient_upper_bound(BackwardScheme::NewtonSchulzBackward(5), Precision::Double).unwrap();
        assert_eq!(b.max_value, None);
        assert!(!gradient_upper_bound(BackwardScheme::Ordinary, Precision::Single).unwrap().single_safe());
    }

    #[test]
    fn beta_smoothness_of_linear_map_is_zero() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let w = Matrix::from_rows(&[[0.5, -1.0], [2.0, 0.0]]);
        let beta = beta_smoothness(|_| Ok(w.clone()), &x, 8, 1e-3, 1, "linear").unwrap();
        assert_eq!(beta, 0.0);
        let err = beta_smoothness(|_| Ok(Matrix::filled(1, 1, f64::NAN)), &x, 8, 1e-3, 1, "broken").unwrap_err();
        assert!(matches!(err, Error::NumericalFailure(ref m) if m.contains("broken")));
        assert!(beta_smoothness(|_| Ok(w.clone()), &x, 1, 1e-3, 1, "linear").is_err());
    }
}

//! Symmetric matrix foundations: covariance pooling, a cyclic Jacobi
//! eigensolver, eigenvalue clamping, spectral matrix powers and the
//! condition-number metric.

use alloc::format;
use alloc::vec::Vec;


#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Condition numbers strictly above this value mark a covariance as
/// ill-conditioned in double precision.
pub const ILL_CONDITIONED_THRESHOLD: f64 = 1e14;

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_REL_TOL: f64 = 1e-14;

/// Working float width. Its machine epsilon is the floor applied to
/// eigenvalues in the forward pass.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Precision {
    Single,
    #[default]
    Double,
}

impl Precision {
    pub fn eps(self) -> f64 {
        match self {
            Precision::Single => f32::EPSILON as f64,
            Precision::Double => f64::EPSILON,
        }
    }

    /// Largest finite value of the float width.
    pub fn max_value(self) -> f64 {
        match self {
            Precision::Single => f32::MAX as f64,
            Precision::Double => f64::MAX,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Precision::Single => "single",
            Precision::Double => "double",
        }
    }
}

impl core::str::FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" | "f32" => Ok(Precision::Single),
            "double" | "f64" => Ok(Precision::Double),
            other => Err(Error::invalid(format!("unknown precision `{other}`"))),
        }
    }
}

/// A `d x N` block of features: `d` channels observed at `N` spatial
/// positions.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix(Matrix);

impl FeatureMatrix {
    pub fn new(data: Matrix) -> Result<Self> {
        if data.rows() < 1 {
            return Err(Error::invalid("feature matrix needs at least one channel"));
        }
        if data.cols() < 2 {
            return Err(Error::invalid("feature matrix needs at least two samples for centering"));
        }
        if !data.is_finite() {
            return Err(Error::invalid("feature matrix has non-finite entries"));
        }
        Ok(Self(data))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn samples(&self) -> usize {
        self.0.cols()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// `X Ī` where `Ī = (1/N)(I - (1/N) 1 1^T)`: each row minus its mean,
    /// scaled by `1/N`.
    pub fn centered_scaled(&self) -> Matrix {
        let n = self.samples() as f64;
        let mut out = self.0.clone();
        for i in 0..out.rows() {
            let mean = self.0.row(i).iter().sum::<f64>() / n;
            for j in 0..out.cols() {
                out[(i, j)] = (out[(i, j)] - mean) / n;
            }
        }
        out
    }
}

/// Symmetric positive semi-definite `d x d` matrix. Symmetrized on
/// construction.
#[derive(Clone, Debug, PartialEq)]
pub struct SymPsdMatrix(Matrix);

impl SymPsdMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::invalid(format!("expected a square matrix, got {}x{}", m.rows(), m.cols())));
        }
        if !m.is_finite() {
            return Err(Error::invalid("matrix has non-finite entries"));
        }
        Ok(Self(m.symmetrize()))
    }

    pub fn identity(d: usize) -> Self {
        Self(Matrix::identity(d))
    }

    pub fn from_diag(diag: &[f64]) -> Result<Self> {
        Self::new(Matrix::from_diag(diag))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Upper-triangular entries (row by row, diagonal included). This is the
    /// vector handed to the classifier since the lower half is redundant.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let d = self.dim();
        let mut v = Vec::with_capacity(d * (d + 1) / 2);
        for i in 0..d {
            for j in i..d {
                v.push(self.0[(i, j)]);
            }
        }
        v
    }
}

/// `P = U diag(λ) U^T` with `λ` non-increasing and orthonormal columns in `U`.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: Matrix,
}

impl EigenDecomposition {
    /// Assembles a decomposition from known parts, validating ordering and
    /// orthogonality.
    pub fn new(eigenvalues: Vec<f64>, eigenvectors: Matrix) -> Result<Self> {
        let d = eigenvalues.len();
        eigenvectors.check_shape(d, d, "eigenvector matrix")?;
        if eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::invalid("eigenvalues must be non-increasing"));
        }
        if eigenvalues.iter().any(|l| !l.is_finite()) {
            return Err(Error::invalid("eigenvalues must be finite"));
        }
        let gram = eigenvectors.t_matmul(&eigenvectors);
        if gram.max_abs_diff(&Matrix::identity(d)) > 1e-10 {
            return Err(Error::invalid("eigenvectors are not orthonormal"));
        }
        Ok(Self { eigenvalues, eigenvectors })
    }

    /// Decomposition of `diag(λ)` with `U = I`.
    pub fn diagonal(eigenvalues: &[f64]) -> Result<Self> {
        Self::new(eigenvalues.to_vec(), Matrix::identity(eigenvalues.len()))
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Matrix {
        &self.eigenvectors
    }

    /// `U diag(f(λ)) U^T`.
    pub fn reconstruct_with(&self, mut f: impl FnMut(f64) -> f64) -> Matrix {
        let u = &self.eigenvectors;
        let d = self.dim();
        let mut scaled = u.clone();
        for j in 0..d {
            let s = f(self.eigenvalues[j]);
            for i in 0..d {
                scaled[(i, j)] *= s;
            }
        }
        scaled.matmul_t(u)
    }

    pub fn reconstruct(&self) -> Matrix {
        self.reconstruct_with(|l| l)
    }

    pub fn count_below(&self, floor: f64) -> usize {
        self.eigenvalues.iter().filter(|&&l| l < floor).count()
    }
}

/// Sample covariance `P = X Ī X^T`.
pub fn covariance(x: &FeatureMatrix) -> SymPsdMatrix {
    let xs = x.centered_scaled();
    let n = x.samples() as f64;
    // X Ī X^T = (X Ī)(X Ī)^T * N since Ī is idempotent up to the 1/N factor.
    let p = xs.matmul_t(&xs).scale(n);
    SymPsdMatrix(p.symmetrize())
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Converges when the largest off-diagonal magnitude drops to
/// `1e-14 * max|P|`. Eigenvalues come back non-increasing; each eigenvector
/// has its largest-magnitude component made positive.
pub fn eigh(p: &SymPsdMatrix) -> Result<EigenDecomposition> {
    eigh_matrix(p.as_matrix())
}

pub(crate) fn eigh_matrix(p: &Matrix) -> Result<EigenDecomposition> {
    if !p.is_square() {
        return Err(Error::invalid("eigh needs a square matrix"));
    }
    if !p.is_finite() {
        return Err(Error::invalid("eigh input has non-finite entries"));
    }
    let d = p.rows();
    let mut a = p.symmetrize();
    let mut v = Matrix::identity(d);
    let tol = JACOBI_REL_TOL * a.max_abs();

    let off_max = |a: &Matrix| {
        let mut m = 0.0f64;
        for i in 0..d {
            for j in i + 1..d {
                m = m.max(a[(i, j)].abs());
            }
        }
        m
    };

    let mut converged = off_max(&a) <= tol;
    let mut sweeps = 0;
    while !converged && sweeps < JACOBI_MAX_SWEEPS {
        for p_idx in 0..d {
            for q_idx in p_idx + 1..d {
                let apq = a[(p_idx, q_idx)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p_idx, p_idx)];
                let aqq = a[(q_idx, q_idx)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                a[(p_idx, p_idx)] = app - t * apq;
                a[(q_idx, q_idx)] = aqq + t * apq;
                a[(p_idx, q_idx)] = 0.0;
                a[(q_idx, p_idx)] = 0.0;
                for r in 0..d {
                    if r == p_idx || r == q_idx {
                        continue;
                    }
                    let arp = a[(r, p_idx)];
                    let arq = a[(r, q_idx)];
                    let new_rp = c * arp - s * arq;
                    let new_rq = s * arp + c * arq;
                    a[(r, p_idx)] = new_rp;
                    a[(p_idx, r)] = new_rp;
                    a[(r, q_idx)] = new_rq;
                    a[(q_idx, r)] = new_rq;
                }
                for r in 0..d {
                    let vrp = v[(r, p_idx)];
                    let vrq = v[(r, q_idx)];
                    v[(r, p_idx)] = c * vrp - s * vrq;
                    v[(r, q_idx)] = s * vrp + c * vrq;
                }
            }
        }
        sweeps += 1;
        converged = off_max(&a) <= tol;
    }
    if !converged {
        return Err(Error::numerical(format!(
            "Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps (off-diagonal residual {:e})",
            off_max(&a)
        )));
    }

    let mut order: Vec<usize> = (0..d).collect();
    // Stable sort keeps the result deterministic for ties.
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap_or(core::cmp::Ordering::Equal));

    let eigenvalues: Vec<f64> = order.iter().map(|&k| a[(k, k)]).collect();
    let mut eigenvectors = Matrix::zeros(d, d);
    for (col, &k) in order.iter().enumerate() {
        let mut vec = v.column(k);
        let mut pivot = 0;
        for i in 1..d {
            if vec[i].abs() > vec[pivot].abs() {
                pivot = i;
            }
        }
        if vec[pivot] < 0.0 {
            vec.iter_mut().for_each(|x| *x = -*x);
        }
        eigenvectors.set_column(col, &vec);
    }
    Ok(EigenDecomposition { eigenvalues, eigenvectors })
}

/// Replaces every eigenvalue below the precision's epsilon by epsilon.
pub fn clamp_eigenvalues(e: &EigenDecomposition, prec: Precision) -> EigenDecomposition {
    let eps = prec.eps();
    EigenDecomposition {
        eigenvalues: e.eigenvalues.iter().map(|&l| if l < eps { eps } else { l }).collect(),
        eigenvectors: e.eigenvectors.clone(),
    }
}

/// `U diag(λ^alpha) U^T`. `alpha = 0.5` gives the principal square root.
pub fn matrix_power(e: &EigenDecomposition, alpha: f64) -> Result<SymPsdMatrix> {
    let integral = alpha.fract() == 0.0;
    for (i, &l) in e.eigenvalues.iter().enumerate() {
        if l < 0.0 && !integral {
            return Err(Error::domain(format!("eigenvalue {i} = {l:e} is negative; fractional power {alpha} undefined")));
        }
        if l == 0.0 && alpha < 0.0 {
            return Err(Error::domain(format!("eigenvalue {i} is zero; negative power {alpha} undefined")));
        }
    }
    let m = if integral {
        let k = alpha as i32;
        e.reconstruct_with(|l| l.powi(k))
    } else if alpha == 0.5 {
        e.reconstruct_with(|l| l.sqrt())
    } else {
        e.reconstruct_with(|l| l.powf(alpha))
    };
    Ok(SymPsdMatrix(m.symmetrize()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionNumber {
    pub value: f64,
    pub ill_conditioned: bool,
}

/// `λ_max / λ_min`, flagged when strictly above [`ILL_CONDITIONED_THRESHOLD`].
/// A non-positive smallest eigenvalue yields `+inf` with the flag set.
pub fn condition_number(e: &EigenDecomposition) -> ConditionNumber {
    let lmax = e.eigenvalues.first().copied().unwrap_or(1.0);
    let lmin = e.eigenvalues.last().copied().unwrap_or(1.0);
    if lmin <= 0.0 {
        return ConditionNumber { value: f64::INFINITY, ill_conditioned: true };
    }
    let value = lmax / lmin;
    ConditionNumber { value, ill_conditioned: value > ILL_CONDITIONED_THRESHOLD }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn covariance_of_constant_rows_is_zero() {
        let x = FeatureMatrix::new(Matrix::from_rows(&[[3.0, 3.0, 3.0], [-1.0, -1.0, -1.0]])).unwrap();
        assert_eq!(covariance(&x).into_matrix(), Matrix::zeros(2, 2));
    }

    #[test]
    fn covariance_hand_case() {
        // Ī = (1/2)(I - (1/2) 1 1^T) = [[1/4, -1/4], [-1/4, 1/4]];
        // [1, -1] Ī [1, -1]^T = 1.
        let x = FeatureMatrix::new(Matrix::from_rows(&[[1.0, -1.0], [0.0, 0.0]])).unwrap();
        let p = covariance(&x);
        assert_eq!(p.into_matrix(), Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]));
    }

    #[test]
    fn feature_matrix_rejects_bad_input() {
        assert!(FeatureMatrix::new(Matrix::from_rows(&[[1.0], [2.0]])).is_err());
        assert!(FeatureMatrix::new(Matrix::from_rows(&[[1.0, f64::NAN]])).is_err());
    }

    #[test]
    fn eigh_diagonal() {
        let e = eigh(&SymPsdMatrix::from_diag(&[1.0, 4.0]).unwrap()).unwrap();
        assert_eq!(e.eigenvalues(), &[4.0, 1.0]);
        assert_eq!(e.eigenvectors(), &Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]));
    }

    #[test]
    fn eigh_two_by_two_analytic() {
        let p = SymPsdMatrix::new(Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]])).unwrap();
        let e = eigh(&p).unwrap();
        assert!((e.eigenvalues()[0] - 3.0).abs() < 1e-14);
        assert!((e.eigenvalues()[1] - 1.0).abs() < 1e-14);
        let r = core::f64::consts::FRAC_1_SQRT_2;
        let u = e.eigenvectors();
        // Largest-magnitude component positive; for (1,-1)/sqrt2 the first
        // component wins the tie.
        assert!((u[(0, 0)] - r).abs() < 1e-14 && (u[(1, 0)] - r).abs() < 1e-14);
        assert!((u[(0, 1)] - r).abs() < 1e-14 && (u[(1, 1)] + r).abs() < 1e-14);
    }

    #[test]
    fn eigh_zero_matrix() {
        let e = eigh(&SymPsdMatrix::new(Matrix::zeros(3, 3)).unwrap()).unwrap();
        assert_eq!(e.eigenvalues(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn clamp_examples() {
        let eps = f64::EPSILON;
        let c = |l: &[f64]| clamp_eigenvalues(&EigenDecomposition::diagonal(l).unwrap(), Precision::Double);
        assert_eq!(c(&[1.0, 0.0]).eigenvalues(), &[1.0, eps]);
        assert_eq!(c(&[1.0, 0.5]).eigenvalues(), &[1.0, 0.5]);
        assert_eq!(c(&[1e-20, 1e-30]).eigenvalues(), &[eps, eps]);
        assert_eq!(Precision::Double.eps(), 2.220446049250313e-16);
        assert_eq!(Precision::Single.eps(), 1.1920929e-7f32 as f64);
    }

    #[test]
    fn matrix_power_examples() {
        let e = EigenDecomposition::diagonal(&[4.0, 1.0]).unwrap();
        assert_eq!(matrix_power(&e, 0.5).unwrap().into_matrix(), Matrix::from_diag(&[2.0, 1.0]));
        let neg = EigenDecomposition::diagonal(&[1.0, -1e-3]).unwrap();
        assert!(matches!(matrix_power(&neg, 0.5), Err(Error::Domain(_))));
        assert!(matrix_power(&neg, 2.0).is_ok());
        let zero = EigenDecomposition::diagonal(&[1.0, 0.0]).unwrap();
        assert!(matches!(matrix_power(&zero, -0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn condition_number_examples() {
        let id = EigenDecomposition::diagonal(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(condition_number(&id), ConditionNumber { value: 1.0, ill_conditioned: false });
        let edge = condition_number(&EigenDecomposition::diagonal(&[1e14, 1.0]).unwrap());
        assert_eq!(edge.value, 1e14);
        assert!(!edge.ill_conditioned);
        let above = condition_number(&EigenDecomposition::diagonal(&[1.0000001e14, 1.0]).unwrap());
        assert!(above.ill_conditioned);
        let singular = condition_number(&EigenDecomposition::diagonal(&[1.0, 0.0]).unwrap());
        assert!(singular.value.is_infinite() && singular.ill_conditioned);
    }

    #[test]
    fn upper_triangle_layout() {
        let p = SymPsdMatrix::new(Matrix::from_rows(&[[1.0, 2.0, 3.0], [2.0, 4.0, 5.0], [3.0, 5.0, 6.0]])).unwrap();
        assert_eq!(p.upper_triangle(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }
}

//! The global covariance pooling layer: covariance, matrix square root by a
//! chosen forward method, and the gradient back to the features by a chosen
//! backward scheme. Also the finite-difference gradient checker.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::newton_schulz::{ns_backward, ns_forward, ns_gradient_of_x, NewtonSchulzTrace};
use crate::spectral::{clamp_eigenvalues, covariance, eigh, matrix_power, EigenDecomposition, FeatureMatrix, Precision, SymPsdMatrix};
use crate::svd_grad::{grad_covariance_from_parts, grad_eigvec_eigval, BackwardScheme, PreparedScheme};
use crate::synth::{gaussian_matrix, seeded_rng};

/// Largest `d * N` the gradient checker accepts.
pub const GRAD_CHECK_MAX_ENTRIES: usize = 10_000;
pub const GRAD_CHECK_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ForwardMethod {
    /// Exact square root from the clamped eigendecomposition.
    EigSqrt,
    /// Coupled Newton-Schulz with the given iteration count.
    NewtonSchulz(usize),
}

impl ForwardMethod {
    pub fn describe(&self) -> String {
        match self {
            ForwardMethod::EigSqrt => String::from("eig-sqrt"),
            ForwardMethod::NewtonSchulz(k) => format!("newton-schulz({k})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GcpLayerConfig {
    pub forward: ForwardMethod,
    pub backward: BackwardScheme,
    pub precision: Precision,
}

impl GcpLayerConfig {
    /// Checks the forward/backward pairing: a Newton-Schulz forward only
    /// pairs with its own reverse mode (same iteration count); the
    /// eigendecomposition forward pairs with every kernel scheme and with the
    /// Newton-Schulz backward. Power iteration only estimates the leading
    /// eigenvector and is not a layer backward.
    pub fn new(forward: ForwardMethod, backward: BackwardScheme, precision: Precision) -> Result<Self> {
        match (forward, backward) {
            (ForwardMethod::NewtonSchulz(0), _) => return Err(Error::invalid("Newton-Schulz needs at least one iteration")),
            (ForwardMethod::NewtonSchulz(f), BackwardScheme::NewtonSchulzBackward(b)) if f == b => {}
            (ForwardMethod::NewtonSchulz(_), b) => {
                return Err(Error::invalid(format!(
                    "Newton-Schulz forward pairs only with its own reverse mode, not {}",
                    b.describe()
                )))
            }
            (ForwardMethod::EigSqrt, BackwardScheme::PowerIteration(_)) => {
                return Err(Error::invalid("power iteration is not a layer backward scheme"))
            }
            (ForwardMethod::EigSqrt, _) => {}
        }
        Ok(Self { forward, backward, precision })
    }

    pub fn eig(backward: BackwardScheme) -> Result<Self> {
        Self::new(ForwardMethod::EigSqrt, backward, Precision::Double)
    }

    pub fn newton_schulz(iterations: usize) -> Result<Self> {
        Self::new(
            ForwardMethod::NewtonSchulz(iterations),
            BackwardScheme::NewtonSchulzBackward(iterations),
            Precision::Double,
        )
    }

    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self
    }

    pub fn describe(&self) -> String {
        format!("{}+{}", self.forward.describe(), self.backward.describe())
    }

    /// The seven legal (forward, backward) pairs for dimension `d`, with
    /// default scheme parameters.
    pub fn legal_pairs(d: usize) -> Vec<Self> {
        let mut out = Vec::new();
        for name in ["ordinary", "topn", "trunc", "taylor", "pade", "ns-backward"] {
            let scheme = BackwardScheme::from_name(name, d).expect("known name");
            out.push(Self::eig(scheme).expect("legal"));
        }
        out.push(Self::newton_schulz(crate::newton_schulz::DEFAULT_ITERATIONS).expect("legal"));
        out
    }
}

/// What the backward pass needs from the forward pass.
#[derive(Clone, Debug)]
pub struct GcpCache {
    x: FeatureMatrix,
    p: SymPsdMatrix,
    state: CacheState,
}

#[derive(Clone, Debug)]
enum CacheState {
    Eig { e: EigenDecomposition, clamped: usize },
    NewtonSchulz(NewtonSchulzTrace),
}

impl GcpCache {
    pub fn covariance(&self) -> &SymPsdMatrix {
        &self.p
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.x
    }

    /// Clamped eigendecomposition (eigendecomposition forward only).
    pub fn eigen(&self) -> Option<&EigenDecomposition> {
        match &self.state {
            CacheState::Eig { e, .. } => Some(e),
            CacheState::NewtonSchulz(_) => None,
        }
    }

    /// Number of eigenvalues raised to eps (always 0 for Newton-Schulz).
    pub fn clamped_count(&self) -> usize {
        match &self.state {
            CacheState::Eig { clamped, .. } => *clamped,
            CacheState::NewtonSchulz(_) => 0,
        }
    }

    pub fn clamped(&self) -> bool {
        self.clamped_count() > 0
    }
}

/// A configured layer with per-scheme precomputation done once.
#[derive(Clone, Debug)]
pub struct GcpLayer {
    cfg: GcpLayerConfig,
    prepared: Option<PreparedScheme>,
}

impl GcpLayer {
    pub fn new(cfg: GcpLayerConfig) -> Result<Self> {
        let cfg = GcpLayerConfig::new(cfg.forward, cfg.backward, cfg.precision)?;
        let prepared = match cfg.backward {
            BackwardScheme::NewtonSchulzBackward(_) => None,
            s => Some(PreparedScheme::new(s)?),
        };
        Ok(Self { cfg, prepared })
    }

    pub fn config(&self) -> &GcpLayerConfig {
        &self.cfg
    }

    pub fn forward(&self, x: &FeatureMatrix) -> Result<(SymPsdMatrix, GcpCache)> {
        let p = covariance(x);
        match self.cfg.forward {
            ForwardMethod::EigSqrt => {
                let raw = eigh(&p)?;
                let clamped = raw.count_below(self.cfg.precision.eps());
                let e = clamp_eigenvalues(&raw, self.cfg.precision);
                let q = matrix_power(&e, 0.5)?;
                Ok((q, GcpCache { x: x.clone(), p, state: CacheState::Eig { e, clamped } }))
            }
            ForwardMethod::NewtonSchulz(k) => {
                let (q, trace) = ns_forward(&p, k)?;
                Ok((q, GcpCache { x: x.clone(), p, state: CacheState::NewtonSchulz(trace) }))
            }
        }
    }

    /// `∂l/∂P`, not symmetrized, with no finiteness guard.
    pub fn backward_covariance_unchecked(&self, cache: &GcpCache, grad_q: &Matrix) -> Result<Matrix> {
        match (&cache.state, self.cfg.backward) {
            (CacheState::NewtonSchulz(trace), _) => ns_backward(trace, grad_q),
            (CacheState::Eig { .. }, BackwardScheme::NewtonSchulzBackward(k)) => {
                let (_, trace) = ns_forward(&cache.p, k)?;
                ns_backward(&trace, grad_q)
            }
            (CacheState::Eig { e, .. }, _) => {
                let prepared = self.prepared.as_ref().expect("kernel scheme prepared");
                let k = prepared.k_matrix(e)?;
                let (g_u, g_l) = grad_eigvec_eigval(grad_q, e)?;
                Ok(grad_covariance_from_parts(e, &k, &g_u, &g_l))
            }
        }
    }

    /// `∂l/∂P`, failing with a numerical error on any non-finite value.
    pub fn backward_covariance(&self, cache: &GcpCache, grad_q: &Matrix) -> Result<Matrix> {
        if let (CacheState::Eig { e, .. }, Some(prepared)) = (&cache.state, &self.prepared) {
            let k = prepared.k_matrix(e)?;
            let bad = k.nonfinite_entries();
            if !bad.is_empty() {
                let listed: Vec<String> = bad.iter().take(4).map(|(i, j, v)| format!("K[{i},{j}]={v}")).collect();
                return Err(Error::numerical(format!(
                    "{}: non-finite gradient kernel ({} entries: {}{})",
                    self.cfg.backward.describe(),
                    bad.len(),
                    listed.join(", "),
                    if bad.len() > 4 { ", ..." } else { "" }
                )));
            }
        }
        let g = self.backward_covariance_unchecked(cache, grad_q)?;
        if !g.is_finite() {
            return Err(Error::numerical(format!("{}: non-finite covariance gradient", self.cfg.backward.describe())));
        }
        Ok(g)
    }

    /// `∂l/∂X` with the finiteness guard.
    pub fn backward(&self, cache: &GcpCache, grad_q: &Matrix) -> Result<Matrix> {
        let g = self.backward_covariance(cache, grad_q)?;
        let gx = ns_gradient_of_x(&g, &cache.x)?;
        if !gx.is_finite() {
            return Err(Error::numerical(format!("{}: non-finite feature gradient", self.cfg.backward.describe())));
        }
        Ok(gx)
    }
}

/// Forward pass: returns `Q` and the cache for [`gcp_backward`].
pub fn gcp_forward(x: &FeatureMatrix, cfg: &GcpLayerConfig) -> Result<(SymPsdMatrix, GcpCache)> {
    GcpLayer::new(*cfg)?.forward(x)
}

/// Backward pass: `∂l/∂X` from `∂l/∂Q`.
pub fn gcp_backward(cache: &GcpCache, grad_q: &Matrix, cfg: &GcpLayerConfig) -> Result<Matrix> {
    GcpLayer::new(*cfg)?.backward(cache, grad_q)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LossKind {
    /// `l = Σ Q_ij`
    Sum,
    /// `l = tr(Q)`
    Trace,
    /// `l = Σ W_ij Q_ij` for a seeded Gaussian `W`.
    RandomLinear(u64),
}

impl LossKind {
    /// `∂l/∂Q` for a `d x d` output.
    pub fn grad_q(&self, d: usize) -> Matrix {
        match *self {
            LossKind::Sum => Matrix::filled(d, d, 1.0),
            LossKind::Trace => Matrix::identity(d),
            LossKind::RandomLinear(seed) => gaussian_matrix(d, d, &mut seeded_rng(seed)),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Sum => "sum",
            LossKind::Trace => "trace",
            LossKind::RandomLinear(_) => "random-linear",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub config: String,
    pub scheme: String,
    pub loss: &'static str,
    /// Largest `|analytic - numeric| / max(|numeric|_max, |analytic|_max)`.
    pub max_rel_error: f64,
    pub mean_rel_error: f64,
    pub n_nonfinite: usize,
    /// Entry `(i, j)` of `X` with the largest error.
    pub worst: (usize, usize),
    pub tolerance: f64,
    /// Finite gradient that still misses the tolerance: the scheme's
    /// deliberate deviation from the exact gradient is active.
    pub bias: bool,
    /// Error raised by the layer itself, if any.
    pub failure: Option<String>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.n_nonfinite == 0 && self.max_rel_error <= self.tolerance
    }
}

/// Compares the layer's `∂l/∂X` with central finite differences,
/// `h = 1e-6 (1 + |x_ij|)`, over every entry of `X`.
pub fn grad_check(cfg: &GcpLayerConfig, x: &FeatureMatrix, loss: LossKind) -> Result<GradCheckReport> {
    grad_check_with_tolerance(cfg, x, loss, GRAD_CHECK_TOLERANCE)
}

pub fn grad_check_with_tolerance(
    cfg: &GcpLayerConfig,
    x: &FeatureMatrix,
    loss: LossKind,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let (d, n) = (x.dim(), x.samples());
    if d * n > GRAD_CHECK_MAX_ENTRIES {
        return Err(Error::invalid(format!("grad_check supports d*N <= {GRAD_CHECK_MAX_ENTRIES}, got {}", d * n)));
    }
    let layer = GcpLayer::new(*cfg)?;
    let g_q = loss.grad_q(d);
    let mut report = GradCheckReport {
        config: cfg.describe(),
        scheme: String::from(cfg.backward.name()),
        loss: loss.name(),
        max_rel_error: 0.0,
        mean_rel_error: 0.0,
        n_nonfinite: 0,
        worst: (0, 0),
        tolerance,
        bias: false,
        failure: None,
    };

    let analytic = match layer.forward(x).and_then(|(_, cache)| {
        let g = layer.backward_covariance_unchecked(&cache, &g_q)?;
        ns_gradient_of_x(&g, x)
    }) {
        Ok(a) => a,
        Err(e) => {
            report.failure = Some(format!("{e}"));
            report.n_nonfinite = d * n;
            report.max_rel_error = f64::INFINITY;
            report.mean_rel_error = f64::INFINITY;
            return Ok(report);
        }
    };

    let value = |m: &Matrix| -> Result<f64> {
        let (q, _) = layer.forward(&FeatureMatrix::new(m.clone())?)?;
        Ok(q.as_matrix().frobenius_dot(&g_q))
    };
    let base = x.as_matrix();
    let mut numeric = Matrix::zeros(d, n);
    for i in 0..d {
        for j in 0..n {
            let h = 1e-6 * (1.0 + base[(i, j)].abs());
            let mut plus = base.clone();
            let mut minus = base.clone();
            plus[(i, j)] += h;
            minus[(i, j)] -= h;
            numeric[(i, j)] = match (value(&plus), value(&minus)) {
                (Ok(a), Ok(b)) => (a - b) / (2.0 * h),
                _ => f64::NAN,
            };
        }
    }

    report.n_nonfinite = analytic.as_slice().iter().filter(|v| !v.is_finite()).count();
    let finite_max = |m: &Matrix| m.as_slice().iter().filter(|v| v.is_finite()).fold(0.0f64, |a, v| a.max(v.abs()));
    let scale = finite_max(&numeric).max(finite_max(&analytic));
    let mut total = 0.0;
    let mut worst = -1.0f64;
    for i in 0..d {
        for j in 0..n {
            let diff = (analytic[(i, j)] - numeric[(i, j)]).abs();
            let rel = if diff == 0.0 { 0.0 } else if scale > 0.0 { diff / scale } else { f64::INFINITY };
            let rel = if rel.is_nan() { f64::INFINITY } else { rel };
            total += rel;
            if rel > worst {
                worst = rel;
                report.worst = (i, j);
            }
        }
    }
    report.max_rel_error = worst.max(0.0);
    report.mean_rel_error = total / (d * n) as f64;
    report.bias = report.n_nonfinite == 0 && worst.is_finite() && worst > tolerance;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{features_with_spectrum, random_features};

    #[test]
    fn pairing_rules() {
        assert!(GcpLayerConfig::new(ForwardMethod::NewtonSchulz(5), BackwardScheme::Ordinary, Precision::Double).is_err());
        assert!(GcpLayerConfig::new(
            ForwardMethod::NewtonSchulz(5),
            BackwardScheme::NewtonSchulzBackward(4),
            Precision::Double
        )
        .is_err());
        assert!(GcpLayerConfig::eig(BackwardScheme::PowerIteration(10)).is_err());
        assert!(GcpLayerConfig::eig(BackwardScheme::NewtonSchulzBackward(10)).is_ok());
        assert_eq!(GcpLayerConfig::legal_pairs(8).len(), 7);
    }

    #[test]
    fn constant_features_clamp() {
        let x = FeatureMatrix::new(Matrix::filled(3, 5, 2.0)).unwrap();
        let cfg = GcpLayerConfig::eig(BackwardScheme::Ordinary).unwrap();
        let (q, cache) = gcp_forward(&x, &cfg).unwrap();
        assert_eq!(cache.clamped_count(), 3);
        assert!(q.as_matrix().max_abs() <= f64::EPSILON.sqrt() * (1.0 + 1e-12));
        // Newton-Schulz has nothing to normalize by.
        assert!(gcp_forward(&x, &GcpLayerConfig::newton_schulz(5).unwrap()).is_err());
    }

    #[test]
    fn hand_case_composes() {
        let x = FeatureMatrix::new(Matrix::from_rows(&[[1.0, -1.0], [0.0, 0.0]])).unwrap();
        let (q, cache) = gcp_forward(&x, &GcpLayerConfig::eig(BackwardScheme::Ordinary).unwrap()).unwrap();
        assert_eq!(cache.clamped_count(), 1);
        let eps = f64::EPSILON;
        assert!((q.as_matrix()[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((q.as_matrix()[(1, 1)] - eps.sqrt()).abs() < 1e-20);
        assert_eq!(q.upper_triangle().len(), 3);
    }

    #[test]
    fn eig_and_newton_schulz_agree() {
        let mut rng = seeded_rng(8);
        let x = features_with_spectrum(&[1.0, 0.5, 0.1, 0.02], 20, &mut rng).unwrap();
        let (qe, _) = gcp_forward(&x, &GcpLayerConfig::eig(BackwardScheme::Ordinary).unwrap()).unwrap();
        let (qn, _) = gcp_forward(&x, &GcpLayerConfig::newton_schulz(20).unwrap()).unwrap();
        assert!(qe.as_matrix().max_abs_diff(qn.as_matrix()) / qe.as_matrix().max_abs() < 1e-5);
    }

    #[test]
    fn zero_cotangent_gives_zero() {
        let x = random_features(3, 7, &mut seeded_rng(2)).unwrap();
        for cfg in GcpLayerConfig::legal_pairs(3) {
            let (_, cache) = gcp_forward(&x, &cfg).unwrap();
            let g = gcp_backward(&cache, &Matrix::zeros(3, 3), &cfg).unwrap();
            assert_eq!(g.max_abs(), 0.0, "{}", cfg.describe());
        }
    }

    #[test]
    fn ordinary_tie_is_a_typed_error() {
        // Identical eigenvalues: covariance proportional to the identity.
        let x = FeatureMatrix::new(Matrix::from_rows(&[[1.0, -1.0, 0.0, 0.0], [0.0, 0.0, 1.0, -1.0]])).unwrap();
        let cfg = GcpLayerConfig::eig(BackwardScheme::Ordinary).unwrap();
        let (_, cache) = gcp_forward(&x, &cfg).unwrap();
        let err = gcp_backward(&cache, &Matrix::identity(2), &cfg).unwrap_err();
        assert!(matches!(err, Error::NumericalFailure(ref m) if m.contains("ordinary") && m.contains("K[0,1]")));
    }

    #[test]
    fn grad_check_sum_loss() {
        let x = random_features(3, 10, &mut seeded_rng(4)).unwrap();
        let r = grad_check(&GcpLayerConfig::eig(BackwardScheme::Ordinary).unwrap(), &x, LossKind::Sum).unwrap();
        assert!(r.max_rel_error <= 1e-5, "{r:?}");
        assert!(r.passed());
    }
}

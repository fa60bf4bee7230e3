//! Differentiable matrix square roots for global covariance pooling.
//!
//! Forward methods: exact eigendecomposition and coupled Newton-Schulz
//! iteration. Backward schemes: ordinary eigendecomposition gradient, Top-N,
//! truncation, power iteration, Taylor and Padé approximations of the
//! `1/(λ_i - λ_j)` kernel, and Newton-Schulz reverse mode.
//!
//! The crate is `no_std` (it needs `alloc`). File formats and the command
//! line live in the `specgrad` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod layer;
mod lstsq;
pub mod matrix;
pub mod newton_schulz;
pub mod pade;
pub mod spectral;
pub mod svd_grad;
pub mod synth;
#[cfg(test)]
mod test_support;
pub mod training;

pub use error::{Error, Result};
pub use layer::{gcp_backward, gcp_forward, grad_check, ForwardMethod, GcpCache, GcpLayer, GcpLayerConfig, GradCheckReport, LossKind};
pub use matrix::Matrix;
pub use newton_schulz::{ns_backward, ns_forward, ns_gradient_of_x, NewtonSchulzTrace};
pub use pade::{
    approximation_error_table, eval_rational, pade_from_continued_fraction, pade_from_series, ApproxKind, ErrorTable,
    PadeApproximant, PowerSeries,
};
pub use spectral::{
    clamp_eigenvalues, condition_number, covariance, eigh, matrix_power, ConditionNumber, EigenDecomposition,
    FeatureMatrix, Precision, SymPsdMatrix,
};
pub use svd_grad::{
    beta_smoothness, grad_covariance, grad_eigvec_eigval, gradient_upper_bound, k_matrix, pi_gradient, power_iteration,
    BackwardScheme, GradBound, KMatrix, PowerIterationTrace,
};

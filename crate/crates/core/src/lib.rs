//! Likelihood inference for the autocorrelation parameter of k parallel
//! Gaussian series with separable covariance Γ(β) ⊗ Σ.
//!
//! The crate covers the profile likelihoods of the scalar, diagonal and
//! unrestricted Σ models, their residual (REML) versions, the
//! sequential likelihoods for the upper-triangular group and Green's-matrix
//! Σ, distance-matrix forms, the closed-form Fisher information and the Haar
//! moment formulas used to derive it, plus seeded Monte Carlo experiments
//! that check all of the above.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod covariance;
pub mod error;
pub mod experiments;
pub mod haar;
pub mod likelihood;
pub mod linalg;
pub mod optimize;
pub mod projection;
pub mod sampling;
pub mod stats;

pub use covariance::{build_sigma, gamma_of, v_factor, Ar1Model, CovBundle, SigmaSpec};
pub use error::{Error, Result};
pub use likelihood::{
    efficiency_ii_vs_i, evaluate, expected_info, fit_beta, profile_loglik, score, FitResult, LikelihoodEval,
    ModelKind, ProfileKernel, SearchConfig,
};
pub use linalg::Matrix;
pub use projection::{distance_pair, make_projector, DesignMatrix, DistancePair, Projector};
pub use stats::McReport;

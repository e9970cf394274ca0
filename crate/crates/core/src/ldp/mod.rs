//! Large-deviation primitives: Hamiltonians, Lagrangians, actions and
//! minimum-action paths.

mod action;
mod conjugate;
mod mam;
mod noise;
mod potential;
mod quadrature;
mod truncated;

pub use action::{action, DiscretePath};
pub use conjugate::maximize_conjugate;
pub use mam::{minimize_action, MamConfig, MamResult};
pub use noise::{
    parse_atoms_csv, CgfDerivatives, FiniteSupport, IsotropicGaussian, LocalState, NoiseModel,
    NoiseParams, NoiseRegistry, StateDependentGaussian, TruncatedGaussian, HERMITE_ORDER,
};
pub use potential::{potential_transform, VarianceProfile};
pub use quadrature::{adaptive_simpson, gauss_hermite};
pub use truncated::{
    certify_truncated_gaussian, error_factor, radius_threshold, TruncationCertificate,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LdpError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid noise model: {0}")]
    InvalidModel(String),
    #[error("unsupported noise model: {0}")]
    UnsupportedModel(String),
    #[error("variance {variance} at objective level {level} is not positive")]
    NonPositiveVariance { level: f64, variance: f64 },
    #[error("moment-generating function underflowed or overflowed")]
    Overflow,
    #[error("conjugate maximization did not converge (best lower bound {best_lower_bound})")]
    NonConvergence { best_lower_bound: f64 },
    #[error("quadrature failed: estimate {estimate} with error {error}")]
    QuadratureFailure { estimate: f64, error: f64 },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("path endpoint {0:?} lies outside the domain box")]
    OutsideDomain(Vec<f64>),
    #[error("minimum-action search hit the iteration cap (best action {})", .0.action)]
    MaxIterations(Box<MamResult>),
}

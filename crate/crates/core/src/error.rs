use alloc::string::String;
use alloc::vec::Vec;

use crate::spectra::Violation;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("spectrum carries no positive intensity")]
    EmptySpectrum,
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),
    #[error("tabulated spectrum is not normalizable (total weight {0})")]
    NotNormalizable(f64),
    #[error("spectral moments violate {n} constraint(s): {0:?}", n = .0.len())]
    InvalidMoments(Vec<Violation>),
    #[error("expected a {expected}D quantity, got {found}D")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("correlation matrix is not positive definite (pivot {index} = {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("degenerate model: {0}")]
    Degenerate(&'static str),
    #[error("invalid contour: {0}")]
    InvalidContour(String),
    #[error("quadrature did not converge (estimate {estimate:e}, error {error:e})")]
    NoConvergence { estimate: f64, error: f64 },
    #[error("closed-form routes disagree: {what} ({lhs:e} vs {rhs:e})")]
    RouteMismatch { what: &'static str, lhs: f64, rhs: f64 },
    #[error("conditioning block is singular")]
    SingularConditioning,
    #[error("degenerate local form: {0}")]
    DegenerateLocalForm(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

use thiserror::Error;

/// Errors raised by the geometric and numerical routines.
///
/// Locations are carried as `f64` coordinate lists regardless of the scalar
/// type the computation ran in.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("non-finite value in {what} at {at:?}")]
    NonFinite { what: &'static str, at: Vec<f64> },

    #[error("metric is not positive definite at {at:?}")]
    NotPositiveDefinite { at: Vec<f64> },

    #[error("singular matrix in {what} at {at:?}")]
    Singular { what: &'static str, at: Vec<f64> },

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("velocity violates the constraints: |A(q)v|_inf = {residual:e} exceeds {tol:e}")]
    ConstraintViolation { residual: f64, tol: f64 },

    #[error("point {at:?} lies outside the domain")]
    DomainViolation { at: Vec<f64> },

    #[error("integration blew up at t = {t}")]
    BlowUp { t: f64 },

    #[error(
        "Newton iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NewtonFailed { iterations: usize, residual: f64 },

    #[error("negative radicand {value:e} in radial distance (metric not positive definite)")]
    NegativeRadicand { value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = GeomError> = std::result::Result<T, E>;

use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("maximizer is not at (pi, pi): found {found:?}")]
    NonMaxAtPi { found: [f64; 2] },
    #[error("Hessian at the maximizer is degenerate (det = {det:e})")]
    DegenerateHessian { det: f64 },
    #[error("hopping cutoff R = {cutoff} too small: tail {tail:e} exceeds {tol:e}")]
    CutoffTooSmall { cutoff: usize, tail: f64, tol: f64 },
    #[error("energy {z} is not above the band maximum {e_max}")]
    BelowThreshold { z: f64, e_max: f64 },
    #[error("quadrature did not converge: estimate {estimate:e} > target {target:e}")]
    NoConvergence { estimate: f64, target: f64 },
    #[error("threshold integral diverges ({0})")]
    NotIntegrable(String),
    #[error("couplings must be nonzero reals, got a = {a}, b = {b}")]
    ZeroCoupling { a: f64, b: f64 },
    #[error("root bracketing failed: {0}")]
    BracketFailure(String),
    #[error("root lies closer than {floor:e} to the band maximum")]
    UnresolvableRoots { floor: f64 },
    #[error("Hessian is not diagonal; coefficient requires a diagonal Hessian")]
    NonDiagonalHessian,
    #[error("model is not even in each coordinate")]
    NotEvenPerCoordinate,
    #[error("no sign change of G on [0, 1] (G(0) = {g0:e}, G(1) = {g1:e})")]
    SignChangeAbsent { g0: f64, g1: f64 },
    #[error("fit failed: {0}")]
    FitFailure(String),
}

impl Error {
    /// Errors that come from the mathematics of the problem rather than the numerics.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::ZeroCoupling { .. }
                | Error::BelowThreshold { .. }
                | Error::NonMaxAtPi { .. }
                | Error::DegenerateHessian { .. }
                | Error::NotIntegrable(_)
                | Error::NonDiagonalHessian
                | Error::NotEvenPerCoordinate
                | Error::InvalidModel(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

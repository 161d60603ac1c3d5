use thiserror::Error;

/// Errors surfaced by the numerical kernels.
#[derive(Error, Debug)]
pub enum MflabError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("interaction kernel is not even: {0}")]
    KernelNotEven(String),

    #[error("norm drift {drift:.3e} at t = {t} exceeds tolerance {tol:.1e}")]
    NormDrift { t: f64, drift: f64, tol: f64 },

    #[error("symplectic residual {residual:.3e} at t = {t} exceeds {limit:.1e}")]
    SymplecticBlowup { t: f64, residual: f64, limit: f64 },

    #[error("generator invariant violated: {0}")]
    GeneratorInvariant(String),

    #[error("interpolation time {t} outside trajectory range [0, {t_max}]")]
    OutOfRange { t: f64, t_max: f64 },

    #[error("covariance real part not positive semidefinite: min eigenvalue {0:.3e}")]
    CovarianceIndefinite(f64),

    #[error("Re(Sigma) not strictly positive (min eigenvalue {0:.3e}); use the characteristic function instead of the density")]
    CovarianceSingular(f64),

    #[error("Fock basis error: {0}")]
    Basis(String),

    #[error("Fock truncation too small: {0}")]
    Truncation(String),

    #[error("Krylov propagator failed to converge: {0}")]
    KrylovFailure(String),

    #[error("LAPACK {routine} failed with info = {info}")]
    Lapack { routine: &'static str, info: i32 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MflabError>;

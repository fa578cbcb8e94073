use thiserror::Error;

/// Errors produced by the estimation, asymptotics and simulation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("basis is not orthonormal (max deviation {0:e})")]
    NonOrthonormalBasis(f64),

    #[error("sample covariance is numerically singular (smallest eigenvalue {min_eigenvalue:e}, tolerance {tolerance:e})")]
    Singular { min_eigenvalue: f64, tolerance: f64 },

    #[error("ratio p/n = {ratio:.4} lies in the rejected band near 1 (plain inverse allowed up to {limit})")]
    NearSingularRegime { ratio: f64, limit: f64 },

    #[error("operation requires the {expected} regime")]
    RegimeMismatch { expected: &'static str },

    #[error("target is numerically proportional to the inverse (determinant {determinant:e} below {threshold:e})")]
    DegenerateTarget { determinant: f64, threshold: f64 },

    #[error("pseudo-inverse is degenerate: every eigenvalue is below the rank tolerance")]
    DegeneratePseudoInverse,

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("inconsistent input: {0}")]
    InconsistentInput(String),

    #[error("PRIAL undefined: baseline mean loss is {0}")]
    UndefinedPrial(f64),

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    ///
    /// 2 marks usage, config and input problems; 3 marks numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Singular { .. }
            | Error::DegenerateTarget { .. }
            | Error::DegeneratePseudoInverse
            | Error::NonConvergence { .. }
            | Error::InconsistentInput(_)
            | Error::UndefinedPrial(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

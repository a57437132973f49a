use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported series `{0}`: only type A is implemented")]
    UnsupportedSeries(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular point: |(alpha, q - mu)| = {value:e} below guard {guard:e}")]
    SingularPoint { value: f64, guard: f64 },

    #[error("matrix is singular or not invertible")]
    SingularMatrix,

    #[error("branch cut: eigenvalue {0:e} too close to the negative real axis")]
    BranchCut(f64),

    #[error("Birkhoff factorization failed: leading minor {index} has modulus {value:e}")]
    FactorizationFailed { index: usize, value: f64 },

    #[error("groupoid elements are not composable")]
    NotComposable,

    #[error("element is not in the Cartan subgroup")]
    NotInCartan,

    #[error("calibration fit failed for `{name}`: residual {residual:e}")]
    CalibrationFailed { name: String, residual: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("the two-form is not closed: residual {0:e}")]
    NotClosed(f64),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

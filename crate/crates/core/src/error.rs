//! Error types shared across the solver tiers.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("dipole-forbidden level pair: F_g = {fg}, F_e = {fe}")]
    DipoleForbidden { fg: f64, fe: f64 },

    #[error("invalid level scheme: {0}")]
    InvalidLevels(String),

    #[error("invalid drive: {0}")]
    InvalidDrive(String),

    #[error("green tensor evaluated at r = 0")]
    GreenAtZero,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error(
        "near-singular H_NH (condition estimate {cond:.3e}): drive resonant with a \
         collective single-excitation eigenstate at detuning {detuning}"
    )]
    SingularHnh { cond: f64, detuning: f64 },

    #[error("step size underflow at t = {t} (dt = {dt:.3e})")]
    StepSizeUnderflow { t: f64, dt: f64 },

    #[error("momentum {0:?} is not on the reciprocal grid")]
    OffGrid([f64; 2]),

    #[error("no squeezing axis: f(k) = 0 for this mode")]
    NoSqueezingAxis,

    #[error("squeezing witness undefined: denominator <S²> - N/2 = {0:.3e} <= 0")]
    WitnessUndefined(f64),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("{0}")]
    Invalid(String),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mode range: {0}")]
    InvalidModeRange(String),

    #[error("mode range mismatch: expected {expected} modes, got {actual}")]
    ModeRangeMismatch { expected: usize, actual: usize },

    #[error("resolvent is singular at mode {mode}: lambda = {lambda} hits an eigenvalue")]
    SingularResolvent { mode: i64, lambda: Complex64 },

    #[error("eigenvalue {eigenvalue} of mode {mode} is not in the open left half-plane")]
    UnstableMode { mode: i64, eigenvalue: Complex64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("window holds {got} usable points, at least {needed} required")]
    InsufficientWindow { needed: usize, got: usize },

    #[error("envelope is not strictly positive at t = {t}")]
    NonPositiveEnvelope { t: f64 },

    #[error("assumption 1 fails at exosystem mode {k}: |H(i omega_k)| = {magnitude:e} is below the floor {floor:e}")]
    Assumption1 { k: i64, magnitude: f64, floor: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

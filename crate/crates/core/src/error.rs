use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sector too large: binomial({n_modes}, {n_electrons}) = {dim} exceeds cap {cap}")]
    SectorTooLarge {
        n_modes: usize,
        n_electrons: usize,
        dim: u128,
        cap: usize,
    },

    #[error("invalid sector: {0}")]
    InvalidSector(String),

    #[error("mode index {index} out of range for {n_modes} modes")]
    ModeOutOfRange { index: usize, n_modes: usize },

    #[error("duplicate mode {0} in operator string")]
    DuplicateMode(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("two-body tensor violates 8-fold symmetry (max deviation {deviation:.3e})")]
    SymmetryViolation { deviation: f64 },

    #[error("eigensolver did not converge after {iterations} iterations (best residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("projection annihilated the state (delta bound {delta_bound:.6} >= 1)")]
    ZeroProjection { delta_bound: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

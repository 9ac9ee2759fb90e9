//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid half-space point: {0}")]
    InvalidDomain(String),

    #[error("dimension must be at least 3, got {0}")]
    InvalidDimension(u32),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("kernel index must lie in 1..=n, got {0}")]
    KernelIndexOutOfRange(usize),

    #[error("parameter out of range: {0}")]
    ParameterRange(String),

    #[error("integral diverges: {0}")]
    DivergentIntegral(String),

    #[error("linear solver did not converge: residual {residual:.3e} after {iterations} iterations (tol {tol:.3e})")]
    SolverDidNotConverge {
        residual: f64,
        iterations: usize,
        tol: f64,
    },

    #[error("point outside the solved grid: {0}")]
    OutOfGrid(String),

    #[error("corrector solution was computed for different curvature data (hash {sol:#018x} vs {curv:#018x})")]
    CurvatureHashMismatch { sol: u64, curv: u64 },

    #[error("no interior maximum: phi must be negative, got {0}")]
    PhiNonNegative(f64),

    #[error("cache file corrupt or incompatible: {0}")]
    CacheCorrupt(String),

    #[error("cache is locked by another run: {0}")]
    CacheLocked(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

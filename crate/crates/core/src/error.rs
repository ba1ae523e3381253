use thiserror::Error;

/// Failures raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("basis index {index} out of range for basis of size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("state ({nx},{ny}) lies outside basis cutoff {cutoff}")]
    TermOutsideCutoff { nx: usize, ny: usize, cutoff: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("Hermite polynomial H_{n}({k}) overflowed")]
    HermiteOverflow { n: usize, k: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("velocity evaluated at a nodal point ({x}, {y}): |psi|^2 = {density:e}")]
    NodeProximity { x: f64, y: f64, density: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("orbit escaped at t = {t}")]
    Escaped { t: f64 },

    #[error("resonant denominator 4ωy² − ωx² = {0:e}")]
    ResonantDenominator(f64),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        got: usize,
    },

    #[error(
        "power iteration did not converge: eigenvalue still moving by {last_change:.3e} \
         (tol {tol:.3e}) after {sweeps} sweeps"
    )]
    NonConvergence {
        sweeps: usize,
        tol: f64,
        last_change: f64,
    },

    #[error("exp would overflow: max |entry| = {actual:.6} exceeds the guard {limit}")]
    OverflowRisk { actual: f64, limit: f64 },

    #[error("precondition violated: {0}")]
    Precondition(#[from] Precondition),

    #[error("sampler gave up after {attempts} rejected draws (trial {trial})")]
    SamplerExhausted { trial: u64, attempts: u32 },

    #[error("problem too large for the high-precision oracle: n*d = {size} > {limit}")]
    ScaleExceeded { size: usize, limit: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

/// A named hypothesis that an input failed to satisfy.
///
/// Bound and certificate routines refuse to run outside their region of
/// validity; the variant identifies which requirement broke so callers can
/// report it verbatim.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum Precondition {
    #[error("operator norm of the data matrix is {norm:.12}, above the radius R = {r}")]
    MatrixNormAboveRadius { norm: f64, r: f64 },

    #[error("operator norm of the shifted data matrix is {norm:.12}, above the radius R = {r}")]
    ShiftedMatrixNormAboveRadius { norm: f64, r: f64 },

    #[error("weight norm ||x||_2 = {norm:.12} is above the radius R = {r}")]
    WeightNormAboveRadius { norm: f64, r: f64 },

    #[error("shifted weight norm ||x||_2 = {norm:.12} is above the radius R = {r}")]
    ShiftedWeightNormAboveRadius { norm: f64, r: f64 },

    #[error("argument step ||.||_inf = {value:.12e} is not below the cap {cap}")]
    StepCapExceeded { value: f64, cap: f64 },

    #[error("R = {r} is below 4, the smallest radius the certificate covers")]
    RadiusBelowCertificateMinimum { r: f64 },

    #[error("R must be positive and finite, got {r}")]
    RadiusNotPositive { r: f64 },

    #[error("input contains a non-finite entry")]
    NonFiniteInput,
}

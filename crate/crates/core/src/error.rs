use thiserror::Error;

/// Errors produced by the phase retrieval pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BlockPrError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A block `J_k` of the lifted system is numerically singular.
    #[error("lifted block {block} is singular (sigma_min = {sigma_min:e}, sigma_max = {sigma_max:e})")]
    Conditioning {
        block: usize,
        sigma_min: f64,
        sigma_max: f64,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("dense materialization refused for d = {d} (limit {limit})")]
    TooLarge { d: usize, limit: usize },

    #[error("sparse decoder did not converge after {iterations} iterations (residual {residual:e})")]
    DecoderNonConvergence { iterations: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, BlockPrError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(BlockPrError::Domain(msg.into()))
}

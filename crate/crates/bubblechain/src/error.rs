//! Error type shared across the crate.

use thiserror::Error;

/// All failure modes surfaced by the library.
///
/// Variants carry enough context to be actionable from a CLI message; none
/// of them wraps a panic. Functions that can only fail in one way still
/// return [`crate::Result`] so call sites compose.
#[derive(Debug, Error)]
pub enum Error {
    /// A digit string had the wrong length or a digit outside its radix.
    #[error("invalid basis state: {reason}")]
    InvalidBasisState { reason: String },

    /// An operator matrix did not match the dimension it was applied to.
    #[error("shape mismatch: expected {expected}x{expected}, got {got_rows}x{got_cols}")]
    ShapeError {
        expected: usize,
        got_rows: usize,
        got_cols: usize,
    },

    /// A two-site operation named an invalid site pair.
    #[error("invalid site pair ({a}, {b}): {reason}")]
    InvalidSitePair { a: usize, b: usize, reason: String },

    /// A flat index or site index was out of range.
    #[error("index {index} out of range (limit {limit})")]
    IndexError { index: usize, limit: usize },

    /// A requested option combination is defined but deliberately rejected.
    #[error("unsupported option: {0}")]
    UnsupportedOption(String),

    /// The register dimension would exceed the configured cap.
    #[error("state space too large: {dim} exceeds cap {cap} (override with BUBBLECHAIN_MAX_DIM)")]
    TooLarge { dim: usize, cap: usize },

    /// String/broken-string identification failed or was ambiguous.
    #[error("string-state identification failed: {0}")]
    IdentificationError(String),

    /// A scalar argument was out of domain (NaN, non-positive, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// No string-breaking resonance exists for this chain length.
    #[error("no resonance condition for {n_plaquettes} plaquettes (need at least 2)")]
    NoResonance { n_plaquettes: usize },

    /// A state vector failed validation (zero norm, wrong length, ...).
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A Trotter plan failed validation.
    #[error("invalid evolution plan: {0}")]
    InvalidPlan(String),

    /// A time or coupling grid was empty, non-monotone, or non-finite.
    #[error("invalid grid: {0}")]
    GridError(String),

    /// Post-selection removed every sample.
    #[error("post-selection on the physical subspace rejected all {total} samples")]
    EmptyPostSelection { total: u64 },

    /// Gate lowering / diagonal synthesis could not make progress.
    #[error("gate lowering failed: {0}")]
    LoweringError(String),

    /// A feature is not available for the requested sector or geometry.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A scenario config failed to parse or validate.
    #[error("config error: {0}")]
    ConfigError(String),

    /// The effective-model state mapping is not defined for these parameters.
    #[error("effective mapping unavailable: {0}")]
    MappingUnavailable(String),

    /// Filesystem failure while writing scenario outputs.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

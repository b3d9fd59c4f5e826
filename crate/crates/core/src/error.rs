//! Error type shared by every module in the crate.
//!
//! Variants split into two classes used by callers to pick process exit
//! codes: input errors (malformed files, bad arguments, shape mismatches)
//! and numerical failures (degeneracies and non-convergence discovered
//! while computing). [`CoreError::is_input_error`] encodes the split.

use thiserror::Error;

/// Any failure produced by this crate.
#[derive(Debug, Error)]
pub enum CoreError {
    // ----- input / shape errors -----
    #[error("missing price for date {date}, asset {asset_id}")]
    MissingCell { date: String, asset_id: String },

    #[error("unknown sector label '{0}' (expected IDX, CMD, FXR, or YLD)")]
    UnknownSector(String),

    #[error("duplicate row for date {date}, asset {asset_id}")]
    DuplicateRow { date: String, asset_id: String },

    #[error("price row references asset '{0}' absent from the asset table")]
    UnknownAsset(String),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("series too short: need at least {needed} points, have {actual}")]
    SeriesTooShort { needed: usize, actual: usize },

    #[error("aligned sample too small: need at least {needed} points, have {actual}")]
    SampleTooSmall { needed: usize, actual: usize },

    #[error("sector {0} has no members in the panel")]
    EmptySector(String),

    #[error("group '{0}' has no members")]
    EmptyGroup(String),

    #[error("condition values span a degenerate range (min == max)")]
    DegenerateRange,

    #[error("invalid argument: {0}")]
    BadArgument(String),

    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    // ----- numerical failures -----
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("zero vector where a direction is required ({0})")]
    ZeroVector(String),

    #[error("zero variance in {0}")]
    ZeroVariance(String),

    #[error("iteration did not converge after {iterations} steps ({what})")]
    NoConvergence { what: String, iterations: usize },

    #[error("factors are collinear (condition number {condition:.3e})")]
    CollinearFactors { condition: f64 },

    #[error("null ensemble holds no successful trials")]
    EmptyNull,

    #[error("correlation matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveSemiDefinite { min_eigenvalue: f64 },

    #[error("PSD projection active on {active_fraction:.1}% of dates (>= 50%); effect too strong for the base correlation")]
    Infeasible { active_fraction: f64 },
}

impl CoreError {
    /// True when the failure stems from inputs the caller supplied (files,
    /// flags, shapes) rather than from numerical degeneracy.
    pub fn is_input_error(&self) -> bool {
        use CoreError::*;
        matches!(
            self,
            MissingCell { .. }
                | UnknownSector(_)
                | DuplicateRow { .. }
                | UnknownAsset(_)
                | NotSquare { .. }
                | DimensionMismatch(_)
                | IndexOutOfRange { .. }
                | SeriesTooShort { .. }
                | SampleTooSmall { .. }
                | EmptySector(_)
                | EmptyGroup(_)
                | DegenerateRange
                | BadArgument(_)
                | Io { .. }
                | Csv { .. }
        )
    }
}

/// Crate-wide result alias.
pub type Result<T, E = CoreError> = std::result::Result<T, E>;

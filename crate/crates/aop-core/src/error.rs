//! Error type shared across the crate.

use thiserror::Error;

/// Everything that can go wrong while analyzing an operator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AopError {
    /// A matrix entry is NaN or infinite.
    #[error("entry at row {row}, column {col} is not finite")]
    NonFiniteEntry { row: usize, col: usize },

    /// Matrices must have at least one row and one column.
    #[error("matrix dimensions must be at least 1x1 (got {rows}x{cols})")]
    EmptyMatrix { rows: usize, cols: usize },

    /// Operations quantifying over orthogonal pairs need a domain of
    /// dimension at least 2.
    #[error("domain dimension must be at least 2 (got {cols})")]
    DimensionTooSmall { cols: usize },

    /// No column-orthonormal matrix of the requested shape exists.
    #[error("no isometry of shape {rows}x{cols} exists (more columns than rows)")]
    NoIsometryExists { rows: usize, cols: usize },

    /// The operation is undefined for the zero operator.
    #[error("operator is zero")]
    ZeroOperator,

    /// The operation needs a square matrix.
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    /// The supplied vectors are not orthogonal within tolerance.
    #[error("vectors are not orthogonal: |<x,y>| = {inner:e} exceeds {tol:e} * |x||y|")]
    NotOrthogonal { inner: f64, tol: f64 },

    /// A zero vector was supplied where a nonzero one is required.
    #[error("vector is zero")]
    ZeroVector,

    /// A scalar argument lies outside its admissible range.
    #[error("{name} = {value} is outside {expected}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    /// The operator is not approximately orthogonality preserving
    /// (its constant equals 1), so no stability certificate exists.
    #[error("operator is not approximately orthogonality preserving (constant = 1)")]
    NotAop,

    /// Random sampling kept producing degenerate draws.
    #[error("random draw still degenerate after {retries} retries")]
    DegenerateDraw { retries: usize },

    #[error("no usable non-kernel direction for the singular witness")]
    DegenerateKernelChoice,

    /// The 2x2 grid search only handles real 2x2 matrices.
    #[error("expected a real 2x2 matrix (got {rows}x{cols}, {field})")]
    NotReal2x2 {
        rows: usize,
        cols: usize,
        field: &'static str,
    },

    /// Truncation dimensions for the shift-composition sweep must be
    /// even and at least 4.
    #[error("truncation dimension must be an even number >= 4 (got {dim})")]
    BadTruncation { dim: usize },

    /// Operand shapes do not compose.
    #[error("dimension mismatch: {left_rows}x{left_cols} vs {right_rows}x{right_cols}")]
    ShapeMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    /// Malformed matrix file.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A consistency assertion inside a generated table failed.
    #[error("table check failed: {0}")]
    TableCheck(String),

    /// Cross-formula identities disagreed while assembling a report.
    #[error("internal consistency check failed: {0}")]
    Inconsistency(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, AopError>;

//! Numerical tolerances used throughout the crate.
//!
//! Every threshold lives here with a note on where it comes from, so the
//! rest of the code never hard-codes magic numbers.

/// Maximum |<x,y>| accepted for a pair of unit vectors claimed orthogonal.
///
/// Pairs produced by the library are orthogonal to machine precision;
/// 1e-10 leaves room for user-supplied vectors that went through a few
/// arithmetic steps of their own.
pub const PAIR_ORTH_TOL: f64 = 1e-10;

/// Column-orthonormality tolerance for computed frames (entrywise,
/// relative to 1). SVD and QR factors of well-scaled matrices are
/// orthonormal to a few ulps; 1e-12 is loose by two orders.
pub const FRAME_ORTH_TOL: f64 = 1e-12;

/// Factorization residual tolerance: reconstructions must satisfy
/// `|T - rebuilt|_F <= RECON_TOL * sigma_1 * max(rows, cols)`.
pub const RECON_TOL: f64 = 1e-12;

/// Agreement required between a constructed witness pair's defect and the
/// closed-form constant.
pub const WITNESS_TOL: f64 = 1e-9;

/// Sampled defects may exceed the closed-form supremum by at most this
/// much (floating-point slack on a mathematically one-sided bound).
pub const SOUNDNESS_TOL: f64 = 1e-9;

/// Agreement required between the two closed forms of the distance to
/// scalar multiples of isometries (one in terms of the minimum modulus,
/// one in terms of the preservation constant).
pub const DIST_FORM_TOL: f64 = 1e-12;

/// Tolerance on distance/stability identities that go through a spectral
/// norm of a difference matrix.
pub const DIST_EVAL_TOL: f64 = 1e-10;

/// Default numerical-rank cutoff: singular values at or below
/// `default_rank_tol(rows, cols) * sigma_1` count as zero.
pub fn default_rank_tol(rows: usize, cols: usize) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_tol_scales_with_dimension() {
        assert!(default_rank_tol(8, 2) > default_rank_tol(2, 2));
        assert_eq!(default_rank_tol(4, 7), 7.0 * f64::EPSILON);
    }
}

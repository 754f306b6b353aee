//! Distance from an operator to the scalar multiples of isometries (and
//! of unitaries in the square case), the explicit nearest operator, and
//! the stability-bound certificate built from it.

use nalgebra::Complex;

use crate::error::{AopError, Result};
use crate::matrix::OperatorMatrix;
use crate::metrics::{delta_improved, delta_turnsek, EpsHatValue};
use crate::spectral::{operator_norm, polar, svd};
use crate::tolerances::{DIST_EVAL_TOL, FRAME_ORTH_TOL};

/// Outcome of a nearest-operator computation: the distance, the optimal
/// scalar, the isometry direction, and the nearest operator itself.
#[derive(Debug, Clone)]
pub struct NearnessResult {
    /// (‖T‖ − m(T)) / 2.
    pub distance: f64,
    /// Optimal scalar (‖T‖ + m(T)) / 2; real nonnegative.
    pub lambda_star: f64,
    /// Column-orthonormal direction V from the polar factorization.
    pub isometry_factor: OperatorMatrix,
    /// lambda_star · V.
    pub nearest: OperatorMatrix,
    /// distance / min(‖T‖, ‖S‖); 0 for the zero operator.
    pub bound_ratio: f64,
}

impl NearnessResult {
    /// Re-checks every claimed identity numerically: the nearest
    /// operator attains the distance, it is a scalar multiple of an
    /// isometry, and the ratio respects the sharper stability function.
    pub fn verify(&self, t: &OperatorMatrix) -> Result<()> {
        let diff = t.sub(&self.nearest)?;
        let attained = operator_norm(&diff);
        let scale = self.distance.max(1.0);
        if (attained - self.distance).abs() > DIST_EVAL_TOL * scale {
            return Err(AopError::Inconsistency(format!(
                "nearest operator misses the distance: |{attained} - {}| too large",
                self.distance
            )));
        }
        let v = self.isometry_factor.matrix();
        let gram = v.adjoint() * v;
        let n = gram.nrows();
        let id = nalgebra::DMatrix::<Complex<f64>>::identity(n, n);
        if (gram - id).norm() > FRAME_ORTH_TOL * (n as f64) {
            return Err(AopError::Inconsistency(
                "isometry factor lost column orthonormality".to_string(),
            ));
        }
        if t.cols() >= 2 {
            let e = crate::metrics::eps_hat(t)?;
            if e.value < 1.0 {
                let cap = delta_improved(e.value)?;
                if self.bound_ratio > cap + DIST_EVAL_TOL {
                    return Err(AopError::Inconsistency(format!(
                        "bound ratio {} exceeds stability cap {cap}",
                        self.bound_ratio
                    )));
                }
            }
        }
        Ok(())
    }
}

fn nearest_in_scalar_isometries(t: &OperatorMatrix, rank_tol: f64) -> Result<NearnessResult> {
    let sd = svd(t);
    let norm = sd.operator_norm();
    let min_mod = sd.min_modulus();
    let distance = 0.5 * (norm - min_mod);
    let lambda_star = 0.5 * (norm + min_mod);
    let pd = polar(t, rank_tol)?;
    let nearest = pd.isometry.scale(Complex::new(lambda_star, 0.0));
    let denom = norm.min(lambda_star);
    let bound_ratio = if denom == 0.0 { 0.0 } else { distance / denom };
    Ok(NearnessResult {
        distance,
        lambda_star,
        isometry_factor: pd.isometry,
        nearest,
        bound_ratio,
    })
}

/// Distance from `t` to the scalar multiples of isometries, with the
/// minimizer attained at (‖T‖+m)/2 times the polar direction. Wide
/// matrices are rejected: no isometry of that shape exists.
pub fn dist_to_scalar_isometries(t: &OperatorMatrix, rank_tol: f64) -> Result<NearnessResult> {
    if t.is_wide() {
        return Err(AopError::NoIsometryExists {
            rows: t.rows(),
            cols: t.cols(),
        });
    }
    nearest_in_scalar_isometries(t, rank_tol)
}

/// Square-matrix variant: the polar direction is completed to a unitary,
/// and the distance coincides with the isometry case.
pub fn dist_to_scalar_unitaries(t: &OperatorMatrix, rank_tol: f64) -> Result<NearnessResult> {
    if !t.is_square() {
        return Err(AopError::NotSquare {
            rows: t.rows(),
            cols: t.cols(),
        });
    }
    nearest_in_scalar_isometries(t, rank_tol)
}

/// The stability inequality evaluated on the constructed nearest
/// operator. The construction attains the sharper bound with equality.
#[derive(Debug, Clone)]
pub struct StabilityCertificate {
    pub nearest: OperatorMatrix,
    /// ‖T − S‖, evaluated spectrally.
    pub gap: f64,
    /// Sharper stability function times min(‖T‖, ‖S‖).
    pub rhs_improved: f64,
    /// Classical stability function times min(‖T‖, ‖S‖).
    pub rhs_turnsek: f64,
    pub holds_improved: bool,
}

/// Builds the certificate for `t`. Requires a constant strictly below 1
/// (otherwise no scalar multiple of an isometry is close in the stated
/// sense) and a shape admitting isometries.
pub fn stability_certificate(t: &OperatorMatrix, rank_tol: f64) -> Result<StabilityCertificate> {
    let e = crate::metrics::eps_hat(t)?;
    if e.value >= 1.0 {
        return Err(AopError::NotAop);
    }
    let near = dist_to_scalar_isometries(t, rank_tol)?;
    let diff = t.sub(&near.nearest)?;
    let gap = operator_norm(&diff);
    let s_norm = operator_norm(&near.nearest);
    let floor = e.norm.min(s_norm);
    let rhs_improved = delta_improved(e.value)? * floor;
    let rhs_turnsek = delta_turnsek(e.value)? * floor;
    Ok(StabilityCertificate {
        nearest: near.nearest,
        gap,
        rhs_improved,
        rhs_turnsek,
        holds_improved: gap <= rhs_improved + DIST_EVAL_TOL,
    })
}

/// ‖T/‖T‖ − V‖ with V the polar direction; bounded by 1 − m/‖T‖ and
/// equal to it at full rank.
pub fn normalized_isometry_gap(t: &OperatorMatrix, rank_tol: f64) -> Result<f64> {
    let sd = svd(t);
    let norm = sd.operator_norm();
    if norm == 0.0 {
        return Err(AopError::ZeroOperator);
    }
    let pd = polar(t, rank_tol)?;
    let scaled = t.scale(Complex::new(1.0 / norm, 0.0));
    let diff = scaled.sub(&pd.isometry)?;
    Ok(operator_norm(&diff))
}

/// ‖T/lambda − V‖ for a scalar in [m(T), ‖T‖]; bounded by (t−m)/lambda.
/// Requires a positive minimum modulus so the bounds are meaningful.
pub fn scaled_isometry_gap(t: &OperatorMatrix, lambda: f64, rank_tol: f64) -> Result<f64> {
    let sd = svd(t);
    let norm = sd.operator_norm();
    let min_mod = sd.min_modulus();
    if min_mod <= 0.0 {
        return Err(AopError::OutOfRange {
            name: "min_modulus",
            value: min_mod,
            expected: "a positive value (operator bounded below)",
        });
    }
    if !(min_mod..=norm).contains(&lambda) {
        return Err(AopError::OutOfRange {
            name: "lambda",
            value: lambda,
            expected: "[min_modulus, norm]",
        });
    }
    let pd = polar(t, rank_tol)?;
    let scaled = t.scale(Complex::new(1.0 / lambda, 0.0));
    let diff = scaled.sub(&pd.isometry)?;
    Ok(operator_norm(&diff))
}

/// Closed-form distance re-derived from the constant instead of the
/// minimum modulus; agrees with [`NearnessResult::distance`] within
/// [`crate::tolerances::DIST_FORM_TOL`]. Exposed for cross-checks.
pub fn distance_from_eps(e: &EpsHatValue) -> f64 {
    0.5 * (1.0 - ((1.0 - e.value) / (1.0 + e.value)).sqrt()) * e.norm
}

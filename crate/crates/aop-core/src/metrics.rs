//! The central quantities: pair defect, the orthogonality-preservation
//! constant, exact witness pairs, the minimum-modulus inversion, the two
//! stability functions, and the composition bound.

use nalgebra::{Complex, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{AopError, Result};
use crate::matrix::OperatorMatrix;
use crate::spectral::{complete_orthonormal_frame, inner, svd};
use crate::tolerances::PAIR_ORTH_TOL;

/// Unit vectors x ⊥ y together with the image defect they achieve under
/// the operator they were built for.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalPair {
    pub x: DVector<Complex<f64>>,
    pub y: DVector<Complex<f64>>,
    /// |⟨Tx,Ty⟩| / (‖Tx‖·‖Ty‖), in [0,1]; 0 when either image vanishes.
    pub defect: f64,
}

impl OrthogonalPair {
    /// Normalizes the vectors and computes the defect under `t`. Errors
    /// if either vector is zero or the pair is not orthogonal within
    /// tolerance.
    pub fn for_operator(
        t: &OperatorMatrix,
        x: &DVector<Complex<f64>>,
        y: &DVector<Complex<f64>>,
    ) -> Result<Self> {
        let d = defect(t, x, y)?;
        let nx = x.norm();
        let ny = y.norm();
        Ok(Self {
            x: x / Complex::new(nx, 0.0),
            y: y / Complex::new(ny, 0.0),
            defect: d,
        })
    }
}

/// How far the images of an orthogonal pair are from orthogonal:
/// |⟨Tx,Ty⟩| / (‖Tx‖·‖Ty‖). Zero by convention when either image is
/// zero (every orthogonality bound then holds vacuously).
pub fn defect(
    t: &OperatorMatrix,
    x: &DVector<Complex<f64>>,
    y: &DVector<Complex<f64>>,
) -> Result<f64> {
    assert_eq!(x.len(), t.cols(), "x length must match domain dimension");
    assert_eq!(y.len(), t.cols(), "y length must match domain dimension");
    let nx = x.norm();
    let ny = y.norm();
    if nx == 0.0 || ny == 0.0 {
        return Err(AopError::ZeroVector);
    }
    let ip = inner(x, y).norm();
    if ip > PAIR_ORTH_TOL * nx * ny {
        return Err(AopError::NotOrthogonal {
            inner: ip / (nx * ny),
            tol: PAIR_ORTH_TOL,
        });
    }
    let tx = t.apply(x);
    let ty = t.apply(y);
    let ntx = tx.norm();
    let nty = ty.norm();
    if ntx == 0.0 || nty == 0.0 {
        return Ok(0.0);
    }
    Ok((inner(&tx, &ty).norm() / (ntx * nty)).min(1.0))
}

/// The exact orthogonality-preservation constant together with the two
/// spectral quantities it is built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsHatValue {
    /// (norm² − min_mod²) / (norm² + min_mod²), or 0 for the zero
    /// operator (which trivially preserves orthogonality).
    pub value: f64,
    pub norm: f64,
    pub min_mod: f64,
}

impl EpsHatValue {
    pub fn from_parts(norm: f64, min_mod: f64) -> Self {
        let value = if norm == 0.0 {
            0.0
        } else {
            let t2 = norm * norm;
            let m2 = min_mod * min_mod;
            ((t2 - m2) / (t2 + m2)).clamp(0.0, 1.0)
        };
        Self {
            value,
            norm,
            min_mod,
        }
    }
}

/// Exact constant for `t`: the supremum of [`defect`] over orthogonal
/// pairs, computed in closed form from the extreme singular values.
pub fn eps_hat(t: &OperatorMatrix) -> Result<EpsHatValue> {
    if t.cols() < 2 {
        return Err(AopError::DimensionTooSmall { cols: t.cols() });
    }
    let sd = svd(t);
    Ok(EpsHatValue::from_parts(
        sd.operator_norm(),
        sd.min_modulus(),
    ))
}

/// An orthogonal pair whose defect attains the exact constant.
///
/// Full rank: the normalized sum and difference of the extreme right
/// singular vectors. Degenerate rank (including every wide matrix): a
/// kernel vector e and a mixing direction f give x ∝ f, y = e − ⟨e,f⟩f
/// with Tx = −Ty, so the defect is exactly 1.
pub fn witness_pair(t: &OperatorMatrix, rank_tol: f64) -> Result<OrthogonalPair> {
    if t.cols() < 2 {
        return Err(AopError::DimensionTooSmall { cols: t.cols() });
    }
    if t.is_zero() {
        return Err(AopError::ZeroOperator);
    }
    let sd = svd(t);
    let k = sd.singular_values.len();
    let top = sd.singular_values[0];
    let bottom = sd.singular_values[k - 1];

    let kernel_e = if bottom <= rank_tol * top {
        Some(sd.right_vector(k - 1))
    } else if t.is_wide() {
        Some(complete_orthonormal_frame(&sd.v, 1).column(0).clone_owned())
    } else {
        None
    };

    let (x, y) = match kernel_e {
        Some(e) => {
            let g = sd.right_vector(0);
            let mut f = (&e + &g) / Complex::new(std::f64::consts::SQRT_2, 0.0);
            let nf = f.norm();
            f /= Complex::new(nf, 0.0);
            if t.apply(&f).norm() == 0.0 {
                return Err(AopError::DegenerateKernelChoice);
            }
            let c = inner(&e, &f);
            let x = &f * c;
            let y = &e - &x;
            (x, y)
        }
        None => {
            let v_top = sd.right_vector(0);
            let v_bot = sd.right_vector(k - 1);
            (&v_top + &v_bot, &v_top - &v_bot)
        }
    };
    OrthogonalPair::for_operator(t, &x, &y)
}

fn check_unit_interval(name: &'static str, eps: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eps) {
        return Err(AopError::OutOfRange {
            name,
            value: eps,
            expected: "[0, 1)",
        });
    }
    Ok(())
}

/// Recovers the minimum modulus from the constant and the norm:
/// √((1−eps)/(1+eps))·norm.
pub fn min_modulus_from_eps(eps: f64, norm: f64) -> Result<f64> {
    check_unit_interval("eps", eps)?;
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(AopError::OutOfRange {
            name: "norm",
            value: norm,
            expected: "a finite value > 0",
        });
    }
    Ok(((1.0 - eps) / (1.0 + eps)).sqrt() * norm)
}

/// Classical stability function 1 − √((1−eps)/(1+eps)).
pub fn delta_turnsek(eps: f64) -> Result<f64> {
    check_unit_interval("eps", eps)?;
    Ok(1.0 - ((1.0 - eps) / (1.0 + eps)).sqrt())
}

/// Sharper stability function (1−s)/(1+s) with s = √((1−eps)/(1+eps)).
/// Strictly below [`delta_turnsek`] on (0,1).
pub fn delta_improved(eps: f64) -> Result<f64> {
    check_unit_interval("eps", eps)?;
    let s = ((1.0 - eps) / (1.0 + eps)).sqrt();
    Ok((1.0 - s) / (1.0 + s))
}

/// Upper bound on the constant of a composition S∘T from the norms and
/// minimum moduli of the factors.
pub fn composition_bound(norm_s: f64, m_s: f64, norm_t: f64, m_t: f64) -> Result<f64> {
    for (name, value, positive) in [
        ("norm_s", norm_s, true),
        ("m_s", m_s, false),
        ("norm_t", norm_t, true),
        ("m_t", m_t, false),
    ] {
        let ok = value.is_finite() && if positive { value > 0.0 } else { value >= 0.0 };
        if !ok {
            return Err(AopError::OutOfRange {
                name,
                value,
                expected: "a finite value (norms > 0, moduli >= 0)",
            });
        }
    }
    let p = norm_s * norm_s * norm_t * norm_t;
    let q = m_s * m_s * m_t * m_t;
    Ok((p - q) / (p + q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::ScalarField;
    use crate::sample::{derive_rng, random_matrix, random_orthogonal_pair, random_unitary};
    use crate::spectral::{min_modulus, operator_norm};
    use crate::tolerances::default_rank_tol;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn rank_tol(m: &OperatorMatrix) -> f64 {
        default_rank_tol(m.rows(), m.cols())
    }

    fn vec2(a: f64, b: f64) -> DVector<Complex<f64>> {
        DVector::from_vec(vec![Complex::new(a, 0.0), Complex::new(b, 0.0)])
    }

    #[test]
    fn defect_matches_hand_value() {
        let t = OperatorMatrix::diagonal(&[1.0, 2.0]);
        let d = defect(&t, &vec2(0.5, 0.5), &vec2(-0.5, 0.5)).unwrap();
        assert_relative_eq!(d, 0.6, max_relative = 1e-15);
    }

    #[test]
    fn defect_zero_for_identity_pairs() {
        let t = OperatorMatrix::identity(3);
        let mut rng = derive_rng(31, 0);
        for _ in 0..50 {
            let (x, y) = random_orthogonal_pair(3, ScalarField::Complex, &mut rng).unwrap();
            assert!(defect(&t, &x, &y).unwrap() < 1e-12);
        }
    }

    #[test]
    fn defect_zero_image_convention() {
        let t = OperatorMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let d = defect(&t, &vec2(0.0, 1.0), &vec2(1.0, 0.0)).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn defect_validates_input() {
        let t = OperatorMatrix::identity(2);
        assert!(matches!(
            defect(&t, &vec2(1.0, 0.0), &vec2(1.0, 0.1)),
            Err(AopError::NotOrthogonal { .. })
        ));
        assert!(matches!(
            defect(&t, &vec2(0.0, 0.0), &vec2(1.0, 0.0)),
            Err(AopError::ZeroVector)
        ));
    }

    #[test]
    fn eps_hat_reference_values() {
        let t = OperatorMatrix::diagonal(&[1.0, 2.0]);
        let e = eps_hat(&t).unwrap();
        assert_relative_eq!(e.value, 0.6, max_relative = 1e-15);
        assert_eq!(e.norm, 2.0);
        assert_eq!(e.min_mod, 1.0);

        assert_eq!(eps_hat(&OperatorMatrix::identity(4)).unwrap().value, 0.0);

        let singular = OperatorMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(eps_hat(&singular).unwrap().value, 1.0);

        let scaled = t.scale(Complex::new(5.0, 0.0));
        assert_relative_eq!(eps_hat(&scaled).unwrap().value, 0.6, max_relative = 1e-14);

        let zero = OperatorMatrix::from_real(2, 2, &[0.0; 4]).unwrap();
        assert_eq!(eps_hat(&zero).unwrap().value, 0.0);

        let column = OperatorMatrix::from_real(3, 1, &[1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            eps_hat(&column),
            Err(AopError::DimensionTooSmall { cols: 1 })
        ));
    }

    #[test]
    fn witness_reproduces_constant_full_rank() {
        let t = OperatorMatrix::diagonal(&[1.0, 2.0]);
        let pair = witness_pair(&t, rank_tol(&t)).unwrap();
        assert_relative_eq!(pair.defect, 0.6, max_relative = 1e-13);
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(pair.x[0].re, inv_sqrt2, max_relative = 1e-12);
        assert_relative_eq!(pair.x[1].re, inv_sqrt2, max_relative = 1e-12);
        assert_relative_eq!(pair.y[0].re, -inv_sqrt2, max_relative = 1e-12);
        assert_relative_eq!(pair.y[1].re, inv_sqrt2, max_relative = 1e-12);
    }

    #[test]
    fn witness_exact_on_singular_matrices() {
        let t = OperatorMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let pair = witness_pair(&t, rank_tol(&t)).unwrap();
        assert!((pair.defect - 1.0).abs() <= 1e-12, "defect {}", pair.defect);

        let wide = OperatorMatrix::from_real(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        let pair = witness_pair(&wide, rank_tol(&wide)).unwrap();
        assert!((pair.defect - 1.0).abs() <= 1e-12, "defect {}", pair.defect);
    }

    #[test]
    fn witness_degenerate_inputs() {
        let t = OperatorMatrix::identity(3);
        let pair = witness_pair(&t, rank_tol(&t)).unwrap();
        assert!(pair.defect < 1e-12);

        let zero = OperatorMatrix::from_real(2, 2, &[0.0; 4]).unwrap();
        assert!(matches!(
            witness_pair(&zero, 1e-12),
            Err(AopError::ZeroOperator)
        ));
    }

    #[test]
    fn min_modulus_inversion() {
        assert_relative_eq!(min_modulus_from_eps(0.6, 2.0).unwrap(), 1.0, max_relative = 1e-15);
        assert_eq!(min_modulus_from_eps(0.0, 3.5).unwrap(), 3.5);
        assert!(matches!(
            min_modulus_from_eps(1.0, 2.0),
            Err(AopError::OutOfRange { name: "eps", .. })
        ));
        assert!(matches!(
            min_modulus_from_eps(0.5, 0.0),
            Err(AopError::OutOfRange { name: "norm", .. })
        ));
    }

    #[test]
    fn stability_functions_reference_values() {
        assert!((delta_turnsek(0.6).unwrap() - 0.5).abs() <= 1e-15);
        assert!((delta_improved(0.6).unwrap() - 1.0 / 3.0).abs() <= 1e-15);
        assert_eq!(delta_turnsek(0.0).unwrap(), 0.0);
        assert_eq!(delta_improved(0.0).unwrap(), 0.0);
        assert!(delta_turnsek(1.0).is_err());
        assert!(delta_improved(-0.1).is_err());
        for i in 1..100 {
            let eps = i as f64 / 100.0;
            let imp = delta_improved(eps).unwrap();
            let tur = delta_turnsek(eps).unwrap();
            assert!(imp < tur, "eps = {eps}: {imp} !< {tur}");
        }
    }

    #[test]
    fn composition_bound_reference_values() {
        // diag(1,2) after a scaled identity: the bound collapses to the
        // first factor's own constant.
        let b = composition_bound(2.0, 1.0, 3.0, 3.0).unwrap();
        assert_relative_eq!(b, 0.6, max_relative = 1e-15);
        assert_eq!(composition_bound(1.0, 1.0, 1.0, 1.0).unwrap(), 0.0);
        assert!(composition_bound(0.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn roundtrip_on_fixed_matrices() {
        let mut rng = derive_rng(37, 0);
        for field in [ScalarField::Real, ScalarField::Complex] {
            for _ in 0..20 {
                let t = random_matrix(4, 3, field, &mut rng);
                let e = eps_hat(&t).unwrap();
                let m = min_modulus_from_eps(e.value, e.norm).unwrap();
                assert_relative_eq!(m, e.min_mod, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn unitary_composition_preserves_constant() {
        let mut rng = derive_rng(41, 0);
        for _ in 0..10 {
            let t = random_matrix(4, 4, ScalarField::Complex, &mut rng);
            let v = random_unitary(4, ScalarField::Complex, &mut rng).unwrap();
            let scaled_v = v.scale(Complex::new(0.0, 2.5));
            let st = scaled_v.compose(&t).unwrap();
            let lhs = eps_hat(&st).unwrap().value;
            let rhs = eps_hat(&t).unwrap().value;
            assert!((lhs - rhs).abs() <= 1e-10, "{lhs} vs {rhs}");
        }
    }

    proptest! {
        #[test]
        fn witness_defect_matches_constant(seed in 0u64..500) {
            let mut rng = derive_rng(43, seed);
            let rows = 2 + (seed % 4) as usize;
            let cols = 2 + ((seed / 4) % 3) as usize;
            let field = if seed % 2 == 0 { ScalarField::Real } else { ScalarField::Complex };
            let t = random_matrix(rows, cols.min(rows + 1), field, &mut rng);
            let e = eps_hat(&t).unwrap();
            let pair = witness_pair(&t, default_rank_tol(t.rows(), t.cols())).unwrap();
            prop_assert!((pair.defect - e.value).abs() <= 1e-9,
                "defect {} vs eps {}", pair.defect, e.value);
            prop_assert!(e.value >= 0.0 && e.value <= 1.0);
            prop_assert!(e.min_mod <= e.norm + 1e-12);
            let m = min_modulus(&t);
            let n = operator_norm(&t);
            prop_assert!((m - e.min_mod).abs() <= 1e-12 * n.max(1.0));
        }
    }
}

//! Seeded random generation: unit vectors, orthogonal pairs, isometries,
//! and matrices with prescribed singular values.
//!
//! Every generator takes an explicit rng. Parallel or chunked work must
//! derive one rng per task via [`derive_rng`] so results do not depend
//! on scheduling.

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{AopError, Result};
use crate::matrix::{OperatorMatrix, ScalarField};
use crate::spectral::inner;

/// Independent generator for task `stream` under a master seed. ChaCha
/// streams are statistically independent, so chunked sampling reduces
/// deterministically regardless of scheduling.
pub fn derive_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Norm below which a Gaussian draw is considered degenerate.
const DEGENERATE_NORM: f64 = 1e-6;
const MAX_RETRIES: usize = 16;

fn gaussian_entry(field: ScalarField, rng: &mut ChaCha8Rng) -> Complex<f64> {
    let re: f64 = rng.sample(StandardNormal);
    match field {
        ScalarField::Real => Complex::new(re, 0.0),
        ScalarField::Complex => {
            let im: f64 = rng.sample(StandardNormal);
            Complex::new(re, im)
        }
    }
}

fn gaussian_vector(dim: usize, field: ScalarField, rng: &mut ChaCha8Rng) -> DVector<Complex<f64>> {
    DVector::from_fn(dim, |_, _| gaussian_entry(field, rng))
}

/// Uniformly distributed unit vector (Gaussian draw, normalized).
pub fn random_unit_vector(
    dim: usize,
    field: ScalarField,
    rng: &mut ChaCha8Rng,
) -> Result<DVector<Complex<f64>>> {
    assert!(dim >= 1, "dimension must be positive");
    for _ in 0..MAX_RETRIES {
        let v = gaussian_vector(dim, field, rng);
        let n = v.norm();
        if n > DEGENERATE_NORM {
            return Ok(v / Complex::new(n, 0.0));
        }
    }
    Err(AopError::DegenerateDraw {
        retries: MAX_RETRIES,
    })
}

/// Rotation-invariant orthogonal pair: draw x, then project a second
/// draw onto the orthocomplement of x and normalize.
pub fn random_orthogonal_pair(
    dim: usize,
    field: ScalarField,
    rng: &mut ChaCha8Rng,
) -> Result<(DVector<Complex<f64>>, DVector<Complex<f64>>)> {
    if dim < 2 {
        return Err(AopError::DimensionTooSmall { cols: dim });
    }
    let x = random_unit_vector(dim, field, rng)?;
    for _ in 0..MAX_RETRIES {
        let raw = gaussian_vector(dim, field, rng);
        let mut y = raw.clone();
        // Two projection sweeps for orthogonality at working precision.
        for _ in 0..2 {
            let c = inner(&y, &x);
            y -= &x * c;
        }
        let n = y.norm();
        if n > DEGENERATE_NORM {
            return Ok((x, y / Complex::new(n, 0.0)));
        }
    }
    Err(AopError::DegenerateDraw {
        retries: MAX_RETRIES,
    })
}

/// Plain Gaussian matrix.
pub fn random_matrix(
    rows: usize,
    cols: usize,
    field: ScalarField,
    rng: &mut ChaCha8Rng,
) -> OperatorMatrix {
    let data = DMatrix::from_fn(rows, cols, |_, _| gaussian_entry(field, rng));
    OperatorMatrix::new(field, data).expect("gaussian entries are finite")
}

/// Haar-distributed matrix with orthonormal columns (QR of a Gaussian
/// matrix, phases fixed so the triangular factor has positive diagonal).
pub fn random_isometry(
    rows: usize,
    cols: usize,
    field: ScalarField,
    rng: &mut ChaCha8Rng,
) -> Result<OperatorMatrix> {
    if cols > rows {
        return Err(AopError::NoIsometryExists { rows, cols });
    }
    let g = DMatrix::from_fn(rows, cols, |_, _| gaussian_entry(field, rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for i in 0..cols {
        let d = r[(i, i)];
        let a = d.norm();
        if a > 0.0 {
            let phase = d / Complex::new(a, 0.0);
            for row in 0..rows {
                q[(row, i)] *= phase;
            }
        }
    }
    OperatorMatrix::new(field, q)
}

/// Haar-distributed unitary (square isometry).
pub fn random_unitary(n: usize, field: ScalarField, rng: &mut ChaCha8Rng) -> Result<OperatorMatrix> {
    random_isometry(n, n, field, rng)
}

/// Random matrix with exactly the given singular values: U diag(s) V^H
/// with independent Haar frames U, V. Values may be in any order and may
/// contain exact zeros.
pub fn random_with_spectrum(
    rows: usize,
    cols: usize,
    sigmas: &[f64],
    field: ScalarField,
    rng: &mut ChaCha8Rng,
) -> Result<OperatorMatrix> {
    let k = rows.min(cols);
    assert_eq!(sigmas.len(), k, "need min(rows, cols) singular values");
    for &s in sigmas {
        if !s.is_finite() || s < 0.0 {
            return Err(AopError::OutOfRange {
                name: "sigma",
                value: s,
                expected: "a finite value >= 0",
            });
        }
    }
    let u = random_isometry(rows, k, field, rng)?;
    let v = random_isometry(cols, k, field, rng)?;
    let mut scaled = u.matrix().clone();
    for (i, &s) in sigmas.iter().enumerate() {
        for row in 0..rows {
            scaled[(row, i)] *= Complex::new(s, 0.0);
        }
    }
    let data = scaled * v.matrix().adjoint();
    OperatorMatrix::new(field, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::svd;
    use approx::assert_relative_eq;

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let a1 = random_unit_vector(4, ScalarField::Complex, &mut derive_rng(9, 0)).unwrap();
        let a2 = random_unit_vector(4, ScalarField::Complex, &mut derive_rng(9, 0)).unwrap();
        let b = random_unit_vector(4, ScalarField::Complex, &mut derive_rng(9, 1)).unwrap();
        assert_eq!(a1, a2);
        assert_ne!(a1, b);
    }

    #[test]
    fn unit_vectors_are_unit_and_field_tagged() {
        let mut rng = derive_rng(11, 0);
        for dim in 1..=6 {
            let v = random_unit_vector(dim, ScalarField::Real, &mut rng).unwrap();
            assert_relative_eq!(v.norm(), 1.0, max_relative = 1e-14);
            assert!(v.iter().all(|z| z.im == 0.0));
            let w = random_unit_vector(dim, ScalarField::Complex, &mut rng).unwrap();
            assert_relative_eq!(w.norm(), 1.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn pairs_are_orthogonal_to_machine_precision() {
        let mut rng = derive_rng(13, 0);
        for dim in 2..=8 {
            for field in [ScalarField::Real, ScalarField::Complex] {
                for _ in 0..100 {
                    let (x, y) = random_orthogonal_pair(dim, field, &mut rng).unwrap();
                    assert!(inner(&x, &y).norm() <= 1e-12);
                    assert_relative_eq!(x.norm(), 1.0, max_relative = 1e-14);
                    assert_relative_eq!(y.norm(), 1.0, max_relative = 1e-14);
                }
            }
        }
        assert!(matches!(
            random_orthogonal_pair(1, ScalarField::Real, &mut rng),
            Err(AopError::DimensionTooSmall { cols: 1 })
        ));
    }

    #[test]
    fn sample_mean_vanishes() {
        let mut rng = derive_rng(17, 0);
        let n = 100_000;
        let mut sum = [0.0f64; 2];
        for _ in 0..n {
            let v = random_unit_vector(2, ScalarField::Real, &mut rng).unwrap();
            sum[0] += v[0].re;
            sum[1] += v[1].re;
        }
        // Component variance of a uniform unit vector in the plane is
        // 1/2, so a three-sigma band for the mean is 3 sqrt(1/(2n)).
        let band = 3.0 * (0.5 / n as f64).sqrt();
        assert!(sum[0].abs() / n as f64 <= band);
        assert!(sum[1].abs() / n as f64 <= band);
    }

    #[test]
    fn isometries_have_orthonormal_columns() {
        let mut rng = derive_rng(19, 0);
        for (rows, cols) in [(3, 2), (5, 5), (6, 1)] {
            for field in [ScalarField::Real, ScalarField::Complex] {
                let v = random_isometry(rows, cols, field, &mut rng).unwrap();
                let gram = v.matrix().adjoint() * v.matrix();
                let id = DMatrix::<Complex<f64>>::identity(cols, cols);
                assert!((gram - id).norm() < 1e-13);
                if field == ScalarField::Real {
                    assert_eq!(v.max_imag(), 0.0);
                }
            }
        }
        assert!(matches!(
            random_isometry(2, 3, ScalarField::Real, &mut rng),
            Err(AopError::NoIsometryExists { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn prescribed_spectrum_is_reproduced() {
        let mut rng = derive_rng(23, 0);
        let sigmas = [2.5, 1.0, 0.0];
        let m =
            random_with_spectrum(5, 3, &sigmas, ScalarField::Complex, &mut rng).unwrap();
        let got = svd(&m).singular_values;
        assert_relative_eq!(got[0], 2.5, max_relative = 1e-13);
        assert_relative_eq!(got[1], 1.0, max_relative = 1e-13);
        assert!(got[2] < 1e-14);
        let bad = random_with_spectrum(2, 2, &[1.0, -0.5], ScalarField::Real, &mut rng);
        assert!(matches!(bad, Err(AopError::OutOfRange { .. })));
    }
}

//! Singular-value machinery: operator norm, minimum modulus, kernel
//! dimensions, and the polar factorization into isometry times positive
//! part.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{AopError, Result};
use crate::matrix::OperatorMatrix;

/// Inner product, linear in the first argument and conjugate-linear in
/// the second.
pub fn inner(x: &DVector<Complex<f64>>, y: &DVector<Complex<f64>>) -> Complex<f64> {
    y.dotc(x)
}

/// Singular value decomposition with values sorted descending and a
/// canonical phase convention: in each right singular vector the entry
/// of largest modulus is real and positive, so repeated runs and sign
/// choices inside the backend cannot change downstream constructions.
#[derive(Debug, Clone)]
pub struct SpectralData {
    /// Singular values, descending. `min(rows, cols)` entries.
    pub singular_values: Vec<f64>,
    /// Left singular vectors, one column per singular value.
    pub u: DMatrix<Complex<f64>>,
    /// Right singular vectors, one column per singular value.
    pub v: DMatrix<Complex<f64>>,
    rows: usize,
    cols: usize,
}

impl SpectralData {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        self.singular_values[0]
    }

    /// Smallest value of `||Tx||` over unit vectors. Zero whenever the
    /// domain dimension exceeds the codomain dimension, because the
    /// kernel is then forced to be nontrivial.
    pub fn min_modulus(&self) -> f64 {
        if self.cols > self.rows {
            0.0
        } else {
            *self.singular_values.last().expect("at least one value")
        }
    }

    /// Number of singular values above `rel_tol * sigma_max`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let top = self.singular_values[0];
        if top == 0.0 {
            return 0;
        }
        let cut = rel_tol * top;
        self.singular_values.iter().filter(|&&s| s > cut).count()
    }

    pub fn left_vector(&self, i: usize) -> DVector<Complex<f64>> {
        self.u.column(i).clone_owned()
    }

    pub fn right_vector(&self, i: usize) -> DVector<Complex<f64>> {
        self.v.column(i).clone_owned()
    }

    /// Rebuilds the original matrix; useful for accuracy checks.
    pub fn reconstruct(&self) -> DMatrix<Complex<f64>> {
        let k = self.singular_values.len();
        let sigma = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                Complex::new(self.singular_values[i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            }
        });
        &self.u * sigma * self.v.adjoint()
    }
}

/// Rotates column pairs of `b` (mirroring every rotation onto `v`) until
/// the columns of `b` are mutually orthogonal at working precision. Each
/// rotation zeroes one inner product exactly, so the off-diagonal mass of
/// the Gram matrix decreases monotonically and the sweep loop terminates.
fn orthogonalize_image_columns(b: &mut DMatrix<Complex<f64>>, v: &mut DMatrix<Complex<f64>>) {
    let k = b.ncols();
    if k < 2 {
        return;
    }
    let tol = (b.nrows() as f64).sqrt() * f64::EPSILON;
    // Columns below roundoff of the largest carry no usable direction;
    // rotating against one cancels catastrophically and never settles.
    let floor = f64::EPSILON * (0..k).map(|i| b.column(i).norm()).fold(0.0, f64::max);
    for _ in 0..32 {
        let mut rotated = false;
        for i in 0..k - 1 {
            for j in i + 1..k {
                let a = b.column(i).norm_squared();
                let d = b.column(j).norm_squared();
                if a.min(d).sqrt() <= floor {
                    continue;
                }
                let g = b.column(i).dotc(&b.column(j));
                let gn = g.norm();
                if gn <= tol * a.sqrt() * d.sqrt() {
                    continue;
                }
                rotated = true;
                let phase = Complex::new(g.re / gn, g.im / gn);
                let theta = 0.5 * (2.0 * gn).atan2(a - d);
                let c = theta.cos();
                let s = phase.conj() * theta.sin();
                let s_conj = s.conj();
                for r in 0..b.nrows() {
                    let x = b[(r, i)];
                    let y = b[(r, j)];
                    b[(r, i)] = x * c + y * s;
                    b[(r, j)] = y * c - x * s_conj;
                }
                for r in 0..v.nrows() {
                    let x = v[(r, i)];
                    let y = v[(r, j)];
                    v[(r, i)] = x * c + y * s;
                    v[(r, j)] = y * c - x * s_conj;
                }
            }
        }
        if !rotated {
            break;
        }
    }
}

/// Full SVD of an operator. The backend supplies a right singular frame;
/// the image of that frame is then re-orthogonalized by plane rotations
/// and the singular values read off as image column norms. This keeps
/// every value accurate to roundoff in the largest one even when the
/// backend's iteration stops with residual coupling between close values.
pub fn svd(m: &OperatorMatrix) -> SpectralData {
    // Both sides are requested even though only v is used: the backend's
    // one-sided mode can hand back poisoned vectors on rank-deficient
    // input.
    let decomp = m.matrix().clone().svd(true, true);
    let v_t = decomp.v_t.expect("v_t requested");
    let mut v0 = v_t.adjoint();
    let mut b = m.matrix() * &v0;
    orthogonalize_image_columns(&mut b, &mut v0);

    let k = b.ncols();
    let norms: Vec<f64> = (0..k).map(|i| b.column(i).norm()).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &c| norms[c].partial_cmp(&norms[a]).expect("finite"));

    let vals: Vec<f64> = order.iter().map(|&i| norms[i]).collect();
    let mut u = DMatrix::zeros(b.nrows(), k);
    let mut v = DMatrix::zeros(v0.nrows(), k);
    let mut nonzero = 0usize;
    for (slot, &idx) in order.iter().enumerate() {
        v.column_mut(slot).copy_from(&v0.column(idx));
        if norms[idx] > f64::MIN_POSITIVE {
            let unit = b.column(idx) / Complex::new(norms[idx], 0.0);
            u.column_mut(slot).copy_from(&unit);
            nonzero = slot + 1;
        }
    }
    if nonzero < k {
        let extra = complete_orthonormal_frame(&u.columns(0, nonzero).clone_owned(), k - nonzero);
        u.columns_mut(nonzero, k - nonzero).copy_from(&extra);
    }

    // Phase canonicalization. Multiplying column i of both u and v by
    // the same unit scalar leaves u * S * v^H unchanged.
    for i in 0..vals.len() {
        let col = v.column(i);
        let mut arg = 0usize;
        let mut best = -1.0f64;
        for (j, z) in col.iter().enumerate() {
            let a = z.norm();
            if a > best {
                best = a;
                arg = j;
            }
        }
        let z = v[(arg, i)];
        if z.norm() > 0.0 {
            let phase = z / Complex::new(z.norm(), 0.0);
            let adj = phase.conj();
            for r in 0..v.nrows() {
                v[(r, i)] *= adj;
            }
            for r in 0..u.nrows() {
                u[(r, i)] *= adj;
            }
        }
    }

    SpectralData {
        singular_values: vals,
        u,
        v,
        rows: m.rows(),
        cols: m.cols(),
    }
}

/// Largest singular value of `m`.
pub fn operator_norm(m: &OperatorMatrix) -> f64 {
    svd(m).operator_norm()
}

/// Infimum of `||Tx||` over unit `x`; see [`SpectralData::min_modulus`].
pub fn min_modulus(m: &OperatorMatrix) -> f64 {
    svd(m).min_modulus()
}

/// `(dim ker T, dim ker T*)` at the given relative rank tolerance.
pub fn kernel_dims(m: &OperatorMatrix, rank_tol: f64) -> (usize, usize) {
    let sd = svd(m);
    let r = sd.rank(rank_tol);
    (m.cols() - r, m.rows() - r)
}

/// A unit vector in the numerical kernel of `m`, or `None` when the
/// kernel is trivial at the given tolerance. Canonical: the right
/// singular vector of the smallest singular value when that value sits
/// below tolerance, otherwise (domain wider than codomain) a
/// deterministic completion of the right singular frame.
pub fn kernel_vector(m: &OperatorMatrix, rank_tol: f64) -> Option<DVector<Complex<f64>>> {
    let sd = svd(m);
    let k = sd.singular_values.len();
    let top = sd.singular_values[0];
    if top == 0.0 || sd.singular_values[k - 1] <= rank_tol * top {
        return Some(sd.right_vector(k - 1));
    }
    if m.is_wide() {
        let extra = complete_orthonormal_frame(&sd.v, 1);
        return Some(extra.column(0).clone_owned());
    }
    None
}

/// Extends orthonormal columns to `count` further orthonormal columns of
/// the same space, deterministically: canonical basis vectors are tried
/// in index order and Gram-Schmidt residuals kept when they are large
/// enough to normalize safely. The acceptance cut is half the
/// even-spread residual size, so some candidate always clears it.
pub fn complete_orthonormal_frame(
    existing: &DMatrix<Complex<f64>>,
    count: usize,
) -> DMatrix<Complex<f64>> {
    let dim = existing.nrows();
    assert!(
        existing.ncols() + count <= dim,
        "cannot fit {} more orthonormal columns in dimension {}",
        count,
        dim
    );
    let mut frame: Vec<DVector<Complex<f64>>> =
        existing.column_iter().map(|c| c.clone_owned()).collect();
    let mut added = DMatrix::zeros(dim, count);
    let mut slot = 0usize;
    // Half the even-spread residual size; some candidate always clears
    // it, but the sweep may accept weaker ones first, so halve the cut
    // and sweep again whenever a pass stalls.
    let mut cut_scale = 0.5f64;
    while slot < count {
        let before = slot;
        for j in 0..dim {
            if slot == count {
                break;
            }
            let deficiency = (dim - frame.len()) as f64;
            let cut = cut_scale * (deficiency / dim as f64).sqrt();
            let mut r: DVector<Complex<f64>> = DVector::zeros(dim);
            r[j] = Complex::new(1.0, 0.0);
            // Two Gram-Schmidt sweeps keep the residual orthogonal to
            // working precision.
            for _ in 0..2 {
                for f in &frame {
                    let c = f.dotc(&r);
                    r -= f * c;
                }
            }
            let n = r.norm();
            if n <= cut {
                continue;
            }
            let unit = r / Complex::new(n, 0.0);
            added.column_mut(slot).copy_from(&unit);
            frame.push(unit);
            slot += 1;
        }
        if slot == before {
            cut_scale *= 0.5;
            assert!(cut_scale > 1e-12, "frame already spans the space");
        }
    }
    added
}

/// Polar factorization `T = V * P` with `V` an isometry (orthonormal
/// columns) and `P` positive semidefinite.
#[derive(Debug, Clone)]
pub struct PolarDecomposition {
    /// Isometry factor, same shape as the input.
    pub isometry: OperatorMatrix,
    /// Positive semidefinite factor on the domain, square.
    pub positive: OperatorMatrix,
}

impl PolarDecomposition {
    /// `||V * P - T||` in operator norm, for verification.
    pub fn reconstruction_error(&self, original: &OperatorMatrix) -> f64 {
        let prod = self
            .isometry
            .compose(&self.positive)
            .expect("factor shapes agree");
        let diff = prod.sub(original).expect("same shape as input");
        operator_norm(&diff)
    }
}

/// Computes the polar factorization. Requires the domain dimension not
/// to exceed the codomain dimension; otherwise no isometry with the
/// right shape exists. Rank deficiency is handled by extending the left
/// singular frame deterministically over the kernel.
pub fn polar(m: &OperatorMatrix, rank_tol: f64) -> Result<PolarDecomposition> {
    if m.is_wide() {
        return Err(AopError::NoIsometryExists {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let sd = svd(m);
    let k = sd.singular_values.len(); // == cols
    let r = sd.rank(rank_tol);

    let mut left = DMatrix::zeros(m.rows(), k);
    left.columns_mut(0, r).copy_from(&sd.u.columns(0, r));
    if r < k {
        let extra = complete_orthonormal_frame(&sd.u.columns(0, r).clone_owned(), k - r);
        left.columns_mut(r, k - r).copy_from(&extra);
    }
    let isometry_data = &left * sd.v.adjoint();

    let sigma = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            Complex::new(sd.singular_values[i], 0.0)
        } else {
            Complex::new(0.0, 0.0)
        }
    });
    let mut positive_data = &sd.v * sigma * sd.v.adjoint();
    // Hermitize away roundoff asymmetry.
    let adj = positive_data.adjoint();
    positive_data = (positive_data + adj) * Complex::new(0.5, 0.0);

    Ok(PolarDecomposition {
        isometry: OperatorMatrix::new(m.field(), isometry_data)?,
        positive: OperatorMatrix::new(m.field(), positive_data)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::ScalarField;
    use crate::tolerances::{default_rank_tol, FRAME_ORTH_TOL, RECON_TOL};
    use approx::assert_relative_eq;

    fn rank_tol(m: &OperatorMatrix) -> f64 {
        default_rank_tol(m.rows(), m.cols())
    }

    #[test]
    fn diagonal_norms_are_exact() {
        let m = OperatorMatrix::diagonal(&[1.0, 2.0]);
        assert_eq!(operator_norm(&m), 2.0);
        assert_eq!(min_modulus(&m), 1.0);
    }

    #[test]
    fn wide_matrix_has_zero_min_modulus() {
        let m = OperatorMatrix::from_real(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(min_modulus(&m), 0.0);
        // The listed singular values themselves are all 1.
        assert_relative_eq!(svd(&m).singular_values[1], 1.0, max_relative = 1e-14);
    }

    #[test]
    fn kernel_dims_track_rank() {
        let m = OperatorMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(kernel_dims(&m, rank_tol(&m)), (1, 1));
        let m = OperatorMatrix::from_real(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(kernel_dims(&m, rank_tol(&m)), (1, 0));
        let m = OperatorMatrix::identity(3);
        assert_eq!(kernel_dims(&m, rank_tol(&m)), (0, 0));
    }

    #[test]
    fn kernel_vector_is_null_direction() {
        let m = OperatorMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let e = kernel_vector(&m, rank_tol(&m)).unwrap();
        assert_relative_eq!(e.norm(), 1.0, max_relative = 1e-14);
        assert!(m.apply(&e).norm() < 1e-14);
        // Canonical phase makes this exactly the second basis vector.
        assert_relative_eq!(e[1].re, 1.0, max_relative = 1e-14);

        let wide = OperatorMatrix::from_real(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        let e = kernel_vector(&wide, rank_tol(&wide)).unwrap();
        assert!(wide.apply(&e).norm() < 1e-13);

        let full = OperatorMatrix::identity(2);
        assert!(kernel_vector(&full, rank_tol(&full)).is_none());
    }

    #[test]
    fn svd_reconstructs_complex_input() {
        let m = OperatorMatrix::from_complex(
            3,
            2,
            &[
                Complex::new(1.0, 0.5),
                Complex::new(-0.25, 2.0),
                Complex::new(0.0, -1.0),
                Complex::new(3.0, 0.0),
                Complex::new(0.5, 0.5),
                Complex::new(-1.0, 0.25),
            ],
        )
        .unwrap();
        let sd = svd(&m);
        let err = (sd.reconstruct() - m.matrix()).norm();
        assert!(err < RECON_TOL * sd.operator_norm(), "err = {err}");
        // Orthonormal frames.
        let gram_u = sd.u.adjoint() * &sd.u;
        let gram_v = sd.v.adjoint() * &sd.v;
        let id = DMatrix::<Complex<f64>>::identity(2, 2);
        assert!((gram_u - &id).norm() < FRAME_ORTH_TOL);
        assert!((gram_v - &id).norm() < FRAME_ORTH_TOL);
    }

    #[test]
    fn phase_canonicalization_is_stable() {
        let m = OperatorMatrix::from_complex(
            2,
            2,
            &[
                Complex::new(0.0, 2.0),
                Complex::new(0.0, 0.0),
                Complex::new(0.0, 0.0),
                Complex::new(0.0, 1.0),
            ],
        )
        .unwrap();
        let sd = svd(&m);
        // Each right singular vector has its largest entry real positive.
        for i in 0..2 {
            let col = sd.v.column(i);
            let max = col.iter().cloned().max_by(|a, b| {
                a.norm().partial_cmp(&b.norm()).unwrap()
            });
            let z = max.unwrap();
            assert!(z.im.abs() < 1e-14 && z.re > 0.0, "column {i}: {z}");
        }
        let err = (sd.reconstruct() - m.matrix()).norm();
        assert!(err < RECON_TOL * 2.0);
    }

    #[test]
    fn frame_completion_orthonormal_and_deterministic() {
        let base = DMatrix::from_fn(4, 2, |r, c| {
            let vals = [
                [0.5, 0.5],
                [0.5, -0.5],
                [0.5, 0.5],
                [0.5, -0.5],
            ];
            Complex::new(vals[r][c], 0.0)
        });
        let first = complete_orthonormal_frame(&base, 2);
        let second = complete_orthonormal_frame(&base, 2);
        assert_eq!(first, second);
        let full = {
            let mut m = DMatrix::zeros(4, 4);
            m.columns_mut(0, 2).copy_from(&base);
            m.columns_mut(2, 2).copy_from(&first);
            m
        };
        let gram = full.adjoint() * &full;
        let id = DMatrix::<Complex<f64>>::identity(4, 4);
        assert!((gram - id).norm() < FRAME_ORTH_TOL);
    }

    #[test]
    fn clustered_small_values_stay_accurate_under_scaling() {
        // Clustered values near the bottom of the spectrum are where a
        // partially converged backend shows up; the polish must hold every
        // value to roundoff in the largest one, for the matrix and for
        // scalar multiples alike.
        use crate::sample::{derive_rng, random_with_spectrum};
        let targets = [0.7065, 0.0274, 0.0252, 0.0195];
        let mut rng = derive_rng(4_188, 0);
        for trial in 0..40 {
            let field = if trial % 2 == 0 {
                ScalarField::Real
            } else {
                ScalarField::Complex
            };
            let t = random_with_spectrum(6, 4, &targets, field, &mut rng).unwrap();
            for &scale in &[1.0f64, -1.228692, 3.7, -0.04] {
                let m = t.scale(Complex::new(scale, 0.0));
                let sd = svd(&m);
                for (i, &want) in targets.iter().enumerate() {
                    let got = sd.singular_values[i] / scale.abs();
                    assert!(
                        (got - want).abs() <= 1e-13 * targets[0],
                        "trial {trial} scale {scale}: value {i} came out {got}"
                    );
                }
                let err = (sd.reconstruct() - m.matrix()).norm();
                assert!(err <= RECON_TOL * sd.operator_norm() * 4.0, "err = {err}");
            }
        }
    }

    #[test]
    fn polar_of_positive_diagonal_is_identity_isometry() {
        let m = OperatorMatrix::diagonal(&[1.0, 2.0]);
        let pd = polar(&m, rank_tol(&m)).unwrap();
        let id = OperatorMatrix::identity(2);
        let gap = pd.isometry.sub(&id).unwrap();
        assert!(operator_norm(&gap) < 1e-14);
        assert!(pd.reconstruction_error(&m) < RECON_TOL * 2.0);
    }

    #[test]
    fn polar_handles_rank_deficiency() {
        let m = OperatorMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let pd = polar(&m, rank_tol(&m)).unwrap();
        // Isometry columns stay orthonormal even over the kernel.
        let v = pd.isometry.matrix();
        let gram = v.adjoint() * v;
        let id = DMatrix::<Complex<f64>>::identity(2, 2);
        assert!((gram - id).norm() < FRAME_ORTH_TOL);
        assert!(pd.reconstruction_error(&m) < RECON_TOL);
        assert!(pd.isometry.max_imag() == 0.0, "real input stays real");
    }

    #[test]
    fn polar_tall_matrix() {
        let m = OperatorMatrix::from_real(3, 2, &[1.0, 2.0, 0.5, -1.0, 0.25, 0.0]).unwrap();
        let pd = polar(&m, rank_tol(&m)).unwrap();
        let v = pd.isometry.matrix();
        let gram = v.adjoint() * v;
        let id = DMatrix::<Complex<f64>>::identity(2, 2);
        assert!((gram - id).norm() < FRAME_ORTH_TOL);
        assert!(pd.reconstruction_error(&m) < RECON_TOL * operator_norm(&m));
        // Positive factor is Hermitian with nonnegative eigenvalues.
        let p = pd.positive.matrix();
        assert!((p.adjoint() - p).norm() < 1e-14);
    }

    #[test]
    fn polar_rejects_wide() {
        let m = OperatorMatrix::from_real(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        let err = polar(&m, rank_tol(&m)).unwrap_err();
        assert_eq!(err, AopError::NoIsometryExists { rows: 2, cols: 3 });
    }

    #[test]
    fn field_tag_preserved() {
        let m = OperatorMatrix::diagonal(&[2.0, 3.0]);
        assert_eq!(svd(&m).reconstruct()[(0, 0)].im, 0.0);
        let pd = polar(&m, rank_tol(&m)).unwrap();
        assert_eq!(pd.isometry.field(), ScalarField::Real);
        assert_eq!(pd.positive.field(), ScalarField::Real);
    }
}

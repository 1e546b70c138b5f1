//! Complex-bilinear linear algebra.
//!
//! Symmetric C-bilinear forms (no conjugation anywhere), Gram-Schmidt
//! orthonormalization with branch-tracked complex square roots, the
//! Mat(2,C) inner product `(tr(MN) - tr M tr N)/2`, the sl(2,C) cross
//! product `[V,W]/2i`, and skew complex matrices.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4};
use num_complex::Complex;

use crate::{Error, Result};

/// Complex scalar used throughout the crate.
pub type Cx = Complex<f64>;

pub const I: Cx = Complex::new(0.0, 1.0);
pub const ONE: Cx = Complex::new(1.0, 0.0);
pub const ZERO: Cx = Complex::new(0.0, 0.0);

pub fn cx(re: f64, im: f64) -> Cx {
    Complex::new(re, im)
}

/// Branch selector for complex square roots along a continuation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SqrtBranch {
    /// Take the principal branch (nonnegative real part, `+i` on the cut).
    Principal,
    /// Pick the root `r` with `Re(r * conj(reference)) >= 0`.
    Near(Cx),
}

impl SqrtBranch {
    /// Square root of `z` on this branch. Both choices square back to `z`.
    pub fn sqrt(&self, z: Cx) -> Cx {
        let r = z.sqrt();
        match self {
            SqrtBranch::Principal => r,
            SqrtBranch::Near(reference) => {
                if (r * reference.conj()).re >= 0.0 {
                    r
                } else {
                    -r
                }
            }
        }
    }

    /// Take the root and move the reference to it, for use along a path.
    pub fn sqrt_continued(&mut self, z: Cx) -> Cx {
        let r = self.sqrt(z);
        *self = SqrtBranch::Near(r);
        r
    }
}

/// A symmetric C-bilinear form on C^n, stored as its Gram matrix.
#[derive(Debug, Clone)]
pub struct CBilinearForm {
    matrix: DMatrix<Cx>,
}

impl CBilinearForm {
    /// Builds the form from a Gram matrix, symmetrizing it exactly.
    pub fn new(matrix: DMatrix<Cx>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        let sym = (&matrix + matrix.transpose()).scale(0.5);
        Ok(Self { matrix: sym })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: DMatrix::identity(n, n),
        }
    }

    /// Diagonal form with the given entries.
    pub fn diagonal(entries: &[Cx]) -> Self {
        Self {
            matrix: DMatrix::from_diagonal(&DVector::from_row_slice(entries)),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Cx> {
        &self.matrix
    }

    /// `<u, v> = u^T (matrix) v`. Symmetric in its arguments.
    pub fn inner(&self, u: &DVector<Cx>, v: &DVector<Cx>) -> Result<Cx> {
        if u.len() != self.dim() || v.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: if u.len() != self.dim() { u.len() } else { v.len() },
            });
        }
        Ok((u.transpose() * &self.matrix * v)[(0, 0)])
    }

    /// Nondegeneracy check: `|det| > tol` relative to the Frobenius scale.
    pub fn is_nondegenerate(&self, tol: f64) -> bool {
        let scale = (self.matrix.norm() / (self.dim() as f64).sqrt()).max(f64::MIN_POSITIVE);
        let det = self.matrix.clone().determinant();
        det.norm() > tol * scale.powi(self.dim() as i32)
    }
}

/// Default relative tolerance below which an intermediate Gram-Schmidt
/// vector counts as isotropic.
pub const GS_ISOTROPY_TOL: f64 = 1e-9;

/// Gram-Schmidt orthonormalization of `seeds` for a symmetric C-bilinear
/// form: `Y_j = W_j - sum_k g(W_j, Y_k)/g(Y_k, Y_k) Y_k`, then
/// `X_j = Y_j / sqrt(g(Y_j, Y_j))` on the requested branch.
///
/// Fails with the offending index if an intermediate vector is isotropic
/// within `tol` (relative to the seed norms).
pub fn gram_schmidt(
    form: &CBilinearForm,
    seeds: &[DVector<Cx>],
    branch: &mut SqrtBranch,
    tol: f64,
) -> Result<Vec<DVector<Cx>>> {
    let mut out: Vec<DVector<Cx>> = Vec::with_capacity(seeds.len());
    for (j, seed) in seeds.iter().enumerate() {
        let mut y = seed.clone();
        for prev in &out {
            // prev is already normalized, so g(prev, prev) = 1
            let coeff = form.inner(seed, prev)?;
            y -= prev.map(|e| e * coeff);
        }
        let yy = form.inner(&y, &y)?;
        let scale = y.norm().powi(2).max(f64::MIN_POSITIVE);
        if yy.norm() <= tol * scale {
            return Err(Error::DegenerateFrame { index: j });
        }
        let root = branch.sqrt_continued(yy);
        out.push(y.map(|e| e / root));
    }
    Ok(out)
}

/// `<M, N> = (tr(MN) - tr(M) tr(N)) / 2` on Mat(2,C).
///
/// Its quadratic form is `-det`: `mat2_inner(M, M) = -det(M)`.
pub fn mat2_inner(m: &Matrix2<Cx>, n: &Matrix2<Cx>) -> Cx {
    let tr_mn = (m * n).trace();
    (tr_mn - m.trace() * n.trace()) * cx(0.5, 0.0)
}

/// Squared norm of a 2x2 matrix in the `mat2_inner` form.
pub fn mat2_norm_sq(m: &Matrix2<Cx>) -> Cx {
    mat2_inner(m, m)
}

pub const TRACELESS_TOL: f64 = 1e-12;

/// Cross product `V x W = [V, W] / 2i` on sl(2,C).
///
/// For orthonormal `V, W` the triple `(V, W, V x W)` is orthonormal.
pub fn sl2_cross(v: &Matrix2<Cx>, w: &Matrix2<Cx>) -> Result<Matrix2<Cx>> {
    for m in [v, w] {
        if m.trace().norm() > TRACELESS_TOL {
            return Err(Error::NotTraceless {
                trace_norm: m.trace().norm(),
            });
        }
    }
    let bracket = v * w - w * v;
    Ok(bracket.map(|e| e / (cx(0.0, 2.0))))
}

pub const SKEW_TOL: f64 = 1e-12;

/// A skew-symmetric complex matrix (`m + m^T = 0`).
///
/// Construction antisymmetrizes; the correction applied is reported so
/// callers can warn when it exceeds [`SKEW_TOL`].
#[derive(Debug, Clone)]
pub struct SkewComplexMatrix {
    matrix: DMatrix<Cx>,
}

impl SkewComplexMatrix {
    /// Projects onto the skew part, returning the matrix and the norm of
    /// the discarded symmetric part.
    pub fn project(m: DMatrix<Cx>) -> Result<(Self, f64)> {
        if !m.is_square() {
            return Err(Error::Dimension {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let skew = (&m - m.transpose()).scale(0.5);
        let correction = (&m - &skew).norm();
        Ok((Self { matrix: skew }, correction))
    }

    pub fn matrix(&self) -> &DMatrix<Cx> {
        &self.matrix
    }
}

/// Entrywise skew defect `max |(m + m^T)_ij|` of a 4x4 matrix.
pub fn skew_defect4(m: &Matrix4<Cx>) -> f64 {
    let s = m + m.transpose();
    s.iter().map(|e| e.norm()).fold(0.0, f64::max)
}

/// Matrix exponential by scaling-and-squaring with a Taylor series.
pub fn expm(a: &DMatrix<Cx>) -> DMatrix<Cx> {
    let n = a.nrows();
    let norm = a.norm();
    let k = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a.map(|e| e / cx(2f64.powi(k as i32), 0.0));
    let mut term = DMatrix::<Cx>::identity(n, n);
    let mut sum = DMatrix::<Cx>::identity(n, n);
    for j in 1..30 {
        term = (&term * &scaled).map(|e| e / cx(j as f64, 0.0));
        sum += &term;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    for _ in 0..k {
        sum = &sum * &sum;
    }
    sum
}

/// 4x4 convenience wrapper around [`expm`].
pub fn expm4(a: &Matrix4<Cx>) -> Matrix4<Cx> {
    let d = DMatrix::from_fn(4, 4, |i, j| a[(i, j)]);
    let e = expm(&d);
    Matrix4::from_fn(|i, j| e[(i, j)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(entries: &[Cx]) -> DVector<Cx> {
        DVector::from_row_slice(entries)
    }

    #[test]
    fn inner_quadric_constraint() {
        let id = CBilinearForm::identity(3);
        let e = v(&[ZERO, ZERO, I]);
        assert_relative_eq!(id.inner(&e, &e).unwrap().re, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn inner_isotropic_and_orthogonal() {
        let id = CBilinearForm::identity(3);
        let iso = v(&[ONE, I, ZERO]);
        assert!(id.inner(&iso, &iso).unwrap().norm() < 1e-15);
        let e1 = v(&[ONE, ZERO, ZERO]);
        let e2 = v(&[ZERO, ONE, ZERO]);
        assert!(id.inner(&e1, &e2).unwrap().norm() < 1e-15);
    }

    #[test]
    fn inner_dimension_mismatch() {
        let id = CBilinearForm::identity(3);
        let short = v(&[ONE, ZERO]);
        assert!(matches!(
            id.inner(&short, &short),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn gram_schmidt_standard_basis_fixed() {
        let id = CBilinearForm::identity(2);
        let seeds = vec![v(&[ONE, ZERO]), v(&[ZERO, ONE])];
        let mut branch = SqrtBranch::Principal;
        let out = gram_schmidt(&id, &seeds, &mut branch, GS_ISOTROPY_TOL).unwrap();
        assert!((out[0].clone() - seeds[0].clone()).norm() < 1e-14);
        assert!((out[1].clone() - seeds[1].clone()).norm() < 1e-14);
    }

    #[test]
    fn gram_schmidt_scaling_and_projection() {
        let id = CBilinearForm::identity(2);
        let seeds = vec![v(&[cx(2.0, 0.0), ZERO]), v(&[ONE, ONE])];
        let mut branch = SqrtBranch::Principal;
        let out = gram_schmidt(&id, &seeds, &mut branch, GS_ISOTROPY_TOL).unwrap();
        assert!((out[0].clone() - v(&[ONE, ZERO])).norm() < 1e-14);
        assert!((out[1].clone() - v(&[ZERO, ONE])).norm() < 1e-14);
    }

    #[test]
    fn gram_schmidt_isotropic_seed_fails() {
        let form = CBilinearForm::diagonal(&[ONE, -ONE]);
        let seeds = vec![v(&[ONE, ONE]), v(&[ONE, ZERO])];
        let mut branch = SqrtBranch::Principal;
        match gram_schmidt(&form, &seeds, &mut branch, GS_ISOTROPY_TOL) {
            Err(Error::DegenerateFrame { index }) => assert_eq!(index, 0),
            other => panic!("expected degenerate frame, got {other:?}"),
        }
    }

    #[test]
    fn mat2_inner_is_minus_det() {
        let id = Matrix2::identity();
        assert_relative_eq!(mat2_inner(&id, &id).re, -1.0, epsilon = 1e-15);
        let d = Matrix2::new(ONE, ZERO, ZERO, -ONE);
        assert_relative_eq!(mat2_inner(&d, &d).re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn sl2_cross_basis_example() {
        let v_ = Matrix2::new(ONE, ZERO, ZERO, -ONE);
        let w = Matrix2::new(ZERO, ONE, ONE, ZERO);
        let c = sl2_cross(&v_, &w).unwrap();
        let expected = Matrix2::new(ZERO, -I, I, ZERO);
        assert!((c - expected).norm() < 1e-14);
        // unit norm of the cross of an orthonormal pair
        assert_relative_eq!(mat2_norm_sq(&c).re, 1.0, epsilon = 1e-13);
        assert!(mat2_norm_sq(&c).im.abs() < 1e-13);
    }

    #[test]
    fn sl2_cross_of_equal_vanishes() {
        let v_ = Matrix2::new(ONE, cx(2.0, 1.0), cx(0.5, -0.3), -ONE);
        assert!(sl2_cross(&v_, &v_).unwrap().norm() < 1e-14);
    }

    #[test]
    fn sl2_cross_rejects_traceful() {
        let bad = Matrix2::new(ONE, ZERO, ZERO, ONE);
        let good = Matrix2::new(ONE, ZERO, ZERO, -ONE);
        assert!(matches!(
            sl2_cross(&bad, &good),
            Err(Error::NotTraceless { .. })
        ));
    }

    #[test]
    fn skew_projection_reports_correction() {
        let m = DMatrix::from_row_slice(2, 2, &[ZERO, ONE, -ONE + cx(1e-3, 0.0), ZERO]);
        let (skew, corr) = SkewComplexMatrix::project(m).unwrap();
        assert!((skew.matrix() + skew.matrix().transpose()).norm() < 1e-16);
        assert!(corr > 1e-4);
    }

    #[test]
    fn expm_matches_scalar_exponential() {
        let a = DMatrix::from_row_slice(2, 2, &[cx(0.3, 0.4), ZERO, ZERO, cx(-0.2, 1.1)]);
        let e = expm(&a);
        assert!((e[(0, 0)] - cx(0.3, 0.4).exp()).norm() < 1e-13);
        assert!((e[(1, 1)] - cx(-0.2, 1.1).exp()).norm() < 1e-13);
    }

    #[test]
    fn sqrt_branch_continuation_no_flip() {
        // walk around a loop not enclosing the origin: the continued root
        // must come back to the principal root
        let mut branch = SqrtBranch::Principal;
        let base = cx(2.0, 0.0);
        let mut last = ZERO;
        for k in 0..=200 {
            let t = 2.0 * std::f64::consts::PI * (k as f64) / 200.0;
            let z = base + cx(0.8 * t.cos(), 0.8 * t.sin());
            last = branch.sqrt_continued(z);
        }
        assert!((last - base.sqrt() - (cx(0.8, 0.0) / (2.0 * base.sqrt()))).norm() < 0.1);
        assert!(last.re > 0.0);
    }
}

//! Complex symmetric matrices and branch-correct determinant square roots.
//!
//! Every Gaussian integral over `R^g` in this crate reduces to
//! `det(M)^{-1/2}` for a complex symmetric `M` whose real part is positive
//! semidefinite. On that cone the eigenvalues of `M` lie in the closed right
//! half-plane, so taking principal square roots eigenvalue by eigenvalue
//! reproduces the branch obtained by continuity from real positive definite
//! matrices. [`det_sqrt_path`] is the path-continuation counterpart used when
//! the determinant leaves the right half-plane.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type RMat = DMatrix<f64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Tolerances shared by the matrix routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative symmetry tolerance, scaled by `max(1, |M|_max)`.
    pub symmetry: f64,
    /// Smallest admissible singular value.
    pub singular: f64,
    /// Most negative admissible eigenvalue of the real part.
    pub negative_real: f64,
    /// Smallest admissible `|det M(t)|` along a continuation path.
    pub path_zero: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            symmetry: 1e-12,
            singular: 1e-12,
            negative_real: 1e-10,
            path_zero: 1e-12,
        }
    }
}

/// A square complex matrix with `M = M^T` (not Hermitian).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSymMatrix(CMat);

impl ComplexSymMatrix {
    /// Validates symmetry and stores the symmetrized matrix `(M + M^T) / 2`.
    pub fn new(m: CMat) -> Result<Self> {
        Self::with_tolerance(m, Tolerances::default().symmetry)
    }

    pub fn with_tolerance(m: CMat, tol: f64) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "expected a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let residual = symmetry_residual(&m);
        let scale = max_abs(&m).max(1.0);
        if residual > tol * scale {
            return Err(Error::NonSymmetric { residual });
        }
        Ok(Self(symmetrize(&m)))
    }

    pub fn from_parts(re: &RMat, im: &RMat) -> Result<Self> {
        if re.shape() != im.shape() {
            return Err(Error::DimensionMismatch("real and imaginary parts differ in shape".into()));
        }
        Self::new(complexify(re, im))
    }

    pub fn from_real(re: &RMat) -> Result<Self> {
        Self::new(re.map(|x| Complex64::new(x, 0.0)))
    }

    /// `scale * I_g`.
    pub fn scalar(g: usize, scale: Complex64) -> Self {
        Self(CMat::from_diagonal_element(g, g, scale))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_inner(self) -> CMat {
        self.0
    }

    pub fn re(&self) -> RMat {
        self.0.map(|z| z.re)
    }

    pub fn im(&self) -> RMat {
        self.0.map(|z| z.im)
    }
}

/// A complex scalar together with a description of how its branch was fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchedScalar {
    pub value: Complex64,
    pub anchor: String,
}

impl BranchedScalar {
    pub fn new(value: Complex64, anchor: impl Into<String>) -> Self {
        Self { value, anchor: anchor.into() }
    }
}

pub fn complexify(re: &RMat, im: &RMat) -> CMat {
    re.zip_map(im, Complex64::new)
}

pub fn to_complex(re: &RMat) -> CMat {
    re.map(|x| Complex64::new(x, 0.0))
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_real(m: &RMat) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn symmetry_residual(m: &CMat) -> f64 {
    max_abs(&(m - m.transpose()))
}

pub fn symmetrize(m: &CMat) -> CMat {
    (m + m.transpose()).map(|z| z * 0.5)
}

pub fn symmetrize_real(m: &RMat) -> RMat {
    (m + m.transpose()) * 0.5
}

pub fn identity(g: usize) -> CMat {
    CMat::identity(g, g)
}

/// Eigenvalues of a real symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &RMat) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize_real(m)).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_sym_eigenvalue(m: &RMat) -> f64 {
    sym_eigenvalues(m)[0]
}

/// Eigenvalues of a Hermitian matrix (real, ascending).
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let h = (m + m.adjoint()).map(|z| z * 0.5);
    let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn complex_eigenvalues(m: &CMat) -> Vec<Complex64> {
    if m.nrows() == 1 {
        return vec![m[(0, 0)]];
    }
    m.clone()
        .schur()
        .eigenvalues()
        .map(|v| v.iter().copied().collect())
        .unwrap_or_else(|| {
            // complex Schur form is triangular, so this only triggers on non-convergence
            m.clone().schur().unpack().1.diagonal().iter().copied().collect()
        })
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(f64::total_cmp);
    sv
}

pub fn smallest_singular_value(m: &CMat) -> f64 {
    singular_values(m)[0]
}

/// 2-norm condition number.
pub fn condition_number(m: &CMat) -> f64 {
    let sv = singular_values(m);
    sv[sv.len() - 1] / sv[0]
}

pub fn det(m: &CMat) -> Complex64 {
    m.clone().lu().determinant()
}

pub fn inverse(m: &CMat) -> Result<CMat> {
    let sigma_min = smallest_singular_value(m);
    if sigma_min <= Tolerances::default().singular * max_abs(m).max(1.0) {
        return Err(Error::SingularMatrix { sigma_min });
    }
    m.clone().try_inverse().ok_or(Error::SingularMatrix { sigma_min })
}

pub fn inverse_real(m: &RMat) -> Result<RMat> {
    inverse(&to_complex(m)).map(|c| c.map(|z| z.re))
}

/// Real symmetric positive-definiteness test: smallest eigenvalue `> tol`.
pub fn is_posdef(m: &RMat, tol: f64) -> Result<bool> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch("is_posdef expects a square matrix".into()));
    }
    let residual = max_abs_real(&(m - m.transpose()));
    if residual > Tolerances::default().symmetry * max_abs_real(m).max(1.0) {
        return Err(Error::NonSymmetric { residual });
    }
    Ok(min_sym_eigenvalue(m) > tol)
}

/// `det(M)^{-1/2}` on the branch given by `∫ exp(-π ξᵀ M ξ) dξ`.
///
/// Requires `Re M` positive semidefinite and `M` invertible.
pub fn det_invsqrt_posreal(m: &ComplexSymMatrix) -> Result<BranchedScalar> {
    det_invsqrt_posreal_with(m, &Tolerances::default())
}

pub fn det_invsqrt_posreal_with(m: &ComplexSymMatrix, tol: &Tolerances) -> Result<BranchedScalar> {
    let re = m.re();
    let lambda = min_sym_eigenvalue(&re);
    let scale = max_abs(m.matrix()).max(1.0);
    if lambda < -tol.negative_real * scale {
        return Err(Error::RealPartNegative { eigenvalue: lambda });
    }
    let sigma_min = smallest_singular_value(m.matrix());
    if sigma_min <= tol.singular * scale {
        return Err(Error::SingularMatrix { sigma_min });
    }
    let value = complex_eigenvalues(m.matrix())
        .into_iter()
        .fold(Complex64::new(1.0, 0.0), |acc, ev| acc / ev.sqrt());
    Ok(BranchedScalar::new(value, "gaussian-integral: principal square root per eigenvalue (Re M >= 0)"))
}

/// Continues `sqrt(det M(t))` from `t = 0` to `t = 1`.
///
/// `start` fixes the branch at `t = 0`; `None` takes the principal root.
/// Each of the `steps` uniform segments is halved until the argument of the
/// determinant moves by less than `π/2` across it (checked at the midpoint).
pub fn det_sqrt_path<F>(path: F, steps: usize, start: Option<Complex64>) -> Result<BranchedScalar>
where
    F: Fn(f64) -> CMat,
{
    det_sqrt_path_with(path, steps, start, &Tolerances::default())
}

pub fn det_sqrt_path_with<F>(
    path: F,
    steps: usize,
    start: Option<Complex64>,
    tol: &Tolerances,
) -> Result<BranchedScalar>
where
    F: Fn(f64) -> CMat,
{
    const MAX_DEPTH: u32 = 40;
    let steps = steps.max(1);
    let eval = |t: f64| -> Result<Complex64> {
        let d = det(&path(t));
        if d.norm() < tol.path_zero {
            Err(Error::PathCrossesZero { t })
        } else {
            Ok(d)
        }
    };

    let d0 = eval(0.0)?;
    let mut root = match start {
        Some(s) => s,
        None => d0.sqrt(),
    };
    let mut t0 = 0.0;
    let mut det0 = d0;
    for i in 1..=steps {
        let t1 = i as f64 / steps as f64;
        let det1 = eval(t1)?;
        // explicit stack of pending segments, processed left to right
        let mut pending = vec![(t1, det1, 0u32)];
        while let Some((tb, db, depth)) = pending.pop() {
            let tm = 0.5 * (t0 + tb);
            let dm = eval(tm)?;
            let swing = (dm / det0).arg().abs() + (db / dm).arg().abs();
            if swing < FRAC_PI_2 || depth >= MAX_DEPTH {
                root *= (db / det0).sqrt();
                t0 = tb;
                det0 = db;
            } else {
                pending.push((tb, db, depth + 1));
                pending.push((tm, dm, depth + 1));
            }
        }
    }
    Ok(BranchedScalar::new(root, "path-continuation from t = 0"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sym(g: usize, entries: &[Complex64]) -> ComplexSymMatrix {
        ComplexSymMatrix::new(CMat::from_row_slice(g, g, entries)).unwrap()
    }

    /// Tensor trapezoid rule for ∫ exp(-π ξᵀ M ξ) dξ over [-8, 8]^g.
    fn gaussian_quadrature_oracle(m: &CMat) -> Complex64 {
        let g = m.nrows();
        let n = 801usize;
        let h = 16.0 / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n).map(|i| -8.0 + i as f64 * h).collect();
        let total = n.pow(g as u32);
        let mut acc = Complex64::new(0.0, 0.0);
        let mut xi = vec![0.0; g];
        for flat in 0..total {
            let mut rem = flat;
            for x in xi.iter_mut() {
                *x = nodes[rem % n];
                rem /= n;
            }
            let mut q = Complex64::new(0.0, 0.0);
            for a in 0..g {
                for b in 0..g {
                    q += m[(a, b)] * xi[a] * xi[b];
                }
            }
            acc += (-PI * q).exp();
        }
        acc * h.powi(g as i32)
    }

    #[test]
    fn identity_case() {
        let v = det_invsqrt_posreal(&sym(1, &[c(1.0, 0.0)])).unwrap().value;
        assert_abs_diff_eq!(v.re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn principal_branch_of_i() {
        let v = det_invsqrt_posreal(&sym(1, &[c(0.0, 1.0)])).unwrap().value;
        let expected = Complex64::from_polar(1.0, -PI / 4.0);
        assert!((v - expected).norm() < 1e-14, "{v}");
    }

    #[test]
    fn diagonal_matches_quadrature() {
        let m = sym(2, &[c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 1.0)]);
        let closed = det_invsqrt_posreal(&m).unwrap().value;
        let expected = c(2.0, 0.0).powf(-0.5) * c(1.0, 1.0).powf(-0.5);
        assert!((closed - expected).norm() < 1e-14);
        let quad = gaussian_quadrature_oracle(m.matrix());
        assert!((closed - quad).norm() < 1e-8, "closed {closed} quad {quad}");
    }

    #[test]
    fn coupled_matrix_matches_quadrature() {
        let m = sym(2, &[c(1.5, -2.0), c(0.3, 0.7), c(0.3, 0.7), c(0.9, 1.2)]);
        let closed = det_invsqrt_posreal(&m).unwrap().value;
        let quad = gaussian_quadrature_oracle(m.matrix());
        assert!((closed - quad).norm() < 1e-7, "closed {closed} quad {quad}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let nonsym = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(ComplexSymMatrix::new(nonsym), Err(Error::NonSymmetric { .. })));
        assert!(matches!(
            det_invsqrt_posreal(&sym(1, &[c(-1.0, 0.0)])),
            Err(Error::RealPartNegative { .. })
        ));
        assert!(matches!(
            det_invsqrt_posreal(&sym(2, &[c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)])),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn constant_path() {
        let r = det_sqrt_path(|_| identity(3), 4, None).unwrap();
        assert!((r.value - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn straight_path_on_positive_reals() {
        let tau = -1.0 / 3.0;
        let r = det_sqrt_path(|t| CMat::from_element(1, 1, c(1.0 + t * tau, 0.0)), 8, None).unwrap();
        assert!((r.value - c((2.0f64 / 3.0).sqrt(), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn winding_loop_flips_sign() {
        // oracle: analytic continuation of sqrt(e^{2πit}) is e^{πit}, which is -1 at t = 1
        let loop_path = |t: f64| CMat::from_element(1, 1, Complex64::from_polar(1.0, 2.0 * PI * t));
        let coarse = det_sqrt_path(loop_path, 3, None).unwrap().value;
        let fine = det_sqrt_path(loop_path, 10_000, None).unwrap().value;
        assert!((coarse - c(-1.0, 0.0)).norm() < 1e-12);
        assert!((fine - c(-1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn path_through_zero_is_rejected() {
        let r = det_sqrt_path(|t| CMat::from_element(1, 1, c(1.0 - 2.0 * t, 0.0)), 2, None);
        assert!(matches!(r, Err(Error::PathCrossesZero { .. })));
    }

    #[test]
    fn posdef_examples() {
        assert!(is_posdef(&RMat::identity(3, 3), 1e-10).unwrap());
        assert!(!is_posdef(&RMat::zeros(2, 2), 1e-10).unwrap());
        assert!(is_posdef(&RMat::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]), 1e-10).unwrap());
        assert!(is_posdef(&RMat::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]), 0.0).is_err());
    }
}

//! Invariant polarizations: the Siegel upper half-space chart, the closed
//! Siegel disc chart, and the action of `Sp(2g, R)` on both.
//!
//! Coordinates on the torus are `u = (x, y)`, the symplectic form is
//! `ω(u, v) = ᵗu J v` with `J = [[0, -I], [I, 0]]`, and `Ω ∈ H_g` is
//! attached to the complex coordinate `z = x - Ω y`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{
    complexify, hermitian_eigenvalues, identity, inverse, inverse_real, max_abs, max_abs_real,
    min_sym_eigenvalue, smallest_singular_value, to_complex, CMat, ComplexSymMatrix, RMat, I,
};

/// Smallest admissible eigenvalue of `Im Ω` for interior points.
pub const INTERIOR_TOL: f64 = 1e-10;
/// Eigenvalue threshold on `I - τ*τ` separating interior from boundary.
pub const BOUNDARY_TOL: f64 = 1e-8;
pub const SYMPLECTIC_TOL: f64 = 1e-10;

/// A point of the Siegel upper half-space.
#[derive(Debug, Clone, PartialEq)]
pub struct SiegelPoint(ComplexSymMatrix);

impl SiegelPoint {
    pub fn new(omega: ComplexSymMatrix) -> Result<Self> {
        let eigenvalue = min_sym_eigenvalue(&omega.im());
        if eigenvalue <= INTERIOR_TOL {
            return Err(Error::NotInUpperHalfSpace { eigenvalue });
        }
        Ok(Self(omega))
    }

    pub fn from_matrix(omega: CMat) -> Result<Self> {
        Self::new(ComplexSymMatrix::new(omega)?)
    }

    pub fn from_parts(re: &RMat, im: &RMat) -> Result<Self> {
        Self::new(ComplexSymMatrix::from_parts(re, im)?)
    }

    /// `i · scale · I_g`.
    pub fn imaginary_scalar(g: usize, scale: f64) -> Self {
        Self(ComplexSymMatrix::scalar(g, Complex64::new(0.0, scale)))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn omega(&self) -> &ComplexSymMatrix {
        &self.0
    }

    pub fn matrix(&self) -> &CMat {
        self.0.matrix()
    }

    pub fn re(&self) -> RMat {
        self.0.re()
    }

    pub fn im(&self) -> RMat {
        self.0.im()
    }

    /// Smallest eigenvalue of `Im Ω`.
    pub fn lambda_min(&self) -> f64 {
        min_sym_eigenvalue(&self.im())
    }
}

/// A point of the closed Siegel disc.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscPoint {
    tau: ComplexSymMatrix,
    boundary: bool,
}

impl DiscPoint {
    pub fn new(tau: ComplexSymMatrix) -> Result<Self> {
        let g = tau.dim();
        let gap = identity(g) - tau.matrix().adjoint() * tau.matrix();
        let eigenvalue = hermitian_eigenvalues(&gap)[0];
        if eigenvalue < -INTERIOR_TOL {
            return Err(Error::NotInDisc { eigenvalue });
        }
        Ok(Self { tau, boundary: eigenvalue < BOUNDARY_TOL })
    }

    pub fn from_matrix(tau: CMat) -> Result<Self> {
        Self::new(ComplexSymMatrix::new(tau)?)
    }

    pub fn scalar(g: usize, value: Complex64) -> Result<Self> {
        Self::new(ComplexSymMatrix::scalar(g, value))
    }

    pub fn dim(&self) -> usize {
        self.tau.dim()
    }

    pub fn tau(&self) -> &ComplexSymMatrix {
        &self.tau
    }

    pub fn matrix(&self) -> &CMat {
        self.tau.matrix()
    }

    pub fn is_boundary(&self) -> bool {
        self.boundary
    }

    /// Number of eigenvalues of `I - τ*τ` above [`BOUNDARY_TOL`]; `g` in the
    /// interior, `0` for real polarizations.
    pub fn stratum_rank(&self) -> usize {
        let gap = identity(self.dim()) - self.matrix().adjoint() * self.matrix();
        hermitian_eigenvalues(&gap).into_iter().filter(|&e| e >= BOUNDARY_TOL).count()
    }

    /// `τ` unitary within `tol`, i.e. a real polarization.
    pub fn is_unitary(&self, tol: f64) -> bool {
        let gap = identity(self.dim()) - self.matrix().adjoint() * self.matrix();
        max_abs(&gap) < tol
    }

    /// `det(1 + τ)`.
    pub fn det_one_plus(&self) -> Complex64 {
        crate::matrix::det(&(identity(self.dim()) + self.matrix()))
    }
}

/// Image of a disc point in the upper half-space chart.
#[derive(Debug, Clone, PartialEq)]
pub enum HalfSpacePoint {
    Interior(SiegelPoint),
    /// Symmetric `Ω` with `Im Ω` only positive semidefinite.
    Boundary(ComplexSymMatrix),
}

impl HalfSpacePoint {
    pub fn omega(&self) -> &ComplexSymMatrix {
        match self {
            HalfSpacePoint::Interior(p) => p.omega(),
            HalfSpacePoint::Boundary(m) => m,
        }
    }

    pub fn interior(&self) -> Option<&SiegelPoint> {
        match self {
            HalfSpacePoint::Interior(p) => Some(p),
            HalfSpacePoint::Boundary(_) => None,
        }
    }
}

/// Real `2g × 2g` matrix `M = [[A, B], [C, D]]` with `ᵗM J M = J`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMatrix {
    m: RMat,
    g: usize,
}

/// `J = [[0, -I], [I, 0]]`.
pub fn standard_j(g: usize) -> RMat {
    let mut j = RMat::zeros(2 * g, 2 * g);
    for i in 0..g {
        j[(i, g + i)] = -1.0;
        j[(g + i, i)] = 1.0;
    }
    j
}

/// `ω(u, v) = ᵗu J v = Σ_j (u_{g+j} v_j - u_j v_{g+j})`.
pub fn symplectic_form(u: &[f64], v: &[f64]) -> f64 {
    let g = u.len() / 2;
    (0..g).map(|j| u[g + j] * v[j] - u[j] * v[g + j]).sum()
}

/// Entrywise `|ᵗM J M - J|_max`.
pub fn symplectic_residual(m: &RMat) -> f64 {
    let g = m.nrows() / 2;
    let j = standard_j(g);
    max_abs_real(&(m.transpose() * &j * m - j))
}

impl SymplecticMatrix {
    pub fn new(m: RMat) -> Result<Self> {
        if !m.is_square() || !m.nrows().is_multiple_of(2) || m.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "symplectic matrix must be 2g x 2g, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let residual = symplectic_residual(&m);
        let scale = max_abs_real(&m).max(1.0).powi(2);
        if residual > SYMPLECTIC_TOL * scale {
            return Err(Error::NotSymplectic { residual });
        }
        let g = m.nrows() / 2;
        Ok(Self { m, g })
    }

    pub fn from_blocks(a: &RMat, b: &RMat, c: &RMat, d: &RMat) -> Result<Self> {
        let g = a.nrows();
        for blk in [a, b, c, d] {
            if blk.shape() != (g, g) {
                return Err(Error::DimensionMismatch("blocks must all be g x g".into()));
            }
        }
        let mut m = RMat::zeros(2 * g, 2 * g);
        m.view_mut((0, 0), (g, g)).copy_from(a);
        m.view_mut((0, g), (g, g)).copy_from(b);
        m.view_mut((g, 0), (g, g)).copy_from(c);
        m.view_mut((g, g), (g, g)).copy_from(d);
        Self::new(m)
    }

    pub fn identity(g: usize) -> Self {
        Self { m: RMat::identity(2 * g, 2 * g), g }
    }

    /// `[[0, -I], [I, 0]]`.
    pub fn inversion(g: usize) -> Self {
        Self { m: standard_j(g), g }
    }

    pub fn dim(&self) -> usize {
        self.g
    }

    pub fn matrix(&self) -> &RMat {
        &self.m
    }

    fn block(&self, r: usize, c: usize) -> RMat {
        self.m.view((r * self.g, c * self.g), (self.g, self.g)).into_owned()
    }

    pub fn a(&self) -> RMat {
        self.block(0, 0)
    }
    pub fn b(&self) -> RMat {
        self.block(0, 1)
    }
    pub fn c(&self) -> RMat {
        self.block(1, 0)
    }
    pub fn d(&self) -> RMat {
        self.block(1, 1)
    }

    pub fn compose(&self, other: &SymplecticMatrix) -> SymplecticMatrix {
        SymplecticMatrix { m: &self.m * &other.m, g: self.g }
    }

    /// `M^{-1} = -J ᵗM J`.
    pub fn inverse(&self) -> SymplecticMatrix {
        let j = standard_j(self.g);
        SymplecticMatrix { m: -(&j * self.m.transpose() * &j), g: self.g }
    }

    pub fn residual(&self) -> f64 {
        symplectic_residual(&self.m)
    }

    /// `M u` for a point of `R^{2g}`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let v = nalgebra::DVector::from_column_slice(u);
        (&self.m * v).iter().copied().collect()
    }
}

/// `τ = (i - Ω)(i + Ω)^{-1}`.
pub fn cayley(omega: &SiegelPoint) -> Result<DiscPoint> {
    let g = omega.dim();
    let i_g = identity(g) * I;
    let num = &i_g - omega.matrix();
    let den = inverse(&(&i_g + omega.matrix()))?;
    DiscPoint::new(ComplexSymMatrix::with_tolerance(num * den, 1e-9)?)
}

/// `Ω = i(1 - τ)(1 + τ)^{-1}`; boundary points map to `Im Ω ⪰ 0`.
pub fn cayley_inverse(tau: &DiscPoint) -> Result<HalfSpacePoint> {
    let g = tau.dim();
    let one = identity(g);
    let det_abs = tau.det_one_plus().norm();
    if det_abs <= 1e-10 {
        return Err(Error::ChartSingular { det_abs });
    }
    let den = inverse(&(&one + tau.matrix())).map_err(|_| Error::ChartSingular { det_abs })?;
    let omega = (&one - tau.matrix()) * den * I;
    let omega = ComplexSymMatrix::with_tolerance(omega, 1e-9)?;
    if tau.is_boundary() {
        Ok(HalfSpacePoint::Boundary(omega))
    } else {
        match SiegelPoint::new(omega.clone()) {
            Ok(p) => Ok(HalfSpacePoint::Interior(p)),
            Err(_) => Ok(HalfSpacePoint::Boundary(omega)),
        }
    }
}

/// `M(Ω) = (AΩ + B)(CΩ + D)^{-1}`.
pub fn sp_act_h(m: &SymplecticMatrix, omega: &SiegelPoint) -> Result<SiegelPoint> {
    check_dims(m.dim(), omega.dim())?;
    let (a, b, c, d) = (to_complex(&m.a()), to_complex(&m.b()), to_complex(&m.c()), to_complex(&m.d()));
    let num = &a * omega.matrix() + b;
    let den = inverse(&(&c * omega.matrix() + d))?;
    SiegelPoint::new(ComplexSymMatrix::with_tolerance(num * den, 1e-9)?)
}

/// Same fractional linear map on a matrix with `Im Ω ⪰ 0`.
pub fn sp_act_closed(m: &SymplecticMatrix, omega: &ComplexSymMatrix) -> Result<ComplexSymMatrix> {
    check_dims(m.dim(), omega.dim())?;
    let (a, b, c, d) = (to_complex(&m.a()), to_complex(&m.b()), to_complex(&m.c()), to_complex(&m.d()));
    let num = &a * omega.matrix() + b;
    let den = inverse(&(&c * omega.matrix() + d))?;
    ComplexSymMatrix::with_tolerance(num * den, 1e-9)
}

/// Action on the closed disc: solves
/// `((τ'+1)(A+iB) + (τ'-1)(iC-D)) τ = (τ'+1)(A-iB) + (τ'-1)(iC+D)` for `τ'`.
///
/// Collecting the `τ'` terms gives `τ' X = Y` with
/// `X = (A + iB + iC - D) τ - (A - iB + iC + D)` and
/// `Y = (A - iB - iC - D) - (A + iB - iC + D) τ`.
pub fn sp_act_d(m: &SymplecticMatrix, tau: &DiscPoint) -> Result<DiscPoint> {
    check_dims(m.dim(), tau.dim())?;
    let (a, b, c, d) = (to_complex(&m.a()), to_complex(&m.b()), to_complex(&m.c()), to_complex(&m.d()));
    let t = tau.matrix();
    let x = (&a + &b * I + &c * I - &d) * t - (&a - &b * I + &c * I + &d);
    let y = (&a - &b * I - &c * I - &d) - (&a + &b * I - &c * I + &d) * t;
    let scale = max_abs(&x).max(1.0);
    if smallest_singular_value(&x) <= 1e-12 * scale {
        return Err(Error::NoSolution);
    }
    // τ' X = Y  <=>  ᵗX ᵗτ' = ᵗY
    let tau_t = x
        .transpose()
        .lu()
        .solve(&y.transpose())
        .ok_or(Error::NoSolution)?;
    DiscPoint::new(ComplexSymMatrix::with_tolerance(tau_t.transpose(), 1e-8)?)
}

/// `J_Ω = [[-Ω₁Ω₂⁻¹, Ω₁Ω₂⁻¹Ω₁ + Ω₂], [-Ω₂⁻¹, Ω₂⁻¹Ω₁]]`.
pub fn complex_structure(omega: &SiegelPoint) -> RMat {
    let g = omega.dim();
    let (o1, o2) = (omega.re(), omega.im());
    let o2_inv = inverse_real(&o2).expect("Im Ω is positive definite");
    let mut j = RMat::zeros(2 * g, 2 * g);
    j.view_mut((0, 0), (g, g)).copy_from(&(-(&o1 * &o2_inv)));
    j.view_mut((0, g), (g, g)).copy_from(&(&o1 * &o2_inv * &o1 + &o2));
    j.view_mut((g, 0), (g, g)).copy_from(&(-&o2_inv));
    j.view_mut((g, g), (g, g)).copy_from(&(&o2_inv * &o1));
    j
}

/// Kähler metric `γ_Ω = ω(·, J_Ω ·)`, i.e. the matrix `J · J_Ω`.
pub fn kahler_metric(omega: &SiegelPoint) -> RMat {
    let g = omega.dim();
    let gamma = standard_j(g) * complex_structure(omega);
    crate::matrix::symmetrize_real(&gamma)
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch(format!("genus {a} vs {b}")));
    }
    Ok(())
}

/// Convenience: `DMatrix` from a row-major slice of complex numbers.
pub fn cmat(g: usize, entries: &[Complex64]) -> CMat {
    DMatrix::from_row_slice(g, g, entries)
}

/// Convenience: `Ω = re + i im` from real row-major slices.
pub fn omega_from_slices(g: usize, re: &[f64], im: &[f64]) -> Result<SiegelPoint> {
    SiegelPoint::new(ComplexSymMatrix::new(complexify(
        &RMat::from_row_slice(g, g, re),
        &RMat::from_row_slice(g, g, im),
    ))?)
}

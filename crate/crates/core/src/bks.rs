//! Half-form and prequantum pairings, the BKS pairing between quantum
//! spaces of two polarizations, Gram matrices and the pairing maps
//! `B_{τ,τ'}`.
//!
//! Two routes are provided for every pairing: closed forms from Gaussian
//! integrals, and direct quadrature of the same Gaussian integrals on a grid
//! (or, in genus one, of the theta sections over the torus).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::matrix::{
    condition_number, det_invsqrt_posreal, hermitian_eigenvalues, identity, inverse, max_abs,
    min_sym_eigenvalue, BranchedScalar, CMat, ComplexSymMatrix, I,
};
use crate::siegel::{cayley_inverse, DiscPoint, HalfSpacePoint, SiegelPoint};
use crate::theta::Characteristic;
use crate::weil_brezin::{sample_theta_section, GaussianState};

/// Largest condition number accepted when solving against a Gram matrix.
pub const GRAM_COND_LIMIT: f64 = 1e8;

/// `2^{-g/2} k^{-g}`, the BKS pairing of two frame elements with equal
/// characteristic.
pub fn frame_constant(g: usize, k: u32) -> f64 {
    2f64.powf(-(g as f64) / 2.0) * (k as f64).powi(-(g as i32))
}

fn sym(m: CMat) -> Result<ComplexSymMatrix> {
    ComplexSymMatrix::with_tolerance(m, 1e-8)
}

/// `⟨√dz_Ω, √dz_Ω'⟩ = det((Ω - Ω̄')/(2ki))^{1/2}`, the branch fixed by the
/// Gaussian integral `∫ e^{-π ᵗξ(Ω - Ω̄')ξ/(2ki)} dξ = det(...)^{-1/2}`.
pub fn halfform_pairing(k: u32, omega: &CMat, omega_p: &CMat) -> Result<BranchedScalar> {
    let m = (omega - omega_p.conjugate()) / Complex64::new(0.0, 2.0 * k as f64);
    let inv = det_invsqrt_posreal(&sym(m)?).map_err(|e| degenerate(e, "half-form pairing"))?;
    Ok(BranchedScalar::new(1.0 / inv.value, "gaussian integral"))
}

/// `δ_{ll'} (ki)^{-g/2} det(Ω̄' - Ω)^{-1/2}`, evaluated as
/// `det(ki(Ω̄' - Ω))^{-1/2}` with the branch of the Gaussian integral.
pub fn prequantum_pairing(
    k: u32,
    l: &Characteristic,
    lp: &Characteristic,
    omega: &CMat,
    omega_p: &CMat,
) -> Result<Complex64> {
    if l != lp {
        return Ok(Complex64::new(0.0, 0.0));
    }
    GaussianState::gaussian_overlap(k, omega, omega_p).map_err(|e| degenerate(e, "prequantum pairing"))
}

fn degenerate(e: Error, what: &str) -> Error {
    match e {
        Error::SingularMatrix { .. } | Error::RealPartNegative { .. } => {
            Error::DegeneratePair(format!("{what}: {e}"))
        }
        other => other,
    }
}

/// Result of a Gaussian integral by quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureValue {
    pub value: Complex64,
    /// Difference between the last two refinements.
    pub error_estimate: f64,
    pub points_per_axis: usize,
}

const MAX_POINTS_G1: usize = 400_000;
const MAX_POINTS_TOTAL: usize = 4_000_000;

/// `∫_{R^g} e^{-π ᵗyMy} dy` for complex symmetric `M` with `Re M > 0`, by
/// the trapezoid rule on `[-W, W]^g`.
///
/// `W` makes the truncated mass below `e^{-40}`; the step makes the aliased
/// Poisson images `e^{-π ᵗn M⁻¹ n / h²}` below `e^{-40}`. The step is then
/// halved until two successive values agree.
pub fn gaussian_integral_quadrature(m: &CMat, exec: Exec) -> Result<QuadratureValue> {
    let g = m.nrows();
    let re = m.map(|z| z.re);
    let lambda = min_sym_eigenvalue(&crate::matrix::symmetrize_real(&re));
    if !(lambda > 0.0) {
        return Err(Error::DegeneratePair(format!(
            "Gaussian integrand does not decay (smallest eigenvalue of Re M = {lambda:.3e})"
        )));
    }
    let minv = inverse(m)?;
    let mu = min_sym_eigenvalue(&crate::matrix::symmetrize_real(&minv.map(|z| z.re)));
    if !(mu > 0.0) {
        return Err(Error::DegeneratePair("Re M^{-1} is not positive definite".into()));
    }
    let w = (40.0 / (PI * lambda)).sqrt();
    let mut h = (PI * mu / 40.0).sqrt();
    let mut prev: Option<Complex64> = None;
    for _ in 0..4 {
        let half = (w / h).ceil() as usize;
        let per_axis = 2 * half + 1;
        let total = per_axis.checked_pow(g as u32).unwrap_or(usize::MAX);
        if per_axis > MAX_POINTS_G1 || total > MAX_POINTS_TOTAL {
            return match prev {
                Some(v) => Ok(QuadratureValue { value: v, error_estimate: f64::NAN, points_per_axis: per_axis }),
                None => Err(Error::ConvergenceFailure(format!(
                    "quadrature needs {per_axis} points per axis"
                ))),
            };
        }
        let value = trapezoid_gaussian(m, half, h, exec);
        if let Some(p) = prev {
            let err = (value - p).norm();
            if err <= 1e-13 * value.norm() {
                return Ok(QuadratureValue { value, error_estimate: err, points_per_axis: per_axis });
            }
        }
        prev = Some(value);
        h /= 2.0;
    }
    Err(Error::ConvergenceFailure("Gaussian quadrature did not settle".into()))
}

fn trapezoid_gaussian(m: &CMat, half: usize, h: f64, exec: Exec) -> Complex64 {
    let g = m.nrows();
    let side = 2 * half + 1;
    let rows = exec.map_range(side, |i0| {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut digits = vec![0usize; g.saturating_sub(1)];
        let inner = side.pow(g as u32 - 1);
        let mut y = vec![0.0; g];
        y[0] = (i0 as f64 - half as f64) * h;
        for _ in 0..inner {
            for a in 1..g {
                y[a] = (digits[a - 1] as f64 - half as f64) * h;
            }
            let mut q = Complex64::new(0.0, 0.0);
            for a in 0..g {
                for b in 0..g {
                    q += m[(a, b)] * y[a] * y[b];
                }
            }
            acc += (-PI * q).exp();
            for d in digits.iter_mut().rev() {
                *d += 1;
                if *d < side {
                    break;
                }
                *d = 0;
            }
        }
        acc
    });
    rows.into_iter().sum::<Complex64>() * h.powi(g as i32)
}

/// Half-form pairing by quadrature of
/// `⟨e^{πi ᵗξΩξ/2k}, e^{πi ᵗξΩ'ξ/2k}⟩`, inverted as the embedding prescribes.
pub fn halfform_pairing_quadrature(k: u32, omega: &CMat, omega_p: &CMat, exec: Exec) -> Result<Complex64> {
    let m = (omega - omega_p.conjugate()) / Complex64::new(0.0, 2.0 * k as f64);
    Ok(1.0 / gaussian_integral_quadrature(&m, exec)?.value)
}

/// `Σ_j ∫ (σ^l)_j conj((σ^{l'})_j) dy` for the WB Gaussians of two frames.
pub fn prequantum_pairing_quadrature(
    k: u32,
    l: &Characteristic,
    lp: &Characteristic,
    omega: &CMat,
    omega_p: &CMat,
    exec: Exec,
) -> Result<Complex64> {
    // the components are δ_{lj} e^{kπi ᵗyΩy}; slots where either factor
    // vanishes contribute exactly zero
    if l != lp {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let m = (omega_p.conjugate() - omega) * Complex64::new(0.0, k as f64);
    Ok(gaussian_integral_quadrature(&m, exec)?.value)
}

/// How Gram matrices are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairingRoute {
    ClosedForm,
    /// Gaussian quadrature on `R^g` for both factors.
    Quadrature,
    /// Torus `L²` pairing of sampled theta sections on an `N`-grid
    /// (prequantum factor), quadrature for the half-form factor.
    Torus { n: usize },
}

/// `[⟨σ^l_Ω, σ^{l'}_{Ω'}⟩_BKS]_{l, l'}`.
pub fn gram_matrix(k: u32, omega: &CMat, omega_p: &CMat, route: PairingRoute, exec: Exec) -> Result<CMat> {
    let g = omega.nrows();
    let chars = Characteristic::all(g, k);
    let n = chars.len();
    let mut out = CMat::zeros(n, n);
    match route {
        PairingRoute::ClosedForm => {
            let h = halfform_pairing(k, omega, omega_p)?.value;
            for (i, l) in chars.iter().enumerate() {
                for (j, lp) in chars.iter().enumerate() {
                    out[(i, j)] = prequantum_pairing(k, l, lp, omega, omega_p)? * h;
                }
            }
        }
        PairingRoute::Quadrature => {
            let h = halfform_pairing_quadrature(k, omega, omega_p, exec)?;
            // every diagonal slot integrates the same Gaussian
            let mut diag: Option<Complex64> = None;
            for (i, l) in chars.iter().enumerate() {
                for (j, lp) in chars.iter().enumerate() {
                    let p = if l == lp {
                        match diag {
                            Some(v) => v,
                            None => *diag.insert(prequantum_pairing_quadrature(k, l, lp, omega, omega_p, exec)?),
                        }
                    } else {
                        prequantum_pairing_quadrature(k, l, lp, omega, omega_p, exec)?
                    };
                    out[(i, j)] = p * h;
                }
            }
        }
        PairingRoute::Torus { n: grid } => {
            let a = SiegelPoint::from_matrix(omega.clone())?;
            let b = SiegelPoint::from_matrix(omega_p.clone())?;
            let h = halfform_pairing_quadrature(k, omega, omega_p, exec)?;
            let left: Vec<_> = chars
                .iter()
                .map(|l| sample_theta_section(k, l, &a, grid, exec))
                .collect::<Result<_>>()?;
            let right: Vec<_> = chars
                .iter()
                .map(|l| sample_theta_section(k, l, &b, grid, exec))
                .collect::<Result<_>>()?;
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] = left[i].l2_pairing(&right[j])? * h;
                }
            }
        }
    }
    Ok(out)
}

/// Upper half-space matrix used to pair at a disc point; boundary points
/// with a singular chart must be regularized first.
pub fn chart_omega(tau: &DiscPoint) -> Result<CMat> {
    Ok(cayley_inverse(tau)?.omega().matrix().clone())
}

/// Moves a boundary point into the interior: `Ω(τ) + iεI` when the chart is
/// defined, `Ω = (i/ε) I` for `τ = -I`, and `τ(1 - ε)` otherwise.
pub fn regularize(tau: &DiscPoint, eps: f64) -> Result<SiegelPoint> {
    let g = tau.dim();
    match cayley_inverse(tau) {
        Ok(HalfSpacePoint::Interior(p)) => Ok(p),
        Ok(HalfSpacePoint::Boundary(om)) => SiegelPoint::from_matrix(om.matrix() + identity(g) * Complex64::new(0.0, eps)),
        Err(Error::ChartSingular { .. }) => {
            if max_abs(&(tau.matrix() + identity(g))) < 1e-12 {
                return Ok(SiegelPoint::imaginary_scalar(g, 1.0 / eps));
            }
            let shrunk = DiscPoint::from_matrix(tau.matrix() * Complex64::new(1.0 - eps, 0.0))?;
            match cayley_inverse(&shrunk)? {
                HalfSpacePoint::Interior(p) => Ok(p),
                HalfSpacePoint::Boundary(_) => Err(Error::ConvergenceFailure("regularization stayed on the boundary".into())),
            }
        }
        Err(e) => Err(e),
    }
}

/// Conversion `√d^g(x,y)_τ = det(1+τ)^{1/2} √d^g z_{Ω(τ)}`, principal branch
/// (equal to one at `τ = 0`; `1 + τ` has nonnegative real part on the disc).
pub fn halfform_conversion(tau: &DiscPoint) -> Result<BranchedScalar> {
    let one_plus = sym(identity(tau.dim()) + tau.matrix())?;
    let inv = det_invsqrt_posreal(&one_plus)?;
    Ok(BranchedScalar::new(1.0 / inv.value, "principal, 1 at tau = 0"))
}

/// The pair `(P_τ, P_τ')` is transverse when the complexified
/// polarizations meet only in zero; `P_τ` is the column span of
/// `[-i(1 - τ̄); 1 + τ̄]`.
pub fn is_transverse(tau: &DiscPoint, tau_p: &DiscPoint) -> bool {
    let g = tau.dim();
    let span = |t: &CMat| {
        let one = identity(g);
        let tb = t.conjugate();
        let mut v = CMat::zeros(2 * g, g);
        v.view_mut((0, 0), (g, g)).copy_from(&((&one - &tb) * (-I)));
        v.view_mut((g, 0), (g, g)).copy_from(&(&one + &tb));
        v
    };
    let mut both = CMat::zeros(2 * g, 2 * g);
    both.view_mut((0, 0), (2 * g, g)).copy_from(&span(tau.matrix()));
    both.view_mut((0, g), (2 * g, g)).copy_from(&span(tau_p.matrix()));
    let sv = crate::matrix::singular_values(&both);
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().cloned().fold(f64::INFINITY, f64::min) > 1e-8 * smax
}

/// Vector of the quantum space over `τ`, expanded in the frame `σ^l_τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumVector {
    pub k: u32,
    pub tau: DiscPoint,
    pub coefficients: Vec<Complex64>,
}

impl QuantumVector {
    pub fn new(k: u32, tau: DiscPoint, coefficients: Vec<Complex64>) -> Result<Self> {
        let n = (k as usize).pow(tau.dim() as u32);
        if coefficients.len() != n {
            return Err(Error::DimensionMismatch(format!("expected {n} coefficients")));
        }
        if coefficients.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::DimensionMismatch("coefficients must be finite".into()));
        }
        Ok(Self { k, tau, coefficients })
    }

    pub fn basis(k: u32, tau: DiscPoint, l: &Characteristic) -> Self {
        let mut coefficients = vec![Complex64::new(0.0, 0.0); (k as usize).pow(tau.dim() as u32)];
        coefficients[l.index()] = Complex64::new(1.0, 0.0);
        Self { k, tau, coefficients }
    }
}

/// Checks that a pair of polarizations can be paired.
pub fn check_pair(tau: &DiscPoint, tau_p: &DiscPoint) -> Result<()> {
    if tau.dim() != tau_p.dim() {
        return Err(Error::DimensionMismatch("polarizations of different genus".into()));
    }
    if tau.is_boundary() && tau_p.is_boundary() && !is_transverse(tau, tau_p) {
        return Err(Error::DegeneratePair("both polarizations are real and not transverse".into()));
    }
    Ok(())
}

/// `⟨u, v⟩_BKS = 2^{-g/2} k^{-g} Σ_l u_l conj(v_l)`.
pub fn bks_pairing(u: &QuantumVector, v: &QuantumVector) -> Result<Complex64> {
    if u.k != v.k {
        return Err(Error::DimensionMismatch("vectors at different levels".into()));
    }
    check_pair(&u.tau, &v.tau)?;
    let s: Complex64 = u.coefficients.iter().zip(&v.coefficients).map(|(a, b)| a * b.conj()).sum();
    Ok(s * frame_constant(u.tau.dim(), u.k))
}

/// Matrix of `B_{τ,τ'}` in the frames, recomputed from Gram matrices by
/// solving `ᵗB G' = K`, with `K` the cross Gram matrix and `G'` the Gram
/// matrix at `τ'`.
pub fn bks_map(k: u32, omega: &CMat, omega_p: &CMat, route: PairingRoute, exec: Exec) -> Result<CMat> {
    let cross = gram_matrix(k, omega, omega_p, route, exec)?;
    let target = gram_matrix(k, omega_p, omega_p, route, exec)?;
    solve_map(&cross, &target)
}

fn solve_map(cross: &CMat, target: &CMat) -> Result<CMat> {
    let cond = condition_number(target);
    if !(cond < GRAM_COND_LIMIT) {
        return Err(Error::IllConditionedGram { cond });
    }
    // ᵗB G' = K  <=>  ᵗG' B = ᵗK
    let b = target
        .transpose()
        .lu()
        .solve(&cross.transpose())
        .ok_or(Error::IllConditionedGram { cond })?;
    Ok(b)
}

/// Map between disc points, regularizing boundary points by `eps`.
pub fn bks_map_disc(k: u32, tau: &DiscPoint, tau_p: &DiscPoint, route: PairingRoute, eps: f64, exec: Exec) -> Result<CMat> {
    check_pair(tau, tau_p)?;
    let a = regularize(tau, eps)?;
    let b = regularize(tau_p, eps)?;
    bks_map(k, a.matrix(), b.matrix(), route, exec)
}

/// `max |ᵗB G' B̄ - G|`.
pub fn unitarity_residual(b: &CMat, g_src: &CMat, g_dst: &CMat) -> f64 {
    max_abs(&(b.transpose() * g_dst * b.conjugate() - g_src))
}

/// Positivity of the half-form pairing on the diagonal: returns
/// `(|Im|, Re)` of `⟨√dz_Ω, √dz_Ω⟩`.
pub fn halfform_self_pairing(k: u32, omega: &SiegelPoint) -> Result<(f64, f64)> {
    let v = halfform_pairing(k, omega.matrix(), omega.matrix())?.value;
    Ok((v.im.abs(), v.re))
}

/// Distance of a matrix from `c · I`: its anti-Hermitian part plus the
/// largest eigenvalue deviation of its Hermitian part.
pub fn scalar_deviation(m: &CMat, c: f64) -> f64 {
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let anti = max_abs(&(m - m.adjoint()));
    hermitian_eigenvalues(&herm).iter().map(|e| (e - c).abs()).fold(anti, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::random_siegel_point;
    use crate::siegel::{cayley, cmat};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn om1(z: Complex64) -> CMat {
        cmat(1, &[z])
    }

    #[test]
    fn halfform_examples() {
        let v = halfform_pairing(1, &om1(I), &om1(I)).unwrap().value;
        assert!((v - 1.0).norm() < 1e-15);
        let v = halfform_pairing(1, &om1(I), &om1(c(0.0, 2.0))).unwrap().value;
        assert!((v - 1.5f64.sqrt()).norm() < 1e-15);
        let a = om1(c(0.3, 0.8));
        let b = om1(c(-0.2, 1.4));
        let ab = halfform_pairing(2, &a, &b).unwrap().value;
        let ba = halfform_pairing(2, &b, &a).unwrap().value;
        assert!((ab - ba.conj()).norm() < 1e-14);
    }

    #[test]
    fn halfform_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for g in 1..=2 {
            for k in 1..=3 {
                let a = random_siegel_point(&mut rng, g);
                let b = random_siegel_point(&mut rng, g);
                let closed = halfform_pairing(k, a.matrix(), b.matrix()).unwrap().value;
                let quad = halfform_pairing_quadrature(k, a.matrix(), b.matrix(), Exec::default()).unwrap();
                assert!((closed - quad).norm() < 1e-10 * closed.norm());
            }
        }
    }

    #[test]
    fn prequantum_examples() {
        let l0 = Characteristic::zero(1, 1);
        let v = prequantum_pairing(1, &l0, &l0, &om1(I), &om1(I)).unwrap();
        assert!((v - std::f64::consts::FRAC_1_SQRT_2).norm() < 1e-15);
        let v = prequantum_pairing(1, &l0, &l0, &om1(I), &om1(c(0.0, 2.0))).unwrap();
        assert!((v.norm() - 3f64.powf(-0.5)).abs() < 1e-15);
        let l1 = Characteristic::new(&[1], 2).unwrap();
        let l0 = Characteristic::zero(1, 2);
        assert_eq!(prequantum_pairing(2, &l0, &l1, &om1(I), &om1(I)).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn prequantum_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for k in 1..=2 {
            for _ in 0..10 {
                let a = random_siegel_point(&mut rng, 1);
                let b = random_siegel_point(&mut rng, 1);
                let l = Characteristic::zero(1, k);
                let closed = prequantum_pairing(k, &l, &l, a.matrix(), b.matrix()).unwrap();
                let quad = prequantum_pairing_quadrature(k, &l, &l, a.matrix(), b.matrix(), Exec::default()).unwrap();
                assert!((closed - quad).norm() < 1e-8 * closed.norm());
            }
        }
    }

    #[test]
    fn frame_pairing_examples() {
        assert!((frame_constant(1, 1) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((frame_constant(2, 3) - 0.5 / 9.0).abs() < 1e-15);
        let tau = DiscPoint::scalar(1, c(0.0, 0.0)).unwrap();
        let zero = QuantumVector::new(2, tau.clone(), vec![c(0.0, 0.0); 2]).unwrap();
        let e = QuantumVector::basis(2, tau.clone(), &Characteristic::zero(1, 2));
        assert_eq!(bks_pairing(&zero, &e).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn factorization_on_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for g in 1..=3 {
            for k in 1..=3u32 {
                let a = random_siegel_point(&mut rng, g);
                let b = random_siegel_point(&mut rng, g);
                let gram = gram_matrix(k, a.matrix(), b.matrix(), PairingRoute::ClosedForm, Exec::default()).unwrap();
                let expected = identity(gram.nrows()) * Complex64::new(frame_constant(g, k), 0.0);
                assert!(max_abs(&(gram - expected)) < 1e-10);
            }
        }
    }

    #[test]
    fn gram_constancy_by_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for k in 1..=4u32 {
            let a = random_siegel_point(&mut rng, 1);
            let gram = gram_matrix(k, a.matrix(), a.matrix(), PairingRoute::Quadrature, Exec::default()).unwrap();
            let expected = identity(gram.nrows()) * Complex64::new(frame_constant(1, k), 0.0);
            assert!(max_abs(&(gram - expected)) < 1e-8);
        }
    }

    #[test]
    fn torus_route_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 1..=3u32 {
            let a = random_siegel_point(&mut rng, 1);
            let b = random_siegel_point(&mut rng, 1);
            let gram = gram_matrix(k, a.matrix(), b.matrix(), PairingRoute::Torus { n: 60 }, Exec::default()).unwrap();
            let expected = identity(gram.nrows()) * Complex64::new(frame_constant(1, k), 0.0);
            assert!(max_abs(&(gram - expected)) < 1e-8);
        }
    }

    #[test]
    fn map_is_identity_unitary_and_transitive() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let k = 3;
        let pts: Vec<_> = (0..3).map(|_| random_siegel_point(&mut rng, 1)).collect();
        let route = PairingRoute::Quadrature;
        let b01 = bks_map(k, pts[0].matrix(), pts[1].matrix(), route, Exec::default()).unwrap();
        let b12 = bks_map(k, pts[1].matrix(), pts[2].matrix(), route, Exec::default()).unwrap();
        let b02 = bks_map(k, pts[0].matrix(), pts[2].matrix(), route, Exec::default()).unwrap();
        assert!(max_abs(&(&b01 - identity(3))) < 1e-8);
        assert!(max_abs(&(&b12 * &b01 - &b02)) < 1e-8);
        let g0 = gram_matrix(k, pts[0].matrix(), pts[0].matrix(), route, Exec::default()).unwrap();
        let g1 = gram_matrix(k, pts[1].matrix(), pts[1].matrix(), route, Exec::default()).unwrap();
        assert!(unitarity_residual(&b01, &g0, &g1) < 1e-8);
        let same = bks_map(k, pts[0].matrix(), pts[0].matrix(), route, Exec::default()).unwrap();
        assert!(max_abs(&(same - identity(3))) < 1e-10);
    }

    #[test]
    fn halfform_positive_on_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for i in 0..50 {
            let g = 1 + i % 3;
            let omega = random_siegel_point(&mut rng, g);
            let (im, re) = halfform_self_pairing(1 + (i % 3) as u32, &omega).unwrap();
            assert!(im < 1e-12 && re > 0.0);
        }
    }

    #[test]
    fn conversion_squares_to_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for g in 1..=3 {
            let tau = cayley(&random_siegel_point(&mut rng, g)).unwrap();
            let c2 = halfform_conversion(&tau).unwrap().value.powi(2);
            let d = crate::matrix::det(&(identity(g) + tau.matrix()));
            assert!((c2 / d - 1.0).norm() < 1e-10);
        }
        let zero = DiscPoint::scalar(2, c(0.0, 0.0)).unwrap();
        assert!((halfform_conversion(&zero).unwrap().value - 1.0).norm() < 1e-15);
    }

    #[test]
    fn transversality() {
        let h = DiscPoint::scalar(1, c(-1.0, 0.0)).unwrap();
        let v = DiscPoint::scalar(1, c(1.0, 0.0)).unwrap();
        assert!(is_transverse(&h, &v));
        assert!(!is_transverse(&h, &h));
        assert!(matches!(
            bks_pairing(&QuantumVector::basis(1, h.clone(), &Characteristic::zero(1, 1)),
                        &QuantumVector::basis(1, h, &Characteristic::zero(1, 1))),
            Err(Error::DegeneratePair(_))
        ));
    }

    #[test]
    fn regularized_boundary_frames() {
        let h = DiscPoint::scalar(1, c(-1.0, 0.0)).unwrap();
        let v = DiscPoint::scalar(1, c(1.0, 0.0)).unwrap();
        for k in 1..=3u32 {
            for eps in [1e-2, 1e-3, 1e-4] {
                let a = regularize(&h, eps).unwrap();
                let b = regularize(&v, eps).unwrap();
                let gram = gram_matrix(k, a.matrix(), b.matrix(), PairingRoute::Quadrature, Exec::default()).unwrap();
                let expected = identity(gram.nrows()) * Complex64::new(frame_constant(1, k), 0.0);
                assert!(max_abs(&(gram - expected)) < 1e-6);
            }
        }
    }
}

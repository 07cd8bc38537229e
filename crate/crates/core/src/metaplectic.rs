//! Generators `S(P, L, Q)_m` of the metaplectic group acting on
//! `L²(R^g)` by
//!
//! `S f(u) = i^{m - g/2} k^{g/2} |det L|^{1/2} ∫ e^{kπi(ᵗuPu - 2ᵗu ᵗL v + ᵗvQv)} f(v) dv`,
//!
//! their action on Gaussian states and half-forms, and decomposition of
//! symplectic matrices into one or two generators.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::matrix::{
    det, det_invsqrt_posreal, det_sqrt_path, identity, inverse, max_abs, max_abs_real,
    symmetrize_real, to_complex, BranchedScalar, CMat, ComplexSymMatrix, RMat, I,
};
use crate::siegel::{sp_act_closed, sp_act_d, DiscPoint, SiegelPoint, SymplecticMatrix};
use crate::weil_brezin::{xi_residual_matrix, GaussianState};

const SYMMETRY_TOL: f64 = 1e-12;
const DET_L_TOL: f64 = 1e-12;
const DET_C_TOL: f64 = 1e-8;
const SHIFT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct MetaplecticGenerator {
    p: RMat,
    l: RMat,
    q: RMat,
    m: u8,
}

fn check_symmetric(name: &str, m: &RMat) -> Result<()> {
    let r = max_abs_real(&(m - m.transpose()));
    if r > SYMMETRY_TOL * max_abs_real(m).max(1.0) {
        return Err(Error::InvalidGenerator(format!("{name} is not symmetric (residual {r:.3e})")));
    }
    Ok(())
}

impl MetaplecticGenerator {
    pub fn new(p: RMat, l: RMat, q: RMat, m: i64) -> Result<Self> {
        let g = l.nrows();
        if p.shape() != (g, g) || q.shape() != (g, g) || l.ncols() != g {
            return Err(Error::DimensionMismatch("P, L, Q must all be g x g".into()));
        }
        check_symmetric("P", &p)?;
        check_symmetric("Q", &q)?;
        let d = l.determinant();
        if d.abs() <= DET_L_TOL {
            return Err(Error::SingularL { det_abs: d.abs() });
        }
        let m = m.rem_euclid(4) as u8;
        // i^{2m} must equal sign det L
        let parity_ok = m.is_multiple_of(2) == (d > 0.0);
        if !parity_ok {
            return Err(Error::InvalidGenerator(format!(
                "index m = {m} is incompatible with sign det L = {}",
                d.signum()
            )));
        }
        Ok(Self { p: symmetrize_real(&p), l, q: symmetrize_real(&q), m })
    }

    /// Uses `m = 0` when `det L > 0` and `m = 1` otherwise.
    pub fn with_default_index(p: RMat, l: RMat, q: RMat) -> Result<Self> {
        let d = l.determinant();
        if d.abs() <= DET_L_TOL {
            return Err(Error::SingularL { det_abs: d.abs() });
        }
        Self::new(p, l, q, if d > 0.0 { 0 } else { 1 })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }
    pub fn p(&self) -> &RMat {
        &self.p
    }
    pub fn l(&self) -> &RMat {
        &self.l
    }
    pub fn q(&self) -> &RMat {
        &self.q
    }
    pub fn m(&self) -> u8 {
        self.m
    }

    /// The same operator with `m + 2`, i.e. its negative.
    pub fn negated(&self) -> Self {
        Self { m: (self.m + 2) % 4, ..self.clone() }
    }

    /// `[[P L⁻¹, P L⁻¹ Q - ᵗL], [L⁻¹, L⁻¹ Q]]`.
    pub fn to_symplectic(&self) -> Result<SymplecticMatrix> {
        let l_inv = self
            .l
            .clone()
            .try_inverse()
            .ok_or(Error::SingularL { det_abs: self.l.determinant().abs() })?;
        let a = &self.p * &l_inv;
        let b = &a * &self.q - self.l.transpose();
        let d = &l_inv * &self.q;
        SymplecticMatrix::from_blocks(&a, &b, &l_inv, &d)
    }

    fn check_shift(&self, omega: &CMat) -> Result<CMat> {
        let shifted = omega + to_complex(&self.q);
        let det_abs = det(&shifted).norm();
        if det_abs <= SHIFT_TOL {
            return Err(Error::SingularShift { det_abs });
        }
        Ok(shifted)
    }

    /// `Ω' = P - ᵗL (Ω + Q)⁻¹ L`.
    pub fn image(&self, omega: &CMat) -> Result<CMat> {
        let shifted = self.check_shift(omega)?;
        let l = to_complex(&self.l);
        Ok(to_complex(&self.p) - l.transpose() * inverse(&shifted)? * l)
    }

    /// Scalar `c` with `S e^{kπi ᵗvΩv} = c e^{kπi ᵗuΩ'u}`, from the Gaussian
    /// integral: `c = i^{m - g/2} |det L|^{1/2} det(-i(Ω + Q))^{-1/2}` with the
    /// principal branch (the real part of `-i(Ω + Q)` is `Im Ω ⪰ 0`).
    pub fn gaussian_scalar(&self, omega: &CMat) -> Result<Complex64> {
        let shifted = self.check_shift(omega)?;
        let g = self.dim() as f64;
        let root = det_invsqrt_posreal(&ComplexSymMatrix::with_tolerance(shifted * (-I), 1e-9)?)?;
        let phase = Complex64::from_polar(1.0, PI / 2.0 * (self.m as f64 - g / 2.0));
        Ok(phase * self.l.determinant().abs().sqrt() * root.value)
    }

    /// Gaussian state mapped by the generator; the level cancels out of the
    /// scalar.
    pub fn act_on_gaussian(&self, state: &GaussianState) -> Result<GaussianState> {
        let omega = state.omega.matrix();
        let c = self.gaussian_scalar(omega)?;
        let image = ComplexSymMatrix::with_tolerance(self.image(omega)?, 1e-8)?;
        GaussianState::new(state.k, state.amplitudes.iter().map(|a| a * c).collect(), image)
    }

    /// `i^{-m} |det L|^{-1/2} √det(Ω + Q)`, the reciprocal of
    /// [`Self::gaussian_scalar`].
    pub fn act_on_halfform(&self, omega: &CMat) -> Result<BranchedScalar> {
        let c = self.gaussian_scalar(omega)?;
        Ok(BranchedScalar::new(1.0 / c, "gaussian integral"))
    }

    /// Half-form scalar at a disc point through the Cayley chart.
    pub fn act_on_halfform_disc(&self, tau: &DiscPoint) -> Result<BranchedScalar> {
        let omega = crate::siegel::cayley_inverse(tau)?;
        self.act_on_halfform(omega.omega().matrix())
    }

    /// Kernel `i^{m - g/2} k^{g/2} |det L|^{1/2} e^{kπi(ᵗuPu - 2ᵗuᵗLv + ᵗvQv)}`
    /// in genus one.
    fn kernel_g1(&self, k: u32, u: f64, v: f64) -> Complex64 {
        let (p, l, q) = (self.p[(0, 0)], self.l[(0, 0)], self.q[(0, 0)]);
        let kf = k as f64;
        let pre = Complex64::from_polar(kf.sqrt() * l.abs().sqrt(), PI / 2.0 * (self.m as f64 - 0.5));
        pre * Complex64::from_polar(1.0, kf * PI * (p * u * u - 2.0 * u * l * v + q * v * v))
    }
}

/// Grid used by the quadrature oracle for the integral operator.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureGrid {
    pub half_width: f64,
    pub points: usize,
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        Self { half_width: 8.0, points: 2048 }
    }
}

impl QuadratureGrid {
    pub fn nodes(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.points).map(|i| -self.half_width + i as f64 * h).collect()
    }
    pub fn step(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }
}

/// Applies the integral operator of a genus-one generator to samples of `f`
/// on the grid by the trapezoid rule, returning samples on the same grid.
pub fn apply_integral_operator_g1(
    gen: &MetaplecticGenerator,
    k: u32,
    f: &[Complex64],
    grid: QuadratureGrid,
    exec: Exec,
) -> Result<Vec<Complex64>> {
    if gen.dim() != 1 {
        return Err(Error::Unsupported("quadrature oracle is implemented for g = 1".into()));
    }
    let nodes = grid.nodes();
    let h = grid.step();
    let n = nodes.len();
    Ok(exec.map_range(n, |i| {
        let u = nodes[i];
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &v) in nodes.iter().enumerate() {
            let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
            acc += gen.kernel_g1(k, u, v) * f[j] * w;
        }
        acc * h
    }))
}

/// Outcome of comparing the closed form against quadrature of the integral
/// operator on one Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaReport {
    /// Sup over `|u| ≤ 3` of `|quadrature - closed form|`, relative to the
    /// sup of the closed form.
    pub relative_error: f64,
    /// `|‖S f‖ / ‖f‖ - 1|` on the grid.
    pub norm_defect: f64,
}

pub fn verify_lemma_g1(
    gen: &MetaplecticGenerator,
    omega: Complex64,
    k: u32,
    grid: QuadratureGrid,
    exec: Exec,
) -> Result<LemmaReport> {
    let kf = k as f64;
    let nodes = grid.nodes();
    let f: Vec<Complex64> = nodes.iter().map(|&v| (I * kf * PI * omega * v * v).exp()).collect();
    let sf = apply_integral_operator_g1(gen, k, &f, grid, exec)?;
    let om = CMat::from_element(1, 1, omega);
    let c = gen.gaussian_scalar(&om)?;
    let omega_p = gen.image(&om)?[(0, 0)];
    let mut err: f64 = 0.0;
    let mut peak: f64 = 0.0;
    for (i, &u) in nodes.iter().enumerate() {
        if u.abs() <= 3.0 {
            let closed = c * (I * kf * PI * omega_p * u * u).exp();
            err = err.max((sf[i] - closed).norm());
            peak = peak.max(closed.norm());
        }
    }
    let h = grid.step();
    let norm = |v: &[Complex64]| (v.iter().map(|z| z.norm_sqr()).sum::<f64>() * h).sqrt();
    Ok(LemmaReport { relative_error: err / peak, norm_defect: (norm(&sf) / norm(&f) - 1.0).abs() })
}

/// Product `S_0 S_1 ⋯` of generators; `S_last` acts first. The Gaussian
/// scalar at the reference point `Ω = iI` is cached.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaplecticElement {
    factors: Vec<MetaplecticGenerator>,
    reference_scalar: BranchedScalar,
}

impl MetaplecticElement {
    pub fn new(factors: Vec<MetaplecticGenerator>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidGenerator("empty factor list".into()));
        }
        let g = factors[0].dim();
        let mut elem = Self { factors, reference_scalar: BranchedScalar::new(Complex64::new(1.0, 0.0), "") };
        let (c, _) = elem.gaussian_chain(&(identity(g) * I))?;
        elem.reference_scalar = BranchedScalar::new(c, "reference Gaussian iI");
        let residual = elem.projection()?.residual();
        if residual > 1e-10 * max_abs_real(elem.projection()?.matrix()).max(1.0).powi(2) {
            return Err(Error::NotSymplectic { residual });
        }
        Ok(elem)
    }

    pub fn factors(&self) -> &[MetaplecticGenerator] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.factors[0].dim()
    }

    pub fn reference_scalar(&self) -> &BranchedScalar {
        &self.reference_scalar
    }

    pub fn projection(&self) -> Result<SymplecticMatrix> {
        let mut m = SymplecticMatrix::identity(self.dim());
        for f in &self.factors {
            m = m.compose(&f.to_symplectic()?);
        }
        Ok(m)
    }

    /// Total Gaussian scalar and image of `Ω` through the chain of closed forms.
    fn gaussian_chain(&self, omega: &CMat) -> Result<(Complex64, CMat)> {
        let mut c = Complex64::new(1.0, 0.0);
        let mut om = omega.clone();
        for f in self.factors.iter().rev() {
            c *= f.gaussian_scalar(&om)?;
            om = f.image(&om)?;
        }
        Ok((c, om))
    }

    pub fn gaussian_scalar(&self, omega: &CMat) -> Result<Complex64> {
        Ok(self.gaussian_chain(omega)?.0)
    }

    pub fn act_on_gaussian(&self, state: &GaussianState) -> Result<GaussianState> {
        let mut s = state.clone();
        for f in self.factors.iter().rev() {
            s = f.act_on_gaussian(&s)?;
        }
        Ok(s)
    }

    /// Product of the generators' half-form scalars along the chain.
    pub fn halfform_product(&self, omega: &CMat) -> Result<Complex64> {
        let mut h = Complex64::new(1.0, 0.0);
        let mut om = omega.clone();
        for f in self.factors.iter().rev() {
            h *= f.act_on_halfform(&om)?.value;
            om = f.image(&om)?;
        }
        Ok(h)
    }

    /// Half-form scalar `√det(CΩ + D)` continued along the segment from the
    /// reference point `iI`, starting from the reciprocal of the cached
    /// reference scalar.
    pub fn halfform_by_path(&self, omega: &SiegelPoint, steps: usize) -> Result<BranchedScalar> {
        let m = self.projection()?;
        let (c, d) = (to_complex(&m.c()), to_complex(&m.d()));
        let g = self.dim();
        let start = identity(g) * I;
        let target = omega.matrix().clone();
        let path = |t: f64| {
            let om = &start * Complex64::new(1.0 - t, 0.0) + &target * Complex64::new(t, 0.0);
            &c * om + &d
        };
        let h0 = 1.0 / self.reference_scalar.value;
        let mut out = det_sqrt_path(path, steps, Some(h0))?;
        out.anchor = "continued from iI".into();
        Ok(out)
    }
}

/// Writes `M` as one generator when its `C` block is invertible, and as two
/// generators otherwise.
pub fn decompose_symplectic(m: &SymplecticMatrix) -> Result<MetaplecticElement> {
    let g = m.dim();
    if let Some(gen) = single_generator(m)? {
        return MetaplecticElement::new(vec![gen]);
    }
    let zero = RMat::zeros(g, g);
    let one = RMat::identity(g, g);
    let mut rights = vec![MetaplecticGenerator::with_default_index(zero.clone(), -&one, zero.clone())?];
    for t in [1.0, 0.5, 1.0 / 3.0] {
        rights.push(MetaplecticGenerator::with_default_index(&one * t, one.clone(), zero.clone())?);
    }
    for right in rights {
        let left_m = m.compose(&right.to_symplectic()?.inverse());
        if let Some(left) = single_generator(&left_m)? {
            return MetaplecticElement::new(vec![left, right]);
        }
    }
    Err(Error::DecompositionFailure)
}

fn single_generator(m: &SymplecticMatrix) -> Result<Option<MetaplecticGenerator>> {
    let c = m.c();
    let scale = max_abs_real(m.matrix()).max(1.0).powi(c.nrows() as i32);
    if c.determinant().abs() <= DET_C_TOL * scale {
        return Ok(None);
    }
    let l = match c.clone().try_inverse() {
        Some(l) => l,
        None => return Ok(None),
    };
    let p = m.a() * &l;
    let q = &l * m.d();
    Ok(Some(MetaplecticGenerator::with_default_index(symmetrize_real(&p), l, symmetrize_real(&q))?))
}

/// Residuals of the frame invariance `M · σ^l_Ω = σ^l_{M(Ω)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvarianceReport {
    /// `max |Ω' - M(Ω)|`.
    pub omega_residual: f64,
    /// `|c h - 1|`, with `c` the Gaussian scalar (closed forms) and `h` the
    /// half-form scalar (path continuation).
    pub amplitude_residual: f64,
}

impl InvarianceReport {
    pub fn max(&self) -> f64 {
        self.omega_residual.max(self.amplitude_residual)
    }
}

pub fn sp_invariance_check(
    m: &SymplecticMatrix,
    l: &crate::theta::Characteristic,
    omega: &SiegelPoint,
    k: u32,
) -> Result<InvarianceReport> {
    let elem = decompose_symplectic(m)?;
    let state = GaussianState::basis(k, l, omega);
    let image = elem.act_on_gaussian(&state)?;
    let target = sp_act_closed(m, omega.omega())?;
    let omega_residual = max_abs(&(image.omega.matrix() - target.matrix()));
    let h = elem.halfform_by_path(omega, 64)?.value;
    let c = image.amplitudes[l.index()];
    let others: f64 = image
        .amplitudes
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != l.index())
        .map(|(_, a)| a.norm())
        .fold(0.0, f64::max);
    Ok(InvarianceReport { omega_residual, amplitude_residual: (c * h - 1.0).norm().max(others) })
}

/// Checks that the metaplectic image of the kernel Gaussian of `Ξ_τ` lies
/// in the kernel of `Ξ_{M(τ)}`, and that `X_{τ'}` intertwines the two
/// operators: `(τ'+1)A + i(τ'-1)C = X(1+τ)`, `i(τ'+1)B - (τ'-1)D = X(1-τ)`.
pub fn intertwining_check(m: &SymplecticMatrix, tau: &DiscPoint, k: u32) -> Result<f64> {
    let g = m.dim();
    let omega = crate::siegel::cayley_inverse(tau)?;
    let omega = omega
        .interior()
        .ok_or_else(|| Error::Unsupported("intertwining check needs an interior point".into()))?
        .clone();
    let elem = decompose_symplectic(m)?;
    let state = GaussianState::basis(k, &crate::theta::Characteristic::zero(g, k), &omega);
    let image = elem.act_on_gaussian(&state)?;
    let tau_p = sp_act_d(m, tau)?;
    let kernel = max_abs(&xi_residual_matrix(tau_p.matrix(), image.omega.matrix()));

    let (a, b, c, d) = (to_complex(&m.a()), to_complex(&m.b()), to_complex(&m.c()), to_complex(&m.d()));
    let one = identity(g);
    let tp = tau_p.matrix();
    let t = tau.matrix();
    let x = ((tp + &one) * (&a + &b * I) + (tp - &one) * (&c * I - &d)) * Complex64::new(0.5, 0.0);
    let first = (tp + &one) * &a + (tp - &one) * &c * I - &x * (&one + t);
    let second = (tp + &one) * &b * I - (tp - &one) * &d - &x * (&one - t);
    Ok(kernel.max(max_abs(&first)).max(max_abs(&second)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_siegel_point, random_symplectic, random_symplectic_singular_c};
    use crate::siegel::{cayley, sp_act_h};
    use crate::theta::Characteristic;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn r(g: usize, v: &[f64]) -> RMat {
        RMat::from_row_slice(g, g, v)
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_generator(rng: &mut ChaCha8Rng, g: usize) -> MetaplecticGenerator {
        crate::random::random_metaplectic_generator(rng, g)
    }

    #[test]
    fn generator_matrix_examples() {
        let zero = r(1, &[0.0]);
        let gen = MetaplecticGenerator::new(zero.clone(), r(1, &[1.0]), zero.clone(), 0).unwrap();
        assert_eq!(gen.to_symplectic().unwrap().matrix(), &r(2, &[0.0, -1.0, 1.0, 0.0]));
        let gen = MetaplecticGenerator::with_default_index(zero.clone(), r(1, &[-1.0]), zero).unwrap();
        assert_eq!(gen.m(), 1);
        assert_eq!(gen.to_symplectic().unwrap().matrix(), &r(2, &[0.0, 1.0, -1.0, 0.0]));
    }

    #[test]
    fn generator_validation() {
        let z = r(1, &[0.0]);
        assert!(matches!(
            MetaplecticGenerator::new(z.clone(), z.clone(), z.clone(), 0),
            Err(Error::SingularL { .. })
        ));
        assert!(matches!(
            MetaplecticGenerator::new(z.clone(), r(1, &[-1.0]), z.clone(), 0),
            Err(Error::InvalidGenerator(_))
        ));
        let asym = r(2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(MetaplecticGenerator::new(asym, RMat::identity(2, 2), RMat::zeros(2, 2), 0).is_err());
    }

    #[test]
    fn random_generators_are_symplectic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for g in 1..=3 {
            for _ in 0..20 {
                assert!(random_generator(&mut rng, g).to_symplectic().unwrap().residual() < 1e-12);
            }
        }
    }

    #[test]
    fn decomposition_examples() {
        let s = SymplecticMatrix::new(r(2, &[0.0, -1.0, 1.0, 0.0])).unwrap();
        let e = decompose_symplectic(&s).unwrap();
        assert_eq!(e.factors().len(), 1);
        let f = &e.factors()[0];
        assert!(f.p()[(0, 0)].abs() < 1e-15 && (f.l()[(0, 0)] - 1.0).abs() < 1e-15 && f.q()[(0, 0)].abs() < 1e-15);

        let id = decompose_symplectic(&SymplecticMatrix::identity(2)).unwrap();
        assert_eq!(id.factors().len(), 2);
        assert!(max_abs_real(&(id.projection().unwrap().matrix() - RMat::identity(4, 4))) < 1e-12);
    }

    #[test]
    fn covering_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for g in 1..=3 {
            for i in 0..34 {
                let m = if i % 4 == 0 { random_symplectic_singular_c(&mut rng, g) } else { random_symplectic(&mut rng, g) };
                let e = decompose_symplectic(&m).unwrap();
                let expected = if m.c().determinant().abs() > 1e-8 { 1 } else { 2 };
                assert_eq!(e.factors().len(), expected);
                let diff = max_abs_real(&(e.projection().unwrap().matrix() - m.matrix()));
                assert!(diff < 1e-10 * max_abs_real(m.matrix()).max(1.0).powi(2), "diff {diff}");
            }
        }
    }

    #[test]
    fn fourier_generator_on_standard_gaussian() {
        let gen = MetaplecticGenerator::new(r(1, &[0.0]), r(1, &[1.0]), r(1, &[0.0]), 0).unwrap();
        let om = CMat::from_element(1, 1, I);
        assert!((gen.image(&om).unwrap()[(0, 0)] - I).norm() < 1e-15);
        let cval = gen.gaussian_scalar(&om).unwrap();
        assert!((cval - Complex64::from_polar(1.0, -PI / 4.0)).norm() < 1e-15);
        let h = gen.act_on_halfform(&om).unwrap().value;
        assert!((h - Complex64::from_polar(1.0, PI / 4.0)).norm() < 1e-15);
        assert!((gen.negated().act_on_halfform(&om).unwrap().value + h).norm() < 1e-15);
        // shear with L = I fixes iI when P = 0
        let shear = MetaplecticGenerator::new(RMat::zeros(2, 2), RMat::identity(2, 2), RMat::zeros(2, 2), 0).unwrap();
        let om2 = identity(2) * I;
        assert!(max_abs(&(shear.image(&om2).unwrap() - &om2)) < 1e-15);
    }

    #[test]
    fn halfform_squares_to_pullback_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for g in 1..=3 {
            let gen = random_generator(&mut rng, g);
            let omega = random_siegel_point(&mut rng, g);
            let h = gen.act_on_halfform(omega.matrix()).unwrap().value;
            let m = gen.to_symplectic().unwrap();
            let expected = det(&(to_complex(&m.c()) * omega.matrix() + to_complex(&m.d())));
            assert!((h * h - expected).norm() < 1e-10 * expected.norm().max(1.0));
        }
    }

    #[test]
    fn lemma_against_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for k in 1..=2u32 {
            for _ in 0..3 {
                let gen = random_generator(&mut rng, 1);
                let omega = c(rng.gen_range(-0.5..0.5), rng.gen_range(0.6..1.5));
                let rep = verify_lemma_g1(&gen, omega, k, QuadratureGrid::default(), Exec::default()).unwrap();
                assert!(rep.relative_error < 1e-6, "{rep:?}");
                assert!(rep.norm_defect < 1e-6, "{rep:?}");
            }
        }
    }

    #[test]
    fn composite_halfform_follows_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for g in 1..=3 {
            for _ in 0..10 {
                let m = random_symplectic_singular_c(&mut rng, g);
                let e = decompose_symplectic(&m).unwrap();
                assert_eq!(e.factors().len(), 2);
                let omega = random_siegel_point(&mut rng, g);
                let product = e.halfform_product(omega.matrix()).unwrap();
                let path = e.halfform_by_path(&omega, 64).unwrap().value;
                assert!((product - path).norm() < 1e-8 * path.norm().max(1.0));
            }
        }
    }

    #[test]
    fn invariance_examples() {
        let id = sp_invariance_check(
            &SymplecticMatrix::identity(1),
            &Characteristic::zero(1, 1),
            &SiegelPoint::imaginary_scalar(1, 1.0),
            1,
        )
        .unwrap();
        assert!(id.max() < 1e-12);
        let s = SymplecticMatrix::new(r(2, &[0.0, -1.0, 1.0, 0.0])).unwrap();
        let rep = sp_invariance_check(&s, &Characteristic::zero(1, 1), &SiegelPoint::imaginary_scalar(1, 1.0), 1).unwrap();
        assert!(rep.max() < 1e-8);
    }

    #[test]
    fn invariance_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for g in 1..=3 {
            for i in 0..10 {
                let m = if i % 2 == 0 { random_symplectic(&mut rng, g) } else { random_symplectic_singular_c(&mut rng, g) };
                let omega = random_siegel_point(&mut rng, g);
                for l in Characteristic::all(g, 2) {
                    let rep = sp_invariance_check(&m, &l, &omega, 2).unwrap();
                    assert!(rep.max() < 1e-7, "{rep:?}");
                }
            }
        }
    }

    #[test]
    fn projective_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for g in 1..=2 {
            let m1 = random_symplectic(&mut rng, g);
            let m2 = random_symplectic(&mut rng, g);
            let omega = random_siegel_point(&mut rng, g);
            let state = GaussianState::basis(1, &Characteristic::zero(g, 1), &omega);
            let two_steps = decompose_symplectic(&m2)
                .unwrap()
                .act_on_gaussian(&decompose_symplectic(&m1).unwrap().act_on_gaussian(&state).unwrap())
                .unwrap();
            let one_step = decompose_symplectic(&m2.compose(&m1)).unwrap().act_on_gaussian(&state).unwrap();
            assert!(max_abs(&(two_steps.omega.matrix() - one_step.omega.matrix())) < 1e-8);
            let ratio = two_steps.amplitudes[0] / one_step.amplitudes[0];
            assert!((ratio.norm() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn intertwining_examples() {
        let tau0 = DiscPoint::scalar(1, c(0.0, 0.0)).unwrap();
        assert!(intertwining_check(&SymplecticMatrix::identity(1), &tau0, 1).unwrap() < 1e-12);
        let s = SymplecticMatrix::new(r(2, &[0.0, -1.0, 1.0, 0.0])).unwrap();
        assert!(intertwining_check(&s, &tau0, 1).unwrap() < 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for g in 1..=3 {
            for _ in 0..10 {
                let m = random_symplectic(&mut rng, g);
                let tau = cayley(&random_siegel_point(&mut rng, g)).unwrap();
                assert!(intertwining_check(&m, &tau, 2).unwrap() < 1e-8);
            }
        }
    }

    #[test]
    fn gaussian_image_matches_fractional_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for g in 1..=3 {
            let gen = random_generator(&mut rng, g);
            let omega = random_siegel_point(&mut rng, g);
            let via_gen = gen.image(omega.matrix()).unwrap();
            let via_m = sp_act_h(&gen.to_symplectic().unwrap(), &omega).unwrap();
            assert!(max_abs(&(via_gen - via_m.matrix())) < 1e-10);
        }
    }
}

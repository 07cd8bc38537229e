//! Real polarizations on the boundary of the disc: Bohr–Sommerfeld fibers,
//! the intersection pairing of transverse pairs, and the S-matrix limit.

use std::collections::{HashSet, VecDeque};
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bks::{halfform_conversion, halfform_pairing, is_transverse, prequantum_pairing, regularize};
use crate::error::{Error, Result};
use crate::matrix::{identity, max_abs, CMat, RMat};
use crate::siegel::{cayley, sp_act_d, DiscPoint, SymplecticMatrix};
use crate::theta::Characteristic;

/// Default bound on the entries of integer symplectic matrices searched.
pub const DEFAULT_ENTRY_BOUND: i64 = 5;
const MAX_VISITED: usize = 200_000;

/// Affine subtorus `offset + span(directions)` of `R^{2g}/Z^{2g}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fiber {
    pub characteristic: Vec<i64>,
    pub offset: Vec<f64>,
    pub directions: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BohrSommerfeldData {
    pub k: u32,
    pub tau: DiscPoint,
    /// Integer symplectic matrix carrying `τ = -I` to this polarization.
    pub transform: Vec<Vec<i64>>,
    pub fibers: Vec<Fiber>,
}

/// Integer matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct IntMat {
    n: usize,
    e: Vec<i64>,
}

impl IntMat {
    fn identity(n: usize) -> Self {
        let mut e = vec![0; n * n];
        for i in 0..n {
            e[i * n + i] = 1;
        }
        Self { n, e }
    }

    fn mul(&self, o: &Self) -> Self {
        let n = self.n;
        let mut e = vec![0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.e[i * n + k];
                if a != 0 {
                    for j in 0..n {
                        e[i * n + j] += a * o.e[k * n + j];
                    }
                }
            }
        }
        Self { n, e }
    }

    fn max_entry(&self) -> i64 {
        self.e.iter().map(|v| v.abs()).max().unwrap_or(0)
    }

    fn to_real(&self) -> RMat {
        RMat::from_fn(self.n, self.n, |i, j| self.e[i * self.n + j] as f64)
    }

    fn rows(&self) -> Vec<Vec<i64>> {
        self.e.chunks(self.n).map(|r| r.to_vec()).collect()
    }
}

/// Shears by elementary symmetric matrices, the inversion `J`, and
/// coordinate swaps; these generate `Sp(2g, Z)`.
fn generators(g: usize) -> Vec<IntMat> {
    let n = 2 * g;
    let mut out = Vec::new();
    let mut sym = Vec::new();
    for i in 0..g {
        for j in i..g {
            let mut s = vec![0i64; g * g];
            s[i * g + j] = 1;
            s[j * g + i] = 1;
            sym.push(s);
        }
    }
    for s in &sym {
        for sign in [1i64, -1] {
            let mut up = IntMat::identity(n);
            let mut low = IntMat::identity(n);
            for i in 0..g {
                for j in 0..g {
                    up.e[i * n + g + j] = sign * s[i * g + j];
                    low.e[(g + i) * n + j] = sign * s[i * g + j];
                }
            }
            out.push(up);
            out.push(low);
        }
    }
    for sign in [1i64, -1] {
        let mut j = IntMat { n, e: vec![0; n * n] };
        for i in 0..g {
            j.e[i * n + g + i] = -sign;
            j.e[(g + i) * n + i] = sign;
        }
        out.push(j);
    }
    for a in 0..g {
        for b in (a + 1)..g {
            let mut p = IntMat::identity(n);
            for off in [0, g] {
                let (x, y) = (a + off, b + off);
                p.e[x * n + x] = 0;
                p.e[y * n + y] = 0;
                p.e[x * n + y] = 1;
                p.e[y * n + x] = 1;
            }
            out.push(p);
        }
    }
    out
}

/// Breadth-first search over words in the generators whose partial
/// products keep entries bounded by `bound`.
fn search<F: Fn(&SymplecticMatrix) -> bool>(g: usize, bound: i64, accept: F) -> Result<IntMat> {
    let gens = generators(g);
    let start = IntMat::identity(2 * g);
    let mut seen = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(start.clone());
    queue.push_back(start);
    while let Some(m) = queue.pop_front() {
        let sm = SymplecticMatrix::new(m.to_real()).expect("products of integer generators are symplectic");
        if accept(&sm) {
            return Ok(m);
        }
        for gen in &gens {
            let next = m.mul(gen);
            if next.max_entry() <= bound && seen.len() < MAX_VISITED && seen.insert(next.clone()) {
                queue.push_back(next);
            }
        }
    }
    Err(Error::NoIntegerTransformFound { bound })
}

fn close(a: &DiscPoint, b: &DiscPoint) -> bool {
    max_abs(&(a.matrix() - b.matrix())) < 1e-9
}

fn maps_to(m: &SymplecticMatrix, from: &DiscPoint, to: &DiscPoint) -> bool {
    sp_act_d(m, from).map(|t| close(&t, to)).unwrap_or(false)
}

/// True when `x` is within `1e-10` of a rational with denominator at most
/// `max_den`, found by continued fractions.
pub fn is_rational(x: f64, max_den: i64) -> bool {
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e12 {
            return false;
        }
        let a = a as i64;
        let (h2, k2) = (a * h1 + h0, a * k1 + k0);
        if k2 > max_den {
            return false;
        }
        if (x - h2 as f64 / k2 as f64).abs() <= 1e-10 {
            return true;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a as f64;
        if frac.abs() < 1e-15 {
            return false;
        }
        r = 1.0 / frac;
    }
    false
}

fn check_reducible(tau: &DiscPoint) -> Result<()> {
    if !tau.is_unitary(1e-10) {
        return Err(Error::NotReducible("tau is not unitary, so the polarization is not real".into()));
    }
    if !tau.matrix().iter().all(|z| is_rational(z.re, 10_000) && is_rational(z.im, 10_000)) {
        return Err(Error::NotReducible("entries are not Gaussian rationals".into()));
    }
    Ok(())
}

fn minus_identity(g: usize) -> DiscPoint {
    DiscPoint::scalar(g, Complex64::new(-1.0, 0.0)).expect("boundary point")
}

fn plus_identity(g: usize) -> DiscPoint {
    DiscPoint::scalar(g, Complex64::new(1.0, 0.0)).expect("boundary point")
}

/// Support fibers of the distributional frame at a reducible real
/// polarization: `y ≡ l/k` at `τ = -I`, transported by an integer
/// symplectic matrix `M` with `M(-I) = τ` otherwise.
pub fn bohr_sommerfeld(tau: &DiscPoint, k: u32, bound: i64) -> Result<BohrSommerfeldData> {
    check_reducible(tau)?;
    let g = tau.dim();
    let base = minus_identity(g);
    let m = search(g, bound, |sm| maps_to(sm, &base, tau))?;
    let mr = m.to_real();
    let fibers = Characteristic::all(g, k)
        .into_iter()
        .map(|l| {
            let mut p = vec![0.0; 2 * g];
            p[g..].copy_from_slice(&l.shift());
            let offset = (&mr * nalgebra::DVector::from_vec(p)).iter().map(|v| v.rem_euclid(1.0)).collect();
            let directions = (0..g).map(|j| mr.column(j).iter().cloned().collect()).collect();
            Fiber { characteristic: l.values().to_vec(), offset, directions }
        })
        .collect();
    Ok(BohrSommerfeldData { k, tau: tau.clone(), transform: m.rows(), fibers })
}

/// Regularization schedule of the boundary pairings.
pub const EPSILON_SCHEDULE: [f64; 3] = [1e-2, 1e-3, 1e-4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionReport {
    pub k: u32,
    pub g: usize,
    /// `M` with `M(-I) = τ` and `M(I) = τ'`.
    pub transform: Vec<Vec<i64>>,
    pub epsilons: Vec<f64>,
    /// Largest deviation of the regularized frame pairings from the
    /// boundary value, per `ε`.
    pub regularized_deviation: Vec<f64>,
    /// `max |value(ε_{n-1}) - value(ε_n)|` over the frame.
    pub last_step: f64,
    /// Value of the intersection-point sum for `l = l'`.
    pub boundary_value: f64,
    /// Extrapolated factors in the `(x,y)` trivialization for the
    /// standard pair `(-I, I)`: prequantum and half-form.
    pub factor_limits: Option<(Complex64, Complex64)>,
    pub residual: f64,
}

/// Intersection-point evaluation for `(τ, τ') = (-I, I)`: the frames are
/// `(2k)^{-g/2} Σ_m δ(y - m - l/k) e^{πi(km+l)·x}` and
/// `2^{-g/2} k^{-g} e^{-kπi x·y} e^{2πi l·x} Σ_j δ(x - j/k)`; their
/// supports meet at `(j/k, l/k)`. Returns the prequantum factor.
pub fn intersection_sum(g: usize, k: u32, l: &Characteristic, lp: &Characteristic) -> Complex64 {
    let kf = k as f64;
    let norm = (2.0 * kf).powf(-(g as f64) / 2.0) * 2f64.powf(-(g as f64) / 2.0) * kf.powi(-(g as i32));
    let y = l.shift();
    let mut acc = Complex64::new(0.0, 0.0);
    for j in Characteristic::all(g, k) {
        let x = j.shift();
        let mut arg = 0.0;
        for a in 0..g {
            // first frame at m = 0, conjugate of the second
            arg += PI * (l.values()[a] as f64) * x[a];
            arg += kf * PI * x[a] * y[a] - 2.0 * PI * lp.values()[a] as f64 * x[a];
        }
        acc += Complex64::from_polar(1.0, arg);
    }
    acc * norm
}

/// Half-form factor `⟨√d(x,y)_{-I}, √d(x,y)_{I}⟩` at the boundary.
pub fn intersection_halfform(g: usize, k: u32) -> f64 {
    (2.0 / k as f64).powf(g as f64 / 2.0)
}

/// Compares `ε`-regularized BKS frame pairings of a transverse reducible
/// pair with the intersection-point evaluation, after Richardson
/// extrapolation `(10 v(ε/10) - v(ε))/9`.
pub fn intersection_pairing_check(tau: &DiscPoint, tau_p: &DiscPoint, k: u32, bound: i64) -> Result<IntersectionReport> {
    let g = tau.dim();
    if tau_p.dim() != g {
        return Err(Error::DimensionMismatch("polarizations of different genus".into()));
    }
    if !is_transverse(tau, tau_p) {
        return Err(Error::NotTransverse);
    }
    check_reducible(tau)?;
    check_reducible(tau_p)?;
    let (lo, hi) = (minus_identity(g), plus_identity(g));
    let m = search(g, bound, |sm| maps_to(sm, &lo, tau) && maps_to(sm, &hi, tau_p))?;
    let standard = m == IntMat::identity(2 * g);

    let chars = Characteristic::all(g, k);
    let n = chars.len();
    let half_b = intersection_halfform(g, k);
    let boundary: Vec<Vec<Complex64>> = chars
        .iter()
        .map(|l| chars.iter().map(|lp| intersection_sum(g, k, l, lp) * half_b).collect())
        .collect();

    let mut products = Vec::new();
    let mut factors = Vec::new();
    for &eps in &EPSILON_SCHEDULE {
        let a = regularize(tau, eps)?;
        let b = regularize(tau_p, eps)?;
        let half = halfform_pairing(k, a.matrix(), b.matrix())?.value;
        let conv = halfform_conversion(&cayley(&a)?)?.value * halfform_conversion(&cayley(&b)?)?.value.conj();
        let mut prod = CMat::zeros(n, n);
        for (i, l) in chars.iter().enumerate() {
            for (j, lp) in chars.iter().enumerate() {
                prod[(i, j)] = prequantum_pairing(k, l, lp, a.matrix(), b.matrix())? * half;
            }
        }
        let l0 = &chars[0];
        let pre0 = prequantum_pairing(k, l0, l0, a.matrix(), b.matrix())?;
        factors.push((pre0 / conv, half * conv));
        products.push(prod);
    }

    let bmat = CMat::from_fn(n, n, |i, j| boundary[i][j]);
    let regularized_deviation = products.iter().map(|p| max_abs(&(p - &bmat))).collect();
    let last = products.len() - 1;
    let last_step = max_abs(&(&products[last - 1] - &products[last]));
    let rich = |a: Complex64, b: Complex64| (b * 10.0 - a) / 9.0;
    let extrap = CMat::from_fn(n, n, |i, j| rich(products[last - 1][(i, j)], products[last][(i, j)]));
    let mut residual = max_abs(&(extrap - &bmat));
    let factor_limits = if standard {
        let pre = rich(factors[last - 1].0, factors[last].0);
        let half = rich(factors[last - 1].1, factors[last].1);
        let l0 = &chars[0];
        residual = residual
            .max((pre - intersection_sum(g, k, l0, l0)).norm())
            .max((half - half_b).norm());
        Some((pre, half))
    } else {
        None
    };
    Ok(IntersectionReport {
        k,
        g,
        transform: m.rows(),
        epsilons: EPSILON_SCHEDULE.to_vec(),
        regularized_deviation,
        last_step,
        boundary_value: boundary[0][0].re,
        factor_limits,
        residual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SMatrixReport {
    pub k: u32,
    pub epsilons: Vec<f64>,
    /// Matrix at the smallest `ε`.
    pub matrix: CMat,
    pub unitarity_residual: f64,
    pub modulus_residual: f64,
    /// Largest entry change between the last two `ε`.
    pub last_step: f64,
    /// Phase convention: `S_{jl} → k^{-1/2} e^{+2πi jl/k}`.
    pub convention: String,
}

/// `S_{jl} = √k ∫_{|x - j/k| < 1/2k} θ^l_{iε}(x, 0) dx`, using the Poisson
/// resummed series
/// `θ^l(x, 0) = (kε)^{-1/2} Σ_n e^{2πi nl/k} e^{-π(kx - n)²/(kε)}`,
/// whose Gaussians concentrate on the fibers `x ≡ j/k` of `τ = I`.
pub fn smatrix_at(k: u32, eps: f64) -> Result<CMat> {
    if k == 0 || !(eps > 0.0) {
        return Err(Error::ConvergenceFailure("need k >= 1 and eps > 0".into()));
    }
    let kf = k as f64;
    let s = (PI / (kf * eps)).sqrt();
    let reach = (0.5 + 7.0 / s).ceil() as i64 + 1;
    let mut m = CMat::zeros(k as usize, k as usize);
    for j in 0..k as i64 {
        for l in 0..k as i64 {
            let mut acc = Complex64::new(0.0, 0.0);
            for n in (j - reach)..=(j + reach) {
                let d = (j - n) as f64;
                let mass = 0.5 * (statrs::function::erf::erf(s * (d + 0.5)) - statrs::function::erf::erf(s * (d - 0.5)));
                acc += Complex64::from_polar(mass, 2.0 * PI * (n * l) as f64 / kf);
            }
            m[(j as usize, l as usize)] = acc * kf.sqrt().recip();
        }
    }
    Ok(m)
}

/// Evaluates [`smatrix_at`] along a decreasing `ε` sequence and checks that
/// successive matrices agree to `1e-4`.
pub fn smatrix_limit(k: u32, epsilons: &[f64]) -> Result<SMatrixReport> {
    if epsilons.is_empty() {
        return Err(Error::ConvergenceFailure("empty epsilon sequence".into()));
    }
    let mut eps = epsilons.to_vec();
    eps.sort_by(|a, b| b.partial_cmp(a).expect("finite epsilon"));
    let mats = eps.iter().map(|&e| smatrix_at(k, e)).collect::<Result<Vec<_>>>()?;
    let last_step = mats.windows(2).map(|w| max_abs(&(&w[1] - &w[0]))).next_back().unwrap_or(0.0);
    if last_step > 1e-4 {
        return Err(Error::ConvergenceFailure(format!("S-matrix changed by {last_step:.3e} at the last step")));
    }
    let s = mats.last().expect("nonempty").clone();
    let n = s.nrows();
    let unitarity_residual = max_abs(&(s.adjoint() * &s - identity(n)));
    let target = (k as f64).powf(-0.5);
    let modulus_residual = s.iter().map(|z| (z.norm() - target).abs()).fold(0.0, f64::max);
    Ok(SMatrixReport {
        k,
        epsilons: eps,
        matrix: s,
        unitarity_residual,
        modulus_residual,
        last_step,
        convention: "S_jl -> k^(-1/2) exp(+2 pi i j l / k); Omega = i eps, cells |x - j/k| < 1/(2k)".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bks::frame_constant;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn polarization_span(tau: &DiscPoint) -> CMat {
        let g = tau.dim();
        let one = identity(g);
        let tb = tau.matrix().conjugate();
        let mut v = CMat::zeros(2 * g, g);
        v.view_mut((0, 0), (g, g)).copy_from(&((&one - &tb) * c(0.0, -1.0)));
        v.view_mut((g, 0), (g, g)).copy_from(&(&one + &tb));
        v
    }

    #[test]
    fn fibers_at_minus_one() {
        let tau = DiscPoint::scalar(1, c(-1.0, 0.0)).unwrap();
        let bs = bohr_sommerfeld(&tau, 2, DEFAULT_ENTRY_BOUND).unwrap();
        assert_eq!(bs.fibers.len(), 2);
        let ys: Vec<f64> = bs.fibers.iter().map(|f| f.offset[1]).collect();
        assert_eq!(ys, vec![0.0, 0.5]);
        assert_eq!(bs.fibers[0].directions, vec![vec![1.0, 0.0]]);
    }

    #[test]
    fn fibers_at_plus_one() {
        let tau = DiscPoint::scalar(1, c(1.0, 0.0)).unwrap();
        let bs = bohr_sommerfeld(&tau, 2, DEFAULT_ENTRY_BOUND).unwrap();
        let mut xs: Vec<f64> = bs.fibers.iter().map(|f| f.offset[0]).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(xs, vec![0.0, 0.5]);
        assert_eq!(bs.fibers[0].directions[0][0], 0.0);
    }

    #[test]
    fn fibers_are_tangent_to_polarization() {
        for (g, tau) in [
            (1, DiscPoint::scalar(1, c(0.0, 1.0)).unwrap()),
            (1, DiscPoint::scalar(1, c(0.6, 0.8)).unwrap()),
            (2, DiscPoint::scalar(2, c(1.0, 0.0)).unwrap()),
        ] {
            let bs = bohr_sommerfeld(&tau, 3, DEFAULT_ENTRY_BOUND).unwrap();
            assert_eq!(bs.fibers.len(), 3usize.pow(g as u32));
            let span = polarization_span(&tau);
            for d in &bs.fibers[0].directions {
                // d lies in the span iff appending it keeps the rank at g
                let mut m = CMat::zeros(2 * g, g + 1);
                m.view_mut((0, 0), (2 * g, g)).copy_from(&span);
                for (i, v) in d.iter().enumerate() {
                    m[(i, g)] = c(*v, 0.0);
                }
                let sv = crate::matrix::singular_values(&m);
                let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
                assert!(smin < 1e-9, "direction {d:?} not in polarization");
            }
        }
    }

    #[test]
    fn non_reducible_inputs() {
        let inner = DiscPoint::scalar(1, c(0.3, 0.0)).unwrap();
        assert!(matches!(bohr_sommerfeld(&inner, 2, 5), Err(Error::NotReducible(_))));
        let irr = DiscPoint::scalar(1, Complex64::from_polar(1.0, 1.0)).unwrap();
        assert!(matches!(bohr_sommerfeld(&irr, 2, 5), Err(Error::NotReducible(_))));
    }

    #[test]
    fn rationality() {
        assert!(is_rational(0.6, 100));
        assert!(is_rational(-3.0, 1));
        assert!(!is_rational(2f64.sqrt(), 10_000));
    }

    #[test]
    fn intersection_standard_pair() {
        for g in 1..=2 {
            for k in 1..=3 {
                let lo = DiscPoint::scalar(g, c(-1.0, 0.0)).unwrap();
                let hi = DiscPoint::scalar(g, c(1.0, 0.0)).unwrap();
                let rep = intersection_pairing_check(&lo, &hi, k, DEFAULT_ENTRY_BOUND).unwrap();
                assert!((rep.boundary_value - frame_constant(g, k)).abs() < 1e-14);
                assert!(rep.residual < 1e-4, "residual {}", rep.residual);
                assert!(rep.last_step < 1e-6);
                let (pre, half) = rep.factor_limits.unwrap();
                assert!((pre - 2f64.powi(-(g as i32)) * (k as f64).powf(-(g as f64) / 2.0)).norm() < 1e-4);
                assert!((half - (2.0 / k as f64).powf(g as f64 / 2.0)).norm() < 1e-4);
            }
        }
    }

    #[test]
    fn intersection_transformed_pair() {
        // M = [[1,0],[1,1]] carries (-1, 1) to (i, 1)
        let a = DiscPoint::scalar(1, c(0.0, 1.0)).unwrap();
        let b = DiscPoint::scalar(1, c(1.0, 0.0)).unwrap();
        let rep = intersection_pairing_check(&a, &b, 2, DEFAULT_ENTRY_BOUND).unwrap();
        assert!(rep.residual < 1e-4);
    }

    #[test]
    fn intersection_rejects_non_transverse() {
        let lo = DiscPoint::scalar(1, c(-1.0, 0.0)).unwrap();
        assert_eq!(intersection_pairing_check(&lo, &lo, 2, 5).unwrap_err(), Error::NotTransverse);
    }

    /// Independent route: integrate the theta series term by term over the
    /// cell, `∫ e^{2kπi n x} dx` in closed form.
    fn smatrix_direct(k: u32, eps: f64) -> CMat {
        let kf = k as f64;
        let mmax = (60.0 / (kf * PI * eps)).sqrt().ceil() as i64 + 2;
        CMat::from_fn(k as usize, k as usize, |j, l| {
            let (a, b) = ((j as f64 - 0.5) / kf, (j as f64 + 0.5) / kf);
            let mut acc = Complex64::new(0.0, 0.0);
            for m in -mmax..=mmax {
                let n = m as f64 + l as f64 / kf;
                let w = (-kf * PI * eps * n * n).exp();
                let om = 2.0 * kf * PI * n;
                let integral = if om == 0.0 {
                    Complex64::new(b - a, 0.0)
                } else {
                    (Complex64::from_polar(1.0, om * b) - Complex64::from_polar(1.0, om * a)) / Complex64::new(0.0, om)
                };
                acc += integral * w;
            }
            acc * kf.sqrt()
        })
    }

    #[test]
    fn smatrix_matches_direct_series() {
        for k in 1..=4 {
            for eps in [1e-2, 1e-3] {
                let a = smatrix_at(k, eps).unwrap();
                let b = smatrix_direct(k, eps);
                assert!(max_abs(&(a - b)) < 1e-9);
            }
        }
    }

    #[test]
    fn smatrix_limit_is_dft() {
        let one = smatrix_limit(1, &EPSILON_SCHEDULE).unwrap();
        assert!((one.matrix[(0, 0)] - 1.0).norm() < 1e-12);
        for k in 1..=4u32 {
            let rep = smatrix_limit(k, &EPSILON_SCHEDULE).unwrap();
            assert!(rep.unitarity_residual < 1e-4);
            assert!(rep.modulus_residual < 1e-4);
            let kf = k as f64;
            for j in 0..k as usize {
                for l in 0..k as usize {
                    let dft = Complex64::from_polar(kf.powf(-0.5), 2.0 * PI * (j * l) as f64 / kf);
                    assert!((rep.matrix[(j, l)] - dft).norm() < 1e-8);
                }
            }
        }
    }
}

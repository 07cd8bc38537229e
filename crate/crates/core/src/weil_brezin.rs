//! Weil-Brezin (Zak) transform between sections of `L^k` and `k^g`-tuples
//! of functions on `R^g`, and the polarization operators
//! `Ξ_τ = (τ+1)∂_y - 2kπ(τ-1)y` on Gaussian states.
//!
//! Sections on the torus are sampled on the `N^{2g}` grid `(i/N, j/N)`,
//! indexed row-major over `(x_1..x_g, y_1..y_g)`. Sampled WB components
//! live on the grid `y = i h`, `h = 1/N`, `|i_j| ≤ M`, window `W = M h`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::matrix::{
    identity, inverse_real, max_abs, min_sym_eigenvalue, CMat, ComplexSymMatrix, RMat, I,
};
use crate::siegel::{cayley_inverse, DiscPoint, SiegelPoint};
use crate::theta::{truncation_radius, Characteristic};

pub use crate::metaplectic::intertwining_check;

fn unravel(mut idx: usize, side: usize, g: usize) -> Vec<usize> {
    let mut out = vec![0; g];
    for j in (0..g).rev() {
        out[j] = idx % side;
        idx /= side;
    }
    out
}

fn ravel(ix: &[usize], side: usize) -> usize {
    ix.iter().fold(0, |acc, &v| acc * side + v)
}

fn quad_form(m: &CMat, y: &[f64]) -> Complex64 {
    let g = y.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for a in 0..g {
        for b in 0..g {
            acc += m[(a, b)] * y[a] * y[b];
        }
    }
    acc
}

/// Section of `L^k` sampled on the torus grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSection {
    pub g: usize,
    pub k: u32,
    pub n: usize,
    pub samples: Vec<Complex64>,
}

impl SampledSection {
    pub fn new(g: usize, k: u32, n: usize, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != n.pow(2 * g as u32) {
            return Err(Error::GridMismatch(format!(
                "expected {} samples, got {}",
                n.pow(2 * g as u32),
                samples.len()
            )));
        }
        Ok(Self { g, k, n, samples })
    }

    pub fn zeros(g: usize, k: u32, n: usize) -> Self {
        Self { g, k, n, samples: vec![Complex64::new(0.0, 0.0); n.pow(2 * g as u32)] }
    }

    /// Samples `f(x, y)` on the grid.
    pub fn from_fn<F>(g: usize, k: u32, n: usize, exec: Exec, f: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> Complex64 + Sync + Send,
    {
        let samples = exec.map_range(n.pow(2 * g as u32), |idx| {
            let ix = unravel(idx, n, 2 * g);
            let x: Vec<f64> = ix[..g].iter().map(|&i| i as f64 / n as f64).collect();
            let y: Vec<f64> = ix[g..].iter().map(|&i| i as f64 / n as f64).collect();
            f(&x, &y)
        });
        Self { g, k, n, samples }
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Sup-norm distance to another section on the same grid.
    pub fn sup_distance(&self, other: &SampledSection) -> Result<f64> {
        check_same_grid(self, other)?;
        Ok(self.samples.iter().zip(&other.samples).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    /// `∫_{T^{2g}} s conj(s')` by the trapezoid rule.
    pub fn l2_pairing(&self, other: &SampledSection) -> Result<Complex64> {
        check_same_grid(self, other)?;
        let sum: Complex64 = self.samples.iter().zip(&other.samples).map(|(a, b)| a * b.conj()).sum();
        Ok(sum / (self.n as f64).powi(2 * self.g as i32))
    }
}

fn check_same_grid(a: &SampledSection, b: &SampledSection) -> Result<()> {
    if a.g != b.g || a.k != b.k || a.n != b.n {
        return Err(Error::GridMismatch(format!(
            "(g, k, N) = ({}, {}, {}) vs ({}, {}, {})",
            a.g, a.k, a.n, b.g, b.k, b.n
        )));
    }
    Ok(())
}

/// Coherent state: component `l` is `c_l e^{kπi ᵗyΩy}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub k: u32,
    pub amplitudes: Vec<Complex64>,
    pub omega: ComplexSymMatrix,
}

impl GaussianState {
    pub fn new(k: u32, amplitudes: Vec<Complex64>, omega: ComplexSymMatrix) -> Result<Self> {
        let g = omega.dim();
        if amplitudes.len() != (k as usize).pow(g as u32) {
            return Err(Error::DimensionMismatch(format!(
                "expected {} amplitudes, got {}",
                (k as usize).pow(g as u32),
                amplitudes.len()
            )));
        }
        let eigenvalue = min_sym_eigenvalue(&omega.im());
        if eigenvalue < -1e-10 {
            return Err(Error::NotInUpperHalfSpace { eigenvalue });
        }
        Ok(Self { k, amplitudes, omega })
    }

    /// WB image of `θ^l_Ω`: amplitude one in slot `l`, zero elsewhere.
    pub fn basis(k: u32, l: &Characteristic, omega: &SiegelPoint) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); (k as usize).pow(omega.dim() as u32)];
        amplitudes[l.index()] = Complex64::new(1.0, 0.0);
        Self { k, amplitudes, omega: omega.omega().clone() }
    }

    pub fn g(&self) -> usize {
        self.omega.dim()
    }

    pub fn eval(&self, l: usize, y: &[f64]) -> Complex64 {
        self.amplitudes[l] * (I * self.k as f64 * PI * quad_form(self.omega.matrix(), y)).exp()
    }

    /// `∫ e^{kπi ᵗyΩy} conj(e^{kπi ᵗyΩ'y}) dy = det(ki(Ω̄' - Ω))^{-1/2}`.
    pub fn gaussian_overlap(k: u32, omega: &CMat, omega_p: &CMat) -> Result<Complex64> {
        let m = (omega_p.conjugate() - omega) * (I * k as f64);
        Ok(crate::matrix::det_invsqrt_posreal(&ComplexSymMatrix::with_tolerance(m, 1e-9)?)?.value)
    }

    /// `Σ_l ∫ f_l conj(f'_l)` in closed form.
    pub fn pairing(&self, other: &GaussianState) -> Result<Complex64> {
        let overlap = Self::gaussian_overlap(self.k, self.omega.matrix(), other.omega.matrix())?;
        let s: Complex64 = self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a * b.conj()).sum();
        Ok(s * overlap)
    }
}

/// `a e^{-πβ|y-c|² + 2πi ᵗf y}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavePacket {
    pub amplitude: Complex64,
    pub beta: f64,
    pub center: Vec<f64>,
    pub freq: Vec<f64>,
}

impl WavePacket {
    pub fn eval(&self, y: &[f64]) -> Complex64 {
        let mut r2 = 0.0;
        let mut ph = 0.0;
        for j in 0..y.len() {
            r2 += (y[j] - self.center[j]).powi(2);
            ph += self.freq[j] * y[j];
        }
        self.amplitude * Complex64::from_polar((-PI * self.beta * r2).exp(), 2.0 * PI * ph)
    }

    /// Radius beyond which the envelope is below `1e-17`.
    pub fn support_radius(&self) -> f64 {
        (39.2 / (PI * self.beta)).sqrt()
    }
}

/// Components given as finite sums of wave packets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketState {
    pub g: usize,
    pub k: u32,
    pub components: Vec<Vec<WavePacket>>,
}

impl PacketState {
    pub fn eval(&self, l: usize, y: &[f64]) -> Complex64 {
        self.components[l].iter().map(|p| p.eval(y)).sum()
    }

    /// Random packets with `β ∈ [0.6, 2]`, centers in `[-1, 1]^g`,
    /// frequencies in `[-1, 1]^g`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, g: usize, k: u32) -> Self {
        let n = (k as usize).pow(g as u32);
        let components = (0..n)
            .map(|_| {
                let count = rng.gen_range(1..=2);
                (0..count)
                    .map(|_| WavePacket {
                        amplitude: Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                        beta: rng.gen_range(0.6..2.0),
                        center: (0..g).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                        freq: (0..g).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    })
                    .collect()
            })
            .collect();
        Self { g, k, components }
    }
}

/// Components sampled on `y = i h`, `|i_j| ≤ M`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledComponents {
    pub g: usize,
    pub k: u32,
    /// Samples per unit length, `h = 1/N`.
    pub n: usize,
    /// Half-width in grid steps.
    pub m: usize,
    pub data: Vec<Vec<Complex64>>,
}

impl SampledComponents {
    pub fn window(&self) -> f64 {
        self.m as f64 / self.n as f64
    }

    pub fn step(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn side(&self) -> usize {
        2 * self.m + 1
    }

    /// Sample at integer grid coordinates, zero outside the window.
    pub fn at(&self, l: usize, i: &[i64]) -> Complex64 {
        let side = self.side();
        let mut idx = 0usize;
        for &v in i {
            let shifted = v + self.m as i64;
            if shifted < 0 || shifted >= side as i64 {
                return Complex64::new(0.0, 0.0);
            }
            idx = idx * side + shifted as usize;
        }
        self.data[l][idx]
    }

    /// Largest magnitude on the outer shell of the window, relative to the
    /// largest magnitude overall.
    pub fn edge_ratio(&self) -> f64 {
        let side = self.side();
        let mut edge: f64 = 0.0;
        let mut peak: f64 = 0.0;
        for comp in &self.data {
            for (idx, v) in comp.iter().enumerate() {
                let ix = unravel(idx, side, self.g);
                peak = peak.max(v.norm());
                if ix.iter().any(|&i| i == 0 || i == side - 1) {
                    edge = edge.max(v.norm());
                }
            }
        }
        if peak == 0.0 {
            0.0
        } else {
            edge / peak
        }
    }

    /// `Σ_l ∫ f_l conj(f'_l)` by the trapezoid rule.
    pub fn pairing(&self, other: &SampledComponents) -> Result<Complex64> {
        if self.g != other.g || self.k != other.k || self.n != other.n || self.m != other.m {
            return Err(Error::GridMismatch("component grids differ".into()));
        }
        let h = self.step().powi(self.g as i32);
        let s: Complex64 = self
            .data
            .iter()
            .zip(&other.data)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(p, q)| p * q.conj()))
            .sum();
        Ok(s * h)
    }

    pub fn sup_distance_to<F: Fn(usize, &[f64]) -> Complex64>(&self, f: F) -> f64 {
        let side = self.side();
        let mut worst: f64 = 0.0;
        for (l, comp) in self.data.iter().enumerate() {
            for (idx, v) in comp.iter().enumerate() {
                let y: Vec<f64> = unravel(idx, side, self.g)
                    .iter()
                    .map(|&i| (i as f64 - self.m as f64) * self.step())
                    .collect();
                worst = worst.max((v - f(l, &y)).norm());
            }
        }
        worst
    }
}

/// A `k^g`-tuple of functions on `R^g`.
#[derive(Debug, Clone, PartialEq)]
pub enum WBVector {
    Sampled(SampledComponents),
    Gaussian(GaussianState),
    Packets(PacketState),
}

impl WBVector {
    pub fn g(&self) -> usize {
        match self {
            WBVector::Sampled(s) => s.g,
            WBVector::Gaussian(s) => s.g(),
            WBVector::Packets(s) => s.g,
        }
    }

    pub fn k(&self) -> u32 {
        match self {
            WBVector::Sampled(s) => s.k,
            WBVector::Gaussian(s) => s.k,
            WBVector::Packets(s) => s.k,
        }
    }

    /// Evaluates the section `s(x, y)` of the inverse transform at a point;
    /// only analytic representations are supported.
    pub fn section_at(&self, x: &[f64], y: &[f64]) -> Result<Complex64> {
        match self {
            WBVector::Sampled(_) => Err(Error::Unsupported(
                "pointwise evaluation of sampled components; use wb_inverse".into(),
            )),
            WBVector::Gaussian(state) => gaussian_section_at(state, x, y),
            WBVector::Packets(state) => Ok(packet_section_at(state, x, y)),
        }
    }
}

/// Largest window allowed by the Nyquist limit of an `N`-point grid at
/// level `k`, rounded down to the grid.
pub fn default_window_steps(n: usize, k: u32) -> usize {
    let w = ((n as f64 / 2.0 - 1.0) / k as f64 - 1.0).max(0.0);
    (w * n as f64).floor() as usize
}

/// `(s)_l(y) = ∫_{[0,1]^g} s(x, y + l/k) e^{kπi ᵗx(y + l/k)} e^{-2πi ᵗl x} dx`
/// evaluated by the `N`-point trapezoid rule, which is exact on band-limited
/// integrands. `window_steps` is the half-width `M` of the output grid.
pub fn wb_forward(s: &SampledSection, window_steps: usize, exec: Exec) -> Result<WBVector> {
    let (g, k, n) = (s.g, s.k as usize, s.n);
    if n % k != 0 {
        return Err(Error::GridTooCoarse(format!("N = {n} must be divisible by k = {k}")));
    }
    let window = window_steps as f64 / n as f64;
    if k as f64 * (window + 1.0) >= n as f64 / 2.0 {
        return Err(Error::GridTooCoarse(format!(
            "window {window} needs frequencies up to {} but N = {n} resolves below {}",
            k as f64 * (window + 1.0),
            n as f64 / 2.0
        )));
    }
    let roots = half_roots(n);
    let nyquist = nyquist_content(s, &roots, exec);
    if nyquist > 1e-10 * s.max_abs().max(1e-300) {
        return Err(Error::GridTooCoarse(format!(
            "Fourier content {nyquist:.3e} at the Nyquist frequency"
        )));
    }

    let nx = n.pow(g as u32);
    let side = 2 * window_steps + 1;
    let num_l = k.pow(g as u32);
    let per_l = side.pow(g as u32);
    let modulus = roots.len() as i64;
    let values = exec.map_range(num_l * per_l, |flat| {
        let l = Characteristic::from_index(flat / per_l, g, k as u32);
        let yi = unravel(flat % per_l, side, g);
        // y' = y + l/k sits on the grid at j' = i + lN/k = qN + r; the
        // integrand there is s(x, r/N) e^{kπi x (j'/N + q)} e^{-2πi l x}
        let mut base = 0usize;
        let mut tables: Vec<Vec<Complex64>> = Vec::with_capacity(g);
        for a in 0..g {
            let j = yi[a] as i64 - window_steps as i64 + l.values()[a] * (n / k) as i64;
            let q = j.div_euclid(n as i64);
            base = base * n + j.rem_euclid(n as i64) as usize;
            let weight = (k as i64 * (j + q * n as i64) - 2 * l.values()[a] * n as i64).rem_euclid(modulus);
            tables.push((0..n as i64).map(|xi| roots[((xi * weight) % modulus) as usize]).collect());
        }
        let mut acc = Complex64::new(0.0, 0.0);
        let mut digits = vec![0usize; g];
        for xf in 0..nx {
            let mut ph = Complex64::new(1.0, 0.0);
            for a in 0..g {
                ph *= tables[a][digits[a]];
            }
            acc += s.samples[xf * nx + base] * ph;
            odometer(&mut digits, n);
        }
        acc / nx as f64
    });
    let data: Vec<Vec<Complex64>> = values.chunks(per_l).map(|c| c.to_vec()).collect();
    Ok(WBVector::Sampled(SampledComponents { g, k: k as u32, n, m: window_steps, data }))
}

/// `e^{πi u / N²}` for `u = 0 .. 2N²`.
fn half_roots(n: usize) -> Vec<Complex64> {
    let nn = (n * n) as f64;
    (0..2 * n * n).map(|u| Complex64::from_polar(1.0, PI * u as f64 / nn)).collect()
}

fn odometer(digits: &mut [usize], base: usize) {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return;
        }
        *d = 0;
    }
}

/// Largest Fourier coefficient of `x ↦ s(x, y) e^{kπi ᵗxy}` at frequency
/// `N/2` along any axis, over all grid `y`.
fn nyquist_content(s: &SampledSection, roots: &[Complex64], exec: Exec) -> f64 {
    let (g, k, n) = (s.g, s.k as i64, s.n);
    if n % 2 != 0 {
        return 0.0;
    }
    let nx = n.pow(g as u32);
    let modulus = roots.len() as i64;
    let nn = (n * n) as i64;
    let per_y = exec.map_range(nx, |yf| {
        let yi = unravel(yf, n, g);
        let mut worst: f64 = 0.0;
        for axis in 0..g {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut digits = vec![0usize; g];
            for xf in 0..nx {
                // π (k x·y - N² x_axis) / N²
                let mut units = -nn * digits[axis] as i64;
                for a in 0..g {
                    units += k * digits[a] as i64 * yi[a] as i64;
                }
                acc += s.samples[xf * nx + yf] * roots[units.rem_euclid(modulus) as usize];
                odometer(&mut digits, n);
            }
            worst = worst.max(acc.norm() / nx as f64);
        }
        worst
    });
    per_y.into_iter().fold(0.0, f64::max)
}

/// `s(x, y) = e^{-kπi ᵗxy} Σ_l Σ_m (s)_l(y - m - l/k) e^{2πi ᵗ(km + l)x}` on
/// the `N`-point torus grid.
pub fn wb_inverse(v: &WBVector, n: usize, exec: Exec) -> Result<SampledSection> {
    let g = v.g();
    let k = v.k();
    match v {
        WBVector::Sampled(comp) => {
            if comp.n != n || !n.is_multiple_of(k as usize) {
                return Err(Error::GridMismatch(format!(
                    "components sampled at step 1/{} cannot be resampled to N = {n}",
                    comp.n
                )));
            }
            let ratio = comp.edge_ratio();
            if ratio > 1e-13 {
                return Err(Error::WindowTooSmall { edge: ratio });
            }
            Ok(sampled_inverse(comp, exec))
        }
        _ => Ok(SampledSection::from_fn(g, k, n, exec, |x, y| {
            v.section_at(x, y).expect("analytic representation")
        })),
    }
}

fn sampled_inverse(comp: &SampledComponents, exec: Exec) -> SampledSection {
    let (g, k, n, mw) = (comp.g, comp.k as i64, comp.n as i64, comp.m as i64);
    let chars = Characteristic::all(g, k as u32);
    let total = (n as usize).pow(2 * g as u32);
    let unit: Vec<Complex64> = (0..n).map(|u| Complex64::from_polar(1.0, 2.0 * PI * u as f64 / n as f64)).collect();
    let roots = half_roots(n as usize);
    let side = comp.side() as i64;
    let samples = exec.map_range(total, |idx| {
        let ix = unravel(idx, n as usize, 2 * g);
        let (xi, yi) = (&ix[..g], &ix[g..]);
        let mut acc = Complex64::new(0.0, 0.0);
        let mut lo = vec![0i64; g];
        let mut counts = vec![0usize; g];
        let mut digits = vec![0usize; g];
        for (li, l) in chars.iter().enumerate() {
            // grid index of y - m - l/k is yi - mN - lN/k
            for a in 0..g {
                let off = yi[a] as i64 - l.values()[a] * n / k;
                lo[a] = (off - mw + n - 1).div_euclid(n);
                let hi = (off + mw).div_euclid(n);
                counts[a] = (hi - lo[a] + 1).max(0) as usize;
            }
            let total_m: usize = counts.iter().product();
            digits.iter_mut().for_each(|d| *d = 0);
            for _ in 0..total_m {
                let mut flat = 0i64;
                let mut units: i64 = 0;
                for a in 0..g {
                    let m = lo[a] + digits[a] as i64;
                    let grid = yi[a] as i64 - m * n - l.values()[a] * n / k + mw;
                    flat = flat * side + grid;
                    units += (k * m + l.values()[a]) * xi[a] as i64;
                }
                acc += comp.data[li][flat as usize] * unit[units.rem_euclid(n) as usize];
                mixed_odometer(&mut digits, &counts);
            }
        }
        // e^{-kπi x y} with x y = xi yi / N²
        let xy: i64 = (0..g).map(|a| xi[a] as i64 * yi[a] as i64).sum();
        roots[(-k * xy).rem_euclid(2 * n * n) as usize] * acc
    });
    SampledSection { g, k: comp.k, n: comp.n, samples }
}

fn mixed_odometer(digits: &mut [usize], bases: &[usize]) {
    for a in (0..digits.len()).rev() {
        digits[a] += 1;
        if digits[a] < bases[a] {
            return;
        }
        digits[a] = 0;
    }
}

fn gaussian_section_at(state: &GaussianState, x: &[f64], y: &[f64]) -> Result<Complex64> {
    let g = state.g();
    let k = state.k;
    let lambda = min_sym_eigenvalue(&state.omega.im());
    let radius = truncation_radius(g, k, lambda, 1e-17)?;
    let chars = Characteristic::all(g, k);
    let side = 2 * radius + 1;
    let mut acc = Complex64::new(0.0, 0.0);
    for (li, l) in chars.iter().enumerate() {
        if state.amplitudes[li] == Complex64::new(0.0, 0.0) {
            continue;
        }
        let shift = l.shift();
        let m0: Vec<i64> = (0..g).map(|a| (y[a] - shift[a]).round() as i64).collect();
        for mf in 0..side.pow(g as u32) {
            let off = unravel(mf, side, g);
            let mut arg = vec![0.0; g];
            let mut ph = 0.0;
            for a in 0..g {
                let m = m0[a] + off[a] as i64 - radius as i64;
                arg[a] = y[a] - m as f64 - shift[a];
                ph += (k as f64 * m as f64 + l.values()[a] as f64) * x[a];
            }
            acc += state.eval(li, &arg) * Complex64::from_polar(1.0, 2.0 * PI * ph);
        }
    }
    let xy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    Ok(Complex64::from_polar(1.0, -(k as f64) * PI * xy) * acc)
}

fn packet_section_at(state: &PacketState, x: &[f64], y: &[f64]) -> Complex64 {
    let g = state.g;
    let k = state.k as f64;
    let chars = Characteristic::all(g, state.k);
    let mut acc = Complex64::new(0.0, 0.0);
    for (li, l) in chars.iter().enumerate() {
        let shift = l.shift();
        for p in &state.components[li] {
            // the packet factorizes over axes, and so does the sum over m
            let r = p.support_radius();
            let mut prod = p.amplitude;
            for a in 0..g {
                let lo = (y[a] - shift[a] - p.center[a] - r).ceil() as i64;
                let hi = (y[a] - shift[a] - p.center[a] + r).floor() as i64;
                let mut axis = Complex64::new(0.0, 0.0);
                for m in lo..=hi {
                    let t = y[a] - m as f64 - shift[a];
                    let env = (-PI * p.beta * (t - p.center[a]).powi(2)).exp();
                    let ph = p.freq[a] * t + (k * m as f64 + l.values()[a] as f64) * x[a];
                    axis += Complex64::from_polar(env, 2.0 * PI * ph);
                }
                prod *= axis;
            }
            acc += prod;
        }
    }
    let xy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    Complex64::from_polar(1.0, -k * PI * xy) * acc
}

/// Samples analytic components on the grid `y = i/N`, `|i_j| ≤ M`.
pub fn sample_components(v: &WBVector, n: usize, window_steps: usize, exec: Exec) -> Result<SampledComponents> {
    let g = v.g();
    let k = v.k();
    let side = 2 * window_steps + 1;
    let per_l = side.pow(g as u32);
    let num_l = (k as usize).pow(g as u32);
    let eval = |l: usize, y: &[f64]| -> Complex64 {
        match v {
            WBVector::Gaussian(s) => s.eval(l, y),
            WBVector::Packets(s) => s.eval(l, y),
            WBVector::Sampled(_) => unreachable!(),
        }
    };
    if let WBVector::Sampled(s) = v {
        return Ok(s.clone());
    }
    let values = exec.map_range(num_l * per_l, |flat| {
        let y: Vec<f64> = unravel(flat % per_l, side, g)
            .iter()
            .map(|&i| (i as f64 - window_steps as f64) / n as f64)
            .collect();
        eval(flat / per_l, &y)
    });
    Ok(SampledComponents {
        g,
        k,
        n,
        m: window_steps,
        data: values.chunks(per_l).map(|c| c.to_vec()).collect(),
    })
}

/// `(⟨s, s'⟩_{T^{2g}}, Σ_l ⟨(s)_l, (s')_l⟩_{R^g})`, both by grid quadrature.
pub fn wb_unitarity_check(s: &SampledSection, sp: &SampledSection, exec: Exec) -> Result<(Complex64, Complex64)> {
    check_same_grid(s, sp)?;
    let torus = s.l2_pairing(sp)?;
    let steps = default_window_steps(s.n, s.k);
    let a = match wb_forward(s, steps, exec)? {
        WBVector::Sampled(c) => c,
        _ => unreachable!(),
    };
    let b = match wb_forward(sp, steps, exec)? {
        WBVector::Sampled(c) => c,
        _ => unreachable!(),
    };
    Ok((torus, a.pairing(&b)?))
}

/// The operator `Ξ_τ = (τ+1)∂_y - 2kπ(τ-1)y` acting componentwise.
#[derive(Debug, Clone, PartialEq)]
pub struct XiOperator {
    pub tau: DiscPoint,
    pub k: u32,
}

/// `Ξ_τ` applied to a Gaussian state: `(2kπ R y) · (state)` with
/// `R = i(τ+1)Ω - (τ-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct XiImage {
    /// Matrix `2kπ R` of the linear factor.
    pub linear_factor: CMat,
    pub state: GaussianState,
}

/// `R(τ, Ω) = i(τ+1)Ω - (τ-1)`; vanishes exactly when `Ω = Ω(τ)`.
pub fn xi_residual_matrix(tau: &CMat, omega: &CMat) -> CMat {
    let one = identity(tau.nrows());
    (tau + &one) * omega * I - (tau - one)
}

/// Kernel of `Ξ_τ` on tempered distributions.
#[derive(Debug, Clone, PartialEq)]
pub enum XiKernel {
    /// `det(1+τ)^{-1/2} e^{kπi ᵗyΩ(τ)y}` in every component.
    Gaussian { omega: ComplexSymMatrix, normalization: Complex64 },
    /// `δ(y)` in every component (only for `τ = -I`).
    Delta(DeltaState),
}

/// Tagged distribution supported on a finite set of points of `R^g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaState {
    pub g: usize,
    pub k: u32,
    pub support: Vec<Vec<f64>>,
    pub amplitudes: Vec<Complex64>,
}

impl XiOperator {
    pub fn new(tau: DiscPoint, k: u32) -> Self {
        Self { tau, k }
    }

    pub fn apply(&self, state: &GaussianState) -> XiImage {
        let r = xi_residual_matrix(self.tau.matrix(), state.omega.matrix());
        XiImage { linear_factor: r * Complex64::new(2.0 * self.k as f64 * PI, 0.0), state: state.clone() }
    }

    /// `max |R(τ, Ω)|`.
    pub fn residual(&self, omega: &CMat) -> f64 {
        max_abs(&xi_residual_matrix(self.tau.matrix(), omega))
    }

    /// `‖Ξ_τ G‖ / ‖G‖` in `L²` for `G = e^{kπi ᵗyΩy}`, `Im Ω > 0`:
    /// `2kπ (tr R Σ R*)^{1/2}` with `Σ = (4kπ Im Ω)^{-1}`.
    pub fn relative_residual(&self, omega: &SiegelPoint) -> f64 {
        let r = xi_residual_matrix(self.tau.matrix(), omega.matrix());
        let sigma = inverse_real(&(omega.im() * (4.0 * self.k as f64 * PI))).expect("Im Ω > 0");
        let sigma_c = crate::matrix::to_complex(&sigma);
        let tr = (&r * sigma_c * r.adjoint()).trace().re.max(0.0);
        2.0 * self.k as f64 * PI * tr.sqrt()
    }

    pub fn kernel(&self) -> Result<XiKernel> {
        let g = self.tau.dim();
        let det = self.tau.det_one_plus();
        if det.norm() > 1e-10 {
            let omega = cayley_inverse(&self.tau)?.omega().clone();
            let normalization = crate::matrix::det_invsqrt_posreal(&ComplexSymMatrix::with_tolerance(
                identity(g) + self.tau.matrix(),
                1e-9,
            )?)
            .map(|b| b.value)
            .or_else(|_| {
                // 1 + τ always has Re ⪰ 0 on the closed disc; fall back to a path
                crate::matrix::det_sqrt_path(
                    |t| identity(g) + self.tau.matrix() * Complex64::new(t, 0.0),
                    64,
                    None,
                )
                .map(|b| 1.0 / b.value)
            })?;
            return Ok(XiKernel::Gaussian { omega, normalization });
        }
        if max_abs(&(self.tau.matrix() + identity(g))) < 1e-10 {
            let n = (self.k as usize).pow(g as u32);
            return Ok(XiKernel::Delta(DeltaState {
                g,
                k: self.k,
                support: vec![vec![0.0; g]],
                amplitudes: vec![Complex64::new(1.0, 0.0); n],
            }));
        }
        Err(Error::Unsupported("kernel of Ξ_τ with 1 + τ singular and τ ≠ -I".into()))
    }
}

/// `Ω = i/ε · I`, the Gaussian family whose `ε → 0` limit is `δ(y)`.
pub fn narrowing_gaussian(g: usize, eps: f64) -> SiegelPoint {
    SiegelPoint::imaginary_scalar(g, 1.0 / eps)
}

/// Real and imaginary parts of a random real symmetric perturbation with
/// unit max-norm, used to probe the kernel characterization.
pub fn unit_symmetric_direction<R: Rng + ?Sized>(rng: &mut R, g: usize) -> CMat {
    let mut re = RMat::zeros(g, g);
    let mut im = RMat::zeros(g, g);
    for a in 0..g {
        for b in a..g {
            let (u, v) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            re[(a, b)] = u;
            re[(b, a)] = u;
            im[(a, b)] = v;
            im[(b, a)] = v;
        }
    }
    let m = crate::matrix::complexify(&re, &im);
    let s = max_abs(&m).max(1e-300);
    m / Complex64::new(s, 0.0)
}

/// Samples `θ^l_Ω` on the torus grid through the theta engine.
pub fn sample_theta_section(
    k: u32,
    l: &Characteristic,
    omega: &SiegelPoint,
    n: usize,
    exec: Exec,
) -> Result<SampledSection> {
    let data = crate::theta::LatticeData::new(k, omega.clone())?;
    // validate once so the closure cannot fail on truncation
    crate::theta::theta_section_eval(&data, l, &vec![0.0; omega.dim()], &vec![0.0; omega.dim()], 1e-15, Exec::Sequential)?;
    Ok(SampledSection::from_fn(omega.dim(), k, n, exec, |x, y| {
        crate::theta::theta_section_eval(&data, l, x, y, 1e-15, Exec::Sequential)
            .expect("validated")
            .value
    }))
}

/// Index helper shared with other modules.
pub fn grid_index(ix: &[usize], side: usize) -> usize {
    ravel(ix, side)
}

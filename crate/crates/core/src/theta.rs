//! Theta functions with rational characteristics and the corresponding
//! holomorphic sections `θ^l_Ω` of `L^k` on the torus.
//!
//! Every evaluation reduces to the centered lattice sum
//!
//! `S(x, y) = Σ_{n ∈ Z^g + l/k} exp(kπi ᵗ(n-y)Ω(n-y) + 2kπi ᵗn x)`
//!
//! whose terms are bounded by one in modulus, which makes truncation
//! certificates absolute and keeps evaluation free of overflow.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::matrix::{inverse_real, CMat, RMat, I};
use crate::siegel::{symplectic_form, SiegelPoint};

/// Upper limit on the number of lattice points visited by one sum.
pub const MAX_TERMS: usize = 4_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeData {
    k: u32,
    omega: SiegelPoint,
}

impl LatticeData {
    pub fn new(k: u32, omega: SiegelPoint) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidCharacteristic("level k must be at least 1".into()));
        }
        Ok(Self { k, omega })
    }

    pub fn g(&self) -> usize {
        self.omega.dim()
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn omega(&self) -> &SiegelPoint {
        &self.omega
    }

    /// `k^g`, the dimension of the space of sections.
    pub fn num_sections(&self) -> usize {
        (self.k as usize).pow(self.g() as u32)
    }
}

/// Characteristic `l ∈ (Z/kZ)^g`, stored with `0 ≤ l_j < k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Characteristic {
    l: Vec<i64>,
    k: u32,
}

impl Characteristic {
    pub fn new(l: &[i64], k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidCharacteristic("level k must be at least 1".into()));
        }
        if l.is_empty() {
            return Err(Error::InvalidCharacteristic("empty characteristic".into()));
        }
        let l = l.iter().map(|v| v.rem_euclid(k as i64)).collect();
        Ok(Self { l, k })
    }

    pub fn zero(g: usize, k: u32) -> Self {
        Self { l: vec![0; g], k }
    }

    pub fn values(&self) -> &[i64] {
        &self.l
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.l.len()
    }

    /// `l / k` as a real vector.
    pub fn shift(&self) -> Vec<f64> {
        self.l.iter().map(|&v| v as f64 / self.k as f64).collect()
    }

    /// Lexicographic position among all `k^g` characteristics.
    pub fn index(&self) -> usize {
        self.l.iter().fold(0usize, |acc, &v| acc * self.k as usize + v as usize)
    }

    pub fn from_index(index: usize, g: usize, k: u32) -> Self {
        let mut l = vec![0i64; g];
        let mut rest = index;
        for j in (0..g).rev() {
            l[j] = (rest % k as usize) as i64;
            rest /= k as usize;
        }
        Self { l, k }
    }

    /// All characteristics in lexicographic order.
    pub fn all(g: usize, k: u32) -> Vec<Self> {
        (0..(k as usize).pow(g as u32)).map(|i| Self::from_index(i, g, k)).collect()
    }

    /// `l + b` reduced mod `k`.
    pub fn shifted(&self, b: &[i64]) -> Self {
        let l: Vec<i64> = self.l.iter().zip(b).map(|(a, b)| a + b).collect();
        Self::new(&l, self.k).expect("nonempty")
    }
}

/// Value of a theta evaluation with a certified bound on the truncation error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaValue {
    pub value: Complex64,
    pub error_bound: f64,
}

/// `mantissa · e^{log_scale}`, with `error_bound` referring to the mantissa.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledValue {
    pub mantissa: Complex64,
    pub log_scale: f64,
    pub error_bound: f64,
}

impl ScaledValue {
    pub fn value(&self) -> Complex64 {
        self.mantissa * self.log_scale.exp()
    }
}

/// `α(λ) = (-1)^{Σ λ_j λ_{g+j}}`.
pub fn semicharacter(lambda: &[i64]) -> i32 {
    let g = lambda.len() / 2;
    let s: i64 = (0..g).map(|j| lambda[j] * lambda[g + j]).sum();
    if s.rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

/// `F_Ω(z, w) = -ᵗz (Im Ω)^{-1} Im w`.
pub fn bilinear_f(omega: &SiegelPoint, z: &[Complex64], w: &[Complex64]) -> Complex64 {
    let inv = inverse_real(&omega.im()).expect("Im Ω is positive definite");
    let g = omega.dim();
    let mut acc = Complex64::new(0.0, 0.0);
    for a in 0..g {
        for b in 0..g {
            acc -= z[a] * inv[(a, b)] * w[b].im;
        }
    }
    acc
}

/// `Σ_{r > R} ((2r+1)^g - (2r-1)^g) e^{-kπλ(r-½)²}`.
pub fn shell_tail_bound(g: usize, k: u32, lambda_min: f64, radius: usize) -> f64 {
    let mut total = 0.0;
    let mut r = radius + 1;
    loop {
        let rf = r as f64;
        let count = (2.0 * rf + 1.0).powi(g as i32) - (2.0 * rf - 1.0).powi(g as i32);
        let term = count * (-(k as f64) * PI * lambda_min * (rf - 0.5).powi(2)).exp();
        total += term;
        if term < 1e-18 * total.max(1e-300) || term == 0.0 {
            break;
        }
        r += 1;
    }
    total
}

/// Smallest shell radius whose tail bound is at most `tol`.
pub fn truncation_radius(g: usize, k: u32, lambda_min: f64, tol: f64) -> Result<usize> {
    let limit = max_radius(g);
    if !(lambda_min > 0.0) {
        return Err(Error::TruncationFailure { required: usize::MAX, limit });
    }
    // coarse estimate from the leading term, then step
    let target = (-tol.max(1e-300).ln()).max(0.0) / (k as f64 * PI * lambda_min);
    let mut r = (target.sqrt() + 0.5).floor().max(1.0) as usize;
    if r > 4 * limit + 16 {
        return Err(Error::TruncationFailure { required: r, limit });
    }
    r = r.saturating_sub(2).max(1);
    while shell_tail_bound(g, k, lambda_min, r) > tol {
        r += 1;
        if r > 4 * limit + 16 {
            return Err(Error::TruncationFailure { required: r, limit });
        }
    }
    if r > limit {
        return Err(Error::TruncationFailure { required: r, limit });
    }
    Ok(r)
}

fn max_radius(g: usize) -> usize {
    let per_axis = (MAX_TERMS as f64).powf(1.0 / g as f64);
    (((per_axis - 1.0) / 2.0).floor() as usize).max(1)
}

/// The centered lattice sum `S(x, y)` over the box of radius `radius`.
///
/// Terms are generated in lexicographic order and added sequentially, so the
/// result does not depend on `exec`.
pub fn centered_sum_with_radius(
    data: &LatticeData,
    l: &Characteristic,
    x: &[f64],
    y: &[f64],
    radius: usize,
    exec: Exec,
) -> Complex64 {
    let g = data.g();
    let k = data.k() as f64;
    let shift = l.shift();
    let omega = data.omega().matrix();
    let m0: Vec<i64> = (0..g).map(|j| (y[j] - shift[j]).round() as i64).collect();
    let side = 2 * radius + 1;
    let total = side.pow(g as u32);
    let terms = exec.map_range(total, |idx| {
        let mut rest = idx;
        let mut d = vec![0.0; g];
        let mut phase = 0.0;
        for j in (0..g).rev() {
            let m = m0[j] + (rest % side) as i64 - radius as i64;
            rest /= side;
            let n = m as f64 + shift[j];
            d[j] = n - y[j];
            phase += n * x[j];
        }
        let mut quad = Complex64::new(0.0, 0.0);
        for a in 0..g {
            let mut row = Complex64::new(0.0, 0.0);
            for b in 0..g {
                row += omega[(a, b)] * d[b];
            }
            quad += row * d[a];
        }
        (I * k * PI * quad + I * 2.0 * k * PI * phase).exp()
    });
    terms.into_iter().sum()
}

/// `S(x, y)` with absolute truncation error at most `tol`.
pub fn centered_sum(
    data: &LatticeData,
    l: &Characteristic,
    x: &[f64],
    y: &[f64],
    tol: f64,
    exec: Exec,
) -> Result<ThetaValue> {
    check_dims(data, l, x.len())?;
    let lambda = data.omega().lambda_min();
    let radius = truncation_radius(data.g(), data.k(), lambda, tol)?;
    let value = centered_sum_with_radius(data, l, x, y, radius, exec);
    Ok(ThetaValue { value, error_bound: shell_tail_bound(data.g(), data.k(), lambda, radius) })
}

fn check_dims(data: &LatticeData, l: &Characteristic, n: usize) -> Result<()> {
    if l.dim() != data.g() || n != data.g() {
        return Err(Error::DimensionMismatch(format!(
            "genus {} but characteristic of length {} and point of length {}",
            data.g(),
            l.dim(),
            n
        )));
    }
    if l.k() != data.k() {
        return Err(Error::InvalidCharacteristic(format!(
            "characteristic at level {} used with level {}",
            l.k(),
            data.k()
        )));
    }
    Ok(())
}

/// Writes `z = x - Ω y` with real `x, y`.
pub fn real_coordinates(omega: &SiegelPoint, z: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    let g = omega.dim();
    let inv = inverse_real(&omega.im()).expect("Im Ω is positive definite");
    let im_z = nalgebra::DVector::from_iterator(g, z.iter().map(|c| c.im));
    let y = -(inv * im_z);
    let re = omega.re();
    let x: Vec<f64> = (0..g).map(|a| z[a].re + (0..g).map(|b| re[(a, b)] * y[b]).sum::<f64>()).collect();
    (x, y.iter().copied().collect())
}

/// `θ[l/k; 0](kz, kΩ) = Σ_{n ∈ Z^g + l/k} exp(kπi ᵗnΩn + 2kπi ᵗn z)` as a
/// scaled value, so that large `Im z` cannot overflow.
pub fn theta_eval_scaled(
    data: &LatticeData,
    l: &Characteristic,
    z: &[Complex64],
    rel_tol: f64,
    exec: Exec,
) -> Result<ScaledValue> {
    check_dims(data, l, z.len())?;
    let (x, y) = real_coordinates(data.omega(), z);
    let s = centered_sum(data, l, &x, &y, rel_tol, exec)?;
    let k = data.k() as f64;
    let (re, im) = (data.omega().re(), data.omega().im());
    let quad = |m: &RMat| -> f64 {
        let v = nalgebra::DVector::from_column_slice(&y);
        (v.transpose() * m * &v)[(0, 0)]
    };
    let phase = Complex64::from_polar(1.0, -k * PI * quad(&re));
    Ok(ScaledValue {
        mantissa: phase * s.value,
        log_scale: k * PI * quad(&im),
        error_bound: s.error_bound,
    })
}

/// `θ[l/k; 0](kz, kΩ)` with absolute truncation error at most `tol`.
pub fn theta_eval(
    data: &LatticeData,
    l: &Characteristic,
    z: &[Complex64],
    tol: f64,
    exec: Exec,
) -> Result<ThetaValue> {
    check_dims(data, l, z.len())?;
    let (_, y) = real_coordinates(data.omega(), z);
    let yv = nalgebra::DVector::from_column_slice(&y);
    let log_scale = data.k() as f64 * PI * (yv.transpose() * data.omega().im() * &yv)[(0, 0)];
    let rel_tol = (tol * (-log_scale).exp()).max(1e-300);
    let s = theta_eval_scaled(data, l, z, rel_tol, exec)?;
    let scale = s.log_scale.exp();
    Ok(ThetaValue { value: s.mantissa * scale, error_bound: s.error_bound * scale })
}

/// `θ^l_Ω(x, y) = e^{-kπi ᵗxy} S(x, y)`.
pub fn theta_section_eval(
    data: &LatticeData,
    l: &Characteristic,
    x: &[f64],
    y: &[f64],
    tol: f64,
    exec: Exec,
) -> Result<ThetaValue> {
    if y.len() != x.len() {
        return Err(Error::DimensionMismatch("x and y must have equal length".into()));
    }
    let s = centered_sum(data, l, x, y, tol, exec)?;
    let xy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let prefactor = Complex64::from_polar(1.0, -(data.k() as f64) * PI * xy);
    Ok(ThetaValue { value: prefactor * s.value, error_bound: s.error_bound })
}

/// `|s(u + λ) - α(λ)^k e^{-kπi ω(u, λ)} s(u)|` for `s = θ^l_Ω`.
pub fn quasi_periodicity_residual(
    data: &LatticeData,
    l: &Characteristic,
    x: &[f64],
    y: &[f64],
    lambda: &[i64],
    tol: f64,
) -> Result<f64> {
    let g = data.g();
    if lambda.len() != 2 * g {
        return Err(Error::DimensionMismatch("lattice vector must have length 2g".into()));
    }
    let exec = Exec::Sequential;
    let base = theta_section_eval(data, l, x, y, tol, exec)?.value;
    let x2: Vec<f64> = (0..g).map(|j| x[j] + lambda[j] as f64).collect();
    let y2: Vec<f64> = (0..g).map(|j| y[j] + lambda[g + j] as f64).collect();
    let moved = theta_section_eval(data, l, &x2, &y2, tol, exec)?.value;
    let u: Vec<f64> = x.iter().chain(y).copied().collect();
    let lam: Vec<f64> = lambda.iter().map(|&v| v as f64).collect();
    let k = data.k() as i32;
    let alpha = (semicharacter(lambda) as f64).powi(k);
    let factor = Complex64::from_polar(alpha, -(k as f64) * PI * symplectic_form(&u, &lam));
    Ok((moved - factor * base).norm())
}

/// Matrix `[θ^{l_j}_Ω(x_i, y_i)]` with rows indexed by points and columns by
/// characteristics in lexicographic order.
pub fn evaluation_matrix(
    data: &LatticeData,
    points: &[(Vec<f64>, Vec<f64>)],
    tol: f64,
    exec: Exec,
) -> Result<CMat> {
    let chars = Characteristic::all(data.g(), data.k());
    let mut m = CMat::zeros(points.len(), chars.len());
    for (i, (x, y)) in points.iter().enumerate() {
        for (j, l) in chars.iter().enumerate() {
            m[(i, j)] = theta_section_eval(data, l, x, y, tol, exec)?.value;
        }
    }
    Ok(m)
}

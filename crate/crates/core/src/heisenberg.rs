//! The finite Heisenberg group `H_k` and its action on quantum spaces in the
//! parallel frame.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::bks::{bks_map, PairingRoute, QuantumVector};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::matrix::{max_abs, CMat};
use crate::theta::Characteristic;

/// Element `(λ, (a, b))`.
///
/// `a` and `b` are kept as integer vectors rather than residues: the factor
/// `e^{-πi a·b/k}` in the action depends on them modulo `2k`, and keeping
/// the integers makes the group law hold exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeisenbergElement {
    pub k: u32,
    pub lambda: Complex64,
    pub a: Vec<i64>,
    pub b: Vec<i64>,
}

fn phase(t: f64) -> Complex64 {
    Complex64::from_polar(1.0, t)
}

fn dot(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl HeisenbergElement {
    pub fn new(k: u32, lambda: Complex64, a: Vec<i64>, b: Vec<i64>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidCharacteristic("level k must be at least 1".into()));
        }
        if a.len() != b.len() || a.is_empty() {
            return Err(Error::DimensionMismatch("a and b must have the same positive length".into()));
        }
        if (lambda.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::DimensionMismatch(format!("|lambda| = {} is not 1", lambda.norm())));
        }
        Ok(Self { k, lambda, a, b })
    }

    pub fn identity(g: usize, k: u32) -> Self {
        Self { k, lambda: Complex64::new(1.0, 0.0), a: vec![0; g], b: vec![0; g] }
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// `(λ,(a,b))(λ',(a',b')) = (λλ' e^{-πi(a·b' - b·a')/k}, a+a', b+b')`.
    pub fn compose(&self, other: &Self) -> Self {
        let c = (dot(&self.a, &other.b) - dot(&self.b, &other.a)) as f64;
        Self {
            k: self.k,
            lambda: self.lambda * other.lambda * phase(-PI * c / self.k as f64),
            a: self.a.iter().zip(&other.a).map(|(x, y)| x + y).collect(),
            b: self.b.iter().zip(&other.b).map(|(x, y)| x + y).collect(),
        }
    }

    pub fn inverse(&self) -> Self {
        Self {
            k: self.k,
            lambda: self.lambda.conj(),
            a: self.a.iter().map(|x| -x).collect(),
            b: self.b.iter().map(|x| -x).collect(),
        }
    }

    /// Matrix on frame coefficients:
    /// `σ^l ↦ λ e^{-πi a·b/k} e^{-2πi l·a/k} σ^{l+b}`.
    pub fn matrix(&self) -> CMat {
        let g = self.dim();
        let k = self.k;
        let chars = Characteristic::all(g, k);
        let n = chars.len();
        let mut m = CMat::zeros(n, n);
        let base = self.lambda * phase(-PI * dot(&self.a, &self.b) as f64 / k as f64);
        for l in &chars {
            let la = dot(l.values(), &self.a).rem_euclid(k as i64) as f64;
            let target = l.shifted(&self.b);
            m[(target.index(), l.index())] = base * phase(-2.0 * PI * la / k as f64);
        }
        m
    }
}

/// Image of a quantum vector under an element of `H_k`.
pub fn heisenberg_act(h: &HeisenbergElement, u: &QuantumVector) -> Result<QuantumVector> {
    if h.k != u.k || h.dim() != u.tau.dim() {
        return Err(Error::DimensionMismatch("element and vector differ in level or genus".into()));
    }
    let v = nalgebra::DVector::from_vec(u.coefficients.clone());
    let out = h.matrix() * v;
    QuantumVector::new(u.k, u.tau.clone(), out.iter().cloned().collect())
}

/// `max |B h - h B|` for the pairing map between two interior points.
pub fn intertwining_heisenberg_check(
    omega: &CMat,
    omega_p: &CMat,
    h: &HeisenbergElement,
    route: PairingRoute,
    exec: Exec,
) -> Result<f64> {
    let b = bks_map(h.k, omega, omega_p, route, exec)?;
    let hm = h.matrix();
    Ok(max_abs(&(&b * &hm - &hm * &b)))
}

/// All elements with `λ = 1` and `a, b ∈ {0, …, k-1}^g`.
pub fn all_unit_elements(g: usize, k: u32) -> Vec<HeisenbergElement> {
    let chars = Characteristic::all(g, k);
    let mut out = Vec::with_capacity(chars.len() * chars.len());
    for a in &chars {
        for b in &chars {
            out.push(HeisenbergElement {
                k,
                lambda: Complex64::new(1.0, 0.0),
                a: a.values().to_vec(),
                b: b.values().to_vec(),
            });
        }
    }
    out
}

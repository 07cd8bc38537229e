//! Seeded generators for test inputs: symplectic matrices, points of the
//! upper half-space, symmetric unitary matrices.

use num_complex::Complex64;
use rand::Rng;

use crate::matrix::{complexify, CMat, ComplexSymMatrix, RMat};
use crate::metaplectic::MetaplecticGenerator;
use crate::siegel::{standard_j, SiegelPoint, SymplecticMatrix};

fn uniform_sym<R: Rng + ?Sized>(rng: &mut R, g: usize, amp: f64) -> RMat {
    let mut s = RMat::zeros(g, g);
    for i in 0..g {
        for j in i..g {
            let v = rng.gen_range(-amp..amp);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    s
}

fn near_identity<R: Rng + ?Sized>(rng: &mut R, g: usize, amp: f64) -> RMat {
    let mut a = RMat::identity(g, g);
    for v in a.iter_mut() {
        *v += rng.gen_range(-amp..amp);
    }
    a
}

fn assemble(a: &RMat, b: &RMat, c: &RMat, d: &RMat) -> RMat {
    let g = a.nrows();
    let mut m = RMat::zeros(2 * g, 2 * g);
    m.view_mut((0, 0), (g, g)).copy_from(a);
    m.view_mut((0, g), (g, g)).copy_from(b);
    m.view_mut((g, 0), (g, g)).copy_from(c);
    m.view_mut((g, g), (g, g)).copy_from(d);
    m
}

/// One of: upper shear, lower shear, `diag(A, ᵗA⁻¹)`, inversion.
fn random_factor<R: Rng + ?Sized>(rng: &mut R, g: usize) -> RMat {
    let zero = RMat::zeros(g, g);
    let one = RMat::identity(g, g);
    match rng.gen_range(0..4) {
        0 => assemble(&one, &uniform_sym(rng, g, 1.0), &zero, &one),
        1 => assemble(&one, &zero, &uniform_sym(rng, g, 1.0), &one),
        2 => {
            let a = near_identity(rng, g, 0.3);
            let a_inv_t = a.clone().try_inverse().expect("near-identity matrix").transpose();
            assemble(&a, &zero, &zero, &a_inv_t)
        }
        _ => standard_j(g),
    }
}

/// Product of three random generators of `Sp(2g, R)`.
pub fn random_symplectic<R: Rng + ?Sized>(rng: &mut R, g: usize) -> SymplecticMatrix {
    let mut m = RMat::identity(2 * g, 2 * g);
    for _ in 0..3 {
        m *= random_factor(rng, g);
    }
    SymplecticMatrix::new(m).expect("product of symplectic generators")
}

/// Symplectic matrix whose `C` block is singular (zero, or rank one when
/// `g > 1`).
pub fn random_symplectic_singular_c<R: Rng + ?Sized>(rng: &mut R, g: usize) -> SymplecticMatrix {
    let zero = RMat::zeros(g, g);
    let one = RMat::identity(g, g);
    let a = near_identity(rng, g, 0.3);
    let a_inv_t = a.clone().try_inverse().expect("near-identity matrix").transpose();
    let b = &a * uniform_sym(rng, g, 1.0);
    let block = assemble(&a, &b, &zero, &a_inv_t);
    if g == 1 || rng.gen_bool(0.5) {
        return SymplecticMatrix::new(block).expect("block upper triangular");
    }
    // lower shear by a rank-one symmetric matrix keeps C = S A singular
    let v: Vec<f64> = (0..g).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let v = nalgebra::DVector::from_vec(v);
    let s = &v * v.transpose();
    let lower = assemble(&one, &zero, &s, &one);
    SymplecticMatrix::new(lower * block).expect("product of symplectic generators")
}

/// `Ω = S + i(ᵗA A + ½ I)` with small random `S`, `A`.
pub fn random_siegel_point<R: Rng + ?Sized>(rng: &mut R, g: usize) -> SiegelPoint {
    let re = uniform_sym(rng, g, 1.0);
    let mut a = RMat::zeros(g, g);
    for v in a.iter_mut() {
        *v = rng.gen_range(-0.6..0.6);
    }
    let im = a.transpose() * &a + RMat::identity(g, g) * 0.5;
    SiegelPoint::new(ComplexSymMatrix::new(complexify(&re, &im)).expect("symmetric"))
        .expect("positive imaginary part")
}

/// Random unitary `W` (Gram-Schmidt on a random complex matrix) and
/// `U = W ᵗW`, which is unitary and symmetric.
pub fn random_unitary_symmetric<R: Rng + ?Sized>(rng: &mut R, g: usize) -> CMat {
    let raw = CMat::from_fn(g, g, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let w = raw.qr().q();
    &w * w.transpose()
}

/// Generator with `P, Q` uniform in `[-1, 1]`, `L` a perturbed multiple of
/// the identity, negated half of the time.
pub fn random_metaplectic_generator<R: Rng + ?Sized>(rng: &mut R, g: usize) -> MetaplecticGenerator {
    let mut l = RMat::identity(g, g) * rng.gen_range(0.5..1.5);
    for v in l.iter_mut() {
        *v += rng.gen_range(-0.3..0.3);
    }
    if rng.gen_bool(0.5) {
        l = -l;
    }
    let (p, q) = (uniform_sym(rng, g, 1.0), uniform_sym(rng, g, 1.0));
    MetaplecticGenerator::with_default_index(p, l, q).expect("L is invertible")
}

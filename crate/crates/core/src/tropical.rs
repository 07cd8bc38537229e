//! Degeneration along geodesic rays: rescaled Kähler metrics, lattice
//! neighbors, tropical theta divisors, and the comparison with zero loci of
//! theta sections at large `s`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::matrix::{condition_number, inverse_real, is_posdef, to_complex, RMat};
use crate::siegel::{kahler_metric, SiegelPoint};

/// Tie tolerance on the affine objective.
pub const TIE_TOL: f64 = 1e-9;

/// `Ω(s) = BᵗA + i A e^{2sΛ} ᵗA`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicRay {
    pub a: RMat,
    pub b: RMat,
    pub lambda: Vec<f64>,
}

impl GeodesicRay {
    pub fn new(a: RMat, b: RMat, lambda: Vec<f64>) -> Result<Self> {
        let g = a.nrows();
        if a.ncols() != g || b.shape() != (g, g) || lambda.len() != g {
            return Err(Error::InvalidRay("A, B must be g×g and Λ must have g entries".into()));
        }
        if a.clone().try_inverse().is_none() || condition_number(&to_complex(&a)) > 1e12 {
            return Err(Error::InvalidRay("A is not invertible".into()));
        }
        let bat = &b * a.transpose();
        let residual = (&bat - bat.transpose()).amax();
        if residual > 1e-12 {
            return Err(Error::InvalidRay(format!("B ᵗA is not symmetric (residual {residual:.3e})")));
        }
        if lambda.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::InvalidRay("Λ must be positive".into()));
        }
        Ok(Self { a, b, lambda })
    }

    /// `A = I`, `B = 0`, `Λ = λ I`.
    pub fn standard(g: usize, lambda: f64) -> Self {
        Self { a: RMat::identity(g, g), b: RMat::zeros(g, g), lambda: vec![lambda; g] }
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn omega(&self, s: f64) -> Result<SiegelPoint> {
        let g = self.dim();
        let e = RMat::from_diagonal(&nalgebra::DVector::from_iterator(g, self.lambda.iter().map(|l| (2.0 * s * l).exp())));
        let re = &self.b * self.a.transpose();
        let im = &self.a * e * self.a.transpose();
        SiegelPoint::from_parts(&crate::matrix::symmetrize_real(&re), &crate::matrix::symmetrize_real(&im))
    }

    /// Metric `G = AᵗA` of the collapsed torus.
    pub fn limit_form(&self) -> RMat {
        &self.a * self.a.transpose()
    }

    fn scalar_rate(&self) -> Option<f64> {
        let l0 = self.lambda[0];
        self.lambda.iter().all(|l| (l - l0).abs() <= 1e-14 * l0).then_some(l0)
    }
}

/// `Ω(s) = Ω + s Ω̇` with `Im Ω̇` positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfLine {
    pub start: SiegelPoint,
    pub re_dot: RMat,
    pub im_dot: RMat,
}

impl HalfLine {
    pub fn new(start: SiegelPoint, re_dot: RMat, im_dot: RMat) -> Result<Self> {
        if !is_posdef(&im_dot, 0.0)? {
            return Err(Error::InvalidRay("Im of the direction must be positive definite".into()));
        }
        Ok(Self { start, re_dot, im_dot })
    }

    pub fn omega(&self, s: f64) -> Result<SiegelPoint> {
        SiegelPoint::from_parts(&(self.start.re() + &self.re_dot * s), &(self.start.im() + &self.im_dot * s))
    }

    /// `Ω̇₁ Ω̇₂⁻¹ Ω̇₁ + Ω̇₂`.
    pub fn limit_form(&self) -> RMat {
        let inv = inverse_real(&self.im_dot).expect("positive definite");
        &self.re_dot * inv * &self.re_dot + &self.im_dot
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RescaledMetric {
    /// Rescaled Kähler metric on `R^{2g}`, coordinates `(x, y)`.
    pub scaled: RMat,
    /// Its `s → ∞` limit; only the `(y, y)` block survives.
    pub limit: RMat,
    /// Set when Λ is not scalar; the limit then keeps only the fastest
    /// directions.
    pub mixed_rates: bool,
    pub limit_rank: usize,
}

fn embed_yy(g: usize, block: &RMat) -> RMat {
    let mut m = RMat::zeros(2 * g, 2 * g);
    m.view_mut((g, g), (g, g)).copy_from(block);
    m
}

/// `e^{-2sλ} γ_{Ω(s)}` along a ray, with `λ` the largest rate.
pub fn rescaled_metric(ray: &GeodesicRay, s: f64) -> Result<RescaledMetric> {
    let g = ray.dim();
    let gamma = kahler_metric(&ray.omega(s)?);
    let top = ray.lambda.iter().cloned().fold(f64::MIN, f64::max);
    let scaled = gamma * (-2.0 * s * top).exp();
    let (limit, mixed, rank) = match ray.scalar_rate() {
        Some(_) => (ray.limit_form(), false, g),
        None => {
            let mask: Vec<f64> = ray.lambda.iter().map(|l| if (l - top).abs() <= 1e-14 * top { 1.0 } else { 0.0 }).collect();
            let rank = mask.iter().filter(|m| **m > 0.0).count();
            let p = RMat::from_diagonal(&nalgebra::DVector::from_vec(mask));
            (&ray.a * p * ray.a.transpose(), true, rank)
        }
    };
    Ok(RescaledMetric { scaled, limit: embed_yy(g, &limit), mixed_rates: mixed, limit_rank: rank })
}

/// `γ_{Ω(s)} / s` along a half-line.
pub fn rescaled_metric_halfline(line: &HalfLine, s: f64) -> Result<RescaledMetric> {
    let g = line.start.dim();
    let scaled = kahler_metric(&line.omega(s)?) / s;
    Ok(RescaledMetric { scaled, limit: embed_yy(g, &line.limit_form()), mixed_rates: false, limit_rank: g })
}

/// `ceil(2 + cond(G))`.
pub fn default_radius(form: &RMat) -> i64 {
    (2.0 + condition_number(&to_complex(form))).ceil() as i64
}

fn box_points(center: &[i64], radius: i64) -> Vec<Vec<i64>> {
    let g = center.len();
    let side = (2 * radius + 1) as usize;
    let total = side.pow(g as u32);
    (0..total)
        .map(|mut idx| {
            let mut m = vec![0i64; g];
            for a in (0..g).rev() {
                m[a] = center[a] - radius + (idx % side) as i64;
                idx /= side;
            }
            m
        })
        .collect()
}

fn quad(form: &RMat, u: &[f64], v: &[f64]) -> f64 {
    let g = u.len();
    let mut acc = 0.0;
    for i in 0..g {
        for j in 0..g {
            acc += u[i] * form[(i, j)] * v[j];
        }
    }
    acc
}

fn check_form(form: &RMat, g: usize) -> Result<()> {
    if form.shape() != (g, g) {
        return Err(Error::DimensionMismatch("G must be g×g".into()));
    }
    if !is_posdef(form, 0.0)? {
        return Err(Error::NotInUpperHalfSpace { eigenvalue: crate::matrix::min_sym_eigenvalue(form) });
    }
    Ok(())
}

fn maximizers(objective: impl Fn(&[i64]) -> f64, center: &[i64], radius: i64) -> Result<Vec<Vec<i64>>> {
    let pts = box_points(center, radius);
    let vals: Vec<f64> = pts.iter().map(|m| objective(m)).collect();
    let best = vals.iter().cloned().fold(f64::MIN, f64::max);
    let winners: Vec<Vec<i64>> = pts
        .into_iter()
        .zip(vals)
        .filter(|(_, v)| best - v <= TIE_TOL)
        .map(|(m, _)| m)
        .collect();
    if winners.iter().any(|m| m.iter().zip(center).any(|(a, c)| (a - c).abs() == radius)) {
        return Err(Error::RadiusTooSmall);
    }
    Ok(winners)
}

/// Lattice points `m` minimizing `‖y - m‖_G`, ties within [`TIE_TOL`].
pub fn lattice_neighbors(y: &[f64], form: &RMat, radius: Option<i64>) -> Result<Vec<Vec<i64>>> {
    check_form(form, y.len())?;
    let r = radius.unwrap_or_else(|| default_radius(form));
    let center: Vec<i64> = y.iter().map(|v| v.round() as i64).collect();
    maximizers(
        |m| {
            let d: Vec<f64> = y.iter().zip(m).map(|(a, b)| a - *b as f64).collect();
            -quad(form, &d, &d)
        },
        &center,
        r,
    )
}

/// Maximizers of `-ᵗmGm + 2k ᵗyGm` over `m ∈ Z^g`.
pub fn level_maximizers(y: &[f64], form: &RMat, k: u32) -> Result<Vec<Vec<i64>>> {
    check_form(form, y.len())?;
    let kf = k as f64;
    let center: Vec<i64> = y.iter().map(|v| (kf * v).round() as i64).collect();
    maximizers(
        |m| {
            let mf: Vec<f64> = m.iter().map(|v| *v as f64).collect();
            let ky: Vec<f64> = y.iter().map(|v| kf * v).collect();
            -quad(form, &mf, &mf) + 2.0 * quad(form, &ky, &mf)
        },
        &center,
        default_radius(form),
    )
}

/// Whether `y` lies on the level-`k` tropical theta divisor.
pub fn tropical_divisor_membership(y: &[f64], form: &RMat, k: u32) -> Result<bool> {
    Ok(level_maximizers(y, form, k)?.len() >= 2)
}

/// Which theta function is degenerated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThetaChoice {
    /// The section `θ^l`.
    Single(i64),
    /// `Σ_l θ^l`, whose degeneration is the level-`k` divisor.
    SymmetricSum,
}

/// Tropical divisor in genus one as exact points of `[0, 1)`: ties of
/// neighboring lattice points of the series, `y ≡ (2m+1)/(2k)` for the
/// symmetric sum and `y ≡ l/k + 1/2` for `θ^l`.
pub fn tropical_points_g1(k: u32, choice: ThetaChoice) -> Vec<f64> {
    let kf = k as f64;
    let mut pts: Vec<f64> = match choice {
        ThetaChoice::SymmetricSum => (0..k).map(|m| (2.0 * m as f64 + 1.0) / (2.0 * kf)).collect(),
        ThetaChoice::Single(l) => vec![(l.rem_euclid(k as i64) as f64 / kf + 0.5).rem_euclid(1.0)],
    };
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    pts
}

/// Genus-two divisor sampled on an `n × n` grid of `[0,1)²`: midpoints of
/// neighboring cells whose maximizers differ.
pub fn tropical_divisor_samples_g2(form: &RMat, k: u32, n: usize, exec: Exec) -> Result<Vec<[f64; 2]>> {
    check_form(form, 2)?;
    let h = 1.0 / n as f64;
    let rows = exec.map_range(n, |i| -> Result<Vec<[f64; 2]>> {
        let mut out = Vec::new();
        for j in 0..n {
            let y = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h];
            let here = level_maximizers(&y, form, k)?;
            for step in [[h, 0.0], [0.0, h]] {
                let z = [y[0] + step[0], y[1] + step[1]];
                let there = level_maximizers(&z, form, k)?;
                if here[0] != there[0] {
                    out.push([(y[0] + z[0]) / 2.0 % 1.0, (y[1] + z[1]) / 2.0 % 1.0]);
                }
            }
        }
        Ok(out)
    });
    let mut pts = Vec::new();
    for r in rows {
        pts.extend(r?);
    }
    Ok(pts)
}

/// Genus-one theta series normalized by its largest term:
/// `Σ_n exp(kπi Ω (n - y)² + 2kπi n x - L)` over `n ∈ Z + l/k` (or
/// `n ∈ Z/k` for the symmetric sum), where `L` is the largest real part.
#[derive(Debug, Clone, Copy)]
struct NormalizedTheta {
    k: f64,
    re: f64,
    im: f64,
    spacing: f64,
    offset: f64,
}

impl NormalizedTheta {
    fn new(k: u32, omega: Complex64, choice: ThetaChoice) -> Self {
        let kf = k as f64;
        let (spacing, offset) = match choice {
            ThetaChoice::Single(l) => (1.0, l.rem_euclid(k as i64) as f64 / kf),
            ThetaChoice::SymmetricSum => (1.0 / kf, 0.0),
        };
        Self { k: kf, re: omega.re, im: omega.im, spacing, offset }
    }

    fn eval(&self, x: f64, y: f64) -> Complex64 {
        // nearest lattice point and enough neighbors to reach e^{-40}
        let j0 = ((y - self.offset) / self.spacing).round();
        let decay = self.k * PI * self.im * self.spacing * self.spacing;
        let reach = ((40.0 / decay).sqrt() + 2.0).ceil() as i64;
        let reach = reach.min(10_000);
        let mut terms = Vec::with_capacity(2 * reach as usize + 1);
        let mut top = f64::MIN;
        for j in -reach..=reach {
            let n = self.offset + (j0 + j as f64) * self.spacing;
            let d = n - y;
            let re = -self.k * PI * self.im * d * d;
            let im = self.k * PI * self.re * d * d + 2.0 * self.k * PI * n * x;
            top = top.max(re);
            terms.push((re, im));
        }
        terms.iter().map(|(re, im)| Complex64::from_polar((re - top).exp(), *im)).sum()
    }

    fn min_over_x(&self, y: f64, nx: usize) -> f64 {
        let h = 1.0 / nx as f64;
        let (mut best, mut at) = (f64::MAX, 0.0);
        for i in 0..nx {
            let x = i as f64 * h;
            let v = self.eval(x, y).norm();
            if v < best {
                best = v;
                at = x;
            }
        }
        // golden-section refinement on the bracketing cells
        let (mut a, mut b) = (at - h, at + h);
        let r = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - r * (b - a);
        let mut d = a + r * (b - a);
        let (mut fc, mut fd) = (self.eval(c, y).norm(), self.eval(d, y).norm());
        for _ in 0..60 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - r * (b - a);
                fc = self.eval(c, y).norm();
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + r * (b - a);
                fd = self.eval(d, y).norm();
            }
        }
        best.min(fc).min(fd)
    }
}

/// Change of argument of `f` along the segment `p → q`, subdividing until
/// each step turns by less than `π/4`.
fn arg_change(f: &dyn Fn(f64, f64) -> Complex64, p: (f64, f64), q: (f64, f64), fp: Complex64, fq: Complex64, depth: u32) -> Result<f64> {
    let d = (fq / fp).arg();
    if d.abs() < PI / 4.0 {
        return Ok(d);
    }
    if depth == 0 {
        return Err(Error::ResolutionTooCoarse("argument varies too fast along a cell edge".into()));
    }
    let m = ((p.0 + q.0) / 2.0, (p.1 + q.1) / 2.0);
    let fm = f(m.0, m.1);
    if fm.norm() == 0.0 {
        return Err(Error::ResolutionTooCoarse("zero on a cell edge".into()));
    }
    Ok(arg_change(f, p, m, fp, fm, depth - 1)? + arg_change(f, m, q, fm, fq, depth - 1)?)
}

fn winding(f: &dyn Fn(f64, f64) -> Complex64, x0: f64, x1: f64, y0: f64, y1: f64) -> Result<i64> {
    let corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)];
    let vals: Vec<Complex64> = corners.iter().map(|c| f(c.0, c.1)).collect();
    let mut total = 0.0;
    for i in 0..4 {
        let j = (i + 1) % 4;
        total += arg_change(f, corners[i], corners[j], vals[i], vals[j], 40)?;
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

/// Zero of the genus-one section, with its winding number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifiedZero {
    pub x: f64,
    pub y: f64,
    pub multiplicity: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroLocus {
    pub s: f64,
    pub k: u32,
    pub threshold: f64,
    pub zeros: Vec<CertifiedZero>,
    /// Intervals of `y` around certified zeros where
    /// `min_x |θ| / (largest term) < threshold`.
    pub intervals: Vec<(f64, f64)>,
}

/// Grid and threshold for [`theta_zero_locus`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroLocusConfig {
    pub nx: usize,
    pub ny: usize,
    pub threshold: f64,
}

impl Default for ZeroLocusConfig {
    fn default() -> Self {
        Self { nx: 16, ny: 64, threshold: 0.5 }
    }
}

/// Zero locus of a genus-one theta function at `Ω(s)`, projected to `y`.
///
/// Zeros are certified by winding numbers on a grid of cells (the total
/// must equal the degree `k`) and located by quadtree refinement; the
/// reported set is the `y`-interval around each zero where the normalized
/// minimum over `x` stays below the threshold.
pub fn theta_zero_locus(ray: &GeodesicRay, s: f64, k: u32, choice: ThetaChoice, cfg: ZeroLocusConfig, exec: Exec) -> Result<ZeroLocus> {
    if ray.dim() != 1 {
        return Err(Error::Unsupported("zero loci are computed in genus one".into()));
    }
    if cfg.nx < 2 || cfg.ny < 2 || !(cfg.threshold > 0.0 && cfg.threshold < 1.0) {
        return Err(Error::ResolutionTooCoarse("need nx, ny >= 2 and 0 < threshold < 1".into()));
    }
    let om = ray.omega(s)?;
    let theta = NormalizedTheta::new(k, om.matrix()[(0, 0)], choice);
    let f = move |x: f64, y: f64| theta.eval(x, y);
    // irrational offsets keep grid lines off the symmetric zeros
    let (ox, oy) = (0.123_456_789 / cfg.nx as f64, 0.314_159_265 / cfg.ny as f64);
    let (hx, hy) = (1.0 / cfg.nx as f64, 1.0 / cfg.ny as f64);
    let cells = exec.map_range(cfg.nx * cfg.ny, |c| -> Result<Option<CertifiedZero>> {
        let (i, j) = (c / cfg.ny, c % cfg.ny);
        let (x0, y0) = (ox + i as f64 * hx, oy + j as f64 * hy);
        let w = winding(&f, x0, x0 + hx, y0, y0 + hy)?;
        if w == 0 {
            return Ok(None);
        }
        let (x, y) = refine_zero(&f, (x0, x0 + hx, y0, y0 + hy))?;
        Ok(Some(CertifiedZero { x: x.rem_euclid(1.0), y: y.rem_euclid(1.0), multiplicity: w.abs() }))
    });
    let mut zeros = Vec::new();
    for c in cells {
        if let Some(z) = c? {
            zeros.push(z);
        }
    }
    let count: i64 = zeros.iter().map(|z| z.multiplicity).sum();
    if count != k as i64 {
        return Err(Error::ResolutionTooCoarse(format!("found {count} zeros, the degree is {k}")));
    }
    zeros.sort_by(|a, b| a.y.partial_cmp(&b.y).expect("finite"));

    let g = |y: f64| theta.min_over_x(y, cfg.nx.max(16)) - cfg.threshold;
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    for z in &zeros {
        if intervals.iter().any(|(a, b)| z.y >= *a && z.y <= *b) {
            continue;
        }
        let lo = edge(&g, z.y, -hy)?;
        let hi = edge(&g, z.y, hy)?;
        intervals.push((lo, hi));
    }
    Ok(ZeroLocus { s, k, threshold: cfg.threshold, zeros, intervals })
}

fn refine_zero(f: &dyn Fn(f64, f64) -> Complex64, cell: (f64, f64, f64, f64)) -> Result<(f64, f64)> {
    let (mut x0, mut x1, mut y0, mut y1) = cell;
    for _ in 0..40 {
        let (xm, ym) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
        let quads = [(x0, xm, y0, ym), (xm, x1, y0, ym), (x0, xm, ym, y1), (xm, x1, ym, y1)];
        let mut next = None;
        for q in quads {
            if winding(f, q.0, q.1, q.2, q.3)? != 0 {
                next = Some(q);
                break;
            }
        }
        match next {
            Some(q) => (x0, x1, y0, y1) = q,
            // the zero sits on an internal edge: the midpoint is within the cell size
            None => break,
        }
        if x1 - x0 < 1e-12 && y1 - y0 < 1e-12 {
            break;
        }
    }
    Ok(((x0 + x1) / 2.0, (y0 + y1) / 2.0))
}

/// Walks from `y0` (where `g < 0`) in steps of `step` until `g ≥ 0`, then
/// bisects.
fn edge(g: &dyn Fn(f64) -> f64, y0: f64, step: f64) -> Result<f64> {
    let mut inside = y0;
    let mut probe = y0 + step / 64.0;
    let mut width = step / 64.0;
    for _ in 0..200 {
        if g(probe) >= 0.0 {
            let (mut a, mut b) = (inside, probe);
            for _ in 0..60 {
                let m = (a + b) / 2.0;
                if g(m) < 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            return Ok((a + b) / 2.0);
        }
        inside = probe;
        width *= 2.0;
        probe = inside + width.clamp(-step.abs(), step.abs());
        if (probe - y0).abs() > 1.0 {
            break;
        }
    }
    Err(Error::ResolutionTooCoarse("threshold region covers the whole period".into()))
}

fn circle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Hausdorff distance on `R/Z` between a union of intervals and a finite
/// point set.
pub fn hausdorff_g1(intervals: &[(f64, f64)], points: &[f64]) -> f64 {
    if intervals.is_empty() || points.is_empty() {
        return f64::INFINITY;
    }
    let to_points = |y: f64| points.iter().map(|p| circle_dist(y, *p)).fold(f64::INFINITY, f64::min);
    let inside = |p: f64, (a, b): (f64, f64)| {
        let w = b - a;
        (p - a).rem_euclid(1.0) <= w
    };
    let to_set = |p: f64| {
        intervals
            .iter()
            .map(|&iv| if inside(p, iv) { 0.0 } else { circle_dist(p, iv.0).min(circle_dist(p, iv.1)) })
            .fold(f64::INFINITY, f64::min)
    };
    let mut d = points.iter().map(|p| to_set(*p)).fold(0.0, f64::max);
    for &(a, b) in intervals {
        d = d.max(to_points(a)).max(to_points(b));
        // farthest interior points sit halfway between divisor points
        let mut sorted = points.to_vec();
        sorted.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
        for w in 0..sorted.len() {
            let next = if w + 1 < sorted.len() { sorted[w + 1] } else { sorted[0] + 1.0 };
            let mid = ((sorted[w] + next) / 2.0).rem_euclid(1.0);
            if inside(mid, (a, b)) {
                d = d.max(to_points(mid));
            }
        }
    }
    d
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub s: f64,
    pub k: u32,
    pub hausdorff_distance: f64,
    pub divisor: Vec<f64>,
    pub locus: ZeroLocus,
}

/// Zero locus at `Ω(s)` against the tropical divisor.
pub fn compare_with_divisor(ray: &GeodesicRay, s: f64, k: u32, choice: ThetaChoice, cfg: ZeroLocusConfig, exec: Exec) -> Result<Comparison> {
    let locus = theta_zero_locus(ray, s, k, choice, cfg, exec)?;
    let divisor = tropical_points_g1(k, choice);
    let hausdorff_distance = hausdorff_g1(&locus.intervals, &divisor);
    Ok(Comparison { s, k, hausdorff_distance, divisor, locus })
}

/// Certificate that `θ^l` has no zero on the fiber over `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoZeroCertificate {
    /// Gap `Δ` between the two smallest values of `(n - y)²`, `n ∈ Z + l/k`.
    pub margin: f64,
    /// `k Im Ω` must exceed `ln 5 / (πΔ)`.
    pub threshold: f64,
    pub certified: bool,
}

/// Genus one, single section: when `u = k Im Ω > ln 5/(πΔ)` the other terms
/// sum to at most half the dominant one, so `|θ| ≥ ½ · dominant`.
pub fn no_zero_certificate(omega: Complex64, k: u32, l: i64, y: f64) -> NoZeroCertificate {
    let kf = k as f64;
    let off = l.rem_euclid(k as i64) as f64 / kf;
    let n0 = (y - off).round() + off;
    let d0 = (n0 - y).powi(2);
    let d1 = ((n0 - 1.0 - y).powi(2)).min((n0 + 1.0 - y).powi(2));
    let margin = d1 - d0;
    let threshold = if margin > 0.0 { 5f64.ln() / (PI * margin) } else { f64::INFINITY };
    NoZeroCertificate { margin, threshold, certified: kf * omega.im > threshold }
}

/// `min_x |θ^l(x, y)|` divided by the dominant term.
pub fn normalized_min_over_x(omega: Complex64, k: u32, l: i64, y: f64, nx: usize) -> f64 {
    NormalizedTheta::new(k, omega, ThetaChoice::Single(l)).min_over_x(y, nx)
}

/// Complexified `Ω(s)` entry for genus one.
pub fn omega_g1(ray: &GeodesicRay, s: f64) -> Result<Complex64> {
    Ok(ray.omega(s)?.matrix()[(0, 0)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r1(v: f64) -> RMat {
        RMat::from_element(1, 1, v)
    }

    #[test]
    fn neighbors_examples() {
        assert_eq!(lattice_neighbors(&[0.3], &r1(1.0), None).unwrap(), vec![vec![0]]);
        assert_eq!(lattice_neighbors(&[0.5], &r1(1.0), None).unwrap(), vec![vec![0], vec![1]]);
        let n = lattice_neighbors(&[0.5, 0.5], &RMat::identity(2, 2), None).unwrap();
        assert_eq!(n, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(lattice_neighbors(&[0.5], &r1(1.0), Some(0)), Err(Error::RadiusTooSmall));
    }

    #[test]
    fn membership_g1() {
        let one = r1(1.0);
        for (y, expect) in [(0.5, true), (1.5, true), (0.3, false), (0.0, false)] {
            assert_eq!(tropical_divisor_membership(&[y], &one, 1).unwrap(), expect);
        }
        for (y, expect) in [(0.25, true), (0.75, true), (1.25, true), (0.5, false)] {
            assert_eq!(tropical_divisor_membership(&[y], &one, 2).unwrap(), expect);
        }
    }

    #[test]
    fn membership_scan_matches_exact_points() {
        for k in 1..=3u32 {
            let pts = tropical_points_g1(k, ThetaChoice::SymmetricSum);
            for i in 0..400 {
                let y = i as f64 / 400.0;
                let exact = pts.iter().any(|p| (p - y).abs() < 1e-12);
                assert_eq!(tropical_divisor_membership(&[y], &r1(2.3), k).unwrap(), exact, "y = {y}, k = {k}");
            }
        }
    }

    #[test]
    fn g2_divisor_is_half_integer_grid() {
        let samples = tropical_divisor_samples_g2(&RMat::identity(2, 2), 1, 40, Exec::default()).unwrap();
        assert!(!samples.is_empty());
        for p in samples {
            let near = (p[0] - 0.5).abs() < 1.0 / 40.0 || (p[1] - 0.5).abs() < 1.0 / 40.0;
            assert!(near, "{p:?}");
        }
        assert!(tropical_divisor_membership(&[0.5, 0.3], &RMat::identity(2, 2), 1).unwrap());
        assert!(!tropical_divisor_membership(&[0.2, 0.3], &RMat::identity(2, 2), 1).unwrap());
    }

    #[test]
    fn metric_limits() {
        let ray = GeodesicRay::standard(1, 1.0);
        let m = rescaled_metric(&ray, 3.0).unwrap();
        assert!((&m.scaled - &m.limit).amax() < (-6f64).exp() * 3.0);
        let a = RMat::from_row_slice(2, 2, &[1.0, 0.3, 0.0, 1.2]);
        let b = RMat::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.2]) * a.clone().try_inverse().unwrap().transpose();
        let ray = GeodesicRay::new(a.clone(), b, vec![0.7, 0.7]).unwrap();
        let e1 = (&rescaled_metric(&ray, 4.0).unwrap().scaled - &embed_yy(2, &(&a * a.transpose()))).amax();
        let e2 = (&rescaled_metric(&ray, 6.0).unwrap().scaled - &embed_yy(2, &(&a * a.transpose()))).amax();
        assert!(e2 < e1 && e2 < 1e-3);
        let mixed = GeodesicRay::new(RMat::identity(2, 2), RMat::zeros(2, 2), vec![1.0, 0.5]).unwrap();
        let m = rescaled_metric(&mixed, 5.0).unwrap();
        assert!(m.mixed_rates && m.limit_rank == 1);
    }

    #[test]
    fn halfline_limit() {
        let start = SiegelPoint::imaginary_scalar(1, 1.0);
        let line = HalfLine::new(start, r1(0.0), r1(1.0)).unwrap();
        assert!((line.limit_form()[(0, 0)] - 1.0).abs() < 1e-15);
        let e10 = (rescaled_metric_halfline(&line, 10.0).unwrap().scaled - embed_yy(1, &r1(1.0))).amax();
        let e100 = (rescaled_metric_halfline(&line, 100.0).unwrap().scaled - embed_yy(1, &r1(1.0))).amax();
        assert!(e100 < e10 && e100 < 0.03);
    }

    #[test]
    fn invalid_rays() {
        assert!(GeodesicRay::new(r1(0.0), r1(0.0), vec![1.0]).is_err());
        assert!(GeodesicRay::new(r1(1.0), r1(0.0), vec![-1.0]).is_err());
        let a = RMat::identity(2, 2);
        let b = RMat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(GeodesicRay::new(a, b, vec![1.0, 1.0]).is_err());
    }

    /// Independent root finder: for the sections used here the zero lies on
    /// `x = 1/2 + (shift)`; minimize `|θ|` along `y` by golden section.
    fn oracle_zero_y(k: u32, choice: ThetaChoice, s: f64) -> Vec<f64> {
        let om = omega_g1(&GeodesicRay::standard(1, 1.0), s).unwrap();
        let th = NormalizedTheta::new(k, om, choice);
        tropical_points_g1(k, choice)
            .into_iter()
            .map(|p| {
                let (mut a, mut b) = (p - 0.05, p + 0.05);
                for _ in 0..200 {
                    let m1 = a + (b - a) / 3.0;
                    let m2 = b - (b - a) / 3.0;
                    if th.min_over_x(m1, 64) < th.min_over_x(m2, 64) {
                        b = m2;
                    } else {
                        a = m1;
                    }
                }
                (a + b) / 2.0
            })
            .collect()
    }

    #[test]
    fn zero_locus_level_one() {
        let ray = GeodesicRay::standard(1, 1.0);
        let cmp = compare_with_divisor(&ray, 3.0, 1, ThetaChoice::Single(0), ZeroLocusConfig::default(), Exec::default()).unwrap();
        assert_eq!(cmp.locus.zeros.len(), 1);
        let z = cmp.locus.zeros[0];
        assert!((z.x - 0.5).abs() < 1e-6 && (z.y - 0.5).abs() < 1e-6);
        assert!(cmp.hausdorff_distance < 0.02);
        let later = compare_with_divisor(&ray, 4.0, 1, ThetaChoice::Single(0), ZeroLocusConfig::default(), Exec::default()).unwrap();
        assert!(later.hausdorff_distance < cmp.hausdorff_distance);
        for y in oracle_zero_y(1, ThetaChoice::Single(0), 3.0) {
            assert!(cmp.locus.zeros.iter().any(|z| (z.y - y).abs() < 1e-4));
        }
    }

    #[test]
    fn zero_locus_symmetric_sum() {
        let ray = GeodesicRay::standard(1, 1.0);
        let cmp = compare_with_divisor(&ray, 3.0, 2, ThetaChoice::SymmetricSum, ZeroLocusConfig::default(), Exec::default()).unwrap();
        assert_eq!(cmp.divisor, vec![0.25, 0.75]);
        assert_eq!(cmp.locus.zeros.len(), 2);
        assert!(cmp.hausdorff_distance < 0.02);
        for y in oracle_zero_y(2, ThetaChoice::SymmetricSum, 3.0) {
            assert!(cmp.locus.zeros.iter().any(|z| (z.y - y).abs() < 1e-4));
        }
    }

    #[test]
    fn zero_locus_moderate_s() {
        // away from the tropical limit the locus is wider but still certified
        let ray = GeodesicRay::new(r1(1.0), r1(0.4), vec![1.0]).unwrap();
        let loc = theta_zero_locus(&ray, 0.2, 3, ThetaChoice::Single(1), ZeroLocusConfig::default(), Exec::default()).unwrap();
        assert_eq!(loc.zeros.iter().map(|z| z.multiplicity).sum::<i64>(), 3);
    }

    #[test]
    fn no_zero_certificate_holds() {
        let ray = GeodesicRay::standard(1, 1.0);
        for k in 1..=3u32 {
            for l in 0..k as i64 {
                for i in 0..40 {
                    let y = (i as f64 + 0.37) / 40.0;
                    for s in [0.5, 1.0, 2.0, 3.0] {
                        let om = omega_g1(&ray, s).unwrap();
                        let cert = no_zero_certificate(om, k, l, y);
                        if cert.certified {
                            assert!(normalized_min_over_x(om, k, l, y, 32) > 0.5);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn hausdorff_examples() {
        assert!((hausdorff_g1(&[(0.4, 0.6)], &[0.5]) - 0.1).abs() < 1e-15);
        assert!((hausdorff_g1(&[(0.49, 0.51), (0.9, 0.95)], &[0.5]) - 0.45).abs() < 1e-12);
        assert!((hausdorff_g1(&[(0.95, 1.05)], &[0.0]) - 0.05).abs() < 1e-12);
    }
}

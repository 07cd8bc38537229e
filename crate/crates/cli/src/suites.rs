//! Verification suites. Each suite draws its random inputs up front from a
//! seeded generator, then evaluates independent jobs in the worker pool and
//! gathers the cases in job order.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thetaquant::bks::{
    bks_map, frame_constant, gram_matrix, halfform_self_pairing, prequantum_pairing,
    prequantum_pairing_quadrature, regularize, unitarity_residual, PairingRoute,
};
use thetaquant::boundary::{intersection_pairing_check, smatrix_limit, EPSILON_SCHEDULE};
use thetaquant::boundary::DEFAULT_ENTRY_BOUND;
use thetaquant::heisenberg::{all_unit_elements, HeisenbergElement};
use thetaquant::matrix::{det_invsqrt_posreal, det_sqrt_path, identity, max_abs, CMat, ComplexSymMatrix};
use thetaquant::metaplectic::{decompose_symplectic, intertwining_check, sp_invariance_check, verify_lemma_g1, QuadratureGrid};
use thetaquant::random::{random_metaplectic_generator, random_siegel_point, random_symplectic, random_symplectic_singular_c};
use thetaquant::siegel::{cayley, cayley_inverse, sp_act_d, sp_act_h, symplectic_form, DiscPoint, SiegelPoint};
use thetaquant::theta::{quasi_periodicity_residual, semicharacter, theta_eval, theta_section_eval, Characteristic, LatticeData};
use thetaquant::tropical::{
    compare_with_divisor, rescaled_metric, tropical_divisor_membership, tropical_points_g1, GeodesicRay, ThetaChoice,
    ZeroLocusConfig,
};
use thetaquant::weil_brezin::{default_window_steps, wb_forward, wb_inverse, wb_unitarity_check, PacketState, WBVector};
use thetaquant::{Complex64, Exec};

use crate::error::{CliError, CliResult};
use crate::report::{Case, ConfigEcho, SuiteReport};

pub const SUITES: [&str; 10] =
    ["theta", "siegel", "wb", "metaplectic", "bks", "heisenberg", "intersection", "smatrix", "tropical", "all"];

/// Tolerance overrides from `--tol`: a number applies to every suite, an
/// object maps suite names to numbers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ToleranceOverride {
    pub global: Option<f64>,
    pub per_suite: BTreeMap<String, f64>,
}

impl ToleranceOverride {
    pub fn parse(arg: &str) -> CliResult<Self> {
        let v = crate::input::parse_value(arg)?;
        if let Some(t) = v.as_f64() {
            return Ok(Self { global: Some(t), per_suite: BTreeMap::new() });
        }
        let map = v
            .as_object()
            .ok_or_else(|| CliError::ConfigInvalid("--tol must be a number or an object of numbers".into()))?;
        let mut per_suite = BTreeMap::new();
        for (name, t) in map {
            if !SUITES.contains(&name.as_str()) {
                return Err(CliError::UnknownSuite(name.clone()));
            }
            let t = t.as_f64().ok_or_else(|| CliError::ConfigInvalid(format!("tolerance for {name} is not a number")))?;
            per_suite.insert(name.clone(), t);
        }
        Ok(Self { global: None, per_suite })
    }

    fn for_suite(&self, name: &str) -> Option<f64> {
        self.per_suite.get(name).copied().or(self.global)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub g: Option<usize>,
    pub k: Option<u32>,
    pub tol: ToleranceOverride,
    pub seed: u64,
    /// Ray parameter of the tropical comparison.
    pub s: f64,
    pub exec: Exec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { g: None, k: None, tol: ToleranceOverride::default(), seed: 7, s: 3.0, exec: Exec::default() }
    }
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        if let Some(g) = self.g {
            if !(1..=4).contains(&g) {
                return Err(CliError::ConfigInvalid(format!("g = {g} is outside [1, 4]")));
            }
        }
        if let Some(k) = self.k {
            if !(1..=8).contains(&k) {
                return Err(CliError::ConfigInvalid(format!("k = {k} is outside [1, 8]")));
            }
        }
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(CliError::ConfigInvalid("s must be positive".into()));
        }
        for t in self.tol.global.iter().chain(self.tol.per_suite.values()) {
            if !(*t > 0.0) {
                return Err(CliError::ConfigInvalid("tolerances must be positive".into()));
            }
        }
        Ok(())
    }

    fn echo(&self) -> ConfigEcho {
        ConfigEcho { g: self.g, k: self.k, seed: self.seed, s: self.s }
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt)
    }

    /// Genera to sweep: the requested one if the suite supports it.
    fn genera(&self, suite: &str, default: &[usize], supported: &[usize]) -> CliResult<Vec<usize>> {
        match self.g {
            Some(g) if supported.contains(&g) => Ok(vec![g]),
            Some(g) => Err(CliError::ConfigInvalid(format!("suite {suite} does not support g = {g}"))),
            None => Ok(default.to_vec()),
        }
    }

    fn levels(&self, suite: &str, default: &[u32], max: u32) -> CliResult<Vec<u32>> {
        match self.k {
            Some(k) if k <= max => Ok(vec![k]),
            Some(k) => Err(CliError::ConfigInvalid(format!("suite {suite} supports k <= {max}, got {k}"))),
            None => Ok(default.to_vec()),
        }
    }
}

type Job = Box<dyn Fn() -> Vec<Case> + Send + Sync>;

fn job<F: Fn() -> Vec<Case> + Send + Sync + 'static>(f: F) -> Job {
    Box::new(f)
}

fn run_jobs(jobs: Vec<Job>, exec: Exec) -> Vec<Case> {
    exec.map_slice(&jobs, |j| j()).into_iter().flatten().collect()
}

/// Runs one suite, or every suite for `all`.
pub fn run_suite(name: &str, cfg: &RunConfig) -> CliResult<SuiteReport> {
    cfg.validate()?;
    if name == "all" {
        let mut cases = Vec::new();
        let mut skipped = Vec::new();
        for sub in SUITES.iter().filter(|s| **s != "all") {
            match suite_cases(sub, cfg) {
                Ok(cs) => cases.extend(cs.into_iter().map(|mut c| {
                    c.id = format!("{sub}/{}", c.id);
                    c
                })),
                Err(CliError::ConfigInvalid(why)) => skipped.push(format!("{sub}: {why}")),
                Err(e) => return Err(e),
            }
        }
        return Ok(SuiteReport::new("all", cfg.echo(), cases, skipped));
    }
    let cases = suite_cases(name, cfg)?;
    Ok(SuiteReport::new(name, cfg.echo(), cases, Vec::new()))
}

fn suite_cases(name: &str, cfg: &RunConfig) -> CliResult<Vec<Case>> {
    let jobs = match name {
        "theta" => theta_jobs(cfg)?,
        "siegel" => siegel_jobs(cfg)?,
        "wb" => wb_jobs(cfg)?,
        "metaplectic" => metaplectic_jobs(cfg)?,
        "bks" => bks_jobs(cfg)?,
        "heisenberg" => heisenberg_jobs(cfg)?,
        "intersection" => intersection_jobs(cfg)?,
        "smatrix" => smatrix_jobs(cfg)?,
        "tropical" => tropical_jobs(cfg)?,
        other => return Err(CliError::UnknownSuite(other.to_string())),
    };
    let mut cases = run_jobs(jobs, cfg.exec);
    if let Some(t) = cfg.tol.for_suite(name) {
        cases.iter_mut().for_each(|c| c.set_tolerance(t));
    }
    Ok(cases)
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rel_diff(a: &CMat, b: &CMat) -> f64 {
    max_abs(&(a - b)) / max_abs(b).max(1.0)
}

// ---------------------------------------------------------------- theta

/// `θ(0; i) = π^{1/4} / Γ(3/4)`.
const THETA_AT_I: f64 = 1.086_434_811_213_308;

fn theta_jobs(cfg: &RunConfig) -> CliResult<Vec<Job>> {
    let gs = cfg.genera("theta", &[1, 2], &[1, 2, 3, 4])?;
    let ks = cfg.levels("theta", &[1, 2, 3], 8)?;
    let mut rng = cfg.rng(1);
    let mut jobs = Vec::new();

    if gs.contains(&1) && ks.contains(&1) {
        jobs.push(job(|| {
            let r = LatticeData::new(1, SiegelPoint::imaginary_scalar(1, 1.0)).and_then(|d| {
                theta_eval(&d, &Characteristic::zero(1, 1), &[c(0.0, 0.0)], 1e-15, Exec::Sequential)
                    .map(|v| (v.value - THETA_AT_I).norm())
            });
            vec![Case::from_result("value/omega=i", 1e-13, r)]
        }));
    }

    for &g in &gs {
        for &k in &ks {
            let omega = random_siegel_point(&mut rng, g);
            let points: Vec<(Vec<f64>, Vec<f64>)> = (0..3)
                .map(|_| ((0..g).map(|_| rng.gen::<f64>()).collect(), (0..g).map(|_| rng.gen::<f64>()).collect()))
                .collect();
            let mut lambdas: Vec<Vec<i64>> = (0..2 * g)
                .map(|j| (0..2 * g).map(|i| i64::from(i == j)).collect())
                .collect();
            lambdas.push((0..2 * g).map(|_| rng.gen_range(-2..=2)).collect());
            let z: Vec<Complex64> = (0..g).map(|_| c(rng.gen_range(-0.5..0.5), rng.gen_range(-0.3..0.3))).collect();
            let om = omega.clone();
            jobs.push(job(move || {
                let r = (|| -> thetaquant::Result<f64> {
                    let data = LatticeData::new(k, om.clone())?;
                    let mut worst: f64 = 0.0;
                    for l in Characteristic::all(g, k) {
                        for (x, y) in &points {
                            let base = theta_section_eval(&data, &l, x, y, 1e-14, Exec::Sequential)?.value.norm();
                            for lam in &lambdas {
                                let res = quasi_periodicity_residual(&data, &l, x, y, lam, 1e-14)?;
                                worst = worst.max(res / base.max(1.0));
                            }
                        }
                    }
                    Ok(worst)
                })();
                vec![Case::from_result(format!("quasi_periodicity/g={g}/k={k}"), 1e-10, r)]
            }));
            let om = omega.clone();
            jobs.push(job(move || {
                let r = (|| -> thetaquant::Result<f64> {
                    let data = LatticeData::new(k, om.clone())?;
                    let l = Characteristic::zero(g, k);
                    let loose = theta_eval(&data, &l, &z, 1e-6, Exec::Sequential)?;
                    let tight = theta_eval(&data, &l, &z, 1e-14, Exec::Sequential)?;
                    let allowed = loose.error_bound + tight.error_bound + 1e-15 * tight.value.norm().max(1.0);
                    Ok((loose.value - tight.value).norm() / allowed)
                })();
                vec![Case::from_result(format!("truncation_bound/g={g}/k={k}"), 1.0, r).into_structural()]
            }));
        }
        let pairs: Vec<(Vec<i64>, Vec<i64>)> = (0..64)
            .map(|_| {
                let v = |rng: &mut ChaCha8Rng| (0..2 * g).map(|_| rng.gen_range(-5..=5)).collect::<Vec<i64>>();
                (v(&mut rng), v(&mut rng))
            })
            .collect();
        jobs.push(job(move || {
            // α(λ + μ) = α(λ) α(μ) (-1)^{ω(λ, μ)}
            let violations = pairs
                .iter()
                .filter(|(a, b)| {
                    let sum: Vec<i64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                    let af: Vec<f64> = a.iter().map(|&v| v as f64).collect();
                    let bf: Vec<f64> = b.iter().map(|&v| v as f64).collect();
                    let w = symplectic_form(&af, &bf).round() as i64;
                    let sign = if w.rem_euclid(2) == 0 { 1 } else { -1 };
                    semicharacter(&sum) != semicharacter(a) * semicharacter(b) * sign
                })
                .count();
            vec![Case::structural(format!("semicharacter_law/g={g}"), violations as f64, 0.0)]
        }));
    }
    Ok(jobs)
}

// ---------------------------------------------------------------- siegel

fn siegel_jobs(cfg: &RunConfig) -> CliResult<Vec<Job>> {
    let gs = cfg.genera("siegel", &[1, 2, 3], &[1, 2, 3, 4])?;
    let mut rng = cfg.rng(2);
    let mut jobs = Vec::new();
    for &g in &gs {
        for i in 0..5 {
            let m1 = random_symplectic(&mut rng, g);
            let m2 = random_symplectic(&mut rng, g);
            let omega = random_siegel_point(&mut rng, g);
            let omega_b = random_siegel_point(&mut rng, g);
            jobs.push(job(move || {
                let law = (|| -> thetaquant::Result<f64> {
                    let lhs = sp_act_h(&m1, &sp_act_h(&m2, &omega)?)?;
                    let rhs = sp_act_h(&m1.compose(&m2), &omega)?;
                    Ok(rel_diff(lhs.matrix(), rhs.matrix()))
                })();
                let round = (|| -> thetaquant::Result<f64> {
                    let back = cayley_inverse(&cayley(&omega)?)?;
                    Ok(rel_diff(back.omega().matrix(), omega.matrix()))
                })();
                let equiv = (|| -> thetaquant::Result<f64> {
                    let via_disc = sp_act_d(&m1, &cayley(&omega)?)?;
                    let via_h = cayley(&sp_act_h(&m1, &omega)?)?;
                    Ok(max_abs(&(via_disc.matrix() - via_h.matrix())))
                })();
                let path = branch_path_residual(&omega, &omega_b);
                vec![
                    Case::from_result(format!("action_law/g={g}/{i}"), 1e-9, law),
                    Case::from_result(format!("cayley_round_trip/g={g}/{i}"), 1e-10, round),
                    Case::from_result(format!("cayley_equivariance/g={g}/{i}"), 1e-9, equiv),
                    Case::from_result(format!("branch_path_reparametrization/g={g}/{i}"), 1e-12, path),
                ]
            }));
        }
    }
    Ok(jobs)
}

/// Continues `det(-iΩ(t))^{1/2}` along the segment from `a` to `b` with two
/// step counts and a reparametrized time, and compares with the branch that
/// is positive on real positive matrices.
fn branch_path_residual(a: &SiegelPoint, b: &SiegelPoint) -> thetaquant::Result<f64> {
    let minus_i = c(0.0, -1.0);
    let p = |t: f64| (a.matrix() * c(1.0 - t, 0.0) + b.matrix() * c(t, 0.0)) * minus_i;
    let posreal = |m: CMat| -> thetaquant::Result<Complex64> {
        Ok(1.0 / det_invsqrt_posreal(&ComplexSymMatrix::new(m)?)?.value)
    };
    let start = posreal(p(0.0))?;
    let target = posreal(p(1.0))?;
    let coarse = det_sqrt_path(p, 16, Some(start))?.value;
    let fine = det_sqrt_path(|t| p(t * t), 256, Some(start))?.value;
    Ok(((coarse - target).norm()).max((fine - target).norm()) / target.norm())
}

// ---------------------------------------------------------------- wb

const WB_N: usize = 60;

fn wb_jobs(cfg: &RunConfig) -> CliResult<Vec<Job>> {
    let gs = cfg.genera("wb", &[1, 2], &[1, 2])?;
    let ks = cfg.levels("wb", &[1, 2, 3], 4)?;
    let mut rng = cfg.rng(3);
    let exec = cfg.exec;
    let mut jobs = Vec::new();
    if gs.contains(&1) {
        for i in 0..20 {
            let k = ks[i % ks.len()];
            let a = PacketState::random(&mut rng, 1, k);
            let b = PacketState::random(&mut rng, 1, k);
            jobs.push(job(move || {
                let sa = wb_inverse(&WBVector::Packets(a.clone()), WB_N, exec);
                let sb = wb_inverse(&WBVector::Packets(b.clone()), WB_N, exec);
                let (sa, sb) = match (sa, sb) {
                    (Ok(x), Ok(y)) => (x, y),
                    (Err(e), _) | (_, Err(e)) => {
                        return vec![
                            Case::failed(format!("round_trip/k={k}/{i}"), 1e-10, &e),
                            Case::failed(format!("unitarity/k={k}/{i}"), 1e-8, &e),
                        ]
                    }
                };
                let round = wb_forward(&sa, default_window_steps(WB_N, k), exec)
                    .and_then(|v| wb_inverse(&v, WB_N, exec))
                    .and_then(|back| back.sup_distance(&sa));
                let unit = wb_unitarity_check(&sa, &sb, exec).map(|(t, w)| (t - w).norm());
                vec![
                    Case::from_result(format!("round_trip/k={k}/{i}"), 1e-10, round),
                    Case::from_result(format!("unitarity/k={k}/{i}"), 1e-8, unit),
                ]
            }));
        }
    }
    if gs.contains(&2) && ks.contains(&1) {
        let v = PacketState::random(&mut rng, 2, 1);
        jobs.push(job(move || {
            let n = 20;
            let r = wb_inverse(&WBVector::Packets(v.clone()), n, exec).and_then(|s| {
                let back = wb_inverse(&wb_forward(&s, 6 * n, exec)?, n, exec)?;
                back.sup_distance(&s)
            });
            vec![Case::from_result("round_trip/g=2/k=1", 1e-10, r)]
        }));
    }
    Ok(jobs)
}

// ---------------------------------------------------------------- metaplectic

fn metaplectic_jobs(cfg: &RunConfig) -> CliResult<Vec<Job>> {
    cfg.genera("metaplectic", &[1], &[1])?;
    let ks = cfg.levels("metaplectic", &[1, 2], 4)?;
    let mut rng = cfg.rng(4);
    let exec = cfg.exec;
    let mut jobs = Vec::new();
    for i in 0..10 {
        let k = ks[i % ks.len()];
        let gen = random_metaplectic_generator(&mut rng, 1);
        let omega = random_siegel_point(&mut rng, 1).matrix()[(0, 0)];
        jobs.push(job(move || match verify_lemma_g1(&gen, omega, k, QuadratureGrid::default(), exec) {
            Ok(rep) => vec![
                Case::new(format!("lemma/k={k}/{i}"), rep.relative_error, 1e-6),
                Case::new(format!("norm_preservation/k={k}/{i}"), rep.norm_defect, 1e-6),
            ],
            Err(e) => vec![
                Case::failed(format!("lemma/k={k}/{i}"), 1e-6, &e),
                Case::failed(format!("norm_preservation/k={k}/{i}"), 1e-6, &e),
            ],
        }));
    }
    let mut mats = Vec::new();
    for i in 0..10 {
        let k = ks[i % ks.len()];
        let m = if i % 3 == 0 { random_symplectic_singular_c(&mut rng, 1) } else { random_symplectic(&mut rng, 1) };
        let omega = random_siegel_point(&mut rng, 1);
        mats.push(m.clone());
        jobs.push(job(move || {
            let r = Characteristic::all(1, k)
                .iter()
                .map(|l| sp_invariance_check(&m, l, &omega, k).map(|rep| rep.max()))
                .try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v)));
            let tau = cayley(&omega);
            let inter = tau.and_then(|t| intertwining_check(&m, &t, k));
            vec![
                Case::from_result(format!("sp_invariance/k={k}/{i}"), 1e-7, r),
                Case::from_result(format!("intertwining/k={k}/{i}"), 1e-8, inter),
            ]
        }));
    }
    jobs.push(job(move || {
        let two = mats
            .iter()
            .filter(|m| decompose_symplectic(m).map(|e| e.factors().len() == 2).unwrap_or(false))
            .count();
        vec![Case::structural("two_generator_decompositions_missing", 2usize.saturating_sub(two) as f64, 0.0)]
    }));
    Ok(jobs)
}

// ---------------------------------------------------------------- bks

fn gram_residual(g: usize, k: u32, a: &CMat, b: &CMat, route: PairingRoute, exec: Exec) -> thetaquant::Result<f64> {
    let gram = gram_matrix(k, a, b, route, exec)?;
    Ok(max_abs(&(&gram - identity(gram.nrows()) * c(frame_constant(g, k), 0.0))))
}

fn bks_jobs(cfg: &RunConfig) -> CliResult<Vec<Job>> {
    let gs = cfg.genera("bks", &[1, 2], &[1, 2, 3])?;
    let ks = cfg.levels("bks", &[1, 2, 3], 4)?;
    let mut rng = cfg.rng(5);
    let exec = cfg.exec;
    let mut jobs = Vec::new();
    for &g in &gs {
        for &k in &ks {
            for i in 0..10 {
                let a = random_siegel_point(&mut rng, g);
                let b = random_siegel_point(&mut rng, g);
                jobs.push(job(move || {
                    let r = gram_residual(g, k, a.matrix(), b.matrix(), PairingRoute::Quadrature, exec);
                    vec![Case::from_result(format!("theorem/g={g}/k={k}/{i}"), 1e-7, r)]
                }));
            }
            let a = random_siegel_point(&mut rng, g);
            let b = random_siegel_point(&mut rng, g);
            jobs.push(job(move || {
                let r = gram_residual(g, k, a.matrix(), b.matrix(), PairingRoute::ClosedForm, exec);
                vec![Case::from_result(format!("factorization/g={g}/k={k}"), 1e-10, r)]
            }));
            for i in 0..2 {
                let pts: Vec<SiegelPoint> = (0..3).map(|_| random_siegel_point(&mut rng, g)).collect();
                jobs.push(job(move || transitivity_cases(g, k, i, &pts, exec)));
            }
            jobs.push(job(move || {
                let mut worst: f64 = 0.0;
                let mut err = None;
                for &eps in &EPSILON_SCHEDULE {
                    let r = (|| -> thetaquant::Result<f64> {
                        let lo = regularize(&DiscPoint::scalar(g, c(-1.0, 0.0))?, eps)?;
                        let hi = regularize(&DiscPoint::scalar(g, c(1.0, 0.0))?, eps)?;
                        gram_residual(g, k, lo.matrix(), hi.matrix(), PairingRoute::Quadrature, exec)
                    })();
                    match r {
                        Ok(v) => worst = worst.max(v),
                        Err(e) => err = Some(e),
                    }
                }
                let id = format!("regularized_boundary/g={g}/k={k}");
                vec![match err {
                    Some(e) => Case::failed(id, 1e-6, e),
                    None => Case::new(id, worst, 1e-6),
                }]
            }));
        }
        for i in 0..5 {
            let omega = random_siegel_point(&mut rng, g);
            let k = ks[i % ks.len()];
            jobs.push(job(move || {
                let r = halfform_self_pairing(k, &omega)
                    .map(|(im, re)| if re > 0.0 { im.abs() } else { f64::INFINITY });
                vec![Case::from_result(format!("halfform_positivity/g={g}/{i}"), 1e-12, r)]
            }));
        }
    }
    if gs.contains(&1) {
        for &k in ks.iter().filter(|k| **k <= 2) {
            for i in 0..10 {
                let a = random_siegel_point(&mut rng, 1);
                let b = random_siegel_point(&mut rng, 1);
                jobs.push(job(move || {
                    let l = Characteristic::zero(1, k);
                    let r = prequantum_pairing(k, &l, &l, a.matrix(), b.matrix()).and_then(|closed| {
                        let quad = prequantum_pairing_quadrature(k, &l, &l, a.matrix(), b.matrix(), exec)?;
                        Ok((closed - quad).norm() / closed.norm())
                    });
                    vec![Case::from_result(format!("prequantum_closed_form/k={k}/{i}"), 1e-8, r)]
                }));
            }
        }
        for &k in &ks {
            let a = random_siegel_point(&mut rng, 1);
            let b = random_siegel_point(&mut rng, 1);
            jobs.push(job(move || {
                let r = gram_residual(1, k, a.matrix(), b.matrix(), PairingRoute::Torus { n: WB_N }, exec);
                vec![Case::from_result(format!("torus_route/k={k}"), 1e-8, r)]
            }));
        }
    }
    Ok(jobs)
}

fn transitivity_cases(g: usize, k: u32, i: usize, pts: &[SiegelPoint], exec: Exec) -> Vec<Case> {
    let route = PairingRoute::Quadrature;
    let r = (|| -> thetaquant::Result<(f64, f64, f64)> {
        let b01 = bks_map(k, pts[0].matrix(), pts[1].matrix(), route, exec)?;
        let b12 = bks_map(k, pts[1].matrix(), pts[2].matrix(), route, exec)?;
        let b02 = bks_map(k, pts[0].matrix(), pts[2].matrix(), route, exec)?;
        let g0 = gram_matrix(k, pts[0].matrix(), pts[0].matrix(), route, exec)?;
        let g1 = gram_matrix(k, pts[1].matrix(), pts[1].matrix(), route, exec)?;
        Ok((
            max_abs(&(&b12 * &b01 - &b02)),
            unitarity_residual(&b01, &g0, &g1),
            max_abs(&(&b01 - identity(b01.nrows()))),
        ))
    })();
    let ids = [
        format!("transitivity/g={g}/k={k}/{i}"),
        format!("unitarity/g={g}/k={k}/{i}"),
        format!("map_identity/g={g}/k={k}/{i}"),
    ];
    match r {
        Ok((a, b, d)) => vec![Case::new(&*ids[0], a, 1e-8), Case::new(&*ids[1], b, 1e-8), Case::new(&*ids[2], d, 1e-8)],
        Err(e) => ids.iter().map(|id| Case::failed(id.as_str(), 1e-8, &e)).collect(),
    }
}

// ---------------------------------------------------------------- heisenberg

fn heisenberg_jobs(cfg: &RunConfig) -> CliResult<Vec<Job>> {
    let gs = cfg.genera("heisenberg", &[1, 2], &[1, 2])?;
    let ks = cfg.levels("heisenberg", &[1, 2, 3, 4], 4)?;
    let mut rng = cfg.rng(6);
    let exec = cfg.exec;
    let mut jobs = Vec::new();
    for &g in &gs {
        for &k in &ks {
            let a = random_siegel_point(&mut rng, g);
            let b = random_siegel_point(&mut rng, g);
            let phases: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
            jobs.push(job(move || {
                let id = format!("intertwining/g={g}/k={k}");
                let map = match bks_map(k, a.matrix(), b.matrix(), PairingRoute::Quadrature, exec) {
                    Ok(m) => m,
                    Err(e) => return vec![Case::failed(id, 1e-8, e)],
                };
                let mut elems = all_unit_elements(g, k);
                for (j, &t) in phases.iter().enumerate() {
                    let mut h = elems[(j * 7 + 1) % elems.len()].clone();
                    h.lambda = Complex64::from_polar(1.0, t);
                    elems.push(h);
                }
                let comm = elems
                    .iter()
                    .map(|h| {
                        let hm = h.matrix();
                        max_abs(&(&map * &hm - &hm * &map))
                    })
                    .fold(0.0, f64::max);
                let law = elems
                    .iter()
                    .step_by(1 + elems.len() / 24)
                    .flat_map(|h1| elems.iter().step_by(1 + elems.len() / 24).map(move |h2| (h1, h2)))
                    .map(|(h1, h2)| max_abs(&(h1.compose(h2).matrix() - h1.matrix() * h2.matrix())))
                    .fold(0.0, f64::max);
                let ident = HeisenbergElement::identity(g, k).matrix();
                let unit = elems
                    .iter()
                    .map(|h| {
                        let m = h.matrix();
                        max_abs(&(m.adjoint() * &m - &ident))
                    })
                    .fold(0.0, f64::max);
                vec![
                    Case::new(id, comm, 1e-8),
                    Case::new(format!("group_law/g={g}/k={k}"), law, 1e-12),
                    Case::new(format!("unitary_action/g={g}/k={k}"), unit, 1e-12),
                ]
            }));
        }
    }
    Ok(jobs)
}

// ---------------------------------------------------------------- intersection

fn intersection_jobs(cfg: &RunConfig) -> CliResult<Vec<Job>> {
    let gs = cfg.genera("intersection", &[1, 2], &[1, 2])?;
    let ks = cfg.levels("intersection", &[1, 2, 3], 4)?;
    let mut jobs = Vec::new();
    for &g in &gs {
        for &k in &ks {
            jobs.push(job(move || {
                let r = (|| -> thetaquant::Result<(f64, f64)> {
                    let lo = DiscPoint::scalar(g, c(-1.0, 0.0))?;
                    let hi = DiscPoint::scalar(g, c(1.0, 0.0))?;
                    let rep = intersection_pairing_check(&lo, &hi, k, DEFAULT_ENTRY_BOUND)?;
                    Ok((rep.residual, (rep.boundary_value - frame_constant(g, k)).abs()))
                })();
                let (a, b) = (format!("standard_pair/g={g}/k={k}"), format!("boundary_constant/g={g}/k={k}"));
                match r {
                    Ok((res, cst)) => vec![Case::new(a, res, 1e-4), Case::new(b, cst, 1e-14)],
                    Err(e) => vec![Case::failed(a, 1e-4, &e), Case::failed(b, 1e-14, &e)],
                }
            }));
        }
    }
    if gs.contains(&1) {
        for &k in &ks {
            jobs.push(job(move || {
                // [[1,0],[1,1]] carries (-1, 1) to (i, 1)
                let r = (|| -> thetaquant::Result<f64> {
                    let a = DiscPoint::scalar(1, c(0.0, 1.0))?;
                    let b = DiscPoint::scalar(1, c(1.0, 0.0))?;
                    Ok(intersection_pairing_check(&a, &b, k, DEFAULT_ENTRY_BOUND)?.residual)
                })();
                vec![Case::from_result(format!("transformed_pair/k={k}"), 1e-4, r)]
            }));
        }
    }
    Ok(jobs)
}

// ---------------------------------------------------------------- smatrix

fn smatrix_jobs(cfg: &RunConfig) -> CliResult<Vec<Job>> {
    cfg.genera("smatrix", &[1], &[1])?;
    let ks = cfg.levels("smatrix", &[1, 2, 3, 4], 8)?;
    Ok(ks
        .into_iter()
        .map(|k| {
            job(move || {
                let ids = [
                    format!("unitarity/k={k}"),
                    format!("modulus/k={k}"),
                    format!("phase/k={k}"),
                ];
                match smatrix_limit(k, &EPSILON_SCHEDULE) {
                    Ok(rep) => {
                        let kf = k as f64;
                        let phase = CMat::from_fn(k as usize, k as usize, |j, l| {
                            Complex64::from_polar(kf.powf(-0.5), 2.0 * std::f64::consts::PI * (j * l) as f64 / kf)
                        });
                        vec![
                            Case::new(&*ids[0], rep.unitarity_residual, 1e-4),
                            Case::new(&*ids[1], rep.modulus_residual, 1e-4),
                            Case::new(&*ids[2], max_abs(&(rep.matrix - phase)), 1e-4),
                        ]
                    }
                    Err(e) => ids.iter().map(|id| Case::failed(id.as_str(), 1e-4, &e)).collect(),
                }
            })
        })
        .collect())
}

// ---------------------------------------------------------------- tropical

fn tropical_jobs(cfg: &RunConfig) -> CliResult<Vec<Job>> {
    cfg.genera("tropical", &[1], &[1])?;
    let ks = cfg.levels("tropical", &[1, 2], 3)?;
    let s = cfg.s;
    let exec = cfg.exec;
    let mut jobs = Vec::new();
    for &k in &ks {
        jobs.push(job(move || {
            let ray = GeodesicRay::standard(1, 1.0);
            let cfgz = ZeroLocusConfig::default();
            let here = compare_with_divisor(&ray, s, k, ThetaChoice::SymmetricSum, cfgz, exec);
            let later = compare_with_divisor(&ray, s + 1.0, k, ThetaChoice::SymmetricSum, cfgz, exec);
            let (a, b) = (format!("hausdorff/k={k}/s={s}"), format!("hausdorff_decreasing/k={k}"));
            match (here, later) {
                (Ok(h), Ok(l)) => vec![
                    Case::structural(a, h.hausdorff_distance, 0.02),
                    // strictly smaller at s + 1
                    Case::structural(b, l.hausdorff_distance / h.hausdorff_distance, 1.0 - f64::EPSILON),
                ],
                (Err(e), _) | (_, Err(e)) => vec![Case::failed(a, 0.02, &e), Case::failed(b, 1.0, &e)],
            }
        }));
        jobs.push(job(move || {
            let form = thetaquant::matrix::RMat::from_element(1, 1, 1.0);
            let pts = tropical_points_g1(k, ThetaChoice::SymmetricSum);
            let mut mismatches = 0usize;
            let mut err = None;
            for i in 0..400 {
                let y = i as f64 / 400.0;
                let exact = pts.iter().any(|p| (p - y).abs() < 1e-12);
                match tropical_divisor_membership(&[y], &form, k) {
                    Ok(m) if m != exact => mismatches += 1,
                    Ok(_) => {}
                    Err(e) => err = Some(e),
                }
            }
            let id = format!("membership_scan/k={k}");
            vec![match err {
                Some(e) => Case::failed(id, 0.0, e),
                None => Case::structural(id, mismatches as f64, 0.0),
            }]
        }));
    }
    jobs.push(job(move || {
        let r = rescaled_metric(&GeodesicRay::standard(1, 1.0), s).map(|m| (&m.scaled - &m.limit).amax());
        let id = format!("metric_limit/s={s}");
        vec![match r {
            Ok(v) => Case::structural(id, v, 3.0 * (-2.0 * s).exp()),
            Err(e) => Case::failed(id, 3.0 * (-2.0 * s).exp(), e),
        }]
    }));
    Ok(jobs)
}

//! Argument definitions and subcommand handlers.

use std::io::{BufRead, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use thetaquant::bks::{bks_map, frame_constant, gram_matrix, PairingRoute};
use thetaquant::matrix::{identity, max_abs, CMat, RMat};
use thetaquant::metaplectic::{verify_lemma_g1, MetaplecticGenerator, QuadratureGrid};
use thetaquant::random::{random_metaplectic_generator, random_siegel_point};
use thetaquant::siegel::{cayley, cayley_inverse, sp_act_d, sp_act_h, DiscPoint, HalfSpacePoint, SiegelPoint, SymplecticMatrix};
use thetaquant::theta::{theta_eval, Characteristic, LatticeData};
use thetaquant::tropical::{compare_with_divisor, GeodesicRay, ThetaChoice, ZeroLocusConfig};
use thetaquant::weil_brezin::{
    default_window_steps, sample_theta_section, wb_forward, wb_inverse, wb_unitarity_check, PacketState,
    SampledComponents, SampledSection, WBVector,
};
use thetaquant::Exec;

use crate::emit::{emit_plot_data, EmitParams, PlotKind, Table};
use crate::error::{params, CliError, CliResult};
use crate::input::{
    cmat_to_json, complex_matrix, complex_to_json, complex_vec, field, infer_dim, int_vec, parse_value, real_matrix,
    real_vec,
};
use crate::report::{Case, SuiteReport};
use crate::suites::{run_suite, RunConfig, ToleranceOverride};

#[derive(Debug, Parser)]
#[command(name = "thetaquant", version, about = "Quantization of the symplectic torus: evaluation, verification, plot data")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Genus.
    #[arg(long, global = true)]
    pub g: Option<usize>,
    /// Level.
    #[arg(long, global = true)]
    pub k: Option<u32>,
    /// Tolerance: a number, or a JSON object of per-suite numbers.
    #[arg(long, global = true)]
    pub tol: Option<String>,
    /// Seed for random inputs.
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,
    /// Output file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Include wall time in reports (output is then not reproducible).
    #[arg(long, global = true)]
    pub timing: bool,
    /// Run without the worker pool.
    #[arg(long, global = true)]
    pub sequential: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Theta function evaluation.
    Theta {
        #[command(subcommand)]
        cmd: ThetaCmd,
    },
    /// Cayley transform and the symplectic action.
    Siegel {
        #[command(subcommand)]
        cmd: SiegelCmd,
    },
    /// Weil-Brezin transform.
    Wb {
        #[command(subcommand)]
        cmd: WbCmd,
    },
    /// Metaplectic generators.
    Mp {
        #[command(subcommand)]
        cmd: MpCmd,
    },
    /// BKS pairings and maps.
    Bks {
        #[command(subcommand)]
        cmd: BksCmd,
    },
    /// Tropical theta divisors.
    Tropical {
        #[command(subcommand)]
        cmd: TropicalCmd,
    },
    /// Runs a verification suite; exits nonzero when a case fails.
    Verify {
        /// theta, siegel, wb, metaplectic, bks, heisenberg, intersection, smatrix, tropical or all.
        suite: String,
        /// Ray parameter of the tropical comparison.
        #[arg(long, default_value_t = 3.0)]
        s: f64,
    },
    /// Writes plot data: theta_abs, zero_locus, tropical_divisor or gram_heatmap.
    Emit {
        kind: String,
        #[arg(long)]
        l: Option<String>,
        #[arg(long)]
        omega: Option<String>,
        #[arg(long = "omega-p")]
        omega_p: Option<String>,
        /// Quadratic form of the tropical divisor.
        #[arg(long = "G")]
        form: Option<String>,
        /// Grid size.
        #[arg(long)]
        n: Option<usize>,
        /// Ray parameters, a number or a list.
        #[arg(long)]
        s: Option<String>,
        /// `[lo, hi]`.
        #[arg(long)]
        range: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum ThetaCmd {
    /// `θ[l/k; 0](kz, kΩ)` with a certified error bound.
    Eval {
        #[arg(long)]
        l: Option<String>,
        #[arg(long)]
        omega: String,
        #[arg(long)]
        z: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum SiegelCmd {
    /// `{Omega}` to `{tau}` or back.
    Cayley {
        #[arg(long)]
        input: String,
    },
    /// `{Omega | tau, M: {A, B, C, D}}` to the image point.
    Act {
        #[arg(long)]
        input: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum WbCmd {
    /// Section description to binary components.
    Forward {
        #[arg(long)]
        input: String,
    },
    /// Binary components to binary torus samples.
    Inverse {
        /// File written by `wb forward`.
        #[arg(long)]
        data: PathBuf,
        /// Torus grid size; defaults to the one in the header.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Round trip and unitarity residuals for a section description.
    Check {
        #[arg(long)]
        input: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum MpCmd {
    /// Image of the Gaussian `e^{kπi ᵗvΩv}` under a generator.
    Act {
        /// `P,L,Q,m` (genus one) or a JSON object.
        #[arg(long)]
        gen: String,
        #[arg(long)]
        omega: String,
    },
    /// Closed form against quadrature of the integral operator (genus one).
    VerifyLemma {
        #[arg(long)]
        gen: Option<String>,
        #[arg(long)]
        omega: Option<String>,
        /// Number of random generators when `--gen` is absent.
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Route {
    Closed,
    Quadrature,
    Torus,
}

#[derive(Debug, Subcommand)]
pub enum BksCmd {
    /// Gram matrix of the two frames.
    Gram {
        #[arg(long)]
        omega: String,
        #[arg(long = "omega-p")]
        omega_p: String,
        #[arg(long, value_enum, default_value_t = Route::Quadrature)]
        route: Route,
    },
    /// Matrix of the pairing map in the frames.
    Map {
        #[arg(long)]
        omega: String,
        #[arg(long = "omega-p")]
        omega_p: String,
        #[arg(long, value_enum, default_value_t = Route::Quadrature)]
        route: Route,
    },
    /// theorem, transitivity, heisenberg, intersection or smatrix.
    Verify {
        #[arg(long)]
        suite: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum TropicalCmd {
    /// Tropical divisor points (g = 1) or samples (g = 2).
    Divisor {
        #[arg(long = "G")]
        form: Option<String>,
        #[arg(long)]
        range: Option<String>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Numerical zero locus against the tropical divisor (genus one).
    Compare {
        /// `A,B,Lambda` or a JSON object.
        #[arg(long)]
        ray: Option<String>,
        #[arg(long, default_value_t = 3.0)]
        s: f64,
        /// `sum` for the symmetric sum, or a characteristic.
        #[arg(long, default_value = "sum")]
        choice: String,
    },
}

/// Bytes to write and whether the command succeeded.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub bytes: Vec<u8>,
    pub success: bool,
}

impl Outcome {
    fn text(s: String) -> Self {
        let mut bytes = s.into_bytes();
        if bytes.last() != Some(&b'\n') {
            bytes.push(b'\n');
        }
        Self { bytes, success: true }
    }

    fn json(v: &Value) -> CliResult<Self> {
        Ok(Self::text(serde_json::to_string_pretty(v)?))
    }

    fn graded(mut self, success: bool) -> Self {
        self.success = success;
        self
    }
}

pub const EXIT_FAILED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

/// Parses arguments, runs the command, writes output; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { 0 };
        }
    };
    if let Some(n) = std::env::var("THETAQUANT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        thetaquant::exec::init_threads(n.max(1));
    }
    match run(&cli).and_then(|o| write_output(&cli.global, &o).map(|_| o)) {
        Ok(o) if o.success => 0,
        Ok(_) => EXIT_FAILED,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn write_output(global: &Global, o: &Outcome) -> CliResult<()> {
    match &global.out {
        Some(path) => std::fs::write(path, &o.bytes)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(&o.bytes)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn exec(global: &Global) -> Exec {
    if global.sequential {
        Exec::Sequential
    } else {
        Exec::default()
    }
}

fn level(global: &Global) -> CliResult<u32> {
    match global.k {
        Some(0) => Err(params("k must be at least 1")),
        Some(k) => Ok(k),
        None => Ok(1),
    }
}

fn numeric_tol(global: &Global, default: f64) -> CliResult<f64> {
    match &global.tol {
        None => Ok(default),
        Some(t) => {
            let v = parse_value(t)?;
            v.as_f64().filter(|t| *t > 0.0).ok_or_else(|| params("--tol must be a positive number here"))
        }
    }
}

fn genus_of(global: &Global, v: &Value) -> CliResult<usize> {
    match (global.g, infer_dim(v)) {
        (Some(g), _) => Ok(g),
        (None, Some(g)) => Ok(g),
        (None, None) => Err(params("cannot infer g; pass --g")),
    }
}

fn siegel_point(v: &Value, g: usize) -> CliResult<SiegelPoint> {
    Ok(SiegelPoint::from_matrix(complex_matrix(v, g)?)?)
}

pub fn run(cli: &Cli) -> CliResult<Outcome> {
    let gl = &cli.global;
    match &cli.command {
        Command::Theta { cmd: ThetaCmd::Eval { l, omega, z } } => theta_cmd(gl, l.as_deref(), omega, z.as_deref()),
        Command::Siegel { cmd } => siegel_cmd(cmd),
        Command::Wb { cmd } => wb_cmd(gl, cmd),
        Command::Mp { cmd } => mp_cmd(gl, cmd),
        Command::Bks { cmd } => bks_cmd(gl, cmd),
        Command::Tropical { cmd } => tropical_cmd(gl, cmd),
        Command::Verify { suite, s } => verify_cmd(gl, suite, *s),
        Command::Emit { kind, l, omega, omega_p, form, n, s, range } => {
            let kind: PlotKind = kind.parse()?;
            let mut p = EmitParams { k: level(gl)?, n: *n, seed: gl.seed, exec: exec(gl), ..EmitParams::default() };
            if let Some(l) = l {
                p.l = Some(int_vec(&parse_value(l)?)?);
            }
            let om = omega.as_deref().map(parse_value).transpose()?;
            let omp = omega_p.as_deref().map(parse_value).transpose()?;
            let fm = form.as_deref().map(parse_value).transpose()?;
            p.g = gl.g.or_else(|| om.as_ref().and_then(infer_dim)).or_else(|| fm.as_ref().and_then(infer_dim)).unwrap_or(1);
            p.omega = om.map(|v| complex_matrix(&v, p.g)).transpose()?;
            p.omega_p = omp.map(|v| complex_matrix(&v, p.g)).transpose()?;
            p.form = fm.map(|v| real_matrix(&v, p.g)).transpose()?;
            if let Some(s) = s {
                p.s = real_vec(&parse_value(s)?)?;
            }
            if let Some(r) = range {
                p.range = parse_range(r)?;
            }
            table_outcome(gl, &emit_plot_data(kind, &p)?, Format::Csv)
        }
    }
}

fn parse_range(arg: &str) -> CliResult<(f64, f64)> {
    match real_vec(&parse_value(arg)?)?.as_slice() {
        [lo, hi] => Ok((*lo, *hi)),
        _ => Err(params("range must be [lo, hi]")),
    }
}

fn table_outcome(gl: &Global, t: &Table, default: Format) -> CliResult<Outcome> {
    match gl.format.unwrap_or(default) {
        Format::Csv => Ok(Outcome::text(t.to_csv())),
        Format::Json => Outcome::json(&serde_json::to_value(t)?),
    }
}

fn theta_cmd(gl: &Global, l: Option<&str>, omega: &str, z: Option<&str>) -> CliResult<Outcome> {
    let ov = parse_value(omega)?;
    let g = genus_of(gl, &ov)?;
    let k = level(gl)?;
    let data = LatticeData::new(k, siegel_point(&ov, g)?)?;
    let l = match l {
        Some(l) => Characteristic::new(&int_vec(&parse_value(l)?)?, k)?,
        None => Characteristic::zero(g, k),
    };
    let z = match z {
        Some(z) => complex_vec(&parse_value(z)?)?,
        None => vec![thetaquant::Complex64::new(0.0, 0.0); g],
    };
    let v = theta_eval(&data, &l, &z, numeric_tol(gl, 1e-12)?, exec(gl))?;
    Outcome::json(&json!({"value_re": v.value.re, "value_im": v.value.im, "error_bound": v.error_bound}))
}

fn symplectic_from(v: &Value, g: usize) -> CliResult<SymplecticMatrix> {
    let block = |name: &str| -> CliResult<RMat> {
        real_matrix(v.get(name).ok_or_else(|| params(format!("M is missing block {name}")))?, g)
    };
    Ok(SymplecticMatrix::from_blocks(&block("A")?, &block("B")?, &block("C")?, &block("D")?)?)
}

fn siegel_cmd(cmd: &SiegelCmd) -> CliResult<Outcome> {
    let (input, act) = match cmd {
        SiegelCmd::Cayley { input } => (input, false),
        SiegelCmd::Act { input } => (input, true),
    };
    let v = parse_value(input)?;
    let omega = field(&v, &["Omega", "omega"]);
    let tau = field(&v, &["tau"]);
    let point = omega.or(tau).ok_or_else(|| params("input needs Omega or tau"))?;
    let g = match v.get("g").and_then(Value::as_u64) {
        Some(g) => g as usize,
        None => infer_dim(point).ok_or_else(|| params("cannot infer g"))?,
    };
    let m = if act {
        Some(symplectic_from(v.get("M").ok_or_else(|| params("input needs M"))?, g)?)
    } else {
        None
    };
    let out = match (omega, m) {
        (Some(o), None) => json!({"g": g, "tau": cmat_to_json(cayley(&siegel_point(o, g)?)?.matrix())}),
        (Some(o), Some(m)) => json!({"g": g, "Omega": cmat_to_json(sp_act_h(&m, &siegel_point(o, g)?)?.matrix())}),
        (None, m) => {
            let t = DiscPoint::from_matrix(complex_matrix(point, g)?)?;
            match m {
                Some(m) => json!({"g": g, "tau": cmat_to_json(sp_act_d(&m, &t)?.matrix())}),
                None => match cayley_inverse(&t)? {
                    HalfSpacePoint::Interior(p) => json!({"g": g, "Omega": cmat_to_json(p.matrix()), "boundary": false}),
                    HalfSpacePoint::Boundary(b) => json!({"g": g, "Omega": cmat_to_json(b.matrix()), "boundary": true}),
                },
            }
        }
    };
    Outcome::json(&out)
}

/// Section description: `{g, k, N, section: {theta: {l, omega}} | {packets: {seed}}}`.
struct SectionSpec {
    g: usize,
    k: u32,
    n: usize,
    section: SampledSection,
}

fn section_spec(gl: &Global, input: &str) -> CliResult<SectionSpec> {
    let v = parse_value(input)?;
    let k = v.get("k").and_then(Value::as_u64).map(|k| k as u32).map_or_else(|| level(gl), Ok)?;
    let n = v.get("N").and_then(Value::as_u64).unwrap_or(60) as usize;
    let sec = v.get("section").ok_or_else(|| params("input needs section"))?;
    let ex = exec(gl);
    if let Some(t) = sec.get("theta") {
        let ov = t.get("omega").ok_or_else(|| params("theta section needs omega"))?;
        let g = v.get("g").and_then(Value::as_u64).map(|g| g as usize).or(gl.g).or_else(|| infer_dim(ov)).unwrap_or(1);
        let l = match t.get("l") {
            Some(l) => Characteristic::new(&int_vec(l)?, k)?,
            None => Characteristic::zero(g, k),
        };
        let section = sample_theta_section(k, &l, &siegel_point(ov, g)?, n, ex)?;
        return Ok(SectionSpec { g, k, n, section });
    }
    if let Some(p) = sec.get("packets") {
        let g = v.get("g").and_then(Value::as_u64).map(|g| g as usize).or(gl.g).unwrap_or(1);
        let seed = p.get("seed").and_then(Value::as_u64).unwrap_or(gl.seed);
        let state = PacketState::random(&mut ChaCha8Rng::seed_from_u64(seed), g, k);
        let section = wb_inverse(&WBVector::Packets(state), n, ex)?;
        return Ok(SectionSpec { g, k, n, section });
    }
    Err(params("section must be {theta: ..} or {packets: ..}"))
}

fn push_pairs(out: &mut Vec<u8>, values: impl IntoIterator<Item = thetaquant::Complex64>) {
    for z in values {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
}

fn header_line(g: usize, k: u32, n: usize, w: f64, h: f64) -> CliResult<Vec<u8>> {
    let mut line = serde_json::to_vec(&json!({"g": g, "k": k, "N": n, "W": w, "h": h}))?;
    line.push(b'\n');
    Ok(line)
}

fn wb_cmd(gl: &Global, cmd: &WbCmd) -> CliResult<Outcome> {
    let ex = exec(gl);
    match cmd {
        WbCmd::Forward { input } => {
            let spec = section_spec(gl, input)?;
            let comps = match wb_forward(&spec.section, default_window_steps(spec.n, spec.k), ex)? {
                WBVector::Sampled(c) => c,
                _ => unreachable!("forward transform returns samples"),
            };
            let mut bytes = header_line(spec.g, spec.k, spec.n, comps.window(), comps.step())?;
            for comp in &comps.data {
                push_pairs(&mut bytes, comp.iter().copied());
            }
            Ok(Outcome { bytes, success: true })
        }
        WbCmd::Inverse { data, n } => {
            let raw = std::fs::read(data)?;
            let comps = read_components(&raw)?;
            let n = n.unwrap_or(comps.n);
            let s = wb_inverse(&WBVector::Sampled(comps), n, ex)?;
            let mut bytes = header_line(s.g, s.k, s.n, 1.0, 1.0 / s.n as f64)?;
            push_pairs(&mut bytes, s.samples.iter().copied());
            Ok(Outcome { bytes, success: true })
        }
        WbCmd::Check { input } => {
            let spec = section_spec(gl, input)?;
            let comps = wb_forward(&spec.section, default_window_steps(spec.n, spec.k), ex)?;
            let back = wb_inverse(&comps, spec.n, ex)?;
            let round = back.sup_distance(&spec.section)?;
            let (torus, wb) = wb_unitarity_check(&spec.section, &spec.section, ex)?;
            let unit = (torus - wb).norm();
            let cases = vec![Case::new("round_trip", round, 1e-10), Case::new("unitarity", unit, 1e-8)];
            let pass = cases.iter().all(|c| c.pass);
            let out = json!({
                "g": spec.g, "k": spec.k, "N": spec.n,
                "torus_norm2": torus.re, "components_norm2": wb.re,
                "max_residual": round.max(unit), "cases": cases, "pass": pass,
            });
            Ok(Outcome::json(&out)?.graded(pass))
        }
    }
}

fn read_components(raw: &[u8]) -> CliResult<SampledComponents> {
    let mut cursor = std::io::Cursor::new(raw);
    let mut line = String::new();
    cursor.read_line(&mut line)?;
    let h: Value = serde_json::from_str(&line)?;
    let get = |name: &str| h.get(name).and_then(Value::as_f64).ok_or_else(|| params(format!("header lacks {name}")));
    let (g, k, n, w) = (get("g")? as usize, get("k")? as u32, get("N")? as usize, get("W")?);
    if g == 0 || k == 0 || n == 0 {
        return Err(params("header has zero g, k or N"));
    }
    let m = (w * n as f64).round() as usize;
    let per = (2 * m + 1).pow(g as u32);
    let body = &raw[line.len()..];
    let count = (k as usize).pow(g as u32);
    if body.len() != count * per * 16 {
        return Err(params(format!("expected {} bytes of samples, found {}", count * per * 16, body.len())));
    }
    let values: Vec<thetaquant::Complex64> = body
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            thetaquant::Complex64::new(re, im)
        })
        .collect();
    Ok(SampledComponents { g, k, n, m, data: values.chunks(per).map(<[_]>::to_vec).collect() })
}

fn generator(arg: &str, g: usize) -> CliResult<MetaplecticGenerator> {
    let v = parse_value(arg).or_else(|_| parse_value(&format!("[{arg}]")))?;
    let (p, l, q, m) = match &v {
        Value::Object(_) => {
            let get = |n: &str| v.get(n).ok_or_else(|| params(format!("generator lacks {n}")));
            (real_matrix(get("P")?, g)?, real_matrix(get("L")?, g)?, real_matrix(get("Q")?, g)?, v.get("m").and_then(Value::as_i64))
        }
        _ => match real_vec(&v)?.as_slice() {
            [p, l, q] => (RMat::from_element(1, 1, *p), RMat::from_element(1, 1, *l), RMat::from_element(1, 1, *q), None),
            [p, l, q, m] => (
                RMat::from_element(1, 1, *p),
                RMat::from_element(1, 1, *l),
                RMat::from_element(1, 1, *q),
                Some(*m as i64),
            ),
            _ => return Err(params("generator must be P,L,Q[,m] or a JSON object")),
        },
    };
    Ok(match m {
        Some(m) => MetaplecticGenerator::new(p, l, q, m)?,
        None => MetaplecticGenerator::with_default_index(p, l, q)?,
    })
}

fn mp_cmd(gl: &Global, cmd: &MpCmd) -> CliResult<Outcome> {
    let k = level(gl)?;
    match cmd {
        MpCmd::Act { gen, omega } => {
            let ov = parse_value(omega)?;
            let g = genus_of(gl, &ov)?;
            let gen = generator(gen, g)?;
            let om = complex_matrix(&ov, g)?;
            SiegelPoint::from_matrix(om.clone())?;
            let image = gen.image(&om)?;
            let scalar = gen.gaussian_scalar(&om)?;
            let half = gen.act_on_halfform(&om)?.value;
            Outcome::json(&json!({
                "g": g, "k": k,
                "Omega_image": cmat_to_json(&image),
                "gaussian_scalar": complex_to_json(scalar),
                "halfform_scalar": complex_to_json(half),
                "product_residual": (scalar * half - 1.0).norm(),
            }))
        }
        MpCmd::VerifyLemma { gen, omega, count } => {
            let tol = numeric_tol(gl, 1e-6)?;
            let mut rng = ChaCha8Rng::seed_from_u64(gl.seed);
            let inputs: Vec<(MetaplecticGenerator, thetaquant::Complex64)> = match gen {
                Some(gs) => {
                    let om = match omega {
                        Some(o) => crate::input::complex(&parse_value(o)?)?,
                        None => thetaquant::Complex64::new(0.0, 1.0),
                    };
                    vec![(generator(gs, 1)?, om)]
                }
                None => (0..*count)
                    .map(|_| (random_metaplectic_generator(&mut rng, 1), random_siegel_point(&mut rng, 1).matrix()[(0, 0)]))
                    .collect(),
            };
            let mut cases = Vec::new();
            for (i, (gen, om)) in inputs.iter().enumerate() {
                match verify_lemma_g1(gen, *om, k, QuadratureGrid::default(), exec(gl)) {
                    Ok(r) => {
                        cases.push(Case::new(format!("lemma/{i}"), r.relative_error, tol));
                        cases.push(Case::new(format!("norm_preservation/{i}"), r.norm_defect, tol));
                    }
                    Err(e) => cases.push(Case::failed(format!("lemma/{i}"), tol, e)),
                }
            }
            residual_report(cases)
        }
    }
}

fn residual_report(cases: Vec<Case>) -> CliResult<Outcome> {
    let max = cases.iter().map(|c| c.residual).filter(|r| r.is_finite()).fold(0.0, f64::max);
    let pass = !cases.is_empty() && cases.iter().all(|c| c.pass);
    Ok(Outcome::json(&json!({"max_residual": max, "per_case": cases, "pass": pass}))?.graded(pass))
}

fn route(r: Route) -> PairingRoute {
    match r {
        Route::Closed => PairingRoute::ClosedForm,
        Route::Quadrature => PairingRoute::Quadrature,
        Route::Torus => PairingRoute::Torus { n: 60 },
    }
}

fn bks_cmd(gl: &Global, cmd: &BksCmd) -> CliResult<Outcome> {
    let k = level(gl)?;
    let pair = |omega: &str, omega_p: &str| -> CliResult<(usize, CMat, CMat)> {
        let (a, b) = (parse_value(omega)?, parse_value(omega_p)?);
        let g = genus_of(gl, &a)?;
        Ok((g, siegel_point(&a, g)?.matrix().clone(), siegel_point(&b, g)?.matrix().clone()))
    };
    match cmd {
        BksCmd::Gram { omega, omega_p, route: r } => {
            let (g, a, b) = pair(omega, omega_p)?;
            let gram = gram_matrix(k, &a, &b, route(*r), exec(gl))?;
            let cst = frame_constant(g, k);
            let dev = max_abs(&(&gram - identity(gram.nrows()) * thetaquant::Complex64::new(cst, 0.0)));
            let tol = numeric_tol(gl, 1e-7)?;
            let out = json!({"g": g, "k": k, "gram": cmat_to_json(&gram), "frame_constant": cst, "max_residual": dev, "pass": dev <= tol});
            Ok(Outcome::json(&out)?.graded(dev <= tol))
        }
        BksCmd::Map { omega, omega_p, route: r } => {
            let (g, a, b) = pair(omega, omega_p)?;
            let map = bks_map(k, &a, &b, route(*r), exec(gl))?;
            let dev = max_abs(&(&map - identity(map.nrows())));
            Outcome::json(&json!({"g": g, "k": k, "map": cmat_to_json(&map), "identity_residual": dev}))
        }
        BksCmd::Verify { suite } => {
            let (name, prefixes): (&str, &[&str]) = match suite.as_str() {
                "theorem" => ("bks", &["theorem/", "factorization/", "prequantum_closed_form/", "torus_route/", "regularized_boundary/", "halfform_positivity/"]),
                "transitivity" => ("bks", &["transitivity/", "unitarity/", "map_identity/"]),
                "heisenberg" | "intersection" | "smatrix" => (suite.as_str(), &[]),
                other => return Err(CliError::UnknownSuite(other.to_string())),
            };
            let cfg = run_config(gl, 3.0)?;
            let rep = run_suite(name, &cfg)?;
            let cases: Vec<Case> = rep
                .cases
                .into_iter()
                .filter(|c| prefixes.is_empty() || prefixes.iter().any(|p| c.id.starts_with(p)))
                .collect();
            residual_report(cases)
        }
    }
}

fn ray_from(arg: &str) -> CliResult<GeodesicRay> {
    let v = parse_value(arg).or_else(|_| parse_value(&format!("[{arg}]")))?;
    if v.is_object() {
        let lam = real_vec(v.get("Lambda").ok_or_else(|| params("ray lacks Lambda"))?)?;
        let g = lam.len();
        let get = |n: &str| v.get(n).ok_or_else(|| params(format!("ray lacks {n}")));
        return Ok(GeodesicRay::new(real_matrix(get("A")?, g)?, real_matrix(get("B")?, g)?, lam)?);
    }
    match real_vec(&v)?.as_slice() {
        [a, b, l] => Ok(GeodesicRay::new(RMat::from_element(1, 1, *a), RMat::from_element(1, 1, *b), vec![*l])?),
        _ => Err(params("ray must be A,B,Lambda or a JSON object")),
    }
}

fn tropical_cmd(gl: &Global, cmd: &TropicalCmd) -> CliResult<Outcome> {
    let k = level(gl)?;
    match cmd {
        TropicalCmd::Divisor { form, range, n } => {
            let fv = form.as_deref().map(parse_value).transpose()?;
            let g = gl.g.or_else(|| fv.as_ref().and_then(infer_dim)).unwrap_or(1);
            let mut p = EmitParams { g, k, n: *n, exec: exec(gl), ..EmitParams::default() };
            p.form = fv.map(|v| real_matrix(&v, g)).transpose()?;
            if let Some(r) = range {
                p.range = parse_range(r)?;
            }
            table_outcome(gl, &emit_plot_data(PlotKind::TropicalDivisor, &p)?, Format::Csv)
        }
        TropicalCmd::Compare { ray, s, choice } => {
            let ray = match ray {
                Some(r) => ray_from(r)?,
                None => GeodesicRay::standard(1, 1.0),
            };
            let choice = match choice.as_str() {
                "sum" => ThetaChoice::SymmetricSum,
                l => ThetaChoice::Single(l.parse().map_err(|_| params("choice must be `sum` or an integer"))?),
            };
            let cmp = compare_with_divisor(&ray, *s, k, choice, ZeroLocusConfig::default(), exec(gl))?;
            match gl.format.unwrap_or(Format::Json) {
                Format::Json => Outcome::json(&json!({
                    "hausdorff_distance": cmp.hausdorff_distance, "s": cmp.s, "k": cmp.k,
                    "divisor": cmp.divisor, "intervals": cmp.locus.intervals, "zeros": cmp.locus.zeros,
                })),
                Format::Csv => {
                    let mut rows: Vec<Vec<f64>> = cmp.divisor.iter().map(|&y| vec![0.0, y, y]).collect();
                    rows.extend(cmp.locus.intervals.iter().map(|&(a, b)| vec![1.0, a, b]));
                    Ok(Outcome::text(Table { columns: vec!["numerical", "y_lo", "y_hi"], rows }.to_csv()))
                }
            }
        }
    }
}

pub fn run_config(gl: &Global, s: f64) -> CliResult<RunConfig> {
    Ok(RunConfig {
        g: gl.g,
        k: gl.k,
        tol: gl.tol.as_deref().map(ToleranceOverride::parse).transpose()?.unwrap_or_default(),
        seed: gl.seed,
        s,
        exec: exec(gl),
    })
}

fn verify_cmd(gl: &Global, suite: &str, s: f64) -> CliResult<Outcome> {
    let cfg = run_config(gl, s)?;
    let start = std::time::Instant::now();
    let mut rep: SuiteReport = run_suite(suite, &cfg)?;
    if gl.timing {
        rep.wall_time = Some(start.elapsed().as_secs_f64());
    }
    let text = match gl.format.unwrap_or(Format::Json) {
        Format::Json => rep.to_json()?,
        Format::Csv => rep.to_csv(),
    };
    Ok(Outcome::text(text).graded(rep.pass))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> CliResult<Outcome> {
        let cli = Cli::try_parse_from(std::iter::once("thetaquant").chain(args.iter().copied())).expect("valid args");
        run(&cli)
    }

    fn json_of(o: &Outcome) -> Value {
        serde_json::from_slice(&o.bytes).unwrap()
    }

    #[test]
    fn theta_eval_at_i() {
        let o = run_args(&["theta", "eval", "--omega", "[0,1]"]).unwrap();
        let v = json_of(&o);
        assert!((v["value_re"].as_f64().unwrap() - 1.086_434_811_213_308).abs() < 1e-12);
        assert!(v["error_bound"].as_f64().unwrap() <= 1e-12);
    }

    #[test]
    fn siegel_round_trip() {
        let o = run_args(&["siegel", "cayley", "--input", r#"{"Omega": [0, 1]}"#]).unwrap();
        let tau = json_of(&o)["tau"].clone();
        assert!(tau[0][0][0].as_f64().unwrap().abs() < 1e-15);
        let o = run_args(&["siegel", "cayley", "--input", r#"{"tau": [1, 0]}"#]).unwrap();
        assert_eq!(json_of(&o)["boundary"], json!(true));
        let input = r#"{"g": 1, "Omega": [0, 1], "M": {"A": 0, "B": -1, "C": 1, "D": 0}}"#;
        let o = run_args(&["siegel", "act", "--input", input]).unwrap();
        assert!((json_of(&o)["Omega"][0][0][1].as_f64().unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn mp_act_generator_forms() {
        let o = run_args(&["mp", "act", "--gen", "0,1,0,0", "--omega", "[0,1]"]).unwrap();
        assert!(json_of(&o)["product_residual"].as_f64().unwrap() < 1e-14);
        assert!(run_args(&["mp", "act", "--gen", "0,0,0", "--omega", "[0,1]"]).is_err());
    }

    #[test]
    fn wb_binary_round_trip() {
        let dir = std::env::temp_dir().join(format!("thetaquant-wb-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let spec = r#"{"k": 2, "N": 24, "section": {"theta": {"l": [1], "omega": [0.1, 1.2]}}}"#;
        let fwd = run_args(&["wb", "forward", "--input", spec]).unwrap();
        let header_end = fwd.bytes.iter().position(|b| *b == b'\n').unwrap();
        let header: Value = serde_json::from_slice(&fwd.bytes[..header_end]).unwrap();
        assert_eq!(header["N"], json!(24));
        let path = dir.join("comp.bin");
        std::fs::write(&path, &fwd.bytes).unwrap();
        let inv = run_args(&["wb", "inverse", "--data", path.to_str().unwrap()]).unwrap();
        let end = inv.bytes.iter().position(|b| *b == b'\n').unwrap();
        assert_eq!(inv.bytes.len() - end - 1, 24 * 24 * 16);
        let chk = run_args(&["wb", "check", "--input", spec]).unwrap();
        assert!(chk.success);
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn gram_heatmap_rows() {
        let o = run_args(&["emit", "gram_heatmap", "--k", "3"]).unwrap();
        let text = String::from_utf8(o.bytes).unwrap();
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(rows.len(), 9);
        for r in rows {
            let f: Vec<f64> = r.split(',').map(|x| x.parse().unwrap()).collect();
            if f[0] != f[1] {
                assert!(f[4] < 1e-8);
            }
        }
    }

    #[test]
    fn theta_abs_row_count() {
        let o = run_args(&["emit", "theta_abs", "--omega", "[0,1]"]).unwrap();
        assert_eq!(String::from_utf8(o.bytes).unwrap().lines().count(), 1 + 128 * 128);
    }

    #[test]
    fn tropical_commands() {
        let o = run_args(&["tropical", "divisor", "--k", "2"]).unwrap();
        assert_eq!(String::from_utf8(o.bytes).unwrap(), "y\n0.25\n0.75\n");
        let o = run_args(&["tropical", "compare", "--ray", "1,0,1", "--s", "3", "--k", "1"]).unwrap();
        assert!(json_of(&o)["hausdorff_distance"].as_f64().unwrap() < 0.02);
    }

    #[test]
    fn unknown_names() {
        assert!(matches!(run_args(&["verify", "nope"]), Err(CliError::UnknownSuite(_))));
        assert!(matches!(run_args(&["bks", "verify", "--suite", "nope"]), Err(CliError::UnknownSuite(_))));
        assert!(run_args(&["emit", "nope"]).is_err());
    }
}

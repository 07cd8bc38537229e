//! Plot data as tables with a header row.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thetaquant::bks::{gram_matrix, PairingRoute};
use thetaquant::matrix::{CMat, RMat};
use thetaquant::random::random_siegel_point;
use thetaquant::siegel::SiegelPoint;
use thetaquant::theta::{theta_section_eval, Characteristic, LatticeData};
use thetaquant::tropical::{theta_zero_locus, tropical_divisor_samples_g2, tropical_points_g1, GeodesicRay, ThetaChoice, ZeroLocusConfig};
use thetaquant::{Complex64, Exec};

use crate::error::{params, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// `x, y, abs`: `|θ^l_Ω(x, y)|` on an `n × n` grid of the unit square.
    ThetaAbs,
    /// `s, y, x`: certified zeros along the standard ray.
    ZeroLocus,
    /// `y` (genus one) or `y1, y2` (genus two).
    TropicalDivisor,
    /// `i, j, re, im, abs`: Gram matrix entries by quadrature.
    GramHeatmap,
}

impl std::str::FromStr for PlotKind {
    type Err = crate::error::CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "theta_abs" => Ok(Self::ThetaAbs),
            "zero_locus" => Ok(Self::ZeroLocus),
            "tropical_divisor" => Ok(Self::TropicalDivisor),
            "gram_heatmap" => Ok(Self::GramHeatmap),
            other => Err(params(format!("unknown plot kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmitParams {
    pub g: usize,
    pub k: u32,
    pub l: Option<Vec<i64>>,
    pub omega: Option<CMat>,
    pub omega_p: Option<CMat>,
    pub form: Option<RMat>,
    pub n: Option<usize>,
    pub s: Vec<f64>,
    pub range: (f64, f64),
    pub seed: u64,
    pub exec: Exec,
}

impl Default for EmitParams {
    fn default() -> Self {
        Self {
            g: 1,
            k: 1,
            l: None,
            omega: None,
            omega_p: None,
            form: None,
            n: None,
            s: vec![1.0, 2.0, 3.0, 4.0],
            range: (0.0, 1.0),
            seed: 7,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn emit_plot_data(kind: PlotKind, p: &EmitParams) -> CliResult<Table> {
    if p.k == 0 {
        return Err(params("k must be at least 1"));
    }
    if !(p.range.0 < p.range.1) {
        return Err(params("range must be increasing"));
    }
    match kind {
        PlotKind::ThetaAbs => theta_abs(p),
        PlotKind::ZeroLocus => zero_locus(p),
        PlotKind::TropicalDivisor => tropical_divisor(p),
        PlotKind::GramHeatmap => gram_heatmap(p),
    }
}

fn siegel(m: &Option<CMat>, g: usize, default: impl FnOnce() -> SiegelPoint) -> CliResult<SiegelPoint> {
    match m {
        Some(m) if m.nrows() == g => Ok(SiegelPoint::from_matrix(m.clone())?),
        Some(m) => Err(params(format!("Omega is {}x{}, expected g = {g}", m.nrows(), m.ncols()))),
        None => Ok(default()),
    }
}

fn theta_abs(p: &EmitParams) -> CliResult<Table> {
    if p.g != 1 {
        return Err(params("theta_abs is a genus-one plot"));
    }
    let n = p.n.unwrap_or(128);
    if n == 0 {
        return Err(params("grid size must be positive"));
    }
    let omega = siegel(&p.omega, 1, || SiegelPoint::imaginary_scalar(1, 1.0))?;
    let data = LatticeData::new(p.k, omega)?;
    let l = Characteristic::new(p.l.as_deref().unwrap_or(&[0]), p.k)?;
    if l.dim() != 1 {
        return Err(params("characteristic must have one entry"));
    }
    let values = p.exec.map_range(n * n, |idx| {
        let (i, j) = (idx / n, idx % n);
        let (x, y) = (i as f64 / n as f64, j as f64 / n as f64);
        theta_section_eval(&data, &l, &[x], &[y], 1e-14, Exec::Sequential).map(|v| vec![x, y, v.value.norm()])
    });
    Ok(Table { columns: vec!["x", "y", "abs"], rows: values.into_iter().collect::<thetaquant::Result<_>>()? })
}

fn zero_locus(p: &EmitParams) -> CliResult<Table> {
    if p.g != 1 {
        return Err(params("zero loci are computed in genus one"));
    }
    let ray = GeodesicRay::standard(1, 1.0);
    let mut rows = Vec::new();
    for &s in &p.s {
        let loc = theta_zero_locus(&ray, s, p.k, ThetaChoice::SymmetricSum, ZeroLocusConfig::default(), p.exec)?;
        rows.extend(loc.zeros.iter().map(|z| vec![s, z.y, z.x]));
    }
    Ok(Table { columns: vec!["s", "y", "x"], rows })
}

/// Integer translates of `v` inside `[lo, hi)`.
fn translates(v: f64, (lo, hi): (f64, f64)) -> Vec<f64> {
    let first = (lo - v).ceil() as i64;
    (first..).map(|m| v + m as f64).take_while(|&y| y < hi).collect()
}

fn tropical_divisor(p: &EmitParams) -> CliResult<Table> {
    match p.g {
        1 => {
            let mut ys: Vec<f64> = tropical_points_g1(p.k, ThetaChoice::SymmetricSum)
                .into_iter()
                .flat_map(|v| translates(v, p.range))
                .collect();
            ys.sort_by(|a, b| a.total_cmp(b));
            Ok(Table { columns: vec!["y"], rows: ys.into_iter().map(|y| vec![y]).collect() })
        }
        2 => {
            let form = p.form.clone().unwrap_or_else(|| RMat::identity(2, 2));
            let samples = tropical_divisor_samples_g2(&form, p.k, p.n.unwrap_or(100), p.exec)?;
            let mut rows = Vec::new();
            for s in samples {
                for a in translates(s[0], p.range) {
                    for b in translates(s[1], p.range) {
                        rows.push(vec![a, b]);
                    }
                }
            }
            rows.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
            Ok(Table { columns: vec!["y1", "y2"], rows })
        }
        g => Err(params(format!("tropical divisors are emitted for g = 1, 2, not {g}"))),
    }
}

fn gram_heatmap(p: &EmitParams) -> CliResult<Table> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let a = random_siegel_point(&mut rng, p.g);
    let b = random_siegel_point(&mut rng, p.g);
    let a = siegel(&p.omega, p.g, || a)?;
    let b = siegel(&p.omega_p, p.g, || b)?;
    let gram = gram_matrix(p.k, a.matrix(), b.matrix(), PairingRoute::Quadrature, p.exec)?;
    let mut rows = Vec::new();
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let z: Complex64 = gram[(i, j)];
            rows.push(vec![i as f64, j as f64, z.re, z.im, z.norm()]);
        }
    }
    Ok(Table { columns: vec!["i", "j", "re", "im", "abs"], rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn translates_in_range() {
        assert_eq!(translates(0.25, (0.0, 2.0)), vec![0.25, 1.25]);
        assert_eq!(translates(0.25, (-1.0, 0.0)), vec![-0.75]);
    }

    #[test]
    fn tropical_rows() {
        let p = EmitParams { k: 2, ..EmitParams::default() };
        let t = emit_plot_data(PlotKind::TropicalDivisor, &p).unwrap();
        assert_eq!(t.rows, vec![vec![0.25], vec![0.75]]);
        assert!(t.to_csv().starts_with("y\n"));
    }

    #[test]
    fn bad_params() {
        let p = EmitParams { g: 2, ..EmitParams::default() };
        assert!(emit_plot_data(PlotKind::ThetaAbs, &p).is_err());
        let p = EmitParams { range: (1.0, 0.0), ..EmitParams::default() };
        assert!(emit_plot_data(PlotKind::TropicalDivisor, &p).is_err());
        assert!("nope".parse::<PlotKind>().is_err());
    }
}

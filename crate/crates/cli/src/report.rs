//! Machine-readable verification reports.

use serde::Serialize;

/// Whether `--tol` may replace the tolerance of a case. Structural cases
/// (counts, ratios, exact membership) keep theirs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseKind {
    Residual,
    Structural,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Case {
    pub id: String,
    /// `null` in JSON when the computation failed.
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub kind: CaseKind,
}

impl Case {
    pub fn new(id: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Self::with_kind(id, residual, tolerance, CaseKind::Residual)
    }

    pub fn structural(id: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Self::with_kind(id, residual, tolerance, CaseKind::Structural)
    }

    fn with_kind(id: impl Into<String>, residual: f64, tolerance: f64, kind: CaseKind) -> Self {
        let mut c = Self { id: id.into(), residual, tolerance, pass: false, error: None, kind };
        c.grade();
        c
    }

    pub fn failed(id: impl Into<String>, tolerance: f64, error: impl std::fmt::Display) -> Self {
        Self {
            id: id.into(),
            residual: f64::NAN,
            tolerance,
            pass: false,
            error: Some(error.to_string()),
            kind: CaseKind::Residual,
        }
    }

    /// Builds a case from a fallible residual computation.
    pub fn from_result<E: std::fmt::Display>(id: impl Into<String>, tolerance: f64, r: Result<f64, E>) -> Self {
        match r {
            Ok(v) => Self::new(id, v, tolerance),
            Err(e) => Self::failed(id, tolerance, e),
        }
    }

    /// Marks the case as exempt from `--tol`.
    pub fn into_structural(mut self) -> Self {
        self.kind = CaseKind::Structural;
        self
    }

    pub fn set_tolerance(&mut self, tol: f64) {
        if self.kind == CaseKind::Residual {
            self.tolerance = tol;
            self.grade();
        }
    }

    fn grade(&mut self) {
        self.pass = self.error.is_none() && self.residual.is_finite() && self.residual <= self.tolerance;
    }
}

/// Branch and phase conventions behind the reported numbers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Conventions {
    pub cayley: &'static str,
    pub halfform_branch: &'static str,
    pub frame_normalization: &'static str,
    pub heisenberg_action: &'static str,
    pub smatrix_phase: &'static str,
    pub boundary_regularization: &'static str,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            cayley: "tau = (i - Omega)(i + Omega)^-1; Omega = i eps -> tau = 1",
            halfform_branch: "det((Omega - conj(Omega'))/(2ki))^(1/2) with the branch of the Gaussian integral; conversion det(1 + tau)^(1/2) principal",
            frame_normalization: "<sigma^l, sigma^l'> = 2^(-g/2) k^(-g) delta_ll'",
            heisenberg_action: "(lambda,(a,b)) sigma^l = lambda exp(-pi i a.b/k) exp(-2 pi i l.a/k) sigma^(l+b)",
            smatrix_phase: "S_jl -> k^(-1/2) exp(+2 pi i j l/k)",
            boundary_regularization: "eps in {1e-2, 1e-3, 1e-4}, Richardson (10 v(eps/10) - v(eps))/9",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub g: Option<usize>,
    pub k: Option<u32>,
    pub seed: u64,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub config: ConfigEcho,
    pub conventions: Conventions,
    pub cases: Vec<Case>,
    /// Largest residual over cases that produced one.
    pub max_residual: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<String>,
    /// Seconds; only present with `--timing`, since it breaks byte-identical
    /// output.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

impl SuiteReport {
    pub fn new(suite: &str, config: ConfigEcho, cases: Vec<Case>, skipped: Vec<String>) -> Self {
        let max_residual = cases.iter().map(|c| c.residual).filter(|r| r.is_finite()).fold(0.0, f64::max);
        let pass = !cases.is_empty() && cases.iter().all(|c| c.pass);
        Self {
            suite: suite.to_string(),
            config,
            conventions: Conventions::default(),
            cases,
            max_residual,
            pass,
            skipped,
            wall_time: None,
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,residual,tolerance,pass\n");
        for c in &self.cases {
            out.push_str(&format!("{},{:e},{:e},{}\n", c.id, c.residual, c.tolerance, c.pass));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grading() {
        assert!(Case::new("a", 1e-9, 1e-8).pass);
        assert!(!Case::new("a", f64::NAN, 1e-8).pass);
        assert!(!Case::failed("a", 1.0, "boom").pass);
        let mut c = Case::structural("count", 0.0, 0.5);
        c.set_tolerance(-1.0);
        assert!(c.pass);
        let mut c = Case::new("r", 1e-9, 1e-8);
        c.set_tolerance(1e-10);
        assert!(!c.pass);
    }

    #[test]
    fn empty_report_fails() {
        let echo = ConfigEcho { g: None, k: None, seed: 0, s: 3.0 };
        assert!(!SuiteReport::new("x", echo, vec![], vec![]).pass);
    }
}

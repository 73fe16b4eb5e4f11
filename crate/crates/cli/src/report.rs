//! Report types written as `report.json`, plus plain-text renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use doeblin_core::doeblin::MinorizationCertificate;
use doeblin_core::matrix_pf::PeripheralReport;
use doeblin_core::spectral::Diagnostics;
use serde::Serialize;

/// How a measured value is compared with its bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    AtMost,
    AtLeast,
    /// Boolean findings: the value is 1 for true, 0 for false.
    IsTrue,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Check {
        Check {
            name: name.into(),
            value,
            bound: Bound::AtMost,
            threshold,
            // NaN never passes.
            pass: value <= threshold,
        }
    }

    pub fn at_least(name: &str, value: f64, threshold: f64) -> Check {
        Check {
            name: name.into(),
            value,
            bound: Bound::AtLeast,
            threshold,
            pass: value >= threshold,
        }
    }

    pub fn is_true(name: &str, ok: bool) -> Check {
        Check {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            bound: Bound::IsTrue,
            threshold: 1.0,
            pass: ok,
        }
    }

    pub fn line(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        match self.bound {
            Bound::AtMost => format!("{verdict} {:<36} {:.3e} <= {:.1e}", self.name, self.value, self.threshold),
            Bound::AtLeast => format!("{verdict} {:<36} {:.3e} >= {:.1e}", self.name, self.value, self.threshold),
            Bound::IsTrue => format!("{verdict} {}", self.name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateSummary {
    pub source: String,
    pub alpha: f64,
    pub power: usize,
    /// `g` strictly positive at every node.
    pub strict: bool,
}

impl CertificateSummary {
    pub fn new(source: &str, c: &MinorizationCertificate) -> Self {
        CertificateSummary {
            source: source.into(),
            alpha: c.alpha,
            power: c.power,
            strict: c.g.strictly_positive(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticsSummary {
    pub eig_residual: f64,
    pub proj_idempotency: f64,
    pub tp_residual: f64,
    pub pt_residual: f64,
    pub rank_one_defect: f64,
    pub left_residual: f64,
    pub d_at_lambda0: f64,
    pub d_prime_at_lambda0: f64,
    pub gap_to_rho_r: f64,
    pub residue_notation_gap: f64,
}

impl From<Diagnostics> for DiagnosticsSummary {
    fn from(d: Diagnostics) -> Self {
        DiagnosticsSummary {
            eig_residual: d.eig_residual,
            proj_idempotency: d.proj_idempotency,
            tp_residual: d.tp_residual,
            pt_residual: d.pt_residual,
            rank_one_defect: d.rank_one_defect,
            left_residual: d.left_residual,
            d_at_lambda0: d.d_at_lambda0,
            d_prime_at_lambda0: d.d_prime_at_lambda0,
            gap_to_rho_r: d.gap_to_rho_r,
            residue_notation_gap: d.residue_notation_gap,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleSummary {
    pub rho: f64,
    pub delta: f64,
    pub relative_delta: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapSummary {
    pub rho2: f64,
    pub gap_ratio: f64,
    pub dominant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub nodes: usize,
    pub kernel_norm: f64,
    pub certificate: CertificateSummary,
    pub lambda0: f64,
    pub rho_r: f64,
    pub spectral_gap: GapSummary,
    pub diagnostics: DiagnosticsSummary,
    pub oracle: OracleSummary,
    pub checks: Vec<Check>,
    pub passed: bool,
    /// Wall-clock milliseconds per stage; the only nondeterministic field.
    pub timings_ms: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub command: String,
    pub nodes: usize,
    pub seed: u64,
    pub certificate: Option<CertificateSummary>,
    pub lambda0: Option<f64>,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub timings_ms: BTreeMap<String, f64>,
}

pub fn fmt_complex(z: &doeblin_core::matrix_pf::Complex64) -> String {
    if z.im.abs() <= 1e-12 * z.norm().max(1e-300) {
        format!("{:.12}", z.re)
    } else {
        format!("{:.12}{:+.12}i", z.re, z.im)
    }
}

/// Structured text, one `key: value` per line.
pub fn render_peripheral(r: &PeripheralReport) -> String {
    let list = |v: &[doeblin_core::matrix_pf::Complex64]| v.iter().map(fmt_complex).collect::<Vec<_>>().join(", ");
    let mut s = String::new();
    let _ = writeln!(s, "outcome: power-doeblin");
    let _ = writeln!(s, "power: {}", r.n);
    let _ = writeln!(s, "alpha: {:.16e}", r.certificate.alpha);
    let _ = writeln!(s, "strict: {}", r.certificate.g.strictly_positive());
    let _ = writeln!(s, "rho: {:.16e}", r.rho);
    let _ = writeln!(s, "rho_power: {:.16e}", r.power_result.lambda0);
    let _ = writeln!(s, "power_gap_ratio: {:.6e}", r.power_gap_ratio);
    let _ = writeln!(s, "simple: {}", r.simple);
    let _ = writeln!(s, "peripheral_candidates: [{}]", list(&r.peripheral_candidates));
    let _ = writeln!(s, "peripheral: [{}]", list(&r.peripheral));
    match &r.spectrum {
        Some(spec) => {
            let _ = writeln!(s, "spectrum: [{}]", list(spec));
        }
        None => {
            let _ = writeln!(s, "spectrum: not computed (dimension above oracle limit)");
        }
    }
    if let Some(ok) = r.oracle_agrees {
        let _ = writeln!(s, "oracle_agrees: {ok}");
    }
    s
}

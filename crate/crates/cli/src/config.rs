//! JSON run configuration.
//!
//! ```json
//! {
//!   "space":  { "type": "interval", "a": 0.0, "b": 1.0, "n": 200, "rule": "midpoint" },
//!   "kernel": { "family": "gaussian", "sigma": 0.2 },
//!   "certificate": { "strategy": "row_min" },
//!   "solver": { "mode": "direct", "tol": 1e-13 },
//!   "outputs": { "eigenfunction": "eigenfunction.csv" },
//!   "seed": 7
//! }
//! ```
//!
//! Relative paths are resolved against the directory holding the config file.
//! A `csv` kernel may omit `space`, in which case the counting measure on its
//! rows is used.

use std::fs;
use std::path::{Path, PathBuf};

use doeblin_core::doeblin::Strategy;
use doeblin_core::resolvent::SolverMode;
use doeblin_core::{Kernel, MeasureSpace, QuadratureRule};
use serde::Deserialize;

use crate::error::{CliError, CliResult};
use crate::expr::Expr;
use crate::io;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub space: Option<SpaceConfig>,
    pub kernel: KernelConfig,
    #[serde(default)]
    pub certificate: CertificateConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceConfig {
    Interval {
        a: f64,
        b: f64,
        n: usize,
        #[serde(default)]
        rule: RuleName,
    },
    Counting {
        n: usize,
    },
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum RuleName {
    #[default]
    Midpoint,
    Trapezoid,
    GaussLegendre,
}

impl From<RuleName> for QuadratureRule {
    fn from(r: RuleName) -> Self {
        match r {
            RuleName::Midpoint => QuadratureRule::Midpoint,
            RuleName::Trapezoid => QuadratureRule::Trapezoid,
            RuleName::GaussLegendre => QuadratureRule::GaussLegendre,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    Constant { c: f64 },
    /// `K(x,y) = v(x) u(y)`.
    Separable { v: String, u: String },
    Gaussian { sigma: f64 },
    Csv { path: PathBuf },
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum StrategyName {
    #[default]
    RowMin,
    ColumnProfile,
}

/// Exactly one of `strategy` and `file`; an empty object means `row_min`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateConfig {
    #[serde(default)]
    pub strategy: Option<StrategyName>,
    #[serde(default)]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    #[default]
    Direct,
    Neumann,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub mode: ModeName,
    /// Root tolerance on `D`.
    pub tol: f64,
    /// Neumann-mode stopping tolerance and term cap.
    pub series_tol: f64,
    pub max_terms: usize,
    pub thresholds: Thresholds,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mode: ModeName::Direct,
            tol: 1e-13,
            series_tol: 1e-15,
            max_terms: 100_000,
            thresholds: Thresholds::default(),
        }
    }
}

/// Pass thresholds. Residuals scaled by `λ₀` are compared after dividing by it.
#[derive(Debug, Clone, serde::Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub eigen: f64,
    pub projection: f64,
    pub oracle: f64,
    pub thm42: f64,
    pub series: f64,
    pub derivative: f64,
    pub measure_change: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            eigen: 1e-8,
            projection: 1e-8,
            oracle: 1e-7,
            thm42: 1e-9,
            series: 1e-8,
            derivative: 1e-6,
            measure_change: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub report: PathBuf,
    pub dcurve: PathBuf,
    pub eigenfunction: PathBuf,
    pub certificate: PathBuf,
    pub gammas: PathBuf,
    pub convergence: PathBuf,
    pub peripheral: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            report: "report.json".into(),
            dcurve: "dcurve.csv".into(),
            eigenfunction: "eigenfunction.csv".into(),
            certificate: "certificate.json".into(),
            gammas: "gammas.csv".into(),
            convergence: "convergence.csv".into(),
            peripheral: "peripheral.txt".into(),
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!("{name} must be positive and finite (got {v})")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<RunConfig> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str, base_dir: &Path) -> CliResult<RunConfig> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn validate(&self) -> CliResult<()> {
        match &self.space {
            Some(SpaceConfig::Interval { a, b, n, .. }) => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return Err(config_err(format!("interval needs a < b (got a = {a}, b = {b})")));
                }
                if *n == 0 {
                    return Err(config_err("interval needs n >= 1"));
                }
            }
            Some(SpaceConfig::Counting { n }) if *n == 0 => {
                return Err(config_err("counting space needs n >= 1"));
            }
            Some(SpaceConfig::Counting { .. }) => {}
            None if !matches!(self.kernel, KernelConfig::Csv { .. }) => {
                return Err(config_err("only csv kernels may omit 'space'"));
            }
            None => {}
        }
        match &self.kernel {
            KernelConfig::Constant { c } => positive("constant kernel value", *c)?,
            KernelConfig::Gaussian { sigma } => positive("gaussian sigma", *sigma)?,
            KernelConfig::Separable { v, u } => {
                for (name, src) in [("v", v), ("u", u)] {
                    Expr::parse(src).map_err(|e| config_err(format!("separable factor {name}: {e}")))?;
                }
            }
            KernelConfig::Csv { path } => {
                let p = self.resolve(path);
                if !p.is_file() {
                    return Err(config_err(format!("kernel csv {} does not exist", p.display())));
                }
            }
        }
        match (&self.certificate.strategy, &self.certificate.file) {
            (Some(_), Some(_)) => {
                return Err(config_err("certificate takes either 'strategy' or 'file', not both"));
            }
            (None, Some(f)) => {
                let p = self.resolve(f);
                if !p.is_file() {
                    return Err(config_err(format!("certificate file {} does not exist", p.display())));
                }
            }
            _ => {}
        }
        let s = &self.solver;
        positive("solver.tol", s.tol)?;
        positive("solver.series_tol", s.series_tol)?;
        if s.max_terms == 0 {
            return Err(config_err("solver.max_terms must be positive"));
        }
        let t = &s.thresholds;
        for (name, v) in [
            ("eigen", t.eigen),
            ("projection", t.projection),
            ("oracle", t.oracle),
            ("thm42", t.thm42),
            ("series", t.series),
            ("derivative", t.derivative),
            ("measure_change", t.measure_change),
        ] {
            positive(&format!("thresholds.{name}"), v)?;
        }
        Ok(())
    }

    pub fn solver_mode(&self) -> SolverMode {
        match self.solver.mode {
            ModeName::Direct => SolverMode::DirectLu,
            ModeName::Neumann => SolverMode::Neumann {
                series_tol: self.solver.series_tol,
                max_terms: self.solver.max_terms,
            },
        }
    }

    /// The canonical strategy, or `None` when a certificate file is configured.
    pub fn strategy(&self) -> Option<Strategy> {
        if self.certificate.file.is_some() {
            return None;
        }
        Some(match self.certificate.strategy.unwrap_or_default() {
            StrategyName::RowMin => Strategy::RowMin,
            StrategyName::ColumnProfile => Strategy::ColumnProfile,
        })
    }

    /// Strategy used where a file certificate cannot be (powers, conjugated kernels).
    pub fn fallback_strategy(&self) -> Strategy {
        self.strategy().unwrap_or(Strategy::RowMin)
    }

    pub fn build_kernel(&self) -> CliResult<Kernel> {
        let csv = match &self.kernel {
            KernelConfig::Csv { path } => Some(io::read_matrix_csv(&self.resolve(path))?),
            _ => None,
        };
        let space = match (&self.space, &csv) {
            (Some(SpaceConfig::Interval { a, b, n, rule }), _) => {
                MeasureSpace::interval(*a, *b, *n, (*rule).into()).map_err(|e| config_err(e.to_string()))?
            }
            (Some(SpaceConfig::Counting { n }), _) => MeasureSpace::counting(*n).map_err(|e| config_err(e.to_string()))?,
            (None, Some(m)) => MeasureSpace::counting(m.rows()).map_err(|e| config_err(e.to_string()))?,
            (None, None) => return Err(config_err("missing 'space'")),
        };
        let kernel = match &self.kernel {
            KernelConfig::Constant { c } => Kernel::constant(space, *c),
            KernelConfig::Gaussian { sigma } => Kernel::gaussian(space, *sigma),
            KernelConfig::Separable { v, u } => {
                let v = Expr::parse(v).map_err(|e| config_err(e.to_string()))?;
                let u = Expr::parse(u).map_err(|e| config_err(e.to_string()))?;
                let vx: Vec<f64> = space.nodes().iter().map(|x| v.eval(*x)).collect();
                let uy: Vec<f64> = space.nodes().iter().map(|x| u.eval(*x)).collect();
                Kernel::separable(space, &vx, &uy)
            }
            KernelConfig::Csv { .. } => {
                let m = csv.expect("csv kernel was read above");
                if m.rows() != space.len() {
                    return Err(config_err(format!(
                        "kernel csv has {} rows but the space has {} nodes",
                        m.rows(),
                        space.len()
                    )));
                }
                Kernel::new(space, m)
            }
        };
        kernel.map_err(|e| config_err(format!("invalid kernel: {e}")))
    }

    pub fn output_dir(&self, cli_out: Option<&Path>) -> PathBuf {
        match (cli_out, &self.outputs.dir) {
            (Some(p), _) => p.to_path_buf(),
            (None, Some(d)) => self.resolve(d),
            (None, None) => PathBuf::from("."),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> CliResult<RunConfig> {
        RunConfig::from_json(s, Path::new("."))
    }

    #[test]
    fn minimal_interval_config() {
        let c = parse(r#"{"space":{"type":"interval","a":0,"b":1,"n":10},"kernel":{"family":"constant","c":1}}"#).unwrap();
        assert_eq!(c.seed, 0);
        assert_eq!(c.strategy(), Some(Strategy::RowMin));
        let k = c.build_kernel().unwrap();
        assert_eq!(k.len(), 10);
        assert!((k.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn separable_kernel_from_expressions() {
        let c = parse(
            r#"{"space":{"type":"counting","n":3},"kernel":{"family":"separable","v":"1 + x","u":"exp(-x)"}}"#,
        )
        .unwrap();
        let k = c.build_kernel().unwrap();
        assert!((k.entries().get(2, 1) - 3.0 * (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn rejects_invalid_configs() {
        let bad = [
            r#"{"kernel":{"family":"constant","c":1}}"#,
            r#"{"space":{"type":"counting","n":2},"kernel":{"family":"gaussian","sigma":-1}}"#,
            r#"{"space":{"type":"counting","n":2},"kernel":{"family":"separable","v":"sin(x)","u":"1"}}"#,
            r#"{"space":{"type":"counting","n":2},"kernel":{"family":"csv","path":"/nonexistent.csv"}}"#,
            r#"{"space":{"type":"counting","n":2},"kernel":{"family":"constant","c":1},"solver":{"tol":0}}"#,
            r#"{"space":{"type":"interval","a":1,"b":0,"n":4},"kernel":{"family":"constant","c":1}}"#,
            r#"{"space":{"type":"counting","n":2},"kernel":{"family":"constant","c":1},"certificate":{"strategy":"row_min","file":"x"}}"#,
            r#"{"space":{"type":"counting","n":2},"kernel":{"family":"constant","c":1},"typo":1}"#,
        ];
        for b in bad {
            assert!(matches!(parse(b), Err(CliError::Config(_))), "{b}");
        }
    }
}

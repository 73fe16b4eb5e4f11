//! Flat-file formats: header-free matrix CSV in, headed CSV and JSON out.

use std::fs;
use std::path::Path;

use doeblin_core::doeblin::MinorizationCertificate;
use doeblin_core::{GridFunction, Matrix, WeightFunctional};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Full round-trip precision: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn read_matrix_csv(path: &Path) -> CliResult<Matrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>().map_err(|_| {
                    CliError::Config(format!("{}: row {}: '{s}' is not a number", path.display(), i + 1))
                })
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Config(format!("{}: empty matrix", path.display())));
    }
    if rows.len() != rows[0].len() {
        return Err(CliError::Config(format!(
            "{}: matrix is {}x{}, expected square",
            path.display(),
            rows.len(),
            rows[0].len()
        )));
    }
    Matrix::from_rows(&rows).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    Ok(())
}

fn write_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Write {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    }
}

/// Writes a headed CSV; every row is a list of already formatted fields.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    ensure_parent(path)?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_path(path)
        .map_err(|e| write_err(path, e))?;
    w.write_record(header).map_err(|e| write_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| write_err(path, e))?;
    write_text(path, &(text + "\n"))
}

/// On-disk certificate. `g` is a density with respect to the configured measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateFile {
    pub alpha: f64,
    pub u0: Vec<f64>,
    pub g: Vec<f64>,
    pub power: usize,
    /// Free-form note on how `(α, g)` are scaled, e.g. `"phi_one"` for `Φ[1] = 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<String>,
}

impl CertificateFile {
    pub fn from_certificate(c: &MinorizationCertificate, normalization: &str) -> Self {
        CertificateFile {
            alpha: c.alpha,
            u0: c.u0.to_vec(),
            g: c.g.density().to_vec(),
            power: c.power,
            normalization: Some(normalization.to_string()),
        }
    }

    /// Structural checks only; whether the inequality holds is decided by the caller.
    pub fn into_certificate(self, n: usize) -> CliResult<MinorizationCertificate> {
        if self.u0.len() != n || self.g.len() != n {
            return Err(CliError::Certificate(format!(
                "u0 and g need {n} entries (got {} and {})",
                self.u0.len(),
                self.g.len()
            )));
        }
        if self.power == 0 {
            return Err(CliError::Certificate("power must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(CliError::Certificate(format!("alpha must be positive (got {})", self.alpha)));
        }
        let g = WeightFunctional::new(self.g).map_err(|e| CliError::Certificate(e.to_string()))?;
        Ok(MinorizationCertificate {
            alpha: self.alpha,
            u0: GridFunction::new(self.u0),
            g,
            power: self.power,
        })
    }
}

/// An unreadable path is a configuration error; a file that exists but does
/// not parse is a rejected certificate.
pub fn read_certificate(path: &Path) -> CliResult<CertificateFile> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Certificate(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        let v = 0.1 + 0.2;
        assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn matrix_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        fs::write(&p, "2, 1\n1,2\n").unwrap();
        let m = read_matrix_csv(&p).unwrap();
        assert_eq!(m.to_rows(), vec![vec![2.0, 1.0], vec![1.0, 2.0]]);
        fs::write(&p, "1,2,3\n4,5,6\n").unwrap();
        assert!(matches!(read_matrix_csv(&p), Err(CliError::Config(_))));
        fs::write(&p, "1,x\n1,1\n").unwrap();
        assert!(matches!(read_matrix_csv(&p), Err(CliError::Config(_))));
    }

    #[test]
    fn certificate_structure_is_checked() {
        let c = CertificateFile {
            alpha: 1.0,
            u0: vec![1.0, 1.0],
            g: vec![0.5, -0.5],
            power: 1,
            normalization: None,
        };
        assert!(matches!(c.clone().into_certificate(2), Err(CliError::Certificate(_))));
        assert!(matches!(c.into_certificate(3), Err(CliError::Certificate(_))));
    }
}

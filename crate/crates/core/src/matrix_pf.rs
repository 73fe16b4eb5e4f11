//! Perron–Frobenius for nonnegative matrices (kernels over a counting space):
//! the primitive case through the Birman–Schwinger solver, and the
//! power-Doeblin case where only `A^N` admits a rank-one minorization.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

pub use num_complex::Complex64;

use crate::doeblin::{
    extract_minorization, power_doeblin_search, split, Minorization, MinorizationCertificate,
    PowerSearch, Strategy,
};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::linalg::Matrix;
use crate::math::{abs, cos, powf, sin, sup_norm};
use crate::resolvent::{BirmanSchwingerEvaluator, SolverMode};
use crate::spectral::{self, SpectralResult};

/// Largest dimension for the characteristic-polynomial oracle.
pub const ORACLE_MAX_DIM: usize = 12;
const ROOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PfSolution {
    pub certificate: MinorizationCertificate,
    pub result: SpectralResult,
    /// `‖ΦA − ρΦ‖∞ / ‖Φ‖∞` for the left row.
    pub left_eigen_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeripheralReport {
    pub rho: f64,
    pub n: usize,
    pub certificate: MinorizationCertificate,
    /// Spectral data of `A^N`.
    pub power_result: SpectralResult,
    /// `ρζ` for every `N`-th root of unity `ζ`.
    pub peripheral_candidates: Vec<Complex64>,
    /// Candidates confirmed as eigenvalues of `A`.
    pub peripheral: Vec<Complex64>,
    /// Dominant eigenvalue of `A^N` is simple and strictly dominant.
    pub simple: bool,
    /// `ρ₂(A^N) / ρ(A^N)`.
    pub power_gap_ratio: f64,
    /// Full spectrum of `A` by modulus (descending) when `n ≤ 12`.
    pub spectrum: Option<Vec<Complex64>>,
    /// Whether the polynomial oracle (when run) confirms exactly the same peripheral set.
    pub oracle_agrees: Option<bool>,
}

// Returned once per analysis; boxing the report buys nothing.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq)]
pub enum PowerDoeblinOutcome {
    Report(PeripheralReport),
    NotFoundWithin(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PfOutcome {
    Primitive(PfSolution),
    PowerDoeblin(PeripheralReport),
    NotFoundWithin(usize),
}

fn require_counting(a: &Kernel) -> Result<()> {
    if a.space().is_counting() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(
            "matrix analysis requires a counting space".into(),
        ))
    }
}

fn solve_certified(a: &Kernel, cert: &MinorizationCertificate, tol: f64) -> Result<(BirmanSchwingerEvaluator, SpectralResult)> {
    let ev = BirmanSchwingerEvaluator::new(split(a, cert)?, SolverMode::DirectLu)?;
    let result = spectral::solve(&ev, tol)?;
    Ok((ev, result))
}

/// Solves with an `N = 1` certificate when one exists, otherwise falls back to
/// [`power_doeblin_analyze`] with powers up to `n_max`.
pub fn pf_solve(a: &Kernel, strategy: &Strategy, n_max: usize, tol: f64) -> Result<PfOutcome> {
    require_counting(a)?;
    if let Minorization::Certified(cert) = extract_minorization(a, strategy)? {
        if cert.g.strictly_positive() {
            let (_, result) = solve_certified(a, &cert, tol)?;
            let left_eigen_residual = result.diagnostics.left_residual;
            return Ok(PfOutcome::Primitive(PfSolution {
                certificate: cert,
                result,
                left_eigen_residual,
            }));
        }
    }
    Ok(match power_doeblin_analyze(a, n_max, strategy, tol)? {
        PowerDoeblinOutcome::Report(r) => PfOutcome::PowerDoeblin(r),
        PowerDoeblinOutcome::NotFoundWithin(n) => PfOutcome::NotFoundWithin(n),
    })
}

pub fn power_doeblin_analyze(a: &Kernel, n_max: usize, strategy: &Strategy, tol: f64) -> Result<PowerDoeblinOutcome> {
    require_counting(a)?;
    let cert = match power_doeblin_search(a, n_max, strategy)? {
        PowerSearch::Found(c) => c,
        PowerSearch::NotFoundWithin(n) => return Ok(PowerDoeblinOutcome::NotFoundWithin(n)),
    };
    let n = cert.power;
    let an = a.iterate(n)?;
    let plain = MinorizationCertificate {
        power: 1,
        ..cert.clone()
    };
    let (ev, power_result) = solve_certified(&an, &plain, tol)?;
    let rho = powf(power_result.lambda0, 1.0 / n as f64);
    let dominance = spectral::verify_dominance(&ev, &power_result)?;
    let simple = dominance.dominant && power_result.diagnostics.rank_one_defect < 1e-8;

    let candidates: Vec<Complex64> = (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            Complex64::new(rho * cos(t), rho * sin(t))
        })
        .collect();

    // Any eigenvector of A for a peripheral λ is an eigenvector of A^N for the
    // simple eigenvalue ρ^N, hence a multiple of w.
    let w = &power_result.w;
    let aw = a.entries().matvec(w)?;
    let wn = sup_norm(w);
    let peripheral: Vec<Complex64> = candidates
        .iter()
        .copied()
        .filter(|lam| {
            let res = aw
                .iter()
                .zip(w.iter())
                .fold(0.0f64, |m, (x, v)| m.max((Complex64::new(*x, 0.0) - lam * v).norm()));
            res <= 1e-8 * rho * wn
        })
        .collect();

    let (spectrum, oracle_agrees) = if a.len() <= ORACLE_MAX_DIM {
        let spec = small_spectrum(a.entries())?;
        let from_oracle: Vec<Complex64> = candidates
            .iter()
            .copied()
            .filter(|c| spec.iter().any(|s| (s - c).norm() <= 1e-6 * rho))
            .collect();
        let agrees = from_oracle.len() == peripheral.len()
            && from_oracle
                .iter()
                .all(|c| peripheral.iter().any(|p| (p - c).norm() <= 1e-6 * rho));
        (Some(spec), Some(agrees))
    } else {
        (None, None)
    };

    Ok(PowerDoeblinOutcome::Report(PeripheralReport {
        rho,
        n,
        certificate: cert,
        power_result,
        peripheral_candidates: candidates,
        peripheral,
        simple,
        power_gap_ratio: dominance.gap_ratio,
        spectrum,
        oracle_agrees,
    }))
}

/// Coefficients `c₀, …, c_n` of `det(λI − A) = Σ c_k λ^k` (Faddeev–LeVerrier).
pub fn characteristic_polynomial(a: &Matrix) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            found: a.cols(),
        });
    }
    let n = a.rows();
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let mut m = Matrix::zeros(n, n);
    for k in 1..=n {
        let mut next = a.matmul(&m)?;
        for i in 0..n {
            next.set(i, i, next.get(i, i) + c[n - k + 1]);
        }
        let am = a.matmul(&next)?;
        let trace: f64 = (0..n).map(|i| am.get(i, i)).sum();
        c[n - k] = -trace / k as f64;
        m = next;
    }
    Ok(c)
}

fn horner(c: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &ck in c.iter().rev() {
        dp = dp * z + p;
        p = p * z + ck;
    }
    (p, dp)
}

/// All complex roots of a monic-normalizable polynomial `Σ c_k z^k`
/// (Durand–Kerner, then Newton polishing).
pub fn polynomial_roots(c: &[f64]) -> Result<Vec<Complex64>> {
    let deg = c.iter().rposition(|v| *v != 0.0).unwrap_or(0);
    if deg == 0 {
        return Ok(Vec::new());
    }
    let lead = c[deg];
    let monic: Vec<f64> = c[..=deg].iter().map(|v| v / lead).collect();
    let radius = 1.0 + monic[..deg].iter().fold(0.0f64, |m, v| m.max(abs(*v)));
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..deg)
        .map(|k| seed.powu(k as u32) * (radius / seed.norm().max(1.0)))
        .collect();
    for _ in 0..5000 {
        let mut change: f64 = 0.0;
        for i in 0..deg {
            let (p, _) = horner(&monic, z[i]);
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..deg {
                if i != j {
                    denom *= z[i] - z[j];
                }
            }
            if denom.norm() == 0.0 {
                denom = Complex64::new(1e-300, 0.0);
            }
            let delta = p / denom;
            z[i] -= delta;
            change = change.max(delta.norm());
        }
        if change <= 1e-15 * radius {
            break;
        }
    }
    for zi in z.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = horner(&monic, *zi);
            if dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            if step.norm() > ROOT_TOL * radius {
                break;
            }
            *zi -= step;
        }
    }
    Ok(z)
}

/// Eigenvalues of a matrix with at most [`ORACLE_MAX_DIM`] rows, sorted by
/// decreasing modulus (ties by decreasing real part).
pub fn small_spectrum(a: &Matrix) -> Result<Vec<Complex64>> {
    if a.rows() > ORACLE_MAX_DIM {
        return Err(Error::InvalidArgument(alloc::format!(
            "polynomial oracle is limited to n <= {ORACLE_MAX_DIM}"
        )));
    }
    let mut roots = polynomial_roots(&characteristic_polynomial(a)?)?;
    for r in roots.iter_mut() {
        if abs(r.im) <= 1e-12 * r.norm().max(1.0) {
            r.im = 0.0;
        }
    }
    roots.sort_by(|x, y| {
        y.norm()
            .partial_cmp(&x.norm())
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(y.re.partial_cmp(&x.re).unwrap_or(core::cmp::Ordering::Equal))
    });
    Ok(roots)
}

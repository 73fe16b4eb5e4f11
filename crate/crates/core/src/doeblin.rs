//! Rank-one minorizations `K^{(N)}(x,y) ≥ α u₀(x) g(y)` and the split
//! `T = α u₀ ⊗ Φ + R`.
//!
//! The canonical strategies normalize the functional so that `Φ[1] = 1` and
//! carry the resulting scale in `α`. They only accept strictly positive
//! certificates (`u₀ > 0` and `g > 0` at every node); anything weaker is
//! reported as [`Minorization::NotMinorizable`].

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{ensure_len, Error, Result};
use crate::kernel::Kernel;
use crate::linalg::Matrix;
use crate::measure::{GridFunction, WeightFunctional};

/// Float-noise allowance on the entrywise inequality, relative to `max(1, max K)`.
pub const SLACK: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    /// `u₀(x) = min_y K(x,y)`, `g ≡ 1/μ(X)`, `α = μ(X)`.
    RowMin,
    /// `u₀ = T1 / ‖T1‖∞`, `g_j ∝ min_i K_ij / u₀_i`, rescaled so `Φ[1] = 1`.
    ColumnProfile,
    /// Fixed shape; only `α` is optimized.
    User { u0: GridFunction, g: WeightFunctional },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinorizationCertificate {
    pub alpha: f64,
    pub u0: GridFunction,
    pub g: WeightFunctional,
    pub power: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Minorization {
    Certified(MinorizationCertificate),
    NotMinorizable(String),
}

impl Minorization {
    pub fn certificate(self) -> Option<MinorizationCertificate> {
        match self {
            Minorization::Certified(c) => Some(c),
            Minorization::NotMinorizable(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateReport {
    pub holds: bool,
    /// `min_ij K^{(N)}_ij − α u₀_i g_j`.
    pub worst_slack: f64,
    pub strict_phi: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankOneSplit {
    pub kernel: Kernel,
    pub cert: MinorizationCertificate,
    /// `R = K − α u₀ ⊗ g ≥ 0`.
    pub remainder: Kernel,
}

impl RankOneSplit {
    pub fn alpha(&self) -> f64 {
        self.cert.alpha
    }

    pub fn u0(&self) -> &GridFunction {
        &self.cert.u0
    }

    pub fn g(&self) -> &WeightFunctional {
        &self.cert.g
    }

    /// `Φ[f] = Σ g_i f_i w_i`.
    pub fn phi(&self, f: &[f64]) -> Result<f64> {
        self.kernel.space().pair(&self.cert.g, f)
    }

    /// Kernel density of `α u₀ ⊗ Φ`.
    pub fn rank_one_part(&self) -> Matrix {
        Matrix::outer(&self.cert.u0, self.cert.g.density()).scaled(self.cert.alpha)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PowerSearch {
    Found(MinorizationCertificate),
    NotFoundWithin(usize),
}

fn slack_for(m: &Matrix) -> f64 {
    SLACK * m.max_abs().max(1.0)
}

pub fn extract_minorization(k: &Kernel, strategy: &Strategy) -> Result<Minorization> {
    let n = k.len();
    let a = k.entries();
    let mass = k.space().total_mass();
    match strategy {
        Strategy::RowMin => {
            let mins: Vec<f64> = (0..n)
                .map(|i| a.row(i).iter().copied().fold(f64::INFINITY, f64::min))
                .collect();
            if let Some(i) = mins.iter().position(|m| !(*m > 0.0)) {
                return Ok(Minorization::NotMinorizable(format!(
                    "row {i} has a zero entry, so no strictly positive u0 fits under it"
                )));
            }
            Ok(Minorization::Certified(MinorizationCertificate {
                alpha: mass,
                u0: GridFunction::new(mins),
                g: WeightFunctional::normalized_uniform(k.space()),
                power: 1,
            }))
        }
        Strategy::ColumnProfile => {
            let t1 = k.apply(&alloc::vec![1.0; n])?;
            let top = t1.sup_norm();
            if let Some(i) = t1.iter().position(|v| !(*v > 0.0)) {
                return Ok(Minorization::NotMinorizable(format!(
                    "row {i} of K vanishes"
                )));
            }
            let u0: Vec<f64> = t1.iter().map(|v| v / top).collect();
            let raw: Vec<f64> = (0..n)
                .map(|j| (0..n).map(|i| a.get(i, j) / u0[i]).fold(f64::INFINITY, f64::min))
                .collect();
            if let Some(j) = raw.iter().position(|v| !(*v > 0.0)) {
                return Ok(Minorization::NotMinorizable(format!(
                    "column {j} of K has a zero entry, so g vanishes there"
                )));
            }
            let phi_one: f64 = raw.iter().zip(k.weights()).map(|(g, w)| g * w).sum();
            let g = WeightFunctional::new(raw.iter().map(|g| g / phi_one).collect())?;
            Ok(Minorization::Certified(MinorizationCertificate {
                alpha: phi_one,
                u0: GridFunction::new(u0),
                g,
                power: 1,
            }))
        }
        Strategy::User { u0, g } => {
            ensure_len(n, u0.len())?;
            ensure_len(n, g.len())?;
            if !u0.is_nonnegative() {
                return Err(Error::InvalidArgument("u0 must be nonnegative".into()));
            }
            let gd = g.density();
            let mut alpha = f64::INFINITY;
            for (i, ui) in u0.iter().enumerate() {
                for (j, gj) in gd.iter().enumerate() {
                    let s = ui * gj;
                    if s > 0.0 {
                        alpha = alpha.min(a.get(i, j) / s);
                    }
                }
            }
            if !alpha.is_finite() {
                return Ok(Minorization::NotMinorizable(
                    "u0 ⊗ g vanishes identically".into(),
                ));
            }
            if alpha <= 0.0 {
                return Ok(Minorization::NotMinorizable(
                    "K vanishes somewhere on the support of u0 ⊗ g".into(),
                ));
            }
            Ok(Minorization::Certified(MinorizationCertificate {
                alpha,
                u0: u0.clone(),
                g: g.clone(),
                power: 1,
            }))
        }
    }
}

fn validate_shape(k: &Kernel, cert: &MinorizationCertificate) -> Result<()> {
    ensure_len(k.len(), cert.u0.len())?;
    ensure_len(k.len(), cert.g.len())?;
    if cert.power == 0 {
        return Err(Error::InvalidArgument("certificate power must be at least 1".into()));
    }
    if !(cert.alpha > 0.0 && cert.alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "certificate alpha must be positive (got {})",
            cert.alpha
        )));
    }
    if !cert.u0.is_nonnegative() || cert.u0.iter().all(|v| *v == 0.0) {
        return Err(Error::InvalidArgument(
            "certificate u0 must be nonnegative and not identically zero".into(),
        ));
    }
    Ok(())
}

pub fn verify_certificate(k: &Kernel, cert: &MinorizationCertificate) -> Result<CertificateReport> {
    validate_shape(k, cert)?;
    let kn = k.iterate(cert.power)?;
    Ok(report_against(kn.entries(), cert))
}

fn report_against(a: &Matrix, cert: &MinorizationCertificate) -> CertificateReport {
    let n = a.rows();
    let g = cert.g.density();
    let mut worst = f64::INFINITY;
    for i in 0..n {
        let ai = cert.alpha * cert.u0[i];
        for (kij, gj) in a.row(i).iter().zip(g) {
            worst = worst.min(kij - ai * gj);
        }
    }
    CertificateReport {
        holds: worst >= -slack_for(a),
        worst_slack: worst,
        strict_phi: cert.g.strictly_positive(),
    }
}

pub fn split(k: &Kernel, cert: &MinorizationCertificate) -> Result<RankOneSplit> {
    if cert.power != 1 {
        return Err(Error::InvalidArgument(format!(
            "a split needs a plain certificate, got power {}",
            cert.power
        )));
    }
    let report = verify_certificate(k, cert)?;
    if !report.holds {
        return Err(Error::InvalidCertificate {
            worst_slack: report.worst_slack,
        });
    }
    let n = k.len();
    let a = k.entries();
    let g = cert.g.density();
    let r = Matrix::from_fn(n, n, |i, j| {
        (a.get(i, j) - cert.alpha * cert.u0[i] * g[j]).max(0.0)
    });
    Ok(RankOneSplit {
        kernel: k.clone(),
        cert: cert.clone(),
        remainder: Kernel::new(k.space().clone(), r)?,
    })
}

/// Smallest `N ≤ n_max` for which `strategy` certifies `K^{(N)}` with a
/// strictly positive functional.
pub fn power_doeblin_search(k: &Kernel, n_max: usize, strategy: &Strategy) -> Result<PowerSearch> {
    let mut kn = k.clone();
    for n in 1..=n_max {
        if n > 1 {
            kn = k.compose(&kn)?;
        }
        if let Minorization::Certified(mut cert) = extract_minorization(&kn, strategy)? {
            if cert.g.strictly_positive() {
                cert.power = n;
                return Ok(PowerSearch::Found(cert));
            }
        }
    }
    Ok(PowerSearch::NotFoundWithin(n_max))
}

/// Checks `T^N f > 0` and `T^N f ≥ α u₀ Φ[f]` on every node indicator and on
/// the constant function. Nonnegative inputs are cones over these, so the
/// battery is exhaustive for the lower bound.
pub fn positivity_improving_check(k: &Kernel, cert: &MinorizationCertificate) -> Result<bool> {
    validate_shape(k, cert)?;
    let kn = k.iterate(cert.power)?;
    let n = k.len();
    let slack = slack_for(kn.entries());
    let space = k.space();
    let battery = (0..n)
        .map(|j| GridFunction::indicator(n, j))
        .chain(core::iter::once(GridFunction::constant(n, 1.0)));
    for f in battery {
        let tf = kn.apply(&f)?;
        let phi = space.pair(&cert.g, &f)?;
        for i in 0..n {
            if !(tf[i] > 0.0) {
                return Ok(false);
            }
            let fscale = f.iter().zip(space.weights()).map(|(f, w)| f * w).sum::<f64>();
            if tf[i] < cert.alpha * cert.u0[i] * phi - slack * fscale.max(1.0) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{MeasureSpace, QuadratureRule};
    use alloc::vec;

    fn counting(rows: &[Vec<f64>]) -> Kernel {
        Kernel::new(
            MeasureSpace::counting(rows.len()).unwrap(),
            Matrix::from_rows(rows).unwrap(),
        )
        .unwrap()
    }

    fn b4() -> Kernel {
        counting(&[vec![0.0, 1.0], vec![0.5, 0.5]])
    }

    fn certified(m: Minorization) -> MinorizationCertificate {
        m.certificate().expect("certified")
    }

    #[test]
    fn row_min_constant_counting() {
        let k = Kernel::constant(MeasureSpace::counting(4).unwrap(), 3.0).unwrap();
        let c = certified(extract_minorization(&k, &Strategy::RowMin).unwrap());
        assert_eq!(c.u0.values(), &[3.0; 4]);
        assert_eq!(c.g.density(), &[0.25; 4]);
        assert_eq!(c.alpha, 4.0);
        let s = split(&k, &c).unwrap();
        assert_eq!(s.remainder.entries().max_abs(), 0.0);
    }

    #[test]
    fn row_min_two_by_two() {
        let k = counting(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let c = certified(extract_minorization(&k, &Strategy::RowMin).unwrap());
        assert_eq!(c.u0.values(), &[1.0, 1.0]);
        assert_eq!(c.g.density(), &[0.5, 0.5]);
        assert_eq!(c.alpha, 2.0);
        let s = split(&k, &c).unwrap();
        assert_eq!(s.remainder.entries().to_rows(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn b4_is_not_minorizable_at_power_one() {
        for s in [Strategy::RowMin, Strategy::ColumnProfile] {
            assert!(matches!(
                extract_minorization(&b4(), &s).unwrap(),
                Minorization::NotMinorizable(_)
            ));
        }
    }

    #[test]
    fn b4_power_search_finds_two() {
        let PowerSearch::Found(c) = power_doeblin_search(&b4(), 5, &Strategy::RowMin).unwrap() else {
            panic!("expected a certificate");
        };
        assert_eq!(c.power, 2);
        assert!(verify_certificate(&b4(), &c).unwrap().holds);
        assert_eq!(b4().iterate(2).unwrap().entries().to_rows(), vec![vec![0.5, 0.5], vec![0.25, 0.75]]);
        assert!(positivity_improving_check(&b4(), &c).unwrap());
        let p2f = b4().iterate(2).unwrap().apply(&[1.0, 0.0]).unwrap();
        assert_eq!(p2f.values(), &[0.5, 0.25]);
    }

    #[test]
    fn b4_square_user_certificate() {
        // Column minima of P² with u₀ = 1.
        let cert = MinorizationCertificate {
            alpha: 1.0,
            u0: GridFunction::constant(2, 1.0),
            g: WeightFunctional::new(vec![0.25, 0.5]).unwrap(),
            power: 2,
        };
        let r = verify_certificate(&b4(), &cert).unwrap();
        assert!(r.holds && r.strict_phi);
        assert_eq!(r.worst_slack, 0.0);
    }

    #[test]
    fn swap_matrix_never_certifies() {
        let k = counting(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        for s in [Strategy::RowMin, Strategy::ColumnProfile] {
            assert_eq!(
                power_doeblin_search(&k, 12, &s).unwrap(),
                PowerSearch::NotFoundWithin(12)
            );
        }
    }

    #[test]
    fn strictly_positive_kernel_certifies_at_one() {
        let s = MeasureSpace::interval(0.0, 1.0, 30, QuadratureRule::Midpoint).unwrap();
        let k = Kernel::gaussian(s, 0.3).unwrap();
        for st in [Strategy::RowMin, Strategy::ColumnProfile] {
            let PowerSearch::Found(c) = power_doeblin_search(&k, 3, &st).unwrap() else {
                panic!("expected N = 1");
            };
            assert_eq!(c.power, 1);
            let pair = k.space().pair(&c.g, &[1.0; 30]).unwrap();
            assert!((pair - 1.0).abs() < 1e-14);
            assert!(verify_certificate(&k, &c).unwrap().holds);
        }
    }

    #[test]
    fn weakening_and_strengthening() {
        let s = MeasureSpace::interval(0.0, 1.0, 25, QuadratureRule::GaussLegendre).unwrap();
        let k = Kernel::from_fn(s, |x, y| 1.0 + x * y + (x - y).abs()).unwrap();
        for st in [Strategy::RowMin, Strategy::ColumnProfile] {
            let mut c = certified(extract_minorization(&k, &st).unwrap());
            let base = verify_certificate(&k, &c).unwrap();
            assert!(base.holds);
            assert!(base.worst_slack.abs() < 1e-12, "maximal certificate is tight");
            c.alpha *= 0.5;
            assert!(verify_certificate(&k, &c).unwrap().holds);
            c.alpha *= 4.0;
            let r = verify_certificate(&k, &c).unwrap();
            assert!(!r.holds && r.worst_slack < 0.0);
            assert!(matches!(split(&k, &c), Err(Error::InvalidCertificate { .. })));
        }
    }

    #[test]
    fn separable_user_certificate_is_exact() {
        let s = MeasureSpace::interval(0.0, 2.0, 12, QuadratureRule::Trapezoid).unwrap();
        let v: Vec<f64> = s.nodes().iter().map(|x| 1.0 + x).collect();
        let u: Vec<f64> = s.nodes().iter().map(|x| 0.5 + x * x).collect();
        let k = Kernel::separable(s, &v, &u).unwrap();
        let st = Strategy::User {
            u0: GridFunction::new(v),
            g: WeightFunctional::new(u).unwrap(),
        };
        let c = certified(extract_minorization(&k, &st).unwrap());
        assert!((c.alpha - 1.0).abs() < 1e-14);
        let sp = split(&k, &c).unwrap();
        assert!(sp.remainder.entries().max_abs() < 1e-14);
    }

    #[test]
    fn zero_row_fails_positivity() {
        let k = counting(&[vec![1.0, 1.0], vec![0.0, 0.0]]);
        let cert = MinorizationCertificate {
            alpha: 1.0,
            u0: GridFunction::new(vec![1.0, 0.0]),
            g: WeightFunctional::new(vec![1.0, 1.0]).unwrap(),
            power: 1,
        };
        assert!(verify_certificate(&k, &cert).unwrap().holds);
        assert!(!positivity_improving_check(&k, &cert).unwrap());
        assert!(matches!(
            extract_minorization(&k, &Strategy::RowMin).unwrap(),
            Minorization::NotMinorizable(_)
        ));
    }

    #[test]
    fn constant_kernel_indicator_image() {
        let s = MeasureSpace::interval(0.0, 1.0, 8, QuadratureRule::Midpoint).unwrap();
        let k = Kernel::constant(s, 2.0).unwrap();
        let c = certified(extract_minorization(&k, &Strategy::RowMin).unwrap());
        assert!(positivity_improving_check(&k, &c).unwrap());
        let tf = k.apply(&GridFunction::indicator(8, 3)).unwrap();
        assert!(tf.iter().all(|v| (v - 2.0 / 8.0).abs() < 1e-15));
    }

    #[test]
    fn split_reconstructs_action() {
        let s = MeasureSpace::interval(0.0, 1.0, 40, QuadratureRule::Midpoint).unwrap();
        let k = Kernel::from_fn(s.clone(), |x, y| 2.0 + libm::cos(3.0 * x * y)).unwrap();
        let c = certified(extract_minorization(&k, &Strategy::ColumnProfile).unwrap());
        let sp = split(&k, &c).unwrap();
        let f: Vec<f64> = s.nodes().iter().map(|x| libm::sin(7.0 * x)).collect();
        let lhs = k.apply(&f).unwrap();
        let rf = sp.remainder.apply(&f).unwrap();
        let phi = sp.phi(&f).unwrap();
        for i in 0..40 {
            let rhs = sp.alpha() * sp.u0()[i] * phi + rf[i];
            assert!((lhs[i] - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_malformed_certificates() {
        let k = counting(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let mut c = certified(extract_minorization(&k, &Strategy::RowMin).unwrap());
        c.power = 0;
        assert!(verify_certificate(&k, &c).is_err());
        c.power = 1;
        c.alpha = -1.0;
        assert!(verify_certificate(&k, &c).is_err());
        c.alpha = 1.0;
        c.u0 = GridFunction::new(vec![1.0]);
        assert!(matches!(
            verify_certificate(&k, &c),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
